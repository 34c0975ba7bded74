// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "canonlift/error.hpp"
#include "canonlift/geometry.hpp"

namespace canonlift {

namespace {

using std::numbers::pi;

void add_quad(std::vector<TriIndex>& tris, std::uint32_t a, std::uint32_t b, std::uint32_t c,
              std::uint32_t d) {
  tris.push_back({a, b, c});
  tris.push_back({a, c, d});
}

Mesh make_sphere(const SphereSpec& s) {
  if (!(s.radius > 0.0) || s.segments < 3 || s.rings < 2) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("sphere needs radius > 0, segments >= 3, rings >= 2 (got {}, {}, {})",
                            s.radius, s.segments, s.rings));
  }
  std::vector<Vec3> verts;
  std::vector<TriIndex> tris;
  const auto seg = static_cast<std::uint32_t>(s.segments);
  verts.push_back(s.center + Vec3(0.0, s.radius, 0.0));
  for (int i = 1; i < s.rings; ++i) {
    const double theta = pi * i / s.rings;
    for (int j = 0; j < s.segments; ++j) {
      const double phi = 2.0 * pi * j / s.segments;
      verts.push_back(s.center + s.radius * Vec3(std::sin(theta) * std::cos(phi), std::cos(theta),
                                                 std::sin(theta) * std::sin(phi)));
    }
  }
  const auto bottom = static_cast<std::uint32_t>(verts.size());
  verts.push_back(s.center - Vec3(0.0, s.radius, 0.0));

  auto ring = [seg](int i, std::uint32_t j) { return 1 + static_cast<std::uint32_t>(i - 1) * seg + j % seg; };
  for (std::uint32_t j = 0; j < seg; ++j) tris.push_back({0, ring(1, j + 1), ring(1, j)});
  for (int i = 1; i + 1 < s.rings; ++i) {
    for (std::uint32_t j = 0; j < seg; ++j) {
      const auto a = ring(i, j), b = ring(i, j + 1), c = ring(i + 1, j), d = ring(i + 1, j + 1);
      tris.push_back({a, b, d});
      tris.push_back({a, d, c});
    }
  }
  for (std::uint32_t j = 0; j < seg; ++j) tris.push_back({bottom, ring(s.rings - 1, j), ring(s.rings - 1, j + 1)});
  return Mesh(std::move(verts), std::move(tris));
}

Mesh make_box(const BoxSpec& b) {
  if ((b.extents.array() <= 0.0).any()) {
    throw Error(ErrorKind::InvalidArgument, "box extents must be positive");
  }
  std::vector<Vec3> verts;
  for (int c = 0; c < 8; ++c) {
    const Vec3 sign((c & 1) ? 0.5 : -0.5, (c & 2) ? 0.5 : -0.5, (c & 4) ? 0.5 : -0.5);
    verts.push_back(b.center + sign.cwiseProduct(b.extents));
  }
  // Corner bits: 1 = +x, 2 = +y, 4 = +z. Quads wound counter-clockwise seen
  // from outside.
  std::vector<TriIndex> tris;
  add_quad(tris, 0, 4, 6, 2);
  add_quad(tris, 1, 3, 7, 5);
  add_quad(tris, 0, 1, 5, 4);
  add_quad(tris, 2, 6, 7, 3);
  add_quad(tris, 0, 2, 3, 1);
  add_quad(tris, 4, 5, 7, 6);
  return Mesh(std::move(verts), std::move(tris));
}

Mesh make_torus(const TorusSpec& t) {
  if (!(t.minor_radius > 0.0) || !(t.major_radius > t.minor_radius) || t.major_segments < 3 ||
      t.minor_segments < 3) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("torus needs R > r > 0 and >= 3 segments (got R={}, r={})",
                            t.major_radius, t.minor_radius));
  }
  std::vector<Vec3> verts;
  const auto nu = static_cast<std::uint32_t>(t.major_segments);
  const auto nv = static_cast<std::uint32_t>(t.minor_segments);
  for (std::uint32_t i = 0; i < nu; ++i) {
    const double u = 2.0 * pi * i / nu;
    for (std::uint32_t j = 0; j < nv; ++j) {
      const double v = 2.0 * pi * j / nv;
      const double ring = t.major_radius + t.minor_radius * std::cos(v);
      verts.emplace_back(ring * std::cos(u), ring * std::sin(u), t.minor_radius * std::sin(v));
    }
  }
  std::vector<TriIndex> tris;
  auto at = [nu, nv](std::uint32_t i, std::uint32_t j) { return (i % nu) * nv + j % nv; };
  for (std::uint32_t i = 0; i < nu; ++i) {
    for (std::uint32_t j = 0; j < nv; ++j) {
      add_quad(tris, at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
    }
  }
  return Mesh(std::move(verts), std::move(tris));
}

Mesh make_composite(const CompositeSpec& c) {
  const double gap = (c.sphere.center.x() - c.sphere.radius) -
                     (c.box.center.x() + 0.5 * c.box.extents.x());
  if (!(gap > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "composite sphere must not overlap the box along x");
  }
  return Mesh::merge(make_box(c.box), make_sphere(c.sphere));
}

}  // namespace

Mesh make_procedural(const ShapeSpec& spec) {
  return std::visit(
      [](const auto& s) -> Mesh {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SphereSpec>) return make_sphere(s);
        else if constexpr (std::is_same_v<T, BoxSpec>) return make_box(s);
        else if constexpr (std::is_same_v<T, TorusSpec>) return make_torus(s);
        else return make_composite(s);
      },
      spec);
}

}  // namespace canonlift
