// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <optional>

#include "canonlift/ccm_render.hpp"
#include "canonlift/parallel.hpp"

namespace canonlift {

namespace {

/// Double-sided Moller-Trumbore; returns the ray parameter of the hit.
std::optional<double> intersect(const Ray& ray, const Vec3& a, const Vec3& b, const Vec3& c) {
  constexpr double kEps = 1e-12;
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < kEps) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv;
  if (!(t > kEps)) return std::nullopt;
  return t;
}

}  // namespace

RenderResult raycast(const Mesh& mesh, const AxisNormalizer& n, const CameraPose& pose) {
  RenderResult out{CoordMap(pose, n.extents()), DepthMap(pose)};
  const Vec3 forward = pose.view_direction();
  const auto& verts = mesh.vertices();
  const int w = pose.width();

  parallel_for(static_cast<std::size_t>(pose.height()), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const Ray ray = ray_for_pixel(pose, Vec2(x + 0.5, y + 0.5));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& t : mesh.triangles()) {
        if (auto hit = intersect(ray, verts[t[0]], verts[t[1]], verts[t[2]]); hit && *hit < best) {
          best = *hit;
        }
      }
      if (!std::isfinite(best)) continue;
      const Vec3 p = ray.origin + best * ray.direction;
      out.ccm.set(x, y, n.normalize(p));
      out.depth.set(x, y, best * ray.direction.dot(forward));
    }
  });
  return out;
}

}  // namespace canonlift
