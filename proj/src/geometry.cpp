// SPDX-License-Identifier: Apache-2.0

#include "canonlift/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "canonlift/error.hpp"

namespace canonlift {

namespace {

constexpr double kDegenerateExtent = 1e-9;

}  // namespace

Mesh::Mesh(std::vector<Vec3> vertices, std::vector<TriIndex> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const auto count = vertices_.size();
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    for (auto idx : triangles_[t]) {
      if (idx >= count) {
        throw Error(ErrorKind::IndexOutOfRange,
                    fmt::format("triangle {} references vertex {} but mesh has {} vertices", t,
                                idx, count));
      }
    }
  }
}

double Mesh::triangle_area(std::size_t tri) const {
  const auto& t = triangles_.at(tri);
  const Vec3& a = vertices_[t[0]];
  return 0.5 * (vertices_[t[1]] - a).cross(vertices_[t[2]] - a).norm();
}

bool Mesh::has_nonzero_area() const {
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    if (triangle_area(t) > 0.0) return true;
  }
  return false;
}

Mesh Mesh::merge(const Mesh& a, const Mesh& b) {
  std::vector<Vec3> verts = a.vertices_;
  verts.insert(verts.end(), b.vertices_.begin(), b.vertices_.end());
  std::vector<TriIndex> tris = a.triangles_;
  const auto offset = static_cast<std::uint32_t>(a.vertices_.size());
  for (const auto& t : b.triangles_) {
    tris.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
  }
  return Mesh(std::move(verts), std::move(tris));
}

bool Box3::contains(const Vec3& p, double tol) const {
  return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
}

AxisNormalizer::AxisNormalizer(const Vec3& extents) : extents_(extents) {
  if (!extents.allFinite() || (extents.array() <= 0.0).any() ||
      (extents.array() > 1.0 + 1e-6).any() || std::abs(extents.maxCoeff() - 1.0) > 1e-6) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("normalizer extents ({}, {}, {}) must lie in (0, 1] with max 1",
                            extents.x(), extents.y(), extents.z()));
  }
}

Vec3 AxisNormalizer::normalize(const Vec3& p) const {
  return (p.array() / extents_.array() + 0.5).matrix();
}

Vec3 AxisNormalizer::denormalize(const Vec3& q) const {
  return ((q.array() - 0.5) * extents_.array()).matrix();
}

Box3 tight_bbox(const Mesh& mesh) {
  if (mesh.vertices().empty() || mesh.empty()) {
    throw Error(ErrorKind::EmptyMesh, "bounding box of an empty mesh");
  }
  Box3 box;
  box.min = Vec3::Constant(std::numeric_limits<double>::infinity());
  box.max = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& v : mesh.vertices()) {
    box.min = box.min.cwiseMin(v);
    box.max = box.max.cwiseMax(v);
  }
  return box;
}

CanonicalMesh canonicalize(const Mesh& mesh) {
  const Box3 box = tight_bbox(mesh);
  const Vec3 ext = box.extents();
  Eigen::Index major = 0;
  const double max_extent = ext.maxCoeff(&major);
  if (!(max_extent > kDegenerateExtent)) {
    throw Error(ErrorKind::DegenerateGeometry,
                fmt::format("bounding box max extent {} is degenerate", max_extent));
  }
  const double scale = 1.0 / max_extent;
  const Vec3 center = box.center();

  std::vector<Vec3> verts;
  verts.reserve(mesh.vertices().size());
  for (const auto& v : mesh.vertices()) verts.push_back((v - center) * scale);

  // Extent ratios are taken from the source bbox so the major axis is exactly
  // 1 and the others are not perturbed by a second rounding.
  Vec3 e = ext / max_extent;
  e[major] = 1.0;
  for (int k = 0; k < 3; ++k) e[k] = std::max(e[k], kDegenerateExtent);

  return CanonicalMesh{Mesh(std::move(verts), mesh.triangles()), AxisNormalizer(e), scale, center};
}

}  // namespace canonlift
