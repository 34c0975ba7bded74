// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "canonlift/error.hpp"
#include "canonlift/geometry.hpp"

namespace canonlift {

OccupancyGrid::OccupancyGrid(int resolution, const Box3& domain)
    : resolution_(resolution), domain_(domain) {
  if (resolution < 1) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("grid resolution {} < 1", resolution));
  }
  const auto r = static_cast<std::size_t>(resolution);
  cells_.assign(r * r * r, 0);
}

std::size_t OccupancyGrid::index(int i, int j, int k) const {
  const auto r = static_cast<std::size_t>(resolution_);
  return (static_cast<std::size_t>(k) * r + static_cast<std::size_t>(j)) * r +
         static_cast<std::size_t>(i);
}

Vec3 OccupancyGrid::cell_center(int i, int j, int k) const {
  const Vec3 idx(i + 0.5, j + 0.5, k + 0.5);
  return domain_.min + (idx.array() * domain_.extents().array() / resolution_).matrix();
}

std::size_t OccupancyGrid::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

double OccupancyGrid::occupied_fraction() const {
  return static_cast<double>(count()) / static_cast<double>(cells_.size());
}

OccupancyGrid OccupancyGrid::mirrored_x() const {
  OccupancyGrid out(resolution_, domain_);
  for (int k = 0; k < resolution_; ++k)
    for (int j = 0; j < resolution_; ++j)
      for (int i = 0; i < resolution_; ++i) out.set(resolution_ - 1 - i, j, k, at(i, j, k));
  return out;
}

double iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (a.resolution() != b.resolution() ||
      !a.domain().min.isApprox(b.domain().min, 1e-6) ||
      !a.domain().max.isApprox(b.domain().max, 1e-6)) {
    throw Error(ErrorKind::ExtentMismatch, "occupancy grids cover different domains");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  const int r = a.resolution();
  for (int k = 0; k < r; ++k)
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i) {
        const bool x = a.at(i, j, k);
        const bool y = b.at(i, j, k);
        inter += (x && y) ? 1 : 0;
        uni += (x || y) ? 1 : 0;
      }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

constexpr double kGrazeTol = 1e-9;

double cross2(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

double segment_distance2(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double s = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  const double ex = ax + s * dx - px;
  const double ey = ay + s * dy - py;
  return ex * ex + ey * ey;
}

enum class ColumnResult { Ok, Grazing };

/// Collects z of every crossing of the vertical line through (px, py).
ColumnResult column_crossings(const Mesh& mesh, double px, double py, double scale,
                              std::vector<double>& zs) {
  zs.clear();
  const auto& v = mesh.vertices();
  const double degenerate_area = 1e-14 * scale * scale;
  const double graze_dist2 = (kGrazeTol * scale) * (kGrazeTol * scale);
  for (const auto& t : mesh.triangles()) {
    const Vec3& a = v[t[0]];
    const Vec3& b = v[t[1]];
    const Vec3& c = v[t[2]];
    const double lo_x = std::min({a.x(), b.x(), c.x()});
    const double hi_x = std::max({a.x(), b.x(), c.x()});
    const double lo_y = std::min({a.y(), b.y(), c.y()});
    const double hi_y = std::max({a.y(), b.y(), c.y()});
    const double pad = kGrazeTol * scale;
    if (px < lo_x - pad || px > hi_x + pad || py < lo_y - pad || py > hi_y + pad) continue;

    const double area2 = cross2(b.x() - a.x(), b.y() - a.y(), c.x() - a.x(), c.y() - a.y());
    if (std::abs(area2) <= degenerate_area) {
      // Triangle seen edge-on: only a problem if the line touches it.
      if (segment_distance2(px, py, a.x(), a.y(), b.x(), b.y()) <= graze_dist2 ||
          segment_distance2(px, py, b.x(), b.y(), c.x(), c.y()) <= graze_dist2 ||
          segment_distance2(px, py, c.x(), c.y(), a.x(), a.y()) <= graze_dist2) {
        return ColumnResult::Grazing;
      }
      continue;
    }
    const double w0 = cross2(b.x() - px, b.y() - py, c.x() - px, c.y() - py) / area2;
    const double w1 = cross2(c.x() - px, c.y() - py, a.x() - px, a.y() - py) / area2;
    const double w2 = 1.0 - w0 - w1;
    const double lo = std::min({w0, w1, w2});
    if (lo > kGrazeTol) {
      zs.push_back(w0 * a.z() + w1 * b.z() + w2 * c.z());
    } else if (lo > -kGrazeTol) {
      return ColumnResult::Grazing;
    }
  }
  return ColumnResult::Ok;
}

}  // namespace

OccupancyGrid voxelize(const Mesh& mesh, int resolution) {
  return voxelize(mesh, tight_bbox(mesh), resolution);
}

OccupancyGrid voxelize(const Mesh& mesh, const Box3& domain, int resolution) {
  if (mesh.empty()) throw Error(ErrorKind::EmptyMesh, "cannot voxelize an empty mesh");
  OccupancyGrid grid(resolution, domain);
  const Vec3 cell = domain.extents() / resolution;
  const double scale = std::max(domain.extents().maxCoeff(), 1e-12);
  std::vector<double> zs;

  for (int j = 0; j < resolution; ++j) {
    for (int i = 0; i < resolution; ++i) {
      const Vec3 c = grid.cell_center(i, j, 0);
      bool resolved = false;
      for (int attempt = 0; attempt < 16 && !resolved; ++attempt) {
        // Deterministic low-discrepancy jitter, a small fraction of a cell.
        const double jx = attempt == 0 ? 0.0 : (std::fmod(attempt * 0.6180339887, 1.0) - 0.5) * 1e-3;
        const double jy = attempt == 0 ? 0.0 : (std::fmod(attempt * 0.7548776662, 1.0) - 0.5) * 1e-3;
        resolved = column_crossings(mesh, c.x() + jx * cell.x(), c.y() + jy * cell.y(), scale, zs) ==
                   ColumnResult::Ok;
      }
      std::sort(zs.begin(), zs.end());
      if (zs.size() % 2 != 0 || !resolved) ++grid.parity_warnings;
      for (int k = 0; k < resolution; ++k) {
        const double z = grid.cell_center(i, j, k).z();
        const auto below = std::lower_bound(zs.begin(), zs.end(), z) - zs.begin();
        grid.set(i, j, k, (below % 2) == 1);
      }
    }
  }
  if (grid.parity_warnings > 0) {
    fmt::print(stderr, "warning: voxelize: {} ray columns had odd crossing counts (open mesh?)\n",
               grid.parity_warnings);
  }
  return grid;
}

}  // namespace canonlift
