// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonlift/error.hpp"
#include "canonlift/parallel.hpp"
#include "canonlift/pipeline.hpp"

namespace canonlift {

CoordMap coord_map_from_render(const VolumeRender& render, const CameraPose& pose, const Vec3& extents,
                               double opacity_threshold) {
  CoordMap map(pose, extents);
  if (render.value.width() != pose.width() || render.value.height() != pose.height() ||
      render.opacity.size() != map.pixel_count()) {
    throw Error(ErrorKind::ShapeMismatch, "render does not match the pose resolution");
  }
  for (int y = 0; y < pose.height(); ++y) {
    for (int x = 0; x < pose.width(); ++x) {
      const std::size_t p = map.pixel(x, y);
      const double a = render.opacity[p];
      if (!(a >= opacity_threshold) || a <= 0.0) continue;
      const Vec3 v(render.value[3 * p], render.value[3 * p + 1], render.value[3 * p + 2]);
      map.set(x, y, (v / a).cwiseMax(0.0).cwiseMin(1.0));
    }
  }
  return map;
}

DensityGrid density_from_occupancy(const OccupancyGrid& occ, double density) {
  DensityGrid grid(occ.resolution(), occ.domain().extents(), 0.0);
  const int r = occ.resolution();
  for (int k = 0; k < r; ++k) {
    for (int j = 0; j < r; ++j) {
      for (int i = 0; i < r; ++i) {
        if (occ.at(i, j, k)) grid.at(i, j, k) = density;
      }
    }
  }
  return grid;
}

std::vector<Vec3> foreground_points(const CoordMap& map) {
  const AxisNormalizer n(map.extents());
  std::vector<Vec3> pts;
  pts.reserve(map.foreground_count());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.foreground(x, y)) pts.push_back(n.denormalize(map.value(x, y)));
    }
  }
  return pts;
}

namespace {

double mean_nearest(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  std::vector<double> best(from.size());
  parallel_for(from.size(), [&](std::size_t i) {
    double d2 = std::numeric_limits<double>::infinity();
    for (const auto& q : to) d2 = std::min(d2, (from[i] - q).squaredNorm());
    best[i] = std::sqrt(d2);
  });
  double sum = 0.0;
  for (double d : best) sum += d;
  return sum / static_cast<double>(from.size());
}

std::vector<CameraPose> probe_poses(const EvalOptions& opts) {
  if (opts.probe_views < 1) throw Error(ErrorKind::InvalidArgument, "need at least one probe view");
  CameraSampler sampler(opts.cameras, opts.cameras.seed);
  std::vector<CameraPose> poses;
  for (int v = 0; v < opts.probe_views; ++v) poses.push_back(sampler.sample());
  return poses;
}

void check_extents(const Vec3& result, const CanonicalMesh& reference) {
  if (!result.isApprox(reference.normalizer.extents(), 1e-6)) {
    throw Error(ErrorKind::ExtentMismatch,
                fmt::format("result extents ({:.6g}, {:.6g}, {:.6g}) differ from reference ({:.6g}, {:.6g}, {:.6g})",
                            result.x(), result.y(), result.z(), reference.normalizer.extents().x(),
                            reference.normalizer.extents().y(), reference.normalizer.extents().z()));
  }
}

template <typename RenderResult>
EvalReport finish_report(const OccupancyGrid& occ, const CanonicalMesh& reference, const EvalOptions& opts,
                         RenderResult&& render_result) {
  const OccupancyGrid ref = voxelize(reference.mesh, occ.domain(), occ.resolution());
  EvalReport r;
  r.iou = iou(occ, ref);
  r.mirrored_iou = iou(occ.mirrored_x(), ref);
  r.min_iou = opts.min_iou;
  r.max_chamfer = opts.max_chamfer;
  r.coverage_min.fill(std::numeric_limits<double>::infinity());
  r.coverage_max.fill(-std::numeric_limits<double>::infinity());

  const double empty_penalty = reference.normalizer.extents().norm();
  double chamfer_sum = 0.0;
  for (const auto& pose : probe_poses(opts)) {
    const CoordMap mine = render_result(pose);
    const CoordMap theirs = rasterize(reference.mesh, reference.normalizer, pose).ccm;
    for (int y = 0; y < mine.height(); ++y) {
      for (int x = 0; x < mine.width(); ++x) {
        if (!mine.foreground(x, y)) continue;
        const Vec3 v = mine.value(x, y);
        for (int a = 0; a < 3; ++a) {
          r.coverage_min[static_cast<std::size_t>(a)] = std::min(r.coverage_min[static_cast<std::size_t>(a)], v[a]);
          r.coverage_max[static_cast<std::size_t>(a)] = std::max(r.coverage_max[static_cast<std::size_t>(a)], v[a]);
        }
      }
    }
    chamfer_sum += chamfer_distance(foreground_points(mine), foreground_points(theirs), empty_penalty);
    ++r.probe_views;
  }
  for (int a = 0; a < 3; ++a) {
    if (r.coverage_min[static_cast<std::size_t>(a)] > r.coverage_max[static_cast<std::size_t>(a)]) {
      r.coverage_min[static_cast<std::size_t>(a)] = 0.0;
      r.coverage_max[static_cast<std::size_t>(a)] = 0.0;
    }
  }
  r.chamfer = chamfer_sum / r.probe_views;
  r.pass = r.iou >= opts.min_iou && r.chamfer < opts.max_chamfer;
  return r;
}

}  // namespace

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double empty_penalty) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return empty_penalty;
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

EvalReport eval_consistency(const DensityGrid& result, const CanonicalMesh& reference, const EvalOptions& opts) {
  check_extents(result.extents(), reference);
  const double max_density = result.max_density();
  // An all-zero grid has no surface; any positive iso gives an empty occupancy.
  const double iso = max_density > 0.0 ? relative_iso(result, opts.iso_fraction) : 1.0;
  const OccupancyGrid occ = result.occupancy(iso);
  return finish_report(occ, reference, opts, [&](const CameraPose& pose) {
    return coord_map_from_render(render_ccm_volume(result, reference.normalizer, pose), pose,
                                 reference.normalizer.extents(), opts.opacity_threshold);
  });
}

EvalReport eval_consistency(const Mesh& result, int resolution, const CanonicalMesh& reference,
                            const EvalOptions& opts) {
  const Box3 domain{-0.5 * reference.normalizer.extents(), 0.5 * reference.normalizer.extents()};
  const OccupancyGrid occ = result.empty() ? OccupancyGrid(resolution, domain) : voxelize(result, domain, resolution);
  return finish_report(occ, reference, opts, [&](const CameraPose& pose) {
    if (result.empty()) return CoordMap(pose, reference.normalizer.extents());
    return rasterize(result, reference.normalizer, pose).ccm;
  });
}

nlohmann::json eval_report_to_json(const EvalReport& r) {
  auto axes = [](const std::array<double, 3>& v) { return nlohmann::json{v[0], v[1], v[2]}; };
  return {{"iou", r.iou},
          {"mirrored_iou", r.mirrored_iou},
          {"chamfer", r.chamfer},
          {"coverage", {{"min", axes(r.coverage_min)}, {"max", axes(r.coverage_max)}}},
          {"probe_views", r.probe_views},
          {"thresholds", {{"min_iou", r.min_iou}, {"max_chamfer", r.max_chamfer}}},
          {"pass", r.pass}};
}

}  // namespace canonlift
