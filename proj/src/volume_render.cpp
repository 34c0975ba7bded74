// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "canonlift/error.hpp"
#include "canonlift/lifting.hpp"
#include "canonlift/parallel.hpp"

namespace canonlift {

namespace {

constexpr int kTileRows = 8;

struct Segment {
  double t0 = 0.0;
  double t1 = 0.0;
  bool hit = false;
};

Segment clip_to_box(const Ray& ray, const Box3& box) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (ray.origin[a] < box.min[a] || ray.origin[a] > box.max[a]) return {};
      continue;
    }
    double ta = (box.min[a] - ray.origin[a]) / d;
    double tb = (box.max[a] - ray.origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return {t0, t1, t0 < t1};
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct RaySample {
  DensityGrid::Stencil stencil;
  double sigma;
  Vec3 coord;
};

/// Samples along one pixel ray, in order.
void march(const DensityGrid& grid, const AxisNormalizer& n, const CameraPose& pose, int x, int y, double step,
           const VolumeRenderOptions& opts, std::vector<RaySample>& out) {
  out.clear();
  const Ray ray = ray_for_pixel(pose, Vec2(x + 0.5, y + 0.5));
  const Segment seg = clip_to_box(ray, grid.domain());
  if (!seg.hit) return;
  double offset = 0.5;
  if (opts.jitter) {
    const auto key = mix64(opts.jitter_seed ^ mix64(static_cast<std::uint64_t>(y) * 1000003ULL +
                                                    static_cast<std::uint64_t>(x)));
    offset = static_cast<double>(key >> 11) * 0x1.0p-53;
  }
  for (double t = seg.t0 + offset * step; t < seg.t1; t += step) {
    const Vec3 p = ray.origin + t * ray.direction;
    RaySample s{grid.stencil(p), 0.0, n.normalize(p)};
    for (std::size_t c = 0; c < 8; ++c) s.sigma += s.stencil.weight[c] * grid.data()[s.stencil.index[c]];
    out.push_back(s);
  }
}

void check_domain(const DensityGrid& grid, const AxisNormalizer& n) {
  if (!grid.extents().isApprox(n.extents(), 1e-6)) {
    throw Error(ErrorKind::ExtentMismatch, "density grid extents differ from the normalizer extents");
  }
}

}  // namespace

double effective_step(const DensityGrid& grid, const VolumeRenderOptions& opts) {
  return opts.step > 0.0 ? opts.step : grid.extents().maxCoeff() / (2.0 * grid.resolution());
}

VolumeRender render_ccm_volume(const DensityGrid& grid, const AxisNormalizer& n, const CameraPose& pose,
                               const VolumeRenderOptions& opts) {
  check_domain(grid, n);
  const int w = pose.width();
  const int h = pose.height();
  const double step = effective_step(grid, opts);
  VolumeRender out{Image(w, h), std::vector<double>(static_cast<std::size_t>(w) * static_cast<std::size_t>(h))};

  const auto tiles = static_cast<std::size_t>((h + kTileRows - 1) / kTileRows);
  parallel_for(tiles, [&](std::size_t tile) {
    std::vector<RaySample> samples;
    const int row0 = static_cast<int>(tile) * kTileRows;
    const int row1 = std::min(h, row0 + kTileRows);
    for (int y = row0; y < row1; ++y) {
      for (int x = 0; x < w; ++x) {
        march(grid, n, pose, x, y, step, opts, samples);
        double transmittance = 1.0;
        Vec3 value = Vec3::Zero();
        for (const auto& s : samples) {
          const double alpha = -std::expm1(-s.sigma * step);
          value += transmittance * alpha * s.coord;
          transmittance *= 1.0 - alpha;
        }
        value += transmittance * opts.background;
        const auto p = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
        for (int c = 0; c < 3; ++c) out.value[3 * p + static_cast<std::size_t>(c)] = value[c];
        out.opacity[p] = 1.0 - transmittance;
      }
    }
  });
  return out;
}

std::vector<double> render_ccm_grad(const DensityGrid& grid, const AxisNormalizer& n, const CameraPose& pose,
                                    const Image& upstream_value, const std::vector<double>* upstream_opacity,
                                    const VolumeRenderOptions& opts) {
  check_domain(grid, n);
  const int w = pose.width();
  const int h = pose.height();
  const auto pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (upstream_value.width() != w || upstream_value.height() != h ||
      (upstream_opacity != nullptr && upstream_opacity->size() != pixels)) {
    throw Error(ErrorKind::ShapeMismatch, fmt::format("upstream gradient does not match a {}x{} render", w, h));
  }
  const double step = effective_step(grid, opts);
  const auto tiles = static_cast<std::size_t>((h + kTileRows - 1) / kTileRows);

  // One accumulator per fixed row tile, summed in tile order, so the result
  // does not depend on the worker count.
  std::vector<std::vector<double>> partial(tiles);
  parallel_for(tiles, [&](std::size_t tile) {
    auto& acc = partial[tile];
    acc.assign(grid.data().size(), 0.0);
    std::vector<RaySample> samples;
    std::vector<double> trans;
    const int row0 = static_cast<int>(tile) * kTileRows;
    const int row1 = std::min(h, row0 + kTileRows);
    for (int y = row0; y < row1; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto p = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
        const Vec3 g(upstream_value[3 * p], upstream_value[3 * p + 1], upstream_value[3 * p + 2]);
        const double g_opacity = upstream_opacity ? (*upstream_opacity)[p] : 0.0;
        if (g.isZero(0.0) && g_opacity == 0.0) continue;
        march(grid, n, pose, x, y, step, opts, samples);
        if (samples.empty()) continue;

        // Forward pass: transmittance after each sample and the final value.
        trans.resize(samples.size());
        double t_run = 1.0;
        Vec3 value = Vec3::Zero();
        for (std::size_t k = 0; k < samples.size(); ++k) {
          const double alpha = -std::expm1(-samples[k].sigma * step);
          value += t_run * alpha * samples[k].coord;
          t_run *= 1.0 - alpha;
          trans[k] = t_run;
        }
        const double t_final = t_run;
        value += t_final * opts.background;

        // dV/dsigma_k = step * (T_{k+1} c_k - (V - P_k)), P_k = sum_{i<=k} w_i c_i
        // dO/dsigma_k = step * T_final
        Vec3 prefix = Vec3::Zero();
        double t_prev = 1.0;
        for (std::size_t k = 0; k < samples.size(); ++k) {
          const double weight = t_prev - trans[k];
          prefix += weight * samples[k].coord;
          const Vec3 d_value = trans[k] * samples[k].coord - (value - prefix);
          const double d_sigma = step * (g.dot(d_value) + g_opacity * t_final);
          const auto& st = samples[k].stencil;
          for (std::size_t c = 0; c < 8; ++c) acc[st.index[c]] += d_sigma * st.weight[c];
          t_prev = trans[k];
        }
      }
    }
  });

  std::vector<double> grad(grid.data().size(), 0.0);
  for (const auto& acc : partial) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += acc[i];
  }
  return grad;
}

}  // namespace canonlift
