// SPDX-License-Identifier: Apache-2.0
//
// Density-grid lifting: differentiable volume rendering of coordinate maps
// and the score-distillation optimization loop.

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canonlift/camera.hpp"
#include "canonlift/diffusion.hpp"
#include "canonlift/geometry.hpp"

namespace canonlift {

/// Dense R^3 field of non-negative densities over [-e/2, e/2]. Values live at
/// cell centers; sampling is trilinear and clamps to the outermost centers.
class DensityGrid {
 public:
  DensityGrid(int resolution, const Vec3& extents, double fill = 0.0);

  /// Constant density inside a centered ball of radius `radius_fraction * e_max`.
  static DensityGrid centered_blob(int resolution, const Vec3& extents, double density,
                                   double radius_fraction);

  int resolution() const noexcept { return resolution_; }
  const Vec3& extents() const noexcept { return extents_; }
  Box3 domain() const { return {-0.5 * extents_, 0.5 * extents_}; }
  Vec3 cell_size() const { return extents_ / resolution_; }

  std::size_t index(int i, int j, int k) const {
    const auto r = static_cast<std::size_t>(resolution_);
    return (static_cast<std::size_t>(k) * r + static_cast<std::size_t>(j)) * r + static_cast<std::size_t>(i);
  }
  Vec3 cell_center(int i, int j, int k) const;

  double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  double& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  struct Stencil {
    std::array<std::size_t, 8> index;
    std::array<double, 8> weight;
  };
  Stencil stencil(const Vec3& p) const;
  double sample(const Vec3& p) const;

  double max_density() const;
  OccupancyGrid occupancy(double iso) const;  // cell occupied iff density > iso

 private:
  int resolution_;
  Vec3 extents_;
  std::vector<double> data_;
};

inline DensityGrid::Stencil DensityGrid::stencil(const Vec3& p) const {
  std::array<std::size_t, 3> lo{};
  std::array<std::size_t, 3> step{};
  std::array<double, 3> frac{};
  const auto r = static_cast<std::size_t>(resolution_);
  const std::array<std::size_t, 3> stride{1, r, r * r};
  for (int a = 0; a < 3; ++a) {
    // Continuous index with cell centers at integers.
    const double u = std::clamp((p[a] / extents_[a] + 0.5) * resolution_ - 0.5, 0.0,
                                static_cast<double>(resolution_ - 1));
    const int base = std::min(static_cast<int>(u), std::max(resolution_ - 2, 0));
    lo[static_cast<std::size_t>(a)] = static_cast<std::size_t>(base);
    step[static_cast<std::size_t>(a)] = resolution_ > 1 ? stride[static_cast<std::size_t>(a)] : 0;
    frac[static_cast<std::size_t>(a)] = u - base;
  }
  const std::size_t origin = (lo[2] * r + lo[1]) * r + lo[0];
  const double wx[2] = {1.0 - frac[0], frac[0]};
  const double wy[2] = {1.0 - frac[1], frac[1]};
  const double wz[2] = {1.0 - frac[2], frac[2]};
  Stencil s;
  for (std::size_t c = 0; c < 8; ++c) {
    const std::size_t bx = c & 1U;
    const std::size_t by = (c >> 1) & 1U;
    const std::size_t bz = (c >> 2) & 1U;
    s.index[c] = origin + bx * step[0] + by * step[1] + bz * step[2];
    s.weight[c] = wx[bx] * wy[by] * wz[bz];
  }
  return s;
}

struct VolumeRenderOptions {
  double step = 0.0;  // <= 0 selects e_max / (2 R)
  bool jitter = false;
  std::uint64_t jitter_seed = 0;
  Vec3 background = Vec3::Zero();
};

struct VolumeRender {
  Image value;                  // composited normalized coordinates
  std::vector<double> opacity;  // sum of compositing weights per pixel
};

double effective_step(const DensityGrid& grid, const VolumeRenderOptions& opts);

VolumeRender render_ccm_volume(const DensityGrid& grid, const AxisNormalizer& n, const CameraPose& pose,
                               const VolumeRenderOptions& opts = {});

/// Reverse-mode gradient of a scalar loss with respect to every density,
/// given dL/dvalue and (optionally) dL/dopacity per pixel.
std::vector<double> render_ccm_grad(const DensityGrid& grid, const AxisNormalizer& n, const CameraPose& pose,
                                    const Image& upstream_value,
                                    const std::vector<double>* upstream_opacity = nullptr,
                                    const VolumeRenderOptions& opts = {});

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-15;
};

struct LiftConfig {
  int iterations = 2000;
  double learning_rate = 0.05;
  double lambda_ori = 0.0;
  double lambda_align = 1.0;
  int views_per_iteration = 1;
  int resolution = 48;
  VolumeRenderOptions render;
  AnnealConfig anneal = AnnealConfig::volume_pipeline();
  CameraSamplerConfig cameras;
  AdamConfig adam;
  double init_density = 0.1;
  double init_radius_fraction = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LiftLogEntry {
  int iteration = 0;
  double loss = 0.0;  // mean (eps_hat - eps)^2 of the alignment term
  TimeRange range;
  double t = 0.0;
  nlohmann::json pose_record() const;
  std::optional<CameraPose> pose;
};

/// Called after every iteration with the view rendered for that step.
using LiftObserver = std::function<void(int iteration, const DensityGrid& grid, const CameraPose& pose,
                                        const VolumeRender& render)>;

struct LiftResult {
  DensityGrid grid;
  std::vector<LiftLogEntry> log;
};

/// Optimizes a density grid so its coordinate renderings score well under
/// lambda_align * align_prior (+ lambda_ori * ori_prior). Deterministic in
/// cfg.seed. Throws InvalidArgument when no term has positive weight and
/// NonFinite if a gradient or loss stops being finite.
LiftResult lift(const LiftConfig& cfg, const Denoiser& align_prior, const Denoiser* ori_prior,
                const AxisNormalizer& n, const NoiseSchedule& schedule, const LiftObserver& observer = {});

/// Relative iso level used for occupancy and extraction: fraction * max density.
double relative_iso(const DensityGrid& grid, double fraction = 0.5);

/// Marching cubes over the cell-center lattice, padded with zero density so
/// the surface is closed at the domain boundary. Empty mesh if no crossing.
Mesh extract_mesh(const DensityGrid& grid, double iso);

// "DGR1" | u32 R | 3 x f32 extents | R^3 f32 densities (x fastest), little-endian.
void write_grid(const DensityGrid& grid, const std::filesystem::path& path);
DensityGrid read_grid(const std::filesystem::path& path);

nlohmann::json lift_config_to_json(const LiftConfig& cfg);

}  // namespace canonlift
