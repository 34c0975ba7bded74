// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonlift/error.hpp"
#include "canonlift/lifting.hpp"

namespace canonlift {

void LiftConfig::validate() const {
  if (iterations < 0 || views_per_iteration < 1 || resolution < 2 || !(learning_rate > 0.0) ||
      !(lambda_ori >= 0.0) || !(lambda_align >= 0.0) || render.step < 0.0 || !(init_density >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "invalid lift configuration");
  }
  anneal.validate();
  cameras.validate();
}

nlohmann::json LiftLogEntry::pose_record() const {
  return pose ? pose_to_json(*pose) : nlohmann::json(nullptr);
}

namespace {

class Adam {
 public:
  Adam(std::size_t n, double lr, const AdamConfig& cfg) : lr_(lr), cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      if (m_[i] == 0.0) continue;
      const double update = lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
      params[i] = std::max(0.0, params[i] - update);
    }
  }

 private:
  double lr_;
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

LiftResult lift(const LiftConfig& cfg, const Denoiser& align_prior, const Denoiser* ori_prior,
                const AxisNormalizer& n, const NoiseSchedule& schedule, const LiftObserver& observer) {
  cfg.validate();
  const double lambda_ori = ori_prior != nullptr ? cfg.lambda_ori : 0.0;
  if (!(cfg.lambda_align > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "lift needs lambda_align > 0");
  }

  LiftResult result{DensityGrid::centered_blob(cfg.resolution, n.extents(), cfg.init_density,
                                               cfg.init_radius_fraction),
                    {}};
  DensityGrid& grid = result.grid;
  Adam adam(grid.data().size(), cfg.learning_rate, cfg.adam);
  std::mt19937_64 rng(cfg.seed);
  std::vector<double> grad(grid.data().size());

  for (int it = 0; it < cfg.iterations; ++it) {
    const double progress = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 0.0;
    const TimeRange range = anneal_range(progress, cfg.anneal);
    std::fill(grad.begin(), grad.end(), 0.0);
    LiftLogEntry entry;
    entry.iteration = it;
    entry.range = range;

    for (int view = 0; view < cfg.views_per_iteration; ++view) {
      const CameraPose pose = sample_camera(rng, cfg.cameras);
      const double t_cont = sample_timestep(rng, range);
      const int t = schedule.index_for(t_cont);

      VolumeRenderOptions render_opts = cfg.render;
      render_opts.jitter_seed ^= static_cast<std::uint64_t>(it) * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(view);
      const VolumeRender rendered = render_ccm_volume(grid, n, pose, render_opts);

      SdsResult align = sds_sample(align_prior, rendered.value, pose, t, rng, schedule);
      Image upstream = align.grad;
      for (double& v : upstream.data()) v *= cfg.lambda_align;
      if (lambda_ori > 0.0) {
        const SdsResult ori = sds_sample(*ori_prior, rendered.value, pose, t, rng, schedule);
        for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] += lambda_ori * ori.grad[i];
      }

      const auto g = render_ccm_grad(grid, n, pose, upstream, nullptr, render_opts);
      if (!std::isfinite(align.eps_mse) || !all_finite(g)) {
        throw Error(ErrorKind::NonFinite,
                    fmt::format("non-finite SDS gradient at iteration {} (t={:.4f}, distance={:.4f}, "
                                "elevation={:.2f}, azimuth={:.2f})",
                                it, t_cont, pose.distance(), pose.elevation_deg(), pose.azimuth_deg()));
      }
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];

      entry.loss += align.eps_mse / cfg.views_per_iteration;
      entry.t = t_cont;
      entry.pose = pose;
      if (observer) observer(it, grid, pose, rendered);
    }
    adam.step(grid.data(), grad);
    result.log.push_back(std::move(entry));
  }
  return result;
}

nlohmann::json lift_config_to_json(const LiftConfig& cfg) {
  return {{"iterations", cfg.iterations},
          {"learning_rate", cfg.learning_rate},
          {"lambda_ori", cfg.lambda_ori},
          {"lambda_align", cfg.lambda_align},
          {"views_per_iteration", cfg.views_per_iteration},
          {"resolution", cfg.resolution},
          {"step", cfg.render.step},
          {"jitter", cfg.render.jitter},
          {"anneal",
           {{"kind", cfg.anneal.kind == AnnealConfig::Kind::LinearMax ? "linear_max" : "interpolated_uniform"},
            {"start", {cfg.anneal.start.lo, cfg.anneal.start.hi}},
            {"end", {cfg.anneal.end.lo, cfg.anneal.end.hi}}}},
          {"cameras", sampler_config_to_json(cfg.cameras)},
          {"init_density", cfg.init_density},
          {"init_radius_fraction", cfg.init_radius_fraction},
          {"seed", cfg.seed}};
}

}  // namespace canonlift
