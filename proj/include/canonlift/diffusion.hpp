// SPDX-License-Identifier: Apache-2.0
//
// Forward diffusion, epsilon-prediction loss, score distillation and the
// closed-form oracle denoisers used in place of a trained network.

#pragma once

#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canonlift/camera.hpp"
#include "canonlift/ccm_render.hpp"

namespace canonlift {

/// Three-channel image in diffusion space (a CCM without its mask).
class Image {
 public:
  Image() = default;
  Image(int width, int height, double fill = 0.0);

  static Image from_ccm(const CoordMap& map);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double squared_norm() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

enum class SdsWeighting { OneMinusAlphaBar, Unit };

class NoiseSchedule {
 public:
  /// Linear beta ramp. Requires steps >= 2 and 0 < beta_start <= beta_end < 1.
  static NoiseSchedule linear(int steps, double beta_start, double beta_end,
                              SdsWeighting weighting = SdsWeighting::OneMinusAlphaBar);

  int steps() const noexcept { return static_cast<int>(beta_.size()); }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
  double weight(int t) const;
  SdsWeighting weighting() const noexcept { return weighting_; }

  /// Continuous time in [0, 1] to index round(t * (T - 1)).
  int index_for(double t) const;

 private:
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  SdsWeighting weighting_ = SdsWeighting::OneMinusAlphaBar;
};

/// Camera-conditioned epsilon predictor.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Image predict_eps(const CameraPose& pose, const Image& noisy, int t) const = 0;

  /// Entry point used by eps_loss and sds_grad, which also pass the noise
  /// they injected. Priors ignore it; diagnostic doubles may echo it.
  virtual Image predict_eps_observed(const CameraPose& pose, const Image& noisy, int t,
                                     const Image& injected_noise) const {
    static_cast<void>(injected_noise);
    return predict_eps(pose, noisy, t);
  }
};

/// Exact posterior-mean denoiser for data ~ N(mean, sigma^2 I).
class GaussianOraclePrior final : public Denoiser {
 public:
  GaussianOraclePrior(Image mean, double sigma, NoiseSchedule schedule);

  Image predict_eps(const CameraPose& pose, const Image& noisy, int t) const override;

  const Image& mean() const noexcept { return mean_; }
  double sigma() const noexcept { return sigma_; }

 private:
  Image mean_;
  double sigma_;
  NoiseSchedule schedule_;
};

struct BankEntry {
  Image image;
  CameraPose pose;
};

/// Exact posterior-mean denoiser for data drawn uniformly from a bank of
/// reference maps, restricted to entries whose view direction lies within
/// the pose threshold of the query (or the single nearest one otherwise).
class BankOraclePrior final : public Denoiser {
 public:
  BankOraclePrior(std::vector<BankEntry> bank, NoiseSchedule schedule, double pose_threshold_deg = 15.0);

  Image predict_eps(const CameraPose& pose, const Image& noisy, int t) const override;

  std::vector<std::size_t> compatible_entries(const CameraPose& pose) const;
  /// Softmax weights over compatible_entries(pose), in the same order.
  std::vector<double> posterior_weights(const CameraPose& pose, const Image& noisy, int t) const;
  Image posterior_mean(const CameraPose& pose, const Image& noisy, int t) const;

  const std::vector<BankEntry>& bank() const noexcept { return bank_; }
  double pose_threshold_deg() const noexcept { return threshold_deg_; }

 private:
  std::vector<BankEntry> bank_;
  NoiseSchedule schedule_;
  double threshold_deg_;
};

struct TimeRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct AnnealConfig {
  enum class Kind { InterpolatedUniform, LinearMax };

  Kind kind = Kind::LinearMax;
  TimeRange start{0.02, 0.98};
  TimeRange end{0.02, 0.5};

  /// [0.5, 0.98] -> [0.05, 0.5], both ends interpolated.
  static AnnealConfig mesh_pipeline();
  /// Upper end 0.98 -> 0.5, lower end held at 0.02.
  static AnnealConfig volume_pipeline();

  void validate() const;
};

TimeRange anneal_range(double progress, const AnnealConfig& cfg);
double sample_timestep(std::mt19937_64& rng, const TimeRange& range);

Image draw_noise(std::mt19937_64& rng, int width, int height);

/// sqrt(abar_t) z + sqrt(1 - abar_t) eps.
Image add_noise(const Image& z, const Image& eps, int t, const NoiseSchedule& schedule);

/// Mean squared difference between eps and the denoiser's prediction.
double eps_loss(const Denoiser& d, const Image& z, const CameraPose& pose, int t, const Image& eps,
                const NoiseSchedule& schedule);

struct SdsResult {
  Image grad;         // w(t) (eps_hat - eps)
  double eps_mse = 0; // mean (eps_hat - eps)^2 at this draw
};

SdsResult sds_grad_with_noise(const Denoiser& d, const Image& z, const CameraPose& pose, int t,
                              const Image& eps, const NoiseSchedule& schedule);

/// Draws eps from rng and returns w(t) (eps_hat - eps), the SDS gradient with
/// respect to the rendered image.
Image sds_grad(const Denoiser& d, const Image& z, const CameraPose& pose, int t, std::mt19937_64& rng,
               const NoiseSchedule& schedule);
SdsResult sds_sample(const Denoiser& d, const Image& z, const CameraPose& pose, int t,
                     std::mt19937_64& rng, const NoiseSchedule& schedule);

struct PriorConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SdsWeighting weighting = SdsWeighting::OneMinusAlphaBar;
  double pose_threshold_deg = 15.0;

  NoiseSchedule schedule() const;
};

nlohmann::json prior_config_to_json(const PriorConfig& cfg);
PriorConfig prior_config_from_json(const nlohmann::json& j);

}  // namespace canonlift
