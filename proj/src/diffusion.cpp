// SPDX-License-Identifier: Apache-2.0

#include "canonlift/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonlift/error.hpp"

namespace canonlift {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::ShapeMismatch, fmt::format("{}: {}x{} vs {}x{}", what, a.width(), a.height(),
                                                      b.width(), b.height()));
  }
}

}  // namespace

Image::Image(int width, int height, double fill)
    : width_(width),
      height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)) * 3,
            fill) {}

Image Image::from_ccm(const CoordMap& map) {
  Image img(map.width(), map.height());
  std::copy(map.channels().begin(), map.channels().end(), img.data_.begin());
  return img;
}

double Image::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end, SdsWeighting weighting) {
  if (steps < 2 || !(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("noise schedule needs T >= 2 and 0 < beta_start <= beta_end < 1 (got {}, {}, {})",
                            steps, beta_start, beta_end));
  }
  NoiseSchedule s;
  s.weighting_ = weighting;
  s.beta_.resize(static_cast<std::size_t>(steps));
  s.alpha_bar_.resize(static_cast<std::size_t>(steps));
  double running = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double beta = beta_start + (beta_end - beta_start) * t / (steps - 1);
    running *= 1.0 - beta;
    s.beta_[static_cast<std::size_t>(t)] = beta;
    s.alpha_bar_[static_cast<std::size_t>(t)] = running;
  }
  return s;
}

double NoiseSchedule::weight(int t) const {
  switch (weighting_) {
    case SdsWeighting::Unit: return 1.0;
    case SdsWeighting::OneMinusAlphaBar: break;
  }
  return 1.0 - alpha_bar(t);
}

int NoiseSchedule::index_for(double t) const {
  const double clamped = std::clamp(t, 0.0, 1.0);
  return static_cast<int>(std::lround(clamped * (steps() - 1)));
}

Image draw_noise(std::mt19937_64& rng, int width, int height) {
  Image eps(width, height);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : eps.data()) v = normal(rng);
  return eps;
}

Image add_noise(const Image& z, const Image& eps, int t, const NoiseSchedule& schedule) {
  require_same_shape(z, eps, "add_noise");
  const double signal = std::sqrt(schedule.alpha_bar(t));
  const double noise = std::sqrt(1.0 - schedule.alpha_bar(t));
  Image out(z.width(), z.height());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = signal * z[i] + noise * eps[i];
  return out;
}

double eps_loss(const Denoiser& d, const Image& z, const CameraPose& pose, int t, const Image& eps,
                const NoiseSchedule& schedule) {
  const Image noisy = add_noise(z, eps, t, schedule);
  const Image pred = d.predict_eps_observed(pose, noisy, t, eps);
  require_same_shape(pred, eps, "eps_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double r = eps[i] - pred[i];
    sum += r * r;
  }
  return eps.size() == 0 ? 0.0 : sum / static_cast<double>(eps.size());
}

SdsResult sds_grad_with_noise(const Denoiser& d, const Image& z, const CameraPose& pose, int t,
                              const Image& eps, const NoiseSchedule& schedule) {
  const Image noisy = add_noise(z, eps, t, schedule);
  const Image pred = d.predict_eps_observed(pose, noisy, t, eps);
  require_same_shape(pred, eps, "sds_grad");
  const double w = schedule.weight(t);
  SdsResult out{Image(z.width(), z.height()), 0.0};
  double sq = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double r = pred[i] - eps[i];
    out.grad[i] = w * r;
    sq += r * r;
  }
  out.eps_mse = eps.size() == 0 ? 0.0 : sq / static_cast<double>(eps.size());
  return out;
}

SdsResult sds_sample(const Denoiser& d, const Image& z, const CameraPose& pose, int t, std::mt19937_64& rng,
                     const NoiseSchedule& schedule) {
  const Image eps = draw_noise(rng, z.width(), z.height());
  return sds_grad_with_noise(d, z, pose, t, eps, schedule);
}

Image sds_grad(const Denoiser& d, const Image& z, const CameraPose& pose, int t, std::mt19937_64& rng,
               const NoiseSchedule& schedule) {
  return sds_sample(d, z, pose, t, rng, schedule).grad;
}

AnnealConfig AnnealConfig::mesh_pipeline() {
  return {Kind::InterpolatedUniform, {0.5, 0.98}, {0.05, 0.5}};
}

AnnealConfig AnnealConfig::volume_pipeline() {
  return {Kind::LinearMax, {0.02, 0.98}, {0.02, 0.5}};
}

void AnnealConfig::validate() const {
  auto ok = [](const TimeRange& r) { return 0.0 <= r.lo && r.lo <= r.hi && r.hi <= 1.0; };
  // Linear interpolation of two valid ranges stays valid, so endpoints suffice.
  const TimeRange end_used = kind == Kind::LinearMax ? TimeRange{start.lo, end.hi} : end;
  if (!ok(start) || !ok(end_used)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("anneal ranges [{}, {}] -> [{}, {}] must satisfy 0 <= lo <= hi <= 1", start.lo,
                            start.hi, end_used.lo, end_used.hi));
  }
}

TimeRange anneal_range(double progress, const AnnealConfig& cfg) {
  cfg.validate();
  const double p = std::clamp(progress, 0.0, 1.0);
  auto lerp = [p](double a, double b) { return p == 1.0 ? b : a + (b - a) * p; };
  TimeRange r;
  r.hi = lerp(cfg.start.hi, cfg.end.hi);
  r.lo = cfg.kind == AnnealConfig::Kind::LinearMax ? cfg.start.lo : lerp(cfg.start.lo, cfg.end.lo);
  r.lo = std::min(r.lo, r.hi);
  return r;
}

double sample_timestep(std::mt19937_64& rng, const TimeRange& range) {
  if (!(range.lo <= range.hi)) throw Error(ErrorKind::InvalidArgument, "timestep range is inverted");
  if (range.lo == range.hi) return range.lo;
  std::uniform_real_distribution<double> u(range.lo, range.hi);
  return u(rng);
}

NoiseSchedule PriorConfig::schedule() const {
  return NoiseSchedule::linear(steps, beta_start, beta_end, weighting);
}

nlohmann::json prior_config_to_json(const PriorConfig& cfg) {
  return {{"T", cfg.steps},
          {"beta_start", cfg.beta_start},
          {"beta_end", cfg.beta_end},
          {"w_kind", cfg.weighting == SdsWeighting::Unit ? "unit" : "one_minus_alpha_bar"},
          {"pose_threshold_deg", cfg.pose_threshold_deg}};
}

PriorConfig prior_config_from_json(const nlohmann::json& j) {
  PriorConfig cfg;
  try {
    cfg.steps = j.value("T", cfg.steps);
    cfg.beta_start = j.value("beta_start", cfg.beta_start);
    cfg.beta_end = j.value("beta_end", cfg.beta_end);
    cfg.pose_threshold_deg = j.value("pose_threshold_deg", cfg.pose_threshold_deg);
    const auto kind = j.value("w_kind", std::string("one_minus_alpha_bar"));
    if (kind == "unit") cfg.weighting = SdsWeighting::Unit;
    else if (kind == "one_minus_alpha_bar") cfg.weighting = SdsWeighting::OneMinusAlphaBar;
    else throw Error(ErrorKind::Parse, fmt::format("unknown w_kind '{}'", kind));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("bad prior config: {}", e.what()));
  }
  static_cast<void>(cfg.schedule());  // validates
  return cfg;
}

}  // namespace canonlift
