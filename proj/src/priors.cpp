// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "canonlift/diffusion.hpp"
#include "canonlift/error.hpp"

namespace canonlift {

GaussianOraclePrior::GaussianOraclePrior(Image mean, double sigma, NoiseSchedule schedule)
    : mean_(std::move(mean)), sigma_(sigma), schedule_(std::move(schedule)) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("gaussian prior sigma {} must be >= 0", sigma));
  }
}

Image GaussianOraclePrior::predict_eps(const CameraPose& /*pose*/, const Image& noisy, int t) const {
  if (!noisy.same_shape(mean_)) {
    throw Error(ErrorKind::ShapeMismatch, "gaussian prior: input shape differs from the mean image");
  }
  // E[eps | z_t] for z ~ N(mu, s^2): Cov(eps, z_t) / Var(z_t) * (z_t - E z_t).
  const double abar = schedule_.alpha_bar(t);
  const double gain = std::sqrt(1.0 - abar) / (abar * sigma_ * sigma_ + 1.0 - abar);
  const double signal = std::sqrt(abar);
  Image out(noisy.width(), noisy.height());
  for (std::size_t i = 0; i < noisy.size(); ++i) out[i] = gain * (noisy[i] - signal * mean_[i]);
  return out;
}

BankOraclePrior::BankOraclePrior(std::vector<BankEntry> bank, NoiseSchedule schedule, double pose_threshold_deg)
    : bank_(std::move(bank)), schedule_(std::move(schedule)), threshold_deg_(pose_threshold_deg) {
  if (bank_.empty()) throw Error(ErrorKind::InvalidArgument, "bank prior needs at least one entry");
  if (!(pose_threshold_deg >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "pose threshold must be non-negative");
  }
  for (const auto& e : bank_) {
    if (!e.image.same_shape(bank_.front().image)) {
      throw Error(ErrorKind::ShapeMismatch, "bank entries must share one image shape");
    }
  }
}

std::vector<std::size_t> BankOraclePrior::compatible_entries(const CameraPose& pose) const {
  const Vec3 query = pose.view_direction();
  const double cos_threshold = std::cos(threshold_deg_ * std::numbers::pi / 180.0);
  std::vector<std::size_t> out;
  std::size_t nearest = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bank_.size(); ++i) {
    const double c = bank_[i].pose.view_direction().dot(query);
    if (c > cos_threshold) out.push_back(i);
    if (c > best) {
      best = c;
      nearest = i;
    }
  }
  if (out.empty()) out.push_back(nearest);
  return out;
}

std::vector<double> BankOraclePrior::posterior_weights(const CameraPose& pose, const Image& noisy, int t) const {
  if (!noisy.same_shape(bank_.front().image)) {
    throw Error(ErrorKind::ShapeMismatch, "bank prior: input shape differs from the bank");
  }
  const auto idx = compatible_entries(pose);
  const double abar = schedule_.alpha_bar(t);
  const double signal = std::sqrt(abar);
  const double inv_two_var = 1.0 / (2.0 * (1.0 - abar));
  std::vector<double> logits(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Image& ref = bank_[idx[k]].image;
    double d2 = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      const double r = noisy[i] - signal * ref[i];
      d2 += r * r;
    }
    logits[k] = -d2 * inv_two_var;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - top);
    total += l;
  }
  for (double& l : logits) l /= total;
  return logits;
}

Image BankOraclePrior::posterior_mean(const CameraPose& pose, const Image& noisy, int t) const {
  const auto idx = compatible_entries(pose);
  const auto w = posterior_weights(pose, noisy, t);
  Image mean(noisy.width(), noisy.height());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Image& ref = bank_[idx[k]].image;
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += w[k] * ref[i];
  }
  return mean;
}

Image BankOraclePrior::predict_eps(const CameraPose& pose, const Image& noisy, int t) const {
  const Image clean = posterior_mean(pose, noisy, t);
  const double abar = schedule_.alpha_bar(t);
  const double signal = std::sqrt(abar);
  const double inv_noise = 1.0 / std::sqrt(1.0 - abar);
  Image out(noisy.width(), noisy.height());
  for (std::size_t i = 0; i < noisy.size(); ++i) out[i] = (noisy[i] - signal * clean[i]) * inv_noise;
  return out;
}

}  // namespace canonlift
