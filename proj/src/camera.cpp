// SPDX-License-Identifier: Apache-2.0

#include "canonlift/camera.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonlift/error.hpp"

namespace canonlift {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

Extrinsics look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 view = target - eye;
  if (!(view.norm() > 1e-12)) {
    throw Error(ErrorKind::InvalidArgument, "look_at: eye and target coincide");
  }
  const Vec3 forward = view.normalized();
  const Vec3 z_axis = -forward;
  const Vec3 side = up.cross(z_axis);
  if (!(side.norm() > 1e-9 * std::max(1.0, up.norm()))) {
    throw Error(ErrorKind::InvalidArgument, "look_at: up vector is parallel to the view direction");
  }
  const Vec3 x_axis = side.normalized();
  const Vec3 y_axis = z_axis.cross(x_axis);

  Extrinsics ext;
  ext.rotation.row(0) = x_axis.transpose();
  ext.rotation.row(1) = y_axis.transpose();
  ext.rotation.row(2) = z_axis.transpose();
  ext.translation = -ext.rotation * eye;
  return ext;
}

CameraPose::CameraPose(const Extrinsics& extrinsics, double fov_y_deg, int width, int height)
    : extrinsics_(extrinsics), fov_deg_(fov_y_deg), width_(width), height_(height) {
  if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0) || width < 1 || height < 1) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("invalid camera: fov {} deg, {}x{}", fov_y_deg, width, height));
  }
  const Mat3& r = extrinsics.rotation;
  if (!(r.transpose() * r).isApprox(Mat3::Identity(), 1e-6) || std::abs(r.determinant() - 1.0) > 1e-6) {
    throw Error(ErrorKind::InvalidArgument, "camera rotation is not a proper rotation");
  }
  focal_ = 0.5 * height / std::tan(0.5 * fov_y_deg * kDegToRad);
}

double CameraPose::distance() const { return center().norm(); }

double CameraPose::elevation_deg() const {
  const Vec3 c = center();
  const double d = c.norm();
  return d > 0.0 ? std::asin(std::clamp(c.y() / d, -1.0, 1.0)) * kRadToDeg : 0.0;
}

double CameraPose::azimuth_deg() const {
  const Vec3 c = center();
  double az = std::atan2(c.x(), c.z()) * kRadToDeg;
  if (az < 0.0) az += 360.0;
  return az >= 360.0 ? az - 360.0 : az;
}

Projection project(const CameraPose& pose, const Vec3& p) {
  const Vec3 pc = pose.extrinsics().to_camera(p);
  const double depth = -pc.z();
  if (!(depth > 0.0)) {
    throw Error(ErrorKind::BehindCamera, fmt::format("point at depth {} is behind the camera", depth));
  }
  const Vec2 pp = pose.principal_point();
  return {Vec2(pp.x() + pose.focal() * pc.x() / depth, pp.y() - pose.focal() * pc.y() / depth), depth};
}

Ray ray_for_pixel(const CameraPose& pose, const Vec2& pixel) {
  const Vec2 pp = pose.principal_point();
  const Vec3 dir_cam((pixel.x() - pp.x()) / pose.focal(), -(pixel.y() - pp.y()) / pose.focal(), -1.0);
  const Vec3 dir = pose.extrinsics().rotation.transpose() * dir_cam;
  return {pose.center(), dir.normalized()};
}

Vec3 unproject(const CameraPose& pose, const Vec2& pixel, double depth) {
  const Vec2 pp = pose.principal_point();
  const Vec3 pc((pixel.x() - pp.x()) / pose.focal() * depth, -(pixel.y() - pp.y()) / pose.focal() * depth,
                -depth);
  const auto& ext = pose.extrinsics();
  return ext.rotation.transpose() * (pc - ext.translation);
}

void CameraSamplerConfig::validate() const {
  const bool ok = distance_min > 0.0 && distance_min <= distance_max && fov_deg > 0.0 &&
                  fov_deg < 180.0 && elevation_min_deg > -90.0 &&
                  elevation_min_deg <= elevation_max_deg && elevation_max_deg < 90.0 &&
                  azimuth_min_deg <= azimuth_max_deg && width > 0 && height > 0;
  if (!ok) throw Error(ErrorKind::InvalidArgument, "invalid camera sampler configuration");
}

CameraPose orbit_camera(double distance, double elevation_deg, double azimuth_deg, double fov_deg,
                        int width, int height) {
  const double el = elevation_deg * kDegToRad;
  const double az = azimuth_deg * kDegToRad;
  const Vec3 eye = distance * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
  return CameraPose(look_at(eye, Vec3::Zero(), Vec3::UnitY()), fov_deg, width, height);
}

CameraPose sample_camera(std::mt19937_64& rng, const CameraSamplerConfig& cfg) {
  std::uniform_real_distribution<double> dist(cfg.distance_min, cfg.distance_max);
  std::uniform_real_distribution<double> elev(cfg.elevation_min_deg, cfg.elevation_max_deg);
  std::uniform_real_distribution<double> azim(cfg.azimuth_min_deg, cfg.azimuth_max_deg);
  // Fixed draw order keeps sequences reproducible.
  const double d = dist(rng);
  const double e = elev(rng);
  const double a = azim(rng);
  return orbit_camera(d, e, a, cfg.fov_deg, cfg.width, cfg.height);
}

CameraSampler::CameraSampler(const CameraSamplerConfig& cfg) : CameraSampler(cfg, cfg.seed) {}

CameraSampler::CameraSampler(const CameraSamplerConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), rng_(seed) {
  cfg_.validate();
}

CameraPose CameraSampler::sample() { return sample_camera(rng_, cfg_); }

nlohmann::json pose_to_json(const CameraPose& pose) {
  const auto& ext = pose.extrinsics();
  std::vector<double> m;
  m.reserve(12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m.push_back(ext.rotation(r, c));
    m.push_back(ext.translation[r]);
  }
  return {{"extrinsics", m},
          {"fov_deg", pose.fov_deg()},
          {"width", pose.width()},
          {"height", pose.height()},
          {"distance", pose.distance()},
          {"elevation_deg", pose.elevation_deg()},
          {"azimuth_deg", pose.azimuth_deg()}};
}

CameraPose pose_from_json(const nlohmann::json& j) {
  try {
    const auto m = j.at("extrinsics").get<std::vector<double>>();
    if (m.size() != 12) throw Error(ErrorKind::Parse, "pose extrinsics must hold 12 values");
    Extrinsics ext;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ext.rotation(r, c) = m[r * 4 + c];
      ext.translation[r] = m[r * 4 + 3];
    }
    return CameraPose(ext, j.at("fov_deg").get<double>(), j.at("width").get<int>(),
                      j.at("height").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("bad pose record: {}", e.what()));
  }
}

nlohmann::json sampler_config_to_json(const CameraSamplerConfig& cfg) {
  return {{"distance_min", cfg.distance_min},
          {"distance_max", cfg.distance_max},
          {"fov_deg", cfg.fov_deg},
          {"elevation_min_deg", cfg.elevation_min_deg},
          {"elevation_max_deg", cfg.elevation_max_deg},
          {"azimuth_min_deg", cfg.azimuth_min_deg},
          {"azimuth_max_deg", cfg.azimuth_max_deg},
          {"width", cfg.width},
          {"height", cfg.height},
          {"seed", cfg.seed}};
}

CameraSamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  CameraSamplerConfig cfg;
  try {
    cfg.distance_min = j.value("distance_min", cfg.distance_min);
    cfg.distance_max = j.value("distance_max", cfg.distance_max);
    cfg.fov_deg = j.value("fov_deg", cfg.fov_deg);
    cfg.elevation_min_deg = j.value("elevation_min_deg", cfg.elevation_min_deg);
    cfg.elevation_max_deg = j.value("elevation_max_deg", cfg.elevation_max_deg);
    cfg.azimuth_min_deg = j.value("azimuth_min_deg", cfg.azimuth_min_deg);
    cfg.azimuth_max_deg = j.value("azimuth_max_deg", cfg.azimuth_max_deg);
    cfg.width = j.value("width", cfg.width);
    cfg.height = j.value("height", cfg.height);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("bad sampler config: {}", e.what()));
  }
  cfg.validate();
  return cfg;
}

}  // namespace canonlift
