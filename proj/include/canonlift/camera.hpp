// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera, look-at construction and the randomized view sampler.

#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "canonlift/geometry.hpp"

namespace canonlift {

using Mat3 = Eigen::Matrix3d;
using Vec2 = Eigen::Vector2d;

/// World-to-camera rigid transform. The camera looks down its -z axis, +y is
/// up in the image and +x is right.
struct Extrinsics {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 camera_center() const { return -rotation.transpose() * translation; }
  Vec3 forward() const { return -rotation.row(2).transpose(); }
};

/// Throws if `up` is (nearly) parallel to the viewing direction or eye == target.
Extrinsics look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

class CameraPose {
 public:
  CameraPose(const Extrinsics& extrinsics, double fov_y_deg, int width, int height);

  const Extrinsics& extrinsics() const noexcept { return extrinsics_; }
  double fov_deg() const noexcept { return fov_deg_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double focal() const noexcept { return focal_; }
  Vec2 principal_point() const { return {0.5 * width_, 0.5 * height_}; }

  Vec3 center() const { return extrinsics_.camera_center(); }
  /// Unit vector from the camera center toward the world origin's side.
  Vec3 view_direction() const { return extrinsics_.forward(); }

  double distance() const;       // |camera center|
  double elevation_deg() const;  // toward +y
  double azimuth_deg() const;    // in the xz plane, 0 at +z, in [0, 360)

 private:
  Extrinsics extrinsics_;
  double fov_deg_;
  int width_;
  int height_;
  double focal_;
};

struct Projection {
  Vec2 pixel;    // continuous pixel coordinates, +v downward
  double depth;  // distance along the camera's -z axis
};

/// Throws BehindCamera when the point's depth is not positive.
Projection project(const CameraPose& pose, const Vec3& p);

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// Ray through a continuous pixel position; pixel centers sit at +0.5.
Ray ray_for_pixel(const CameraPose& pose, const Vec2& pixel);

/// Point on the pixel's ray whose depth along the optical axis is `depth`.
Vec3 unproject(const CameraPose& pose, const Vec2& pixel, double depth);

struct CameraSamplerConfig {
  double distance_min = 0.9;
  double distance_max = 1.1;
  double fov_deg = 45.0;
  double elevation_min_deg = -10.0;
  double elevation_max_deg = 45.0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  int width = 64;
  int height = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Owns its random stream; one sampler per worker.
class CameraSampler {
 public:
  explicit CameraSampler(const CameraSamplerConfig& cfg);
  CameraSampler(const CameraSamplerConfig& cfg, std::uint64_t seed);

  CameraPose sample();
  const CameraSamplerConfig& config() const noexcept { return cfg_; }

 private:
  CameraSamplerConfig cfg_;
  std::mt19937_64 rng_;
};

/// Draws one pose from an external stream (same distribution as CameraSampler).
CameraPose sample_camera(std::mt19937_64& rng, const CameraSamplerConfig& cfg);

/// Camera on a sphere about the origin looking at it with +y up.
CameraPose orbit_camera(double distance, double elevation_deg, double azimuth_deg, double fov_deg,
                        int width, int height);

nlohmann::json pose_to_json(const CameraPose& pose);
CameraPose pose_from_json(const nlohmann::json& j);

nlohmann::json sampler_config_to_json(const CameraSamplerConfig& cfg);
CameraSamplerConfig sampler_config_from_json(const nlohmann::json& j);

}  // namespace canonlift
