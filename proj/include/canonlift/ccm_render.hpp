// SPDX-License-Identifier: Apache-2.0
//
// Canonical coordinate maps: rasterizer, ray-casting oracle, depth
// conversion and the on-disk CCM format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canonlift/camera.hpp"
#include "canonlift/geometry.hpp"

namespace canonlift {

/// H x W x 3 normalized canonical coordinates plus a foreground mask.
/// Background pixels hold (0, 0, 0) with mask == 0.
class CoordMap {
 public:
  CoordMap(const CameraPose& pose, const Vec3& extents);

  int width() const noexcept { return pose_.width(); }
  int height() const noexcept { return pose_.height(); }
  std::size_t pixel_count() const { return mask_.size(); }
  const CameraPose& pose() const noexcept { return pose_; }
  const Vec3& extents() const noexcept { return extents_; }

  Vec3 value(int x, int y) const;
  void set(int x, int y, const Vec3& v);  // marks foreground
  bool foreground(int x, int y) const { return mask_[pixel(x, y)] != 0; }
  std::size_t foreground_count() const;

  std::vector<float>& channels() noexcept { return channels_; }
  const std::vector<float>& channels() const noexcept { return channels_; }
  std::vector<std::uint8_t>& mask() noexcept { return mask_; }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

  std::size_t pixel(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width()) + static_cast<std::size_t>(x);
  }

 private:
  CameraPose pose_;
  Vec3 extents_;
  std::vector<float> channels_;     // interleaved xyz, row-major
  std::vector<std::uint8_t> mask_;  // 1 = surface hit
};

/// Per-pixel depth along the camera's -z axis; 0 marks background.
class DepthMap {
 public:
  explicit DepthMap(const CameraPose& pose);

  int width() const noexcept { return pose_.width(); }
  int height() const noexcept { return pose_.height(); }
  const CameraPose& pose() const noexcept { return pose_; }

  double at(int x, int y) const { return depth_[index(x, y)]; }
  void set(int x, int y, double d) { depth_[index(x, y)] = d; }
  const std::vector<double>& data() const noexcept { return depth_; }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width()) + static_cast<std::size_t>(x);
  }
  CameraPose pose_;
  std::vector<double> depth_;
};

struct RenderResult {
  CoordMap ccm;
  DepthMap depth;
};

/// Z-buffered rasterization with perspective-correct interpolation of the
/// normalized vertex coordinates. Double-sided, one sample per pixel center.
RenderResult rasterize(const Mesh& mesh, const AxisNormalizer& n, const CameraPose& pose);

/// Exhaustive per-pixel Moller-Trumbore nearest hit; independent of rasterize.
RenderResult raycast(const Mesh& mesh, const AxisNormalizer& n, const CameraPose& pose);

/// Unprojects every positive depth to a world point and normalizes it.
CoordMap depth_to_ccm(const DepthMap& depth, const AxisNormalizer& n);

// File format ---------------------------------------------------------------
//
//   "CCM1" | u32 W | u32 H | W*H*3 float32 (xyz interleaved) | W*H mask bytes
//
// all little-endian, plus a JSON sidecar holding the pose record, the
// normalizer extents and the source mesh hash.

struct CcmHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

void write_ccm(const CoordMap& map, const std::filesystem::path& path,
               const std::string& mesh_hash);
CoordMap read_ccm(const std::filesystem::path& path);
/// Validates magic and size only.
CcmHeader read_ccm_header(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& ccm_path);
nlohmann::json ccm_sidecar(const CoordMap& map, const std::string& mesh_hash);

/// 16-bit RGB preview, each channel quantized from [0, 1]. Inspection only.
void write_png16(const CoordMap& map, const std::filesystem::path& path);

}  // namespace canonlift
