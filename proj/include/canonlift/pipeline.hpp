// SPDX-License-Identifier: Apache-2.0
//
// Dataset generation, manifests, bank loading and consistency evaluation.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canonlift/camera.hpp"
#include "canonlift/ccm_render.hpp"
#include "canonlift/diffusion.hpp"
#include "canonlift/geometry.hpp"
#include "canonlift/lifting.hpp"

namespace canonlift {

struct ViewRecord {
  std::string ccm;  // relative to the manifest directory
  CameraPose pose;
};

struct AssetRecord {
  std::string id;
  std::string source;  // mesh file name
  std::string mesh_hash;
  Vec3 extents = Vec3::Ones();
  std::vector<ViewRecord> views;
};

struct SkippedAsset {
  std::string source;
  std::string reason;
};

struct DatasetConfig {
  int views_per_asset = 32;
  CameraSamplerConfig cameras;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  DatasetConfig config;
  std::vector<AssetRecord> assets;
  std::vector<SkippedAsset> skipped;

  const AssetRecord& asset(const std::string& id) const;
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
std::string format_manifest(const DatasetManifest& m);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Checks view counts and that every referenced CCM file and sidecar parses.
/// Throws Parse / Io on the first problem.
void validate_manifest(const DatasetManifest& m, const std::filesystem::path& root);

/// Seed for the asset at `index`, derived from the generator seed.
std::uint64_t asset_seed(std::uint64_t seed, std::size_t index);

/// Renders `views_per_asset` sampled views of every .obj in `mesh_dir` (sorted
/// by name) into `out_dir` and writes out_dir/manifest.json. Unloadable
/// assets are skipped and recorded.
DatasetManifest dataset_gen(const std::filesystem::path& mesh_dir, const DatasetConfig& cfg,
                            const std::filesystem::path& out_dir);

/// Rasterized views of an already canonicalized mesh, as bank entries.
std::vector<BankEntry> render_bank(const CanonicalMesh& mesh, const std::vector<CameraPose>& poses);
std::vector<BankEntry> load_bank(const DatasetManifest& m, const std::filesystem::path& root,
                                 const std::string& asset_id);

/// Foreground = opacity >= threshold; values are un-premultiplied so that a
/// partially transparent pixel still holds a coordinate.
CoordMap coord_map_from_render(const VolumeRender& render, const CameraPose& pose, const Vec3& extents,
                               double opacity_threshold = 0.5);

/// Occupied cells become `density`, others 0.
DensityGrid density_from_occupancy(const OccupancyGrid& occ, double density);

/// Symmetric mean nearest-neighbor distance. Returns 0 for two empty sets and
/// `empty_penalty` if exactly one is empty.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double empty_penalty);

/// Denormalized foreground coordinates of a map.
std::vector<Vec3> foreground_points(const CoordMap& map);

struct EvalOptions {
  int probe_views = 8;
  CameraSamplerConfig cameras;
  double iso_fraction = 0.5;
  double opacity_threshold = 0.5;
  double min_iou = 0.7;
  double max_chamfer = 0.05;
};

struct EvalReport {
  double iou = 0.0;
  double mirrored_iou = 0.0;  // result reflected across x versus reference
  double chamfer = 0.0;       // canonical units, averaged over probe views
  std::array<double, 3> coverage_min{};
  std::array<double, 3> coverage_max{};
  int probe_views = 0;
  double min_iou = 0.7;
  double max_chamfer = 0.05;
  bool pass = false;
};

nlohmann::json eval_report_to_json(const EvalReport& r);

/// Compares a lifted grid against a canonicalized reference mesh: voxel IoU
/// at the grid's resolution plus per-probe-view chamfer between the
/// unprojected coordinate maps of result and reference. Throws
/// ExtentMismatch if the domains disagree.
EvalReport eval_consistency(const DensityGrid& result, const CanonicalMesh& reference, const EvalOptions& opts);
/// Same for a mesh result (in canonicalized coordinates) at resolution R.
EvalReport eval_consistency(const Mesh& result, int resolution, const CanonicalMesh& reference,
                            const EvalOptions& opts);

}  // namespace canonlift
