// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonlift/error.hpp"
#include "canonlift/parallel.hpp"
#include "canonlift/pipeline.hpp"

namespace canonlift {

namespace fs = std::filesystem;

const AssetRecord& DatasetManifest::asset(const std::string& id) const {
  for (const auto& a : assets) {
    if (a.id == id) return a;
  }
  throw Error(ErrorKind::InvalidArgument, fmt::format("manifest has no asset '{}'", id));
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json assets = nlohmann::json::array();
  for (const auto& a : m.assets) {
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : a.views) views.push_back({{"ccm", v.ccm}, {"pose", pose_to_json(v.pose)}});
    assets.push_back({{"id", a.id},
                      {"source", a.source},
                      {"mesh_hash", a.mesh_hash},
                      {"extents", {a.extents.x(), a.extents.y(), a.extents.z()}},
                      {"views", views}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : m.skipped) skipped.push_back({{"source", s.source}, {"reason", s.reason}});
  return {{"format", "canonlift-manifest-1"},
          {"seed", m.config.seed},
          {"config", {{"views_per_asset", m.config.views_per_asset}, {"cameras", sampler_config_to_json(m.config.cameras)}}},
          {"assets", assets},
          {"skipped", skipped}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.config.seed = j.at("seed").get<std::uint64_t>();
    m.config.views_per_asset = j.at("config").at("views_per_asset").get<int>();
    m.config.cameras = sampler_config_from_json(j.at("config").at("cameras"));
    for (const auto& a : j.at("assets")) {
      AssetRecord rec;
      rec.id = a.at("id").get<std::string>();
      rec.source = a.at("source").get<std::string>();
      rec.mesh_hash = a.at("mesh_hash").get<std::string>();
      const auto e = a.at("extents").get<std::vector<double>>();
      if (e.size() != 3) throw Error(ErrorKind::Parse, "asset extents must have 3 values");
      rec.extents = Vec3(e[0], e[1], e[2]);
      for (const auto& v : a.at("views")) {
        rec.views.push_back({v.at("ccm").get<std::string>(), pose_from_json(v.at("pose"))});
      }
      m.assets.push_back(std::move(rec));
    }
    for (const auto& s : j.at("skipped")) {
      m.skipped.push_back({s.at("source").get<std::string>(), s.at("reason").get<std::string>()});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("bad manifest: {}", e.what()));
  }
}

std::string format_manifest(const DatasetManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

void write_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << format_manifest(m);
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open manifest '{}'", path.string()));
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

void validate_manifest(const DatasetManifest& m, const fs::path& root) {
  for (const auto& a : m.assets) {
    if (static_cast<int>(a.views.size()) != m.config.views_per_asset) {
      throw Error(ErrorKind::Parse, fmt::format("asset '{}' has {} views, config says {}", a.id, a.views.size(),
                                                m.config.views_per_asset));
    }
    for (const auto& v : a.views) {
      const fs::path p = root / v.ccm;
      const auto header = read_ccm_header(p);
      if (static_cast<int>(header.width) != v.pose.width() || static_cast<int>(header.height) != v.pose.height()) {
        throw Error(ErrorKind::Parse, fmt::format("'{}' size disagrees with its pose record", p.string()));
      }
      if (!fs::exists(sidecar_path(p))) {
        throw Error(ErrorKind::Io, fmt::format("missing sidecar for '{}'", p.string()));
      }
    }
  }
}

std::uint64_t asset_seed(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<BankEntry> render_bank(const CanonicalMesh& mesh, const std::vector<CameraPose>& poses) {
  std::vector<BankEntry> bank;
  bank.reserve(poses.size());
  for (const auto& pose : poses) {
    bank.push_back({Image::from_ccm(rasterize(mesh.mesh, mesh.normalizer, pose).ccm), pose});
  }
  return bank;
}

std::vector<BankEntry> load_bank(const DatasetManifest& m, const fs::path& root, const std::string& asset_id) {
  const AssetRecord& asset = m.asset(asset_id);
  std::vector<BankEntry> bank;
  for (const auto& v : asset.views) {
    const CoordMap map = read_ccm(root / v.ccm);
    bank.push_back({Image::from_ccm(map), map.pose()});
  }
  return bank;
}

DatasetManifest dataset_gen(const fs::path& mesh_dir, const DatasetConfig& cfg, const fs::path& out_dir) {
  cfg.cameras.validate();
  if (cfg.views_per_asset < 1) throw Error(ErrorKind::InvalidArgument, "views per asset must be >= 1");
  std::error_code ec;
  if (!fs::is_directory(mesh_dir, ec)) {
    throw Error(ErrorKind::Io, fmt::format("'{}' is not a directory", mesh_dir.string()));
  }
  std::vector<fs::path> sources;
  for (const auto& entry : fs::directory_iterator(mesh_dir)) {
    if (entry.is_regular_file() && (entry.path().extension() == ".obj" || entry.path().extension() == ".OBJ")) {
      sources.push_back(entry.path());
    }
  }
  std::sort(sources.begin(), sources.end());
  if (sources.empty()) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("no .obj meshes in '{}'", mesh_dir.string()));
  }
  fs::create_directories(out_dir);

  struct Outcome {
    std::optional<AssetRecord> record;
    std::string error;
  };
  std::vector<Outcome> outcomes(sources.size());
  parallel_for(sources.size(), [&](std::size_t idx) {
    const fs::path& src = sources[idx];
    std::optional<CanonicalMesh> canon;
    try {
      canon = canonicalize(load_mesh(src));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Io && fs::exists(src)) throw;
      outcomes[idx].error = fmt::format("{}: {}", to_string(e.kind()), e.what());
      return;
    }
    AssetRecord rec;
    rec.id = src.stem().string();
    rec.source = src.filename().string();
    rec.mesh_hash = mesh_hash(canon->mesh);
    rec.extents = canon->normalizer.extents();
    fs::create_directories(out_dir / rec.id);
    CameraSampler sampler(cfg.cameras, asset_seed(cfg.seed, idx));
    for (int v = 0; v < cfg.views_per_asset; ++v) {
      const CameraPose pose = sampler.sample();
      const auto rendered = rasterize(canon->mesh, canon->normalizer, pose);
      const std::string rel = fmt::format("{}/view_{:03d}.ccm", rec.id, v);
      write_ccm(rendered.ccm, out_dir / rel, rec.mesh_hash);
      rec.views.push_back({rel, pose});
    }
    outcomes[idx].record = std::move(rec);
  });

  DatasetManifest manifest;
  manifest.config = cfg;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (outcomes[i].record) {
      manifest.assets.push_back(std::move(*outcomes[i].record));
    } else {
      fmt::print(stderr, "warning: skipping '{}': {}\n", sources[i].string(), outcomes[i].error);
      manifest.skipped.push_back({sources[i].filename().string(), outcomes[i].error});
    }
  }
  if (manifest.assets.empty()) {
    throw Error(ErrorKind::InvalidArgument, fmt::format("no loadable meshes in '{}'", mesh_dir.string()));
  }
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace canonlift
