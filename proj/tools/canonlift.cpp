// SPDX-License-Identifier: Apache-2.0
//
// canonlift command-line front end: ccm-gen, lift, eval, inspect.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "canonlift/error.hpp"
#include "canonlift/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace canonlift;

namespace {

// JSON config files: {"<subcommand>": {"<flag name>": value, ...}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const CLI::App* sub : app->get_subcommands({})) {
      json s = json::parse(to_config(sub, default_also, false, ""));
      if (!s.empty()) j[sub->get_name()] = s;
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        collect(value, nested, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

void add_camera_flags(CLI::App* cmd, CameraSamplerConfig& cam) {
  cmd->add_option("--width", cam.width, "image width")->capture_default_str();
  cmd->add_option("--height", cam.height, "image height")->capture_default_str();
  cmd->add_option("--fov", cam.fov_deg, "vertical field of view in degrees")->capture_default_str();
  cmd->add_option("--dist-min", cam.distance_min)->capture_default_str();
  cmd->add_option("--dist-max", cam.distance_max)->capture_default_str();
  cmd->add_option("--elev-min", cam.elevation_min_deg)->capture_default_str();
  cmd->add_option("--elev-max", cam.elevation_max_deg)->capture_default_str();
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed for '{}'", path.string()));
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

struct GenArgs {
  fs::path meshes;
  fs::path out;
  DatasetConfig cfg;
};

int run_ccm_gen(const GenArgs& a) {
  const DatasetManifest m = dataset_gen(a.meshes, a.cfg, a.out);
  std::size_t views = 0;
  for (const auto& asset : m.assets) views += asset.views.size();
  fmt::print("{}\n", json{{"manifest", (a.out / "manifest.json").string()},
                          {"assets", m.assets.size()},
                          {"views", views},
                          {"skipped", m.skipped.size()}}
                         .dump());
  return 0;
}

struct LiftArgs {
  fs::path manifest;
  std::string asset;
  fs::path out;
  fs::path log;
  fs::path preview_dir;
  fs::path prior_config;
  int preview_every = 0;
  double ori_sigma = 0.25;
  LiftConfig cfg;
};

int run_lift(LiftArgs a) {
  const DatasetManifest m = read_manifest(a.manifest);
  const fs::path root = a.manifest.parent_path();
  const AssetRecord& asset = m.asset(a.asset);
  PriorConfig pc;
  if (!a.prior_config.empty()) pc = prior_config_from_json(read_json(a.prior_config));
  const NoiseSchedule schedule = pc.schedule();
  const AxisNormalizer n(asset.extents);

  a.cfg.cameras.width = m.config.cameras.width;
  a.cfg.cameras.height = m.config.cameras.height;
  const BankOraclePrior align(load_bank(m, root, a.asset), schedule, pc.pose_threshold_deg);
  // Without an appearance model the original-SDS hook gets a pose-agnostic
  // Gaussian prior centered on the middle of the normalized cube.
  std::optional<GaussianOraclePrior> ori;
  if (a.cfg.lambda_ori > 0.0) {
    ori.emplace(Image(a.cfg.cameras.width, a.cfg.cameras.height, 0.5), a.ori_sigma, schedule);
  }

  LiftObserver observer;
  if (a.preview_every > 0 && !a.preview_dir.empty()) {
    fs::create_directories(a.preview_dir);
    observer = [&](int it, const DensityGrid&, const CameraPose& pose, const VolumeRender& render) {
      if ((it + 1) % a.preview_every != 0) return;
      const CoordMap map = coord_map_from_render(render, pose, asset.extents);
      write_png16(map, a.preview_dir / fmt::format("iter_{:06d}.png", it + 1));
    };
  }
  const LiftResult result = lift(a.cfg, align, ori ? &*ori : nullptr, n, schedule, observer);
  write_grid(result.grid, a.out);

  json log_entries = json::array();
  for (const auto& e : result.log) {
    log_entries.push_back({{"iteration", e.iteration},
                           {"loss", e.loss},
                           {"t_range", {e.range.lo, e.range.hi}},
                           {"t", e.t},
                           {"pose", e.pose_record()}});
  }
  const fs::path log_path = a.log.empty() ? fs::path(a.out.string() + ".log.json") : a.log;
  write_json({{"asset", asset.id},
              {"mesh_hash", asset.mesh_hash},
              {"config", lift_config_to_json(a.cfg)},
              {"prior", prior_config_to_json(pc)},
              {"log", log_entries}},
             log_path);
  fmt::print("{}\n", json{{"grid", a.out.string()},
                          {"log", log_path.string()},
                          {"iterations", a.cfg.iterations},
                          {"max_density", result.grid.max_density()}}
                         .dump());
  return 0;
}

struct EvalArgs {
  fs::path grid;
  fs::path mesh;
  fs::path ref_mesh;
  fs::path report;
  int resolution = 48;
  EvalOptions opts;
};

int run_eval(const EvalArgs& a) {
  if (a.grid.empty() == a.mesh.empty()) {
    throw Error(ErrorKind::InvalidArgument, "give exactly one of --grid or --mesh");
  }
  const CanonicalMesh reference = canonicalize(load_mesh(a.ref_mesh));
  EvalOptions opts = a.opts;
  EvalReport report;
  if (!a.grid.empty()) {
    report = eval_consistency(read_grid(a.grid), reference, opts);
  } else {
    report = eval_consistency(load_mesh(a.mesh), a.resolution, reference, opts);
  }
  const json j = eval_report_to_json(report);
  if (!a.report.empty()) write_json(j, a.report);
  fmt::print("{}\n", j.dump());
  return 0;
}

struct InspectArgs {
  fs::path ccm;
  fs::path png;
};

int run_inspect(const InspectArgs& a) {
  const CoordMap map = read_ccm(a.ccm);
  std::array<double, 3> lo{}, hi{}, mean{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  const std::size_t fg = map.foreground_count();
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (!map.foreground(x, y)) continue;
      const Vec3 v = map.value(x, y);
      for (std::size_t c = 0; c < 3; ++c) {
        lo[c] = std::min(lo[c], v[static_cast<int>(c)]);
        hi[c] = std::max(hi[c], v[static_cast<int>(c)]);
        mean[c] += v[static_cast<int>(c)] / static_cast<double>(fg);
      }
    }
  }
  json stats = nullptr;
  if (fg > 0) stats = {{"min", lo}, {"max", hi}, {"mean", mean}};
  const json sidecar = read_json(sidecar_path(a.ccm));
  if (!a.png.empty()) write_png16(map, a.png);
  fmt::print("{}\n", json{{"file", a.ccm.string()},
                          {"width", map.width()},
                          {"height", map.height()},
                          {"foreground", fg},
                          {"foreground_fraction", static_cast<double>(fg) / static_cast<double>(map.pixel_count())},
                          {"channels", stats},
                          {"extents", {map.extents().x(), map.extents().y(), map.extents().z()}},
                          {"pose", pose_to_json(map.pose())},
                          {"mesh_hash", sidecar.value("mesh_hash", "")}}
                         .dump(2));
  return 0;
}

void report_error(std::string_view kind, const std::string& message) {
  std::cerr << json{{"error", std::string(kind)}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"canonical coordinate map datasets and pose-conditioned lifting"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file mirroring the command-line flags, grouped by subcommand");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("ccm-gen", "render a CCM dataset from a directory of meshes");
  gen_cmd->add_option("--meshes", gen.meshes, "directory of .obj meshes")->required();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--views", gen.cfg.views_per_asset, "views per asset")->capture_default_str();
  gen_cmd->add_option("--seed", gen.cfg.seed)->capture_default_str();
  add_camera_flags(gen_cmd, gen.cfg.cameras);

  LiftArgs lift_args;
  auto* lift_cmd = app.add_subcommand("lift", "optimize a density grid against a manifest-built bank prior");
  lift_cmd->add_option("--manifest", lift_args.manifest)->required();
  lift_cmd->add_option("--asset", lift_args.asset)->required();
  lift_cmd->add_option("--out", lift_args.out, "grid checkpoint (.dgr)")->required();
  lift_cmd->add_option("--log", lift_args.log, "run log path (default <out>.log.json)");
  lift_cmd->add_option("--iters", lift_args.cfg.iterations)->capture_default_str();
  lift_cmd->add_option("--seed", lift_args.cfg.seed)->capture_default_str();
  lift_cmd->add_option("--lr", lift_args.cfg.learning_rate)->capture_default_str();
  lift_cmd->add_option("--resolution", lift_args.cfg.resolution)->capture_default_str();
  lift_cmd->add_option("--views-per-iter", lift_args.cfg.views_per_iteration)->capture_default_str();
  lift_cmd->add_option("--lambda-align", lift_args.cfg.lambda_align)->capture_default_str();
  lift_cmd->add_option("--lambda-ori", lift_args.cfg.lambda_ori)->capture_default_str();
  lift_cmd->add_option("--ori-sigma", lift_args.ori_sigma)->capture_default_str();
  lift_cmd->add_option("--step", lift_args.cfg.render.step, "ray step, <= 0 for e_max/(2R)")->capture_default_str();
  lift_cmd->add_flag("--jitter", lift_args.cfg.render.jitter);
  lift_cmd->add_option("--init-density", lift_args.cfg.init_density)->capture_default_str();
  lift_cmd->add_option("--prior-config", lift_args.prior_config, "prior JSON {T, beta_start, ...}");
  lift_cmd->add_option("--preview-every", lift_args.preview_every, "write a preview PNG every N iterations");
  lift_cmd->add_option("--preview-dir", lift_args.preview_dir);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score a lifted grid or mesh against a reference mesh");
  eval_cmd->add_option("--grid", eval_args.grid);
  eval_cmd->add_option("--mesh", eval_args.mesh, "result mesh in canonicalized coordinates");
  eval_cmd->add_option("--ref-mesh", eval_args.ref_mesh)->required();
  eval_cmd->add_option("--report", eval_args.report);
  eval_cmd->add_option("--resolution", eval_args.resolution, "voxel resolution for --mesh")->capture_default_str();
  eval_cmd->add_option("--probe-views", eval_args.opts.probe_views)->capture_default_str();
  eval_cmd->add_option("--probe-seed", eval_args.opts.cameras.seed)->capture_default_str();
  eval_cmd->add_option("--iso-fraction", eval_args.opts.iso_fraction)->capture_default_str();
  eval_cmd->add_option("--min-iou", eval_args.opts.min_iou)->capture_default_str();
  eval_cmd->add_option("--max-chamfer", eval_args.opts.max_chamfer)->capture_default_str();

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "print CCM header and statistics");
  inspect_cmd->add_option("ccm", inspect_args.ccm)->required();
  inspect_cmd->add_option("--png", inspect_args.png, "write a 16-bit preview");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const bool missing_file = dynamic_cast<const CLI::FileError*>(&e) != nullptr;
    report_error(missing_file ? "io" : "usage", e.what());
    return missing_file ? 2 : 1;
  }

  try {
    if (*gen_cmd) return run_ccm_gen(gen);
    if (*lift_cmd) return run_lift(lift_args);
    if (*eval_cmd) return run_eval(eval_args);
    if (*inspect_cmd) return run_inspect(inspect_args);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return e.kind() == ErrorKind::Io ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    report_error("io", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
  return 1;
}
