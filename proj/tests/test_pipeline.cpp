// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "canonlift/pipeline.hpp"
#include "test_support.hpp"

using namespace canonlift;
using namespace canonlift::testing;
namespace fs = std::filesystem;

namespace {

void write_fixture_dir(const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "a_sphere.obj", format_obj(make_procedural(SphereSpec{})));
  write_text(dir / "b_box.obj", format_obj(make_procedural(BoxSpec{Vec3(2.0, 1.0, 1.0), Vec3::Zero()})));
  write_text(dir / "c_composite.obj", format_obj(make_procedural(CompositeSpec{})));
}

DatasetConfig small_dataset(int views) {
  DatasetConfig cfg;
  cfg.views_per_asset = views;
  cfg.cameras.width = 32;
  cfg.cameras.height = 32;
  cfg.seed = 9;
  return cfg;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  return n;
}

}  // namespace

TEST_CASE("dataset generation") {
  TempDir tmp("dataset");
  write_fixture_dir(tmp / "meshes");
  const DatasetManifest m = dataset_gen(tmp / "meshes", small_dataset(8), tmp / "out");

  REQUIRE(m.assets.size() == 3);
  CHECK(m.skipped.empty());
  CHECK(count_files(tmp / "out", ".ccm") == 24);
  CHECK(m.assets[0].id == "a_sphere");
  CHECK(m.assets[1].extents.isApprox(Vec3(1.0, 0.5, 0.5), 1e-12));
  CHECK_NOTHROW(validate_manifest(read_manifest(tmp / "out/manifest.json"), tmp / "out"));

  for (const auto& a : m.assets) {
    CHECK(a.views.size() == 8);
    for (const auto& v : a.views) {
      CHECK(v.pose.distance() >= 0.9 - 1e-9);
      CHECK(v.pose.distance() <= 1.1 + 1e-9);
      CHECK(v.pose.elevation_deg() >= -10.0 - 1e-9);
      CHECK(v.pose.elevation_deg() <= 45.0 + 1e-9);
      const CoordMap map = read_ccm(tmp / "out" / v.ccm);
      CHECK(map.width() == 32);
      CHECK(map.foreground_count() > 0);
    }
  }
  // Assets get distinct pose streams.
  CHECK(m.assets[0].views[0].pose.azimuth_deg() != m.assets[1].views[0].pose.azimuth_deg());

  SUBCASE("rerun is byte-identical") {
    dataset_gen(tmp / "meshes", small_dataset(8), tmp / "again");
    for (const auto& e : fs::recursive_directory_iterator(tmp / "out")) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), tmp / "out");
      CHECK(read_bytes(e.path()) == read_bytes(tmp / "again" / rel));
    }
  }
  SUBCASE("manifest round trip is byte-identical") {
    const std::string text = read_bytes(tmp / "out/manifest.json");
    CHECK(format_manifest(read_manifest(tmp / "out/manifest.json")) == text);
    CHECK(format_manifest(m) == text);
  }
  SUBCASE("bank loading") {
    const auto bank = load_bank(m, tmp / "out", "c_composite");
    REQUIRE(bank.size() == 8);
    CHECK(bank[3].pose.extrinsics().rotation.isApprox(m.assets[2].views[3].pose.extrinsics().rotation, 1e-12));
    CHECK(bank[3].image.width() == 32);
    CHECK_ERROR_KIND(load_bank(m, tmp / "out", "missing"), ErrorKind::InvalidArgument);
  }
  SUBCASE("validation catches damage") {
    fs::remove(tmp / "out" / m.assets[1].views[2].ccm);
    CHECK_THROWS_AS(validate_manifest(m, tmp / "out"), Error);
    DatasetManifest short_m = m;
    short_m.assets[0].views.pop_back();
    CHECK_ERROR_KIND(validate_manifest(short_m, tmp / "out"), ErrorKind::Parse);
  }
}

TEST_CASE("dataset generation skips unloadable meshes") {
  TempDir tmp("dataset_skip");
  write_fixture_dir(tmp / "meshes");
  write_text(tmp / "meshes/broken.obj", "v 0 0 0\nf 1 2 3\n");
  write_text(tmp / "meshes/notes.txt", "not a mesh");
  const DatasetManifest m = dataset_gen(tmp / "meshes", small_dataset(2), tmp / "out");
  CHECK(m.assets.size() == 3);
  REQUIRE(m.skipped.size() == 1);
  CHECK(m.skipped[0].source == "broken.obj");
  CHECK(!m.skipped[0].reason.empty());
  CHECK(read_manifest(tmp / "out/manifest.json").skipped.size() == 1);
}

TEST_CASE("dataset generation input errors") {
  TempDir tmp("dataset_err");
  fs::create_directories(tmp / "empty");
  CHECK_ERROR_KIND(dataset_gen(tmp / "empty", small_dataset(2), tmp / "out"), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(dataset_gen(tmp / "nowhere", small_dataset(2), tmp / "out"), ErrorKind::Io);
  write_fixture_dir(tmp / "meshes");
  CHECK_ERROR_KIND(dataset_gen(tmp / "meshes", small_dataset(0), tmp / "out"), ErrorKind::InvalidArgument);
  write_text(tmp / "bad.json", "{\"seed\": 1");
  CHECK_ERROR_KIND(read_manifest(tmp / "bad.json"), ErrorKind::Parse);
  write_text(tmp / "incomplete.json", "{\"seed\": 1}");
  CHECK_ERROR_KIND(read_manifest(tmp / "incomplete.json"), ErrorKind::Parse);
  CHECK_ERROR_KIND(read_manifest(tmp / "missing.json"), ErrorKind::Io);
}

TEST_CASE("asset seeds") {
  CHECK(asset_seed(1, 0) == asset_seed(1, 0));
  CHECK(asset_seed(1, 0) != asset_seed(1, 1));
  CHECK(asset_seed(1, 0) != asset_seed(2, 0));
}

TEST_CASE("chamfer distance") {
  const std::vector<Vec3> a{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK(chamfer_distance(a, a, 9.0) == 0.0);
  std::vector<Vec3> shifted;
  for (const auto& p : a) shifted.push_back(p + Vec3(0, 0.1, 0));
  CHECK(chamfer_distance(a, shifted, 9.0) == doctest::Approx(0.1));
  // One-sided means: {0} -> b is 0, b -> {0} is (0 + 1) / 2.
  CHECK(chamfer_distance({Vec3::Zero()}, a, 9.0) == doctest::Approx(0.25));
  CHECK(chamfer_distance({}, {}, 9.0) == 0.0);
  CHECK(chamfer_distance({}, a, 9.0) == 9.0);
  CHECK(chamfer_distance(a, {}, 9.0) == 9.0);

  // Brute force against random sets.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> p(50), q(70);
  for (auto& v : p) v = Vec3(u(rng), u(rng), u(rng));
  for (auto& v : q) v = Vec3(u(rng), u(rng), u(rng));
  auto one_sided = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    double s = 0.0;
    for (const auto& x : from) {
      double best = 1e9;
      for (const auto& y : to) best = std::min(best, (x - y).norm());
      s += best;
    }
    return s / static_cast<double>(from.size());
  };
  CHECK(chamfer_distance(p, q, 9.0) == doctest::Approx(0.5 * (one_sided(p, q) + one_sided(q, p))));
}

TEST_CASE("coordinate map from a volume render") {
  const CameraPose pose = orbit_camera(1.0, 0.0, 0.0, 45.0, 2, 1);
  VolumeRender r;
  r.value = Image(2, 1);
  r.opacity = {0.8, 0.3};
  r.value[0] = 0.4;
  r.value[1] = 0.8;
  r.value[2] = 0.2;
  r.value[3] = 0.1;
  const CoordMap m = coord_map_from_render(r, pose, Vec3::Ones());
  CHECK(m.foreground(0, 0));
  CHECK(m.value(0, 0).isApprox(Vec3(0.5, 1.0, 0.25), 1e-6));
  CHECK_FALSE(m.foreground(1, 0));
  CHECK(coord_map_from_render(r, pose, Vec3::Ones(), 0.2).foreground(1, 0));
  r.opacity.pop_back();
  CHECK_ERROR_KIND(coord_map_from_render(r, pose, Vec3::Ones()), ErrorKind::ShapeMismatch);
}

TEST_CASE("consistency evaluation") {
  const CanonicalMesh composite = canonicalize(make_procedural(CompositeSpec{}));
  const int r = 48;
  const Box3 domain{-0.5 * composite.normalizer.extents(), 0.5 * composite.normalizer.extents()};
  const OccupancyGrid ref = voxelize(composite.mesh, domain, r);
  EvalOptions opts;

  SUBCASE("the reference itself") {
    const EvalReport rep = eval_consistency(density_from_occupancy(ref, 500.0), composite, opts);
    CHECK(rep.iou == 1.0);
    CHECK(rep.chamfer < 2.0 / 64.0);
    CHECK(rep.mirrored_iou < 0.5);
    CHECK(rep.pass);
    CHECK(rep.probe_views == 8);
    for (int a = 0; a < 3; ++a) {
      CHECK(rep.coverage_min[a] >= 0.0);
      CHECK(rep.coverage_max[a] <= 1.0);
      CHECK(rep.coverage_min[a] < rep.coverage_max[a]);
    }
    const nlohmann::json j = eval_report_to_json(rep);
    CHECK(j.at("pass") == true);
    CHECK(j.at("thresholds").at("min_iou") == 0.7);
    CHECK(j.at("coverage").at("min").size() == 3);
  }
  SUBCASE("the reference mesh as a mesh result") {
    const EvalReport rep = eval_consistency(composite.mesh, r, composite, opts);
    CHECK(rep.iou == 1.0);
    CHECK(rep.chamfer < 1e-6);
    CHECK(rep.pass);
  }
  SUBCASE("a mirrored reconstruction fails") {
    const EvalReport rep = eval_consistency(density_from_occupancy(ref.mirrored_x(), 500.0), composite, opts);
    CHECK(rep.iou < 0.5);
    CHECK(rep.mirrored_iou == 1.0);
    CHECK_FALSE(rep.pass);
  }
  SUBCASE("empty results") {
    const EvalReport rep = eval_consistency(DensityGrid(r, composite.normalizer.extents()), composite, opts);
    CHECK(rep.iou == 0.0);
    CHECK(rep.chamfer == doctest::Approx(composite.normalizer.extents().norm()));
    CHECK_FALSE(rep.pass);
    const EvalReport mesh_rep = eval_consistency(Mesh{}, r, composite, opts);
    CHECK(mesh_rep.iou == 0.0);
    CHECK_FALSE(mesh_rep.pass);
  }
  SUBCASE("domain mismatch") {
    CHECK_ERROR_KIND(eval_consistency(DensityGrid(r, Vec3::Ones()), composite, opts), ErrorKind::ExtentMismatch);
  }
  SUBCASE("probe views are seeded") {
    const EvalReport a = eval_consistency(density_from_occupancy(ref, 500.0), composite, opts);
    opts.cameras.seed = 1;
    const EvalReport b = eval_consistency(density_from_occupancy(ref, 500.0), composite, opts);
    CHECK(a.chamfer != b.chamfer);
    opts.probe_views = 0;
    CHECK_ERROR_KIND(eval_consistency(density_from_occupancy(ref, 500.0), composite, opts),
                     ErrorKind::InvalidArgument);
  }
}
