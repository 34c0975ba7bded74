// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "canonlift/geometry.hpp"
#include "test_support.hpp"

using namespace canonlift;
using namespace canonlift::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const TempDir& tmp, const std::string& args) {
  const fs::path err = tmp / "stderr.txt";
  const std::string cmd = std::string(CANONLIFT_CLI) + " " + args + " 2> " + err.string();
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_bytes(err);
  return r;
}

nlohmann::json last_json_line(const std::string& text) {
  const auto end = text.find_last_not_of('\n');
  const auto start = text.rfind('\n', end);
  return nlohmann::json::parse(text.substr(start == std::string::npos ? 0 : start + 1));
}

}  // namespace

TEST_CASE("command line usage errors") {
  TempDir tmp("cli_usage");
  CHECK(run(tmp, "--help").code == 0);
  CHECK(run(tmp, "").code == 1);
  CHECK(run(tmp, "frobnicate").code == 1);
  const Run bad = run(tmp, "eval --grid x.dgr");
  CHECK(bad.code == 1);
  CHECK(last_json_line(bad.err).at("error") == "usage");
}

TEST_CASE("command line end to end") {
  TempDir tmp("cli_e2e");
  const std::string d = tmp.path().string();
  fs::create_directories(tmp / "meshes");
  write_text(tmp / "meshes/box.obj", format_obj(make_procedural(BoxSpec{Vec3(2.0, 1.0, 1.0), Vec3::Zero()})));
  write_text(tmp / "meshes/sphere.obj", format_obj(make_procedural(SphereSpec{})));

  const std::string gen = "ccm-gen --meshes " + d + "/meshes --views 4 --width 16 --height 16 --seed 3 --out ";
  const Run g1 = run(tmp, gen + d + "/ds1");
  REQUIRE(g1.code == 0);
  CHECK(nlohmann::json::parse(g1.out).at("assets") == 2);
  REQUIRE(run(tmp, gen + d + "/ds2").code == 0);
  CHECK(read_bytes(tmp / "ds1/manifest.json") == read_bytes(tmp / "ds2/manifest.json"));
  CHECK(read_bytes(tmp / "ds1/box/view_002.ccm") == read_bytes(tmp / "ds2/box/view_002.ccm"));

  const Run ins = run(tmp, "inspect " + d + "/ds1/box/view_000.ccm --png " + d + "/v0.png");
  REQUIRE(ins.code == 0);
  const auto info = nlohmann::json::parse(ins.out);
  CHECK(info.at("width") == 16);
  CHECK(fs::exists(tmp / "v0.png"));

  const std::string lift = "lift --manifest " + d + "/ds1/manifest.json --asset box --iters 6 --resolution 10 --seed 4";
  REQUIRE(run(tmp, lift + " --out " + d + "/a.dgr").code == 0);
  REQUIRE(run(tmp, lift + " --out " + d + "/b.dgr --log " + d + "/b.log.json").code == 0);
  CHECK(read_bytes(tmp / "a.dgr") == read_bytes(tmp / "b.dgr"));
  CHECK(read_bytes(tmp / "a.dgr.log.json") == read_bytes(tmp / "b.log.json"));
  const auto log = nlohmann::json::parse(read_bytes(tmp / "a.dgr.log.json"));
  CHECK(log.at("asset") == "box");
  REQUIRE(log.at("log").size() == 6);
  CHECK(log.at("log")[0].contains("t_range"));
  CHECK(log.at("log")[0].contains("pose"));

  const Run ev = run(tmp, "eval --grid " + d + "/a.dgr --ref-mesh " + d + "/meshes/box.obj --probe-views 2 --report " +
                              d + "/report.json");
  REQUIRE(ev.code == 0);
  const auto report = nlohmann::json::parse(read_bytes(tmp / "report.json"));
  CHECK(report.contains("iou"));
  CHECK(report.contains("chamfer"));
  CHECK(report.at("probe_views") == 2);
  CHECK(nlohmann::json::parse(ev.out) == report);

  SUBCASE("config file supplies subcommand options") {
    write_text(tmp / "cfg.json", R"({"lift": {"iters": 3, "resolution": 8}})");
    REQUIRE(run(tmp, "--config " + d + "/cfg.json " + lift.substr(0, lift.find(" --iters")) + " --out " + d +
                         "/c.dgr").code == 0);
    CHECK(nlohmann::json::parse(read_bytes(tmp / "c.dgr.log.json")).at("log").size() == 3);
  }
  SUBCASE("runtime errors map to exit codes") {
    const Run missing = run(tmp, "inspect " + d + "/nope.ccm");
    CHECK(missing.code == 2);
    CHECK(last_json_line(missing.err).at("error") == "io");
    write_text(tmp / "junk.ccm", "CCM1 but not really");
    const Run junk = run(tmp, "inspect " + d + "/junk.ccm");
    CHECK(junk.code == 1);
    CHECK(last_json_line(junk.err).at("error") == "parse");
    const Run no_asset = run(tmp, "lift --manifest " + d + "/ds1/manifest.json --asset torus --out " + d + "/t.dgr");
    CHECK(no_asset.code == 1);
    const Run no_dir = run(tmp, "ccm-gen --meshes " + d + "/nowhere --out " + d + "/ds3");
    CHECK(no_dir.code == 2);
    const Run wrong_ref =
        run(tmp, "eval --grid " + d + "/a.dgr --ref-mesh " + d + "/meshes/sphere.obj --probe-views 1");
    CHECK(wrong_ref.code == 1);
    CHECK(last_json_line(wrong_ref.err).at("error") == "extent_mismatch");
  }
}
