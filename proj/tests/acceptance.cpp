// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance [--only 1,2,...] [--known-fail 9,...] [--work DIR]
// Exit status is 0 when every criterion passes or is listed in --known-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "canonlift/camera.hpp"
#include "canonlift/ccm_render.hpp"
#include "canonlift/diffusion.hpp"
#include "canonlift/geometry.hpp"
#include "canonlift/lifting.hpp"
#include "canonlift/pipeline.hpp"

using namespace canonlift;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;
};

std::vector<CanonicalMesh> fixtures() {
  std::vector<CanonicalMesh> out;
  for (const ShapeSpec& s : {ShapeSpec{SphereSpec{}}, ShapeSpec{BoxSpec{}}, ShapeSpec{TorusSpec{}},
                             ShapeSpec{CompositeSpec{}}}) {
    out.push_back(canonicalize(make_procedural(s)));
  }
  return out;
}

double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    if (slurp(e.path()) != slurp(b / fs::relative(e.path(), a))) return false;
  }
  std::size_t other = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) other += e.is_regular_file() ? 1 : 0;
  return other == files;
}

Outcome camera_protocol() {
  const CameraSamplerConfig cfg;
  CameraSampler sampler(cfg, 1);
  std::vector<double> d, el, az;
  bool bounds = true;
  for (int i = 0; i < 10000; ++i) {
    const CameraPose p = sampler.sample();
    d.push_back(p.distance());
    el.push_back(p.elevation_deg());
    az.push_back(p.azimuth_deg());
    bounds = bounds && p.fov_deg() == 45.0 && p.distance() >= 0.9 - 1e-12 && p.distance() <= 1.1 + 1e-12 &&
             p.elevation_deg() >= -10.0 - 1e-9 && p.elevation_deg() <= 45.0 + 1e-9;
  }
  const double ks = std::max({ks_uniform(d, 0.9, 1.1), ks_uniform(el, -10.0, 45.0), ks_uniform(az, 0.0, 360.0)});
  return {bounds && ks < 0.02, fmt::format("bounds {}, max KS {:.4f}", bounds ? "ok" : "violated", ks), {}};
}

Outcome ccm_definition() {
  double worst = 0.0;
  bool range = true;
  for (const auto& c : fixtures()) {
    CameraSampler sampler(CameraSamplerConfig{}, 2);
    for (int v = 0; v < 16; ++v) {
      const CameraPose pose = sampler.sample();
      const RenderResult r = rasterize(c.mesh, c.normalizer, pose);
      for (int y = 0; y < pose.height(); ++y) {
        for (int x = 0; x < pose.width(); ++x) {
          if (!r.ccm.foreground(x, y)) continue;
          const Vec3 q = r.ccm.value(x, y);
          range = range && q.minCoeff() >= 0.0 && q.maxCoeff() <= 1.0;
          const Vec3 on_ray = unproject(pose, Vec2(x + 0.5, y + 0.5), r.depth.at(x, y));
          worst = std::max(worst, (c.normalizer.denormalize(q) - on_ray).norm());
        }
      }
    }
  }
  return {worst < 1e-3 && range, fmt::format("max ray distance {:.2e}, channels in [0,1]: {}", worst, range), {}};
}

Outcome renderer_cross_validation() {
  double worst_agree = 1.0;
  double worst_value = 0.0;
  for (const auto& c : fixtures()) {
    CameraSampler sampler(CameraSamplerConfig{}, 3);
    for (int v = 0; v < 8; ++v) {
      const CameraPose pose = sampler.sample();
      const RenderResult a = rasterize(c.mesh, c.normalizer, pose);
      const RenderResult b = raycast(c.mesh, c.normalizer, pose);
      std::size_t agree = 0;
      for (int y = 0; y < pose.height(); ++y) {
        for (int x = 0; x < pose.width(); ++x) {
          agree += a.ccm.foreground(x, y) == b.ccm.foreground(x, y);
          bool interior = x > 0 && y > 0 && x + 1 < pose.width() && y + 1 < pose.height();
          for (int dy = -1; dy <= 1 && interior; ++dy)
            for (int dx = -1; dx <= 1 && interior; ++dx)
              interior = a.ccm.foreground(x + dx, y + dy) && b.ccm.foreground(x + dx, y + dy);
          if (interior) worst_value = std::max(worst_value, (a.ccm.value(x, y) - b.ccm.value(x, y)).cwiseAbs().maxCoeff());
        }
      }
      worst_agree = std::min(worst_agree, static_cast<double>(agree) / static_cast<double>(a.ccm.pixel_count()));
    }
  }
  return {worst_agree >= 0.99 && worst_value < 1e-4,
          fmt::format("min mask agreement {:.4f}, max interior difference {:.2e}", worst_agree, worst_value), {}};
}

Outcome anisotropic_normalization() {
  const CanonicalMesh c = canonicalize(make_procedural(BoxSpec{Vec3(2.0, 1.0, 1.0), Vec3(0.3, -0.2, 0.1)}));
  bool corners = true;
  for (const Vec3& v : c.mesh.vertices()) {
    const Vec3 q = c.normalizer.normalize(v);
    for (int a = 0; a < 3; ++a) corners = corners && (q[a] == 0.0 || q[a] == 1.0);
  }
  const bool ok = c.scale == 0.5 && c.normalizer.extents() == Vec3(1.0, 0.5, 0.5) && corners;
  return {ok,
          fmt::format("scale {}, extents ({}, {}, {}), corners exact: {}", c.scale, c.normalizer.extents().x(),
                      c.normalizer.extents().y(), c.normalizer.extents().z(), corners),
          {}};
}

Outcome oracle_exactness() {
  const NoiseSchedule schedule = PriorConfig{}.schedule();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const CameraPose pose = orbit_camera(1.0, 10.0, 0.0, 45.0, 4, 4);

  // Gaussian prior against per-element self-normalized importance sampling.
  Image mu(4, 4);
  for (double& v : mu.data()) v = u(rng);
  const GaussianOraclePrior gauss(mu, 1.0, schedule);
  double worst_gauss = 0.0;
  for (int t : {200, 500, 900}) {
    const double ab = schedule.alpha_bar(t);
    Image zt(4, 4);
    for (std::size_t i = 0; i < zt.size(); ++i) zt[i] = std::sqrt(ab) * (mu[i] + g(rng)) + std::sqrt(1 - ab) * g(rng);
    const Image eps_hat = gauss.predict_eps(pose, zt, t);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < zt.size(); ++i) {
      double wsum = 0.0;
      double acc = 0.0;
      for (int k = 0; k < 100000; ++k) {
        const double e = (zt[i] - std::sqrt(ab) * (mu[i] + g(rng))) / std::sqrt(1 - ab);
        const double w = std::exp(-0.5 * e * e);
        wsum += w;
        acc += w * e;
      }
      num += std::pow(acc / wsum - eps_hat[i], 2);
      den += eps_hat[i] * eps_hat[i];
    }
    worst_gauss = std::max(worst_gauss, std::sqrt(num / den));
  }

  // Bank prior against a direct long-double mixture posterior.
  double worst_bank = 0.0;
  for (int size : {1, 4, 8}) {
    std::vector<BankEntry> bank;
    for (int i = 0; i < size; ++i) {
      Image img(4, 4);
      for (double& v : img.data()) v = u(rng);
      bank.push_back({img, orbit_camera(1.0, 5.0 + i, 3.0 * i, 45.0, 4, 4)});
    }
    const BankOraclePrior prior(bank, schedule, 15.0);
    const CameraPose query = orbit_camera(1.0, 8.0, 6.0, 45.0, 4, 4);
    for (int t : {50, 400, 950}) {
      const double ab = schedule.alpha_bar(t);
      Image zt(4, 4);
      const Image& src = bank[rng() % bank.size()].image;
      for (std::size_t i = 0; i < zt.size(); ++i) zt[i] = std::sqrt(ab) * src[i] + std::sqrt(1 - ab) * g(rng);
      long double total = 0.0L;
      std::vector<long double> mean(zt.size(), 0.0L);
      for (const auto& e : bank) {
        const double cosang = std::clamp(e.pose.view_direction().dot(query.view_direction()), -1.0, 1.0);
        if (std::acos(cosang) * 180.0 / std::numbers::pi >= 15.0) continue;
        long double sq = 0.0L;
        for (std::size_t i = 0; i < zt.size(); ++i) {
          const long double d = zt[i] - std::sqrt(static_cast<long double>(ab)) * e.image[i];
          sq += d * d;
        }
        const long double p = std::exp(-sq / (2.0L * (1.0L - ab)));
        total += p;
        for (std::size_t i = 0; i < zt.size(); ++i) mean[i] += p * e.image[i];
      }
      const Image eps_hat = prior.predict_eps(query, zt, t);
      for (std::size_t i = 0; i < zt.size(); ++i) {
        const long double expected =
            (zt[i] - std::sqrt(static_cast<long double>(ab)) * mean[i] / total) / std::sqrt(1.0L - ab);
        worst_bank = std::max(worst_bank, static_cast<double>(std::fabs(expected - eps_hat[i])));
      }
    }
  }
  return {worst_gauss < 0.02 && worst_bank < 1e-6,
          fmt::format("Gaussian relative error {:.4f}, bank max error {:.2e}", worst_gauss, worst_bank), {}};
}

class EchoDenoiser final : public Denoiser {
 public:
  Image predict_eps(const CameraPose&, const Image& noisy, int) const override {
    return Image(noisy.width(), noisy.height());
  }
  Image predict_eps_observed(const CameraPose&, const Image&, int, const Image& injected) const override {
    return injected;
  }
};

Outcome sds_fixed_point() {
  const NoiseSchedule schedule = PriorConfig{}.schedule();
  const EchoDenoiser echo;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool zero = true;
  CameraSampler sampler(CameraSamplerConfig{}, 6);
  for (int t : {0, 20, 500, 979, 999}) {
    Image z(64, 64);
    for (double& v : z.data()) v = u(rng);
    const Image grad = sds_grad(echo, z, sampler.sample(), t, rng, schedule);
    zero = zero && std::all_of(grad.data().begin(), grad.data().end(), [](double v) { return v == 0.0; });
  }
  LiftConfig cfg;
  cfg.iterations = 100;
  const AxisNormalizer n(Vec3(1.0, 0.5, 0.75));
  const LiftResult res = lift(cfg, echo, nullptr, n, schedule);
  const DensityGrid init =
      DensityGrid::centered_blob(cfg.resolution, n.extents(), cfg.init_density, cfg.init_radius_fraction);
  const bool unchanged = res.grid.data() == init.data();
  return {zero && unchanged, fmt::format("sds_grad exactly zero: {}, grid bit-unchanged after 100 iterations: {}",
                                         zero, unchanged),
          {}};
}

Outcome annealing_endpoints() {
  const AnnealConfig mesh = AnnealConfig::mesh_pipeline();
  const AnnealConfig volume = AnnealConfig::volume_pipeline();
  const TimeRange m0 = anneal_range(0.0, mesh);
  const TimeRange m1 = anneal_range(1.0, mesh);
  const TimeRange v0 = anneal_range(0.0, volume);
  const TimeRange v1 = anneal_range(1.0, volume);
  const bool ok = m0.lo == 0.5 && m0.hi == 0.98 && m1.lo == 0.05 && m1.hi == 0.5 && v0.lo == 0.02 && v0.hi == 0.98 &&
                  v1.lo == 0.02 && v1.hi == 0.5;
  return {ok,
          fmt::format("mesh [{}, {}] -> [{}, {}], volume [{}, {}] -> [{}, {}]", m0.lo, m0.hi, m1.lo, m1.hi, v0.lo,
                      v0.hi, v1.lo, v1.hi),
          {}};
}

Outcome gradient_check() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::normal_distribution<double> g;
  DensityGrid grid(8, Vec3::Ones());
  for (double& v : grid.data()) v = u(rng);
  CameraSamplerConfig cam;
  cam.width = 16;
  cam.height = 16;
  const CameraPose pose = sample_camera(rng, cam);
  const AxisNormalizer n(Vec3::Ones());
  Image up(16, 16);
  for (double& v : up.data()) v = g(rng);
  std::vector<double> up_o(256);
  for (double& v : up_o) v = g(rng);
  auto loss = [&](const DensityGrid& gr) {
    const VolumeRender r = render_ccm_volume(gr, n, pose);
    double l = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) l += up[i] * r.value[i];
    for (std::size_t i = 0; i < up_o.size(); ++i) l += up_o[i] * r.opacity[i];
    return l;
  };
  const auto grad = render_ccm_grad(grid, n, pose, up, &up_o);
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (std::abs(grad[i]) > 1e-6) cells.push_back(i);
  std::shuffle(cells.begin(), cells.end(), rng);
  if (cells.size() < 20) return {false, "fewer than 20 cells receive gradient", {}};
  double worst = 0.0;
  for (std::size_t c = 0; c < 20; ++c) {
    const std::size_t i = cells[c];
    const double orig = grid.data()[i];
    const double h = 1e-5;
    grid.data()[i] = orig + h;
    const double lp = loss(grid);
    grid.data()[i] = orig - h;
    const double lm = loss(grid);
    grid.data()[i] = orig;
    const double fd = (lp - lm) / (2 * h);
    worst = std::max(worst, std::abs(grad[i] - fd) / std::abs(fd));
  }
  return {worst < 1e-2, fmt::format("max relative error {:.2e} over 20 cells", worst), {}};
}

struct LiftRun {
  std::string name;
  ShapeSpec spec;
};

// Criteria 9 and 10 share the generated dataset and the lifted grids.
struct LiftingStage {
  fs::path work;
  std::vector<std::pair<std::string, double>> seconds;  // per fixture, lift + eval
  Outcome recovery;
  Outcome determinism;
};

LiftingStage lifting_stage(const fs::path& work) {
  LiftingStage st;
  st.work = work;
  const std::vector<LiftRun> runs{{"box", BoxSpec{}}, {"composite", CompositeSpec{}}, {"sphere", SphereSpec{}}};
  fs::create_directories(work / "meshes");
  for (const auto& r : runs) {
    std::ofstream(work / "meshes" / (r.name + ".obj")) << format_obj(make_procedural(r.spec));
  }
  DatasetConfig dcfg;
  dcfg.views_per_asset = 32;
  dcfg.seed = 2024;
  const DatasetManifest manifest = dataset_gen(work / "meshes", dcfg, work / "bank_a");
  dataset_gen(work / "meshes", dcfg, work / "bank_b");
  std::size_t files = 0;
  const bool gen_same = same_tree(work / "bank_a", work / "bank_b", files);

  const PriorConfig pc;
  const NoiseSchedule schedule = pc.schedule();
  LiftConfig cfg;
  cfg.seed = 17;
  bool all_pass = true;
  std::vector<std::string> parts;
  bool lift_same = false;
  for (const auto& r : runs) {
    const auto t0 = std::chrono::steady_clock::now();
    const CanonicalMesh ref = canonicalize(make_procedural(r.spec));
    const BankOraclePrior prior(load_bank(manifest, work / "bank_a", r.name), schedule, pc.pose_threshold_deg);
    const LiftResult res = lift(cfg, prior, nullptr, ref.normalizer, schedule);
    write_grid(res.grid, work / (r.name + ".dgr"));
    const EvalReport rep = eval_consistency(res.grid, ref, EvalOptions{});
    st.seconds.emplace_back(r.name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

    bool pass = rep.iou >= 0.7 && rep.chamfer < 0.05;
    std::string part = fmt::format("{} IoU {:.3f} chamfer {:.4f}", r.name, rep.iou, rep.chamfer);
    if (r.name == "composite") {
      pass = pass && rep.mirrored_iou < 0.5;
      part += fmt::format(" mirrored IoU {:.3f}", rep.mirrored_iou);
      const LiftResult again = lift(cfg, prior, nullptr, ref.normalizer, schedule);
      write_grid(again.grid, work / "composite_again.dgr");
      lift_same = slurp(work / "composite.dgr") == slurp(work / "composite_again.dgr");
    }
    all_pass = all_pass && pass;
    parts.push_back(part);

    // Diagnostic only: occupancy IoU if the relative iso level were lower.
    const OccupancyGrid truth = voxelize(ref.mesh, res.grid.domain(), res.grid.resolution());
    std::string sweep;
    for (double f : {0.2, 0.3, 0.4, 0.5}) {
      sweep += fmt::format(" {:.1f}:{:.3f}", f, iou(res.grid.occupancy(relative_iso(res.grid, f)), truth));
    }
    st.recovery.notes.push_back(fmt::format("{} max density {:.2f}; IoU by iso fraction{}", r.name,
                                            res.grid.max_density(), sweep));
  }
  st.recovery.pass = all_pass;
  st.recovery.detail = fmt::format("{}", fmt::join(parts, "; "));
  st.determinism.pass = gen_same && lift_same;
  st.determinism.detail =
      fmt::format("ccm-gen rerun identical over {} files: {}, lift rerun grid identical: {}", files, gen_same, lift_same);
  return st;
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::set<int> known_fail;
  fs::path work = fs::temp_directory_path() / fmt::format("canonlift_acceptance_{}", std::random_device{}());
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only") {
      only = parse_list(argv[i + 1]);
    } else if (flag == "--known-fail") {
      known_fail = parse_list(argv[i + 1]);
    } else if (flag == "--work") {
      work = argv[i + 1];
    } else {
      fmt::print(stderr, "unknown flag {}\n", flag);
      return 2;
    }
  }
  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

  int unexpected = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o, double secs, double budget) {
    const bool in_time = secs <= budget;
    const bool pass = o.pass && in_time;
    fmt::print("{} {:>2} {}: {} [{:.1f} s, budget {:.0f} s]{}\n", pass ? "PASS" : "FAIL", id, name, o.detail, secs,
               budget, pass || known_fail.count(id) == 0 ? "" : " (known failure)");
    for (const auto& note : o.notes) fmt::print("        {}\n", note);
    if (!pass && known_fail.count(id) == 0) ++unexpected;
    std::fflush(stdout);
  };
  auto timed = [&](int id, const std::string& name, double budget, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what()), {}};
    }
    report(id, name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), budget);
  };

  timed(1, "camera protocol", 5, camera_protocol);
  timed(2, "CCM definition", 10, ccm_definition);
  timed(3, "renderer cross-validation", 30, renderer_cross_validation);
  timed(4, "anisotropic normalization", 1, anisotropic_normalization);
  timed(5, "oracle prior exactness", 60, oracle_exactness);
  timed(6, "SDS fixed point", 30, sds_fixed_point);
  timed(7, "annealing endpoints", 1, annealing_endpoints);
  timed(8, "volume renderer gradient", 60, gradient_check);

  if (wanted(9) || wanted(10)) {
    LiftingStage st;
    try {
      st = lifting_stage(work);
    } catch (const std::exception& e) {
      st.recovery = {false, fmt::format("threw: {}", e.what()), {}};
      st.determinism = st.recovery;
    }
    double slowest = 0.0;
    std::string times;
    for (const auto& [name, s] : st.seconds) {
      slowest = std::max(slowest, s);
      times += fmt::format(" {} {:.0f} s", name, s);
    }
    if (!times.empty()) st.recovery.notes.push_back("per-fixture runtime:" + times);
    if (wanted(9)) report(9, "self-lifting recovery", st.recovery, slowest, 600);
    if (wanted(10)) report(10, "determinism", st.determinism, 0.0, 600);
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return unexpected == 0 ? 0 : 1;
}
