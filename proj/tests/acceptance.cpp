// Acceptance checks. Usage: ldis_acceptance [criterion ...]; runs all by default.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ldis/evaluation.hpp"
#include "ldis/fit.hpp"
#include "ldis/oracle.hpp"
#include "ldis/synth.hpp"
#include "ldis/synthesis.hpp"

using namespace ldis;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

AffineParams scaled(AffineParams a, double k) {
  for (double& v : a.a) v *= k;
  return a;
}

// Ground-truth latents for a scene at temperature tau. With `compensate`,
// A is divided by the carried alpha so each layer moves by exactly its flow.
Latents gt_latents(const Scene& s, double tau, bool compensate) {
  BinningConfig bc;
  bc.tau = tau;
  const double k = compensate ? 1.0 / bin_probability(0.9, bc) : 1.0;
  Latents lat{scaled(s.params_fg, k), scaled(s.params_bg, k), AlphaField(s.frame1.width(), s.frame1.height())};
  for (std::size_t i = 0; i < lat.p.pixel_count(); ++i) lat.p.at(i) = s.mask1.at(i) ? 0.9 : 0.1;
  return lat;
}

// Mean |I2 - I2hat| over pixels and channels outside the empty-pixel mask.
double valid_mean_abs(const Image& frame2, const SynthesisTape& t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < frame2.pixel_count(); ++i) {
    if (t.disoccluded.at(i)) continue;
    for (int c = 0; c < 3; ++c) sum += std::abs(frame2.at(i, c) - t.reconstruction.at(i, c));
    n += 3;
  }
  return n ? sum / static_cast<double>(n) : INFINITY;
}

Outcome gradient_suite() {
  Stopwatch sw;
  oracle::GradCheckOptions o;
  o.tolerance = 1e-4;
  o.trials = 20;
  const auto reports = oracle::gradcheck_suite(o);
  const double dt = sw.seconds();
  bool all = true;
  double worst = 0.0;
  std::string worst_op;
  for (const auto& r : reports) {
    all = all && r.passed && r.trials == 20;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_op = r.op;
    }
  }
  return {all && dt < 120.0, fmt("%zu ops x 20 trials, worst rel err %.2e (%s), tol 1e-4, %.1f s (limit 120 s)",
                                 reports.size(), worst, worst_op.c_str(), dt)};
}

Outcome oracle_equivalence() {
  Stopwatch sw;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const CoordMap cm(16, 16);
  double worst = 0.0;
  int mask_mismatch = 0, with_holes = 0;
  for (int k = 0; k < 50; ++k) {
    Image frame(16, 16);
    for (double& v : frame.values()) v = u(rng);
    Latents lat{{}, {}, AlphaField(16, 16)};
    for (AffineParams* a : {&lat.params1, &lat.params2}) {
      for (int j = 0; j < 6; ++j) (*a)[j] = (j == 0 || j == 3) ? uni(-0.5, 0.5) : uni(-0.3, 0.3);
    }
    for (double& v : lat.p.values()) v = uni(-0.2, 1.2);
    PipelineConfig pc;
    pc.binning.tau = uni(0.03, 0.5);
    const SynthesisTape t = synthesize(frame, lat, pc, cm);
    const oracle::Composite bf = oracle::brute_force_composite(frame, lat, pc, cm);
    for (std::size_t i = 0; i < t.reconstruction.raw().size(); ++i) {
      worst = std::max(worst, std::abs(t.reconstruction.raw()[i] - bf.reconstruction.raw()[i]));
    }
    mask_mismatch += !(t.disoccluded == bf.disoccluded);
    with_holes += std::count(t.disoccluded.values().begin(), t.disoccluded.values().end(), 1) > 0;
  }
  const double dt = sw.seconds();
  return {worst <= 1e-9 && mask_mismatch == 0 && dt < 60.0,
          fmt("50 instances 16x16, max abs diff %.2e (limit 1e-9), mask mismatches %d, %d with holes, %.2f s",
              worst, mask_mismatch, with_holes, dt)};
}

Outcome gt_injection() {
  Stopwatch sw;
  SceneSpec spec;
  spec.integer_mode = true;
  spec.min_separation = 3.0;
  const PipelineConfig pc = pipeline_config(FitConfig{}, 0.05);
  double worst = 0.0, worst_raw = 0.0;
  for (int k = 0; k < 20; ++k) {
    spec.seed = scene_seed(7, k);
    const Scene s = generate_scene(spec);
    const CoordMap cm(s.frame1.width(), s.frame1.height());
    worst = std::max(worst, valid_mean_abs(s.frame2, synthesize(s.frame1, gt_latents(s, 0.05, true), pc, cm)));
    worst_raw =
        std::max(worst_raw, valid_mean_abs(s.frame2, synthesize(s.frame1, gt_latents(s, 0.05, false), pc, cm)));
  }
  const double dt = sw.seconds();
  std::printf("info: without dividing A by the carried alpha the worst scene mean error is %.2e\n", worst_raw);
  return {worst < 1e-6 && dt < 60.0,
          fmt("20 scenes 64x128, worst per-scene mean |I2 - I2hat| on valid pixels %.2e (limit 1e-6), %.1f s", worst,
              dt)};
}

Outcome segmentation() {
  SceneSpec spec;
  spec.integer_mode = true;
  spec.min_separation = 3.0;
  const FitConfig cfg;
  std::vector<double> js;
  double epe_sum = 0.0, slowest = 0.0, total = 0.0;
  int epe_n = 0;
  for (int k = 0; k < 50; ++k) {
    spec.seed = scene_seed(42, k);
    const Scene s = generate_scene(spec);
    Stopwatch sw;
    const FitResult r = fit_pair(s.frame1, s.frame2, cfg);
    const double dt = sw.seconds();
    slowest = std::max(slowest, dt);
    total += dt;
    const PermutationScore ps = jaccard_best_permutation(layer_mask(r.latents, cfg.tau_end, cfg.threshold), s.mask1);
    const CoordMap cm(s.frame1.width(), s.frame1.height());
    const double e = epe(dense_flow(ps.layer == 1 ? r.latents.params1 : r.latents.params2, cm), s.flow_fg, s.mask1);
    if (ps.jaccard >= 0.5) {
      epe_sum += e;
      ++epe_n;
    }
    js.push_back(ps.jaccard);
    std::printf("  scene %2d  J %.3f  fg EPE %.3f  %.1f s\n", k, ps.jaccard, e, dt);
    std::fflush(stdout);
  }
  std::sort(js.begin(), js.end());
  const double median = 0.5 * (js[24] + js[25]);
  const double mean_epe = epe_n ? epe_sum / epe_n : INFINITY;
  return {median >= 0.8 && mean_epe <= 1.0 && slowest <= 60.0,
          fmt("50 scenes, median J %.3f (min 0.80), mean fg EPE %.3f px on %d scenes with J >= 0.5 (max 1.0), "
              "mean %.1f s, slowest %.1f s per scene (max 60)",
              median, mean_epe, epe_n, total / 50, slowest)};
}

Outcome invariants() {
  Stopwatch sw;
  const int rc = run(std::string("\"") + LDIS_TESTS_PATH + "\" --minimal > /dev/null 2>&1");
  const double dt = sw.seconds();
  return {rc == 0 && dt < 300.0, fmt("unit and property suite exit code %d, %.1f s (limit 300 s)", rc, dt)};
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "ldis_acceptance_repro";
  fs::remove_all(root);
  const std::string cli = std::string("\"") + LDIS_CLI_PATH + "\"";
  for (const char* r : {"a", "b"}) {
    const fs::path d = root / r;
    const std::string quiet = " > /dev/null 2>&1";
    if (run(cli + " gen --n 2 --seed 5 --integer --out " + (d / "data").string() + quiet) != 0 ||
        run(cli + " fit --dataset " + (d / "data").string() + " --seed 5 --out " + (d / "fits").string() + quiet) !=
            0 ||
        run(cli + " eval --dataset " + (d / "data").string() + " --fits " + (d / "fits").string() + quiet) != 0) {
      return {false, "a pipeline command failed"};
    }
  }
  int compared = 0;
  std::vector<std::string> differing;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    const bool wanted = name == "manifest.json" || name == "report.json" || name.rfind("mask", 0) == 0 ||
                        e.path().extension() == ".flo";
    if (!wanted) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    ++compared;
    if (slurp(e.path()) != slurp(root / "b" / rel)) differing.push_back(rel.string());
  }
  fs::remove_all(root);
  std::string detail = fmt("%d manifest, mask, flow and report files compared, %zu differ", compared, differing.size());
  for (const auto& d : differing) detail += " " + d;
  return {differing.empty() && compared >= 16, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"oracle equivalence", oracle_equivalence},
      {"ground-truth injection", gt_injection},
      {"end-to-end segmentation", segmentation},
      {"invariant suite", invariants},
      {"reproducibility", reproducibility},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("criterion %d %-24s %s  %s\n", id, criteria[k].first, o.passed ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
