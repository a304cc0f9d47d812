#include "ldis/commands.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ldis/evaluation.hpp"
#include "ldis/fit.hpp"
#include "ldis/json_io.hpp"
#include "ldis/oracle.hpp"
#include "ldis/synth.hpp"

namespace ldis {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
    throw UsageError(std::string("missing required option '") + key + "'");
  }
  return j.at(key).get<std::string>();
}

fs::path require_input(const json& j, const char* key) {
  const fs::path p = require_string(j, key);
  if (!fs::exists(p)) throw UsageError(std::string(key) + ": no such file '" + p.string() + "'");
  return p;
}

// "HxW", both positive.
void parse_size(const std::string& s, SceneSpec& spec) {
  int h = 0;
  int w = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%dx%d%c", &h, &w, &tail) != 2 || h <= 0 || w <= 0) {
    throw UsageError("size must be HxW with positive dimensions, got '" + s + "'");
  }
  spec.height = h;
  spec.width = w;
}

SceneSpec resolve_scene(const json& rc) {
  SceneSpec spec;
  if (rc.contains("scene")) rc.at("scene").get_to(spec);
  if (rc.contains("size")) parse_size(rc.at("size").get<std::string>(), spec);
  if (rc.contains("seed")) spec.seed = rc.at("seed").get<std::uint64_t>();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return spec;
}

FitConfig resolve_fit(const json& rc) {
  FitConfig cfg;
  if (rc.contains("fit")) rc.at("fit").get_to(cfg);
  if (rc.contains("seed")) cfg.seed = rc.at("seed").get<std::uint64_t>();
  cfg.jobs = get_or(rc, "jobs", cfg.jobs);
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void echo_config(json rc, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(rc, dir / "config.json");
}

ExitCode cmd_gen(json rc, std::ostream& log) {
  const int n = get_or(rc, "n", 0);
  if (n < 1) throw UsageError("n must be at least 1");
  const fs::path out = require_string(rc, "out");
  const SceneSpec spec = resolve_scene(rc);
  const int jobs = std::max(1, get_or(rc, "jobs", 1));
  rc["scene"] = spec;
  rc.erase("size");
  echo_config(rc, out);
  const Manifest m = generate_dataset(n, spec, out, jobs);
  log << "generated " << m.scenes.size() << " scenes (" << spec.height << "x" << spec.width
      << ") in " << out.string() << "\n";
  return ExitCode::ok;
}

json fit_json(const FitResult& r) {
  json restarts = json::array();
  for (const auto& s : r.restarts) {
    restarts.push_back({{"final_loss", s.final_loss},
                        {"iterations", s.iterations},
                        {"degenerate", s.degenerate},
                        {"diverged", s.diverged}});
  }
  return json{{"final_loss", r.final_loss},
              {"initial_loss", r.initial_loss},
              {"restart", r.restart},
              {"iterations", r.iterations},
              {"degenerate", r.degenerate},
              {"final_tau", r.final_tau},
              {"params1", r.latents.params1},
              {"params2", r.latents.params2},
              {"restarts", restarts},
              {"loss_curve", r.loss_curve}};
}

// Fits one pair and writes its outputs into `dir`. Returns false when every
// restart degenerated.
bool fit_one(const fs::path& frame1_path, const fs::path& frame2_path, const FitConfig& cfg,
             bool dump, const fs::path& dir, const std::string& label, std::ostream& log) {
  const Image frame1 = load_image(frame1_path);
  const Image frame2 = load_image(frame2_path);
  require_same_shape(frame1, frame2, "fit");
  FitResult r;
  try {
    r = fit_pair(frame1, frame2, cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate) throw;
    log << label << ": degenerate fit (" << e.what() << ")\n";
    return false;
  }
  fs::create_directories(dir);
  const CoordMap cmap(frame1.width(), frame1.height());
  const PipelineConfig pc = pipeline_config(cfg, cfg.tau_end);
  const SynthesisTape tape = synthesize(frame1, r.latents, pc, cmap);
  write_json(fit_json(r), dir / "fit.json");
  save_mask(layer_mask(r.latents, cfg.tau_end, cfg.threshold), dir / "mask.png");
  save_flow(dense_flow(r.latents.params1, cmap), dir / "layer1.flo");
  save_flow(dense_flow(r.latents.params2, cmap), dir / "layer2.flo");
  save_image(tape.reconstruction, dir / "recon.png");
  save_mask(complement(tape.disoccluded), dir / "valid.png");
  if (dump) dump_tape(tape, dir / "tape");
  char line[160];
  std::snprintf(line, sizeof line, "%s: loss %.4f -> %.4f, restart %d, %d iterations\n",
                label.c_str(), r.initial_loss, r.final_loss, r.restart, r.iterations);
  log << line;
  return true;
}

ExitCode cmd_fit(json rc, std::ostream& log) {
  const fs::path out = require_string(rc, "out");
  const FitConfig cfg = resolve_fit(rc);
  const bool dump = get_or(rc, "dump_tape", false);
  const bool has_dataset = rc.contains("dataset");
  const bool has_pair = rc.contains("frame1") || rc.contains("frame2");
  if (has_dataset == has_pair) throw UsageError("give either dataset or frame1 and frame2");
  rc["fit"] = cfg;
  bool degenerate = false;
  if (has_pair) {
    const fs::path f1 = require_input(rc, "frame1");
    const fs::path f2 = require_input(rc, "frame2");
    echo_config(rc, out);
    degenerate = !fit_one(f1, f2, cfg, dump, out, "pair", log);
  } else {
    const fs::path dataset = require_input(rc, "dataset");
    const Manifest m = read_manifest(dataset);
    echo_config(rc, out);
    for (const auto& e : m.scenes) {
      const fs::path sd = dataset / e.id;
      degenerate |= !fit_one(sd / "frame1.png", sd / "frame2.png", cfg, dump, out / e.id, e.id, log);
    }
  }
  return degenerate ? ExitCode::degenerate : ExitCode::ok;
}

EvalRecord evaluate_scene(const fs::path& scene_dir, const fs::path& fit_dir, const std::string& id) {
  const Mask gt = load_mask(scene_dir / "mask1.png");
  const FlowField gt_fg = load_flow(scene_dir / "fg.flo");
  const FlowField gt_bg = load_flow(scene_dir / "bg.flo");
  const Image frame2 = load_image(scene_dir / "frame2.png");
  const Mask mask = load_mask(fit_dir / "mask.png");
  const FlowField flow1 = load_flow(fit_dir / "layer1.flo");
  const FlowField flow2 = load_flow(fit_dir / "layer2.flo");
  const Image recon = load_image(fit_dir / "recon.png");
  const Mask valid = load_mask(fit_dir / "valid.png");
  const json fit = read_json(fit_dir / "fit.json");

  EvalRecord r;
  r.scene = id;
  const PermutationScore best = jaccard_best_permutation(mask, gt);
  r.jaccard = best.jaccard;
  r.chosen_layer = best.layer;
  r.jaccard_layer1 = jaccard(mask, gt);
  const Mask bg = complement(gt);
  const auto count = [](const Mask& m) { return std::count(m.values().begin(), m.values().end(), 1); };
  const FlowField& fg_flow = best.layer == 1 ? flow1 : flow2;
  const FlowField& bg_flow = best.layer == 1 ? flow2 : flow1;
  r.epe_fg = count(gt) > 0 ? epe(fg_flow, gt_fg, gt) : 0.0;
  r.epe_bg = count(bg) > 0 ? epe(bg_flow, gt_bg, bg) : 0.0;
  r.psnr_valid = count(valid) > 0 ? psnr(frame2, recon, valid) : 0.0;
  r.final_loss = fit.at("final_loss").get<double>();
  return r;
}

ExitCode cmd_eval(json rc, std::ostream& out, std::ostream& log) {
  const fs::path dataset = require_string(rc, "dataset");
  const fs::path fits = require_string(rc, "fits");
  const fs::path report_dir = get_or<std::string>(rc, "out", (fits / "eval").string());
  const Manifest m = read_manifest(dataset);
  if (m.scenes.empty()) throw Error(ErrorCode::io, "dataset has no scenes");
  std::vector<EvalRecord> records;
  for (const auto& e : m.scenes) {
    records.push_back(evaluate_scene(dataset / e.id, fits / e.id, e.id));
  }
  echo_config(rc, report_dir);
  write_json(report_json(records), report_dir / "report.json");
  out << report_table(records);
  log << "report written to " << (report_dir / "report.json").string() << "\n";
  return ExitCode::ok;
}

// Frame 1 with the mask tinted and its boundary drawn in `color`.
Image overlay(const Image& frame, const Mask& mask, const std::array<double, 3>& color) {
  Image img = frame;
  const int w = frame.width();
  const int h = frame.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      bool edge = false;
      for (int j = y - 1; j <= y + 1; ++j) {
        for (int i = x - 1; i <= x + 1; ++i) {
          if (i >= 0 && j >= 0 && i < w && j < h && !mask.at(i, j)) edge = true;
        }
      }
      const double k = edge ? 1.0 : 0.35;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = (1 - k) * img.at(x, y, c) + k * color[c];
    }
  }
  return img;
}

ExitCode cmd_render(const json& rc, std::ostream& log) {
  const fs::path scene_dir = require_input(rc, "scene_dir");
  const fs::path fit_dir = require_input(rc, "fit_dir");
  const fs::path out = require_string(rc, "out");
  const Image frame1 = load_image(scene_dir / "frame1.png");
  const Mask gt = load_mask(scene_dir / "mask1.png");
  Mask pred = load_mask(fit_dir / "mask.png");
  if (!frame1.same_shape(gt) || !frame1.same_shape(pred)) {
    throw UsageError("scene and fit sizes differ");
  }
  if (jaccard_best_permutation(pred, gt).layer == 2) pred = complement(pred);
  const Image panels[] = {frame1, overlay(frame1, gt, {0.1, 0.9, 0.2}),
                          overlay(frame1, pred, {0.95, 0.2, 0.1})};
  constexpr int kGap = 4;
  const int w = frame1.width();
  Image canvas(3 * w + 2 * kGap, frame1.height(), 1.0);
  for (int k = 0; k < 3; ++k) {
    for (int y = 0; y < frame1.height(); ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) canvas.at(k * (w + kGap) + x, y, c) = panels[k].at(x, y, c);
      }
    }
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_image(canvas, out);
  log << "panels (frame 1 / ground truth / prediction) written to " << out.string() << "\n";
  return ExitCode::ok;
}

ExitCode cmd_gradcheck(const json& rc, std::ostream& out, std::ostream& log) {
  oracle::GradCheckOptions opts;
  opts.tolerance = get_or(rc, "tolerance", opts.tolerance);
  opts.trials = get_or(rc, "trials", opts.trials);
  opts.step = get_or(rc, "step", opts.step);
  opts.seed = get_or(rc, "seed", opts.seed);
  if (!(opts.tolerance > 0.0) || opts.trials < 1 || !(opts.step > 0.0)) {
    throw UsageError("tolerance, trials and step must be positive");
  }
  const auto reports = oracle::gradcheck_suite(opts);
  const json report = oracle::to_json(reports);
  if (rc.contains("out")) write_json(report, require_string(rc, "out"));
  out << report.dump(2) << "\n";
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %s  max rel err %.3e (seed %llu)\n", r.op.c_str(),
                  r.passed ? "pass" : "FAIL", r.max_rel_error,
                  static_cast<unsigned long long>(r.worst_seed));
    log << line;
  }
  return report.at("all_passed").get<bool>() ? ExitCode::ok : ExitCode::check_failure;
}

}  // namespace

ExitCode run_command(const json& run_config, std::ostream& out, std::ostream& log) {
  try {
    if (!run_config.is_object()) throw UsageError("run configuration must be a JSON object");
    const std::string cmd = get_or<std::string>(run_config, "command", "");
    if (cmd == "gen") return cmd_gen(run_config, log);
    if (cmd == "fit") return cmd_fit(run_config, log);
    if (cmd == "eval") return cmd_eval(run_config, out, log);
    if (cmd == "render") return cmd_render(run_config, log);
    if (cmd == "gradcheck") return cmd_gradcheck(run_config, out, log);
    throw UsageError("unknown command '" + cmd + "'");
  } catch (const UsageError& e) {
    log << "error: " << e.what() << "\n";
    return ExitCode::usage;
  } catch (const json::exception& e) {
    log << "error: bad configuration value: " << e.what() << "\n";
    return ExitCode::usage;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::invalid_argument:
      case ErrorCode::dimension_mismatch: return ExitCode::usage;
      case ErrorCode::degenerate: return ExitCode::degenerate;
      case ErrorCode::non_finite: return ExitCode::check_failure;
      case ErrorCode::io:
      case ErrorCode::format: return ExitCode::io;
    }
    return ExitCode::io;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return ExitCode::io;
  }
}

}  // namespace ldis
