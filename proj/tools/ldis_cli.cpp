// Command-line front end. Flags and an optional JSON config file are merged
// into one run configuration (flags win) and handed to the library.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldis/ldis.h"

using nlohmann::json;

namespace {

// Sets `rc[section][key]` (or `rc[key]` for an empty section) when the flag
// was given on the command line.
template <typename T>
struct Flag {
  std::optional<T> value;
  const char* section;
  const char* key;
};

template <typename T>
void set_flag(json& rc, const Flag<T>& f) {
  if (!f.value) return;
  if (f.section[0] == '\0') {
    rc[f.key] = *f.value;
  } else {
    rc[f.section][f.key] = *f.value;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered motion segmentation by differentiable image synthesis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  Flag<std::uint64_t> seed{{}, "", "seed"};
  Flag<int> jobs{{}, "", "jobs"};
  app.add_option("--config", config_path, "JSON run configuration; flags override it");
  app.add_option("--seed", seed.value, "Global seed");
  app.add_option("--jobs", jobs.value, "Worker threads");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic two-layer dataset");
  Flag<int> n{{}, "", "n"};
  Flag<std::string> size{{}, "", "size"};
  Flag<std::string> gen_out{{}, "", "out"};
  Flag<std::string> shape{{}, "scene", "shape"};
  Flag<std::string> texture{{}, "scene", "texture"};
  Flag<bool> integer_mode{{}, "scene", "integer_mode"};
  Flag<double> min_sep{{}, "scene", "min_separation"};
  Flag<double> fg_trans{{}, "scene", "fg_translation"};
  Flag<double> bg_trans{{}, "scene", "bg_translation"};
  gen->add_option("--n", n.value, "Number of scenes");
  gen->add_option("--size", size.value, "Frame size HxW, e.g. 64x128");
  gen->add_option("--out", gen_out.value, "Output dataset directory");
  gen->add_option("--shape", shape.value, "rectangle | ellipse | random");
  gen->add_option("--texture", texture.value, "noise | checker | gradient | image");
  gen->add_flag("--integer{true}", integer_mode.value, "Integer translations only");
  gen->add_option("--min-separation", min_sep.value, "Minimum fg/bg flow separation, px");
  gen->add_option("--fg-translation", fg_trans.value, "Foreground translation range, px");
  gen->add_option("--bg-translation", bg_trans.value, "Background translation range, px");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit two motion layers to image pairs");
  Flag<std::string> fit_dataset{{}, "", "dataset"};
  Flag<std::string> frame1{{}, "", "frame1"};
  Flag<std::string> frame2{{}, "", "frame2"};
  Flag<std::string> fit_out{{}, "", "out"};
  Flag<bool> dump_tape{{}, "", "dump_tape"};
  Flag<int> restarts{{}, "fit", "restarts"};
  Flag<int> max_iters{{}, "fit", "max_iters"};
  Flag<double> lr_params{{}, "fit", "lr_params"};
  Flag<double> lr_alpha{{}, "fit", "lr_alpha"};
  Flag<double> tau_start{{}, "fit", "tau_start"};
  Flag<double> tau_end{{}, "fit", "tau_end"};
  Flag<double> threshold{{}, "fit", "threshold"};
  Flag<double> eps_d{{}, "fit", "disocclusion_eps"};
  fit->add_option("--dataset", fit_dataset.value, "Dataset directory with manifest.json");
  fit->add_option("--frame1", frame1.value, "First frame of a single pair");
  fit->add_option("--frame2", frame2.value, "Second frame of a single pair");
  fit->add_option("--out", fit_out.value, "Output directory");
  fit->add_flag("--dump-tape{true}", dump_tape.value, "Write every pipeline intermediate");
  fit->add_option("--restarts", restarts.value, "Random restarts");
  fit->add_option("--max-iters", max_iters.value, "Iterations per restart");
  fit->add_option("--lr-params", lr_params.value, "Adam rate of the affine coefficients");
  fit->add_option("--lr-alpha", lr_alpha.value, "Adam rate of the membership field");
  fit->add_option("--tau-start", tau_start.value, "Initial binning temperature");
  fit->add_option("--tau-end", tau_end.value, "Final binning temperature");
  fit->add_option("--threshold", threshold.value, "Layer mask threshold");
  fit->add_option("--eps-d", eps_d.value, "Dis-occlusion tolerance");

  // eval
  auto* eval = app.add_subcommand("eval", "Score fit outputs against dataset ground truth");
  Flag<std::string> eval_dataset{{}, "", "dataset"};
  Flag<std::string> fits{{}, "", "fits"};
  Flag<std::string> eval_out{{}, "", "out"};
  eval->add_option("--dataset", eval_dataset.value, "Dataset directory");
  eval->add_option("--fits", fits.value, "Directory written by fit");
  eval->add_option("--out", eval_out.value, "Report directory (default: <fits>/eval)");

  // render
  auto* render = app.add_subcommand("render", "Frame 1 / ground truth / prediction panels");
  Flag<std::string> scene_dir{{}, "", "scene_dir"};
  Flag<std::string> fit_dir{{}, "", "fit_dir"};
  Flag<std::string> render_out{{}, "", "out"};
  render->add_option("--scene", scene_dir.value, "Scene directory");
  render->add_option("--fit", fit_dir.value, "Fit output directory of that scene");
  render->add_option("--out", render_out.value, "Output PNG (default: panels.png)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  Flag<double> tolerance{{}, "", "tolerance"};
  Flag<int> trials{{}, "", "trials"};
  Flag<double> step{{}, "", "step"};
  Flag<std::string> gc_out{{}, "", "out"};
  gradcheck->add_option("--tolerance", tolerance.value, "Relative error tolerance");
  gradcheck->add_option("--trials", trials.value, "Trials per check");
  gradcheck->add_option("--step", step.value, "Finite-difference step");
  gradcheck->add_option("--out", gc_out.value, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  json rc = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot read config file '" << config_path << "'\n";
      return 2;
    }
    try {
      rc = json::parse(in);
    } catch (const json::exception& e) {
      std::cerr << "error: config file is not valid JSON: " << e.what() << "\n";
      return 2;
    }
    if (!rc.is_object()) {
      std::cerr << "error: config file must hold a JSON object\n";
      return 2;
    }
  }
  set_flag(rc, seed);
  set_flag(rc, jobs);

  CLI::App* sub = app.get_subcommands().front();
  rc["command"] = sub->get_name();
  if (sub == gen) {
    for (const auto* f : {&size, &gen_out, &shape, &texture}) set_flag(rc, *f);
    set_flag(rc, n);
    set_flag(rc, integer_mode);
    for (const auto* f : {&min_sep, &fg_trans, &bg_trans}) set_flag(rc, *f);
  } else if (sub == fit) {
    for (const auto* f : {&fit_dataset, &frame1, &frame2, &fit_out}) set_flag(rc, *f);
    set_flag(rc, dump_tape);
    for (const auto* f : {&restarts, &max_iters}) set_flag(rc, *f);
    for (const auto* f : {&lr_params, &lr_alpha, &tau_start, &tau_end, &threshold, &eps_d}) {
      set_flag(rc, *f);
    }
  } else if (sub == eval) {
    for (const auto* f : {&eval_dataset, &fits, &eval_out}) set_flag(rc, *f);
  } else if (sub == render) {
    for (const auto* f : {&scene_dir, &fit_dir, &render_out}) set_flag(rc, *f);
    if (!rc.contains("out")) rc["out"] = "panels.png";
  } else if (sub == gradcheck) {
    for (const auto* f : {&tolerance, &step}) set_flag(rc, *f);
    set_flag(rc, trials);
    set_flag(rc, gc_out);
  }
  return ldis_run_command(rc.dump().c_str());
}
