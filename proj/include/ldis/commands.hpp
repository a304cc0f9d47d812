#pragma once

#include <ostream>

#include <json.hpp>

namespace ldis {

enum class ExitCode { ok = 0, check_failure = 1, usage = 2, io = 3, degenerate = 4 };

// Runs one subcommand described by a run configuration document:
//   {"command": "gen" | "fit" | "eval" | "render" | "gradcheck",
//    "seed": n, "jobs": n, "out": dir, "scene": {...}, "fit": {...}, ...}
// Command-specific keys:
//   gen:       n, size ("HxW")
//   fit:       dataset | (frame1, frame2), dump_tape
//   eval:      dataset, fits
//   render:    scene_dir, fit_dir, out (PNG path)
//   gradcheck: tolerance, trials, step, out (optional report path)
// Machine-readable results go to `out`, progress and errors to `log`. The
// resolved configuration is echoed as config.json into every run directory.
ExitCode run_command(const nlohmann::json& run_config, std::ostream& out, std::ostream& log);

}  // namespace ldis
