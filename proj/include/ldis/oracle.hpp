#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldis/synthesis.hpp"

namespace ldis::oracle {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every coordinate.
// Throws ErrorCode::non_finite if f returns a non-finite value.
std::vector<double> finite_diff(const ScalarFn& fn, std::span<const double> x, double h);

// A subset of coordinates; used where only some inputs are away from kinks.
std::vector<double> finite_diff(const ScalarFn& fn, std::span<const double> x, double h,
                                std::span<const std::size_t> coords);

// max_k |a_k - b_k| / max(max_k |a_k|, max_k |b_k|), 0 when both vanish.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

struct GradCheckReport {
  std::string op;
  int trials = 0;
  double max_rel_error = 0.0;
  std::uint64_t worst_seed = 0;
  double tolerance = 0.0;
  bool passed = false;
};

enum class Mutation { none, splat_flow_sign_flip };

struct GradCheckOptions {
  double tolerance = 1e-4;
  int trials = 20;
  std::uint64_t seed = 0;
  double step = 1e-5;
  // Injects a known defect into the checked splat vjp; the suite must flag it.
  Mutation mutation = Mutation::none;
};

std::vector<GradCheckReport> gradcheck_suite(const GradCheckOptions& opts);

nlohmann::json to_json(const std::vector<GradCheckReport>& reports);

struct Composite {
  Image reconstruction;
  Mask disoccluded;
};

// Naive per-pixel re-derivation of the hard synthesis: membership, layer
// assignment, alpha-scaled bilinear splatting into per-layer canvases,
// top-over-bottom compositing and the empty-pixel mask. Shares no code with
// the production kernels.
Composite brute_force_composite(const Image& frame1, const Latents& latents,
                                const PipelineConfig& cfg, const CoordMap& cmap);

}  // namespace ldis::oracle
