#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ldis/imagery.hpp"

namespace ldis {

// |pred & gt| / |pred | gt|; 1 when both are empty, 0 when exactly one is.
double jaccard(const Mask& pred, const Mask& gt);

struct PermutationScore {
  double jaccard = 0.0;
  int layer = 1;  // 1: mask is the object, 2: its complement is
};

// Scores the top-layer mask and its complement; ties go to layer 1.
PermutationScore jaccard_best_permutation(const Mask& layer1_mask, const Mask& gt);

Mask complement(const Mask& m);

// Mean endpoint error over `region`.
double epe(const FlowField& pred, const FlowField& gt, const Mask& region);

inline constexpr double kPsnrCap = 99.0;
// Peak 1.0 over valid pixels and all channels, capped at kPsnrCap.
double psnr(const Image& ref, const Image& test, const Mask& valid);

struct EvalRecord {
  std::string scene;
  double jaccard = 0.0;        // permutation-best
  double jaccard_layer1 = 0.0; // top-layer mask taken as the object
  int chosen_layer = 1;
  double epe_fg = 0.0;
  double epe_bg = 0.0;
  double psnr_valid = 0.0;
  double final_loss = 0.0;
};

struct EvalSummary {
  std::size_t count = 0;
  double j_mean = 0.0;
  double j_median = 0.0;
  double j_layer1_mean = 0.0;
  double epe_fg_mean = 0.0;
  double epe_bg_mean = 0.0;
  double psnr_mean = 0.0;
};

EvalSummary summarize(const std::vector<EvalRecord>& records);

// {scenes: [...], summary: {...}}
nlohmann::json report_json(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> records_from_json(const nlohmann::json& report);
std::string report_table(const std::vector<EvalRecord>& records);

void to_json(nlohmann::json& j, const EvalRecord& r);
void from_json(const nlohmann::json& j, EvalRecord& r);

}  // namespace ldis
