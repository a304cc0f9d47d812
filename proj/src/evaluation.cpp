#include "ldis/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ldis {

double jaccard(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt, "jaccard");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    const bool a = pred.at(i) != 0;
    const bool b = gt.at(i) != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Mask complement(const Mask& m) {
  Mask out(m.width(), m.height());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) out.at(i) = m.at(i) ? 0 : 1;
  return out;
}

PermutationScore jaccard_best_permutation(const Mask& layer1_mask, const Mask& gt) {
  const double direct = jaccard(layer1_mask, gt);
  const double flipped = jaccard(complement(layer1_mask), gt);
  if (flipped > direct) return {flipped, 2};
  return {direct, 1};
}

double epe(const FlowField& pred, const FlowField& gt, const Mask& region) {
  require_same_shape(pred, gt, "epe");
  require_same_shape(pred, region, "epe");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < region.pixel_count(); ++i) {
    if (!region.at(i)) continue;
    sum += std::hypot(pred.at(i, 0) - gt.at(i, 0), pred.at(i, 1) - gt.at(i, 1));
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::invalid_argument, "epe: empty region");
  return sum / static_cast<double>(n);
}

double psnr(const Image& ref, const Image& test, const Mask& valid) {
  require_same_shape(ref, test, "psnr");
  require_same_shape(ref, valid, "psnr");
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < valid.pixel_count(); ++i) {
    if (!valid.at(i)) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = ref.at(i, c) - test.at(i, c);
      se += d * d;
    }
    n += 3;
  }
  if (n == 0) throw Error(ErrorCode::invalid_argument, "psnr: empty valid set");
  const double mse = se / static_cast<double>(n);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

EvalSummary summarize(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::invalid_argument, "aggregate: no records");
  EvalSummary s;
  s.count = records.size();
  std::vector<double> js;
  for (const auto& r : records) {
    s.j_mean += r.jaccard;
    s.j_layer1_mean += r.jaccard_layer1;
    s.epe_fg_mean += r.epe_fg;
    s.epe_bg_mean += r.epe_bg;
    s.psnr_mean += r.psnr_valid;
    js.push_back(r.jaccard);
  }
  const double n = static_cast<double>(records.size());
  s.j_mean /= n;
  s.j_layer1_mean /= n;
  s.epe_fg_mean /= n;
  s.epe_bg_mean /= n;
  s.psnr_mean /= n;
  std::sort(js.begin(), js.end());
  const std::size_t mid = js.size() / 2;
  s.j_median = js.size() % 2 ? js[mid] : 0.5 * (js[mid - 1] + js[mid]);
  return s;
}

void to_json(nlohmann::json& j, const EvalRecord& r) {
  j = nlohmann::json{{"scene", r.scene},
                     {"jaccard", r.jaccard},
                     {"jaccard_layer1", r.jaccard_layer1},
                     {"chosen_layer", r.chosen_layer},
                     {"epe_fg", r.epe_fg},
                     {"epe_bg", r.epe_bg},
                     {"psnr_valid", r.psnr_valid},
                     {"final_loss", r.final_loss}};
}

void from_json(const nlohmann::json& j, EvalRecord& r) {
  j.at("scene").get_to(r.scene);
  j.at("jaccard").get_to(r.jaccard);
  j.at("jaccard_layer1").get_to(r.jaccard_layer1);
  j.at("chosen_layer").get_to(r.chosen_layer);
  j.at("epe_fg").get_to(r.epe_fg);
  j.at("epe_bg").get_to(r.epe_bg);
  j.at("psnr_valid").get_to(r.psnr_valid);
  j.at("final_loss").get_to(r.final_loss);
}

nlohmann::json report_json(const std::vector<EvalRecord>& records) {
  const EvalSummary s = summarize(records);
  return nlohmann::json{{"scenes", records},
                        {"summary",
                         {{"count", s.count},
                          {"j_mean", s.j_mean},
                          {"j_median", s.j_median},
                          {"j_layer1_mean", s.j_layer1_mean},
                          {"epe_fg_mean", s.epe_fg_mean},
                          {"epe_bg_mean", s.epe_bg_mean},
                          {"psnr_mean", s.psnr_mean}}}};
}

std::vector<EvalRecord> records_from_json(const nlohmann::json& report) {
  return report.at("scenes").get<std::vector<EvalRecord>>();
}

std::string report_table(const std::vector<EvalRecord>& records) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %7s %7s %5s %8s %8s %7s\n", "scene", "J", "J(l1)", "layer",
                "EPE_fg", "EPE_bg", "PSNR");
  out << line;
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%-12s %7.4f %7.4f %5d %8.3f %8.3f %7.2f\n", r.scene.c_str(),
                  r.jaccard, r.jaccard_layer1, r.chosen_layer, r.epe_fg, r.epe_bg, r.psnr_valid);
    out << line;
  }
  const EvalSummary s = summarize(records);
  std::snprintf(line, sizeof line,
                "mean J %.4f | median J %.4f | mean J(l1) %.4f | EPE fg %.3f bg %.3f | PSNR %.2f\n",
                s.j_mean, s.j_median, s.j_layer1_mean, s.epe_fg_mean, s.epe_bg_mean, s.psnr_mean);
  out << line;
  return out.str();
}

}  // namespace ldis
