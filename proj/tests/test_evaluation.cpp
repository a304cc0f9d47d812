#include <cmath>

#include <doctest.h>

#include "generators.hpp"
#include "ldis/evaluation.hpp"

using namespace ldis;

namespace {

Mask row(std::initializer_list<int> bits) {
  Mask m(static_cast<int>(bits.size()), 1);
  int i = 0;
  for (int b : bits) m.at(i++, 0) = static_cast<std::uint8_t>(b);
  return m;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("jaccard examples") {
    CHECK(jaccard(row({1, 1, 0, 0}), row({0, 1, 1, 0})) == doctest::Approx(1.0 / 3.0));
    CHECK(jaccard(row({0, 0}), row({0, 0})) == 1.0);
    CHECK(jaccard(row({1, 0}), row({0, 0})) == 0.0);
    CHECK(jaccard(row({1, 0}), row({1, 0})) == 1.0);
    CHECK_THROWS_AS(jaccard(row({1}), row({1, 0})), Error);
  }

  TEST_CASE("permutation picks the complement when it scores higher") {
    const PermutationScore s = jaccard_best_permutation(row({0, 0, 1, 1}), row({1, 1, 0, 0}));
    CHECK(s.jaccard == 1.0);
    CHECK(s.layer == 2);
    const PermutationScore t = jaccard_best_permutation(row({1, 0}), row({1, 0}));
    CHECK(t.layer == 1);
    // Ties go to the top layer.
    const PermutationScore u = jaccard_best_permutation(row({1, 0}), row({1, 1}));
    CHECK(u.jaccard == 0.5);
    CHECK(u.layer == 1);
  }

  TEST_CASE("endpoint error and psnr examples") {
    FlowField a(2, 1), b(2, 1);
    a.at(0, 0, 0) = 3.0;
    a.at(0, 0, 1) = 4.0;
    a.at(1, 0, 0) = 1.0;
    CHECK(epe(a, b, row({1, 1})) == doctest::Approx(3.0));
    CHECK(epe(a, b, row({0, 1})) == doctest::Approx(1.0));
    CHECK_THROWS_AS(epe(a, b, row({0, 0})), Error);

    Image r(2, 1), t(2, 1);
    for (int c = 0; c < 3; ++c) t.at(0, 0, c) = 0.1;
    // MSE over two pixels, one off by 0.1: 0.005.
    CHECK(psnr(r, t, row({1, 1})) == doctest::Approx(10.0 * std::log10(1.0 / 0.005)));
    CHECK(psnr(r, t, row({0, 1})) == kPsnrCap);
  }

  TEST_CASE("property: jaccard is symmetric and bounded") {
    gen::for_all(50, 81, [](gen::Gen& g) {
      const int w = g.integer(1, 12), h = g.integer(1, 12);
      const Mask a = g.mask(w, h, g.uniform(0, 1)), b = g.mask(w, h, g.uniform(0, 1));
      const double j = jaccard(a, b);
      CHECK(j == jaccard(b, a));
      CHECK(j >= 0.0);
      CHECK(j <= 1.0);
      CHECK(jaccard(a, a) == 1.0);
      const PermutationScore s = jaccard_best_permutation(a, b);
      CHECK(s.jaccard == std::max(j, jaccard(complement(a), b)));
      CHECK(complement(complement(a)) == a);
    });
  }

  TEST_CASE("property: epe is zero for equal fields and nonnegative") {
    gen::for_all(30, 82, [](gen::Gen& g) {
      const int w = g.integer(1, 10), h = g.integer(1, 10);
      const FlowField a = g.flow(w, h, -5, 5), b = g.flow(w, h, -5, 5);
      Mask m = g.mask(w, h, 0.6);
      m.at(std::size_t{0}) = 1;
      CHECK(epe(a, a, m) == 0.0);
      CHECK(epe(a, b, m) >= 0.0);
      CHECK(epe(a, b, m) == doctest::Approx(epe(b, a, m)));
    });
  }

  TEST_CASE("report round trip and summary") {
    std::vector<EvalRecord> recs(3);
    for (int i = 0; i < 3; ++i) {
      recs[i].scene = "scene_000" + std::to_string(i);
      recs[i].jaccard = 0.5 + 0.2 * i;
      recs[i].jaccard_layer1 = 0.1 * i;
      recs[i].chosen_layer = 1 + i % 2;
      recs[i].epe_fg = i;
      recs[i].epe_bg = 2.0 * i;
      recs[i].psnr_valid = 30.0 + i;
      recs[i].final_loss = 10.0 - i;
    }
    const EvalSummary s = summarize(recs);
    CHECK(s.count == 3);
    CHECK(s.j_mean == doctest::Approx(0.7));
    CHECK(s.j_median == doctest::Approx(0.7));
    CHECK(s.epe_fg_mean == doctest::Approx(1.0));

    const nlohmann::json j = report_json(recs);
    CHECK(j.contains("summary"));
    CHECK(j["scenes"][0].contains("jaccard"));
    CHECK(j["scenes"][0].contains("jaccard_layer1"));
    const std::vector<EvalRecord> back = records_from_json(nlohmann::json::parse(j.dump()));
    REQUIRE(back.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(back[i].scene == recs[i].scene);
      CHECK(back[i].jaccard == recs[i].jaccard);
      CHECK(back[i].chosen_layer == recs[i].chosen_layer);
      CHECK(back[i].psnr_valid == recs[i].psnr_valid);
    }
    CHECK(report_table(recs).find("scene_0002") != std::string::npos);
  }
}
