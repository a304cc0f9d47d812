#include <cmath>

#include <doctest.h>

#include "generators.hpp"
#include "ldis/oracle.hpp"

using namespace ldis;

TEST_SUITE("oracle") {
  TEST_CASE("central differences of simple functions") {
    const std::vector<double> x{1.0, -2.0, 0.5};
    const auto g = oracle::finite_diff(
        [](std::span<const double> v) { return v[0] * v[0] + 3.0 * v[1] + v[0] * v[2]; }, x, 1e-4);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(g[2] == doctest::Approx(1.0).epsilon(1e-9));

    const std::vector<std::size_t> coords{2};
    const auto sub = oracle::finite_diff(
        [](std::span<const double> v) { return v[0] * v[2]; }, x, 1e-4, coords);
    REQUIRE(sub.size() == 1);
    CHECK(sub[0] == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("non-finite function values are reported") {
    const std::vector<double> x{0.0};
    try {
      oracle::finite_diff([](std::span<const double> v) { return 1.0 / (v[0] - 1e-5); }, x, 1e-5);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::non_finite);
    }
  }

  TEST_CASE("relative error examples") {
    const std::vector<double> a{1.0, 2.0}, b{1.0, 2.5}, z{0.0, 0.0};
    CHECK(oracle::relative_error(a, b) == doctest::Approx(0.2));
    CHECK(oracle::relative_error(z, z) == 0.0);
    CHECK(oracle::relative_error(a, z) == doctest::Approx(1.0));
    const std::vector<double> nan{NAN, 0.0};
    CHECK(std::isinf(oracle::relative_error(nan, a)));
  }

  TEST_CASE("gradient checks pass on the production kernels") {
    oracle::GradCheckOptions o;
    o.trials = 5;
    o.seed = 3;
    const auto reports = oracle::gradcheck_suite(o);
    CHECK(reports.size() == 12);
    for (const auto& r : reports) {
      CAPTURE(r.op);
      CHECK(r.passed);
      CHECK(r.trials == 5);
      CHECK(r.max_rel_error < o.tolerance);
    }
    const nlohmann::json j = oracle::to_json(reports);
    CHECK(j["all_passed"] == true);
    CHECK(j["checks"].size() == reports.size());
  }

  TEST_CASE("a flipped splat flow gradient is detected") {
    oracle::GradCheckOptions o;
    o.trials = 3;
    o.mutation = oracle::Mutation::splat_flow_sign_flip;
    const auto reports = oracle::gradcheck_suite(o);
    bool flagged = false;
    for (const auto& r : reports) {
      if (r.op == "forward_splat_vjp/flow") {
        flagged = !r.passed && r.max_rel_error >= 1.0;
      }
    }
    CHECK(flagged);
    CHECK(oracle::to_json(reports)["all_passed"] == false);
  }

  TEST_CASE("gradient check reports depend only on the seed") {
    oracle::GradCheckOptions o;
    o.trials = 2;
    o.seed = 17;
    const auto a = oracle::gradcheck_suite(o), b = oracle::gradcheck_suite(o);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].max_rel_error == b[i].max_rel_error);
      CHECK(a[i].worst_seed == b[i].worst_seed);
    }
    o.trials = 0;
    CHECK_THROWS_AS(oracle::gradcheck_suite(o), Error);
  }

  TEST_CASE("property: the naive compositor agrees with the production pipeline") {
    gen::for_all(15, 91, [](gen::Gen& g) {
      const int w = g.integer(4, 14), h = g.integer(4, 12);
      const CoordMap cm(w, h);
      const Image frame = g.image(w, h);
      Latents lat{g.params(0.1, 0.3), g.params(0.1, 0.3), g.field(w, h, -0.2, 1.2)};
      PipelineConfig pc;
      pc.binning.tau = g.uniform(0.03, 0.5);
      const SynthesisTape t = synthesize(frame, lat, pc, cm);
      const oracle::Composite bf = oracle::brute_force_composite(frame, lat, pc, cm);
      CHECK(gen::max_abs_diff(t.reconstruction.raw(), bf.reconstruction.raw()) <= 1e-9);
      CHECK(t.disoccluded == bf.disoccluded);
    });
  }
}
