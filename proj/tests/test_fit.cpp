#include <cmath>

#include <doctest.h>

#include "generators.hpp"
#include "ldis/evaluation.hpp"
#include "ldis/fit.hpp"

using namespace ldis;

namespace {

LatentsGradient zero_gradient(int w, int h) { return LatentsGradient{{}, {}, AlphaField(w, h)}; }

// Band-limited noise with its range stretched to [0.05, 0.95] per channel.
Image texture(gen::Gen& g, int w, int h) {
  Image img = gaussian_blur(g.image(w, h), 2.0);
  for (int c = 0; c < 3; ++c) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      lo = std::min(lo, img.at(i, c));
      hi = std::max(hi, img.at(i, c));
    }
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      img.at(i, c) = 0.05 + 0.9 * (img.at(i, c) - lo) / (hi - lo);
    }
  }
  return img;
}

struct Pair {
  Image frame1, frame2;
  Mask mask1;
};

// Elliptic sprite translated by (fx, 0) over a background translated by
// (bx, 0); frame 2 samples both layers backwards from textures larger than
// the frame, so it has no holes.
Pair translated_pair(int w, int h, int fx, int bx, std::uint64_t seed) {
  gen::Gen g(seed);
  const int m = 8;
  const Image bg = texture(g, w + 2 * m, h + 2 * m);
  const Image fg = texture(g, w, h);
  const auto inside = [&](int x, int y) {
    const double dx = (x - 0.45 * w) / (0.16 * w), dy = (y - 0.5 * h) / (0.25 * h);
    return dx * dx + dy * dy <= 1.0;
  };
  Pair p{Image(w, h), Image(w, h), Mask(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      p.mask1.at(x, y) = inside(x, y);
      const bool in2 = inside(x - fx, y);
      for (int c = 0; c < 3; ++c) {
        p.frame1.at(x, y, c) = p.mask1.at(x, y) ? fg.at(x, y, c) : bg.at(x + m, y + m, c);
        p.frame2.at(x, y, c) = in2 ? fg.at(x - fx, y, c) : bg.at(x - bx + m, y + m, c);
      }
    }
  }
  return p;
}

}  // namespace

TEST_SUITE("fit") {
  TEST_CASE("zero gradient leaves the latents and advances the step") {
    gen::Gen g(71);
    Latents lat{g.params(0.1, 0.1), g.params(0.1, 0.1), g.field(4, 3, 0, 1)};
    const Latents before = lat;
    AdamState st = AdamState::zeros(4, 3);
    adam_step(lat, zero_gradient(4, 3), st, FitConfig{});
    CHECK(lat.params1 == before.params1);
    CHECK(lat.params2 == before.params2);
    CHECK(lat.p == before.p);
    CHECK(st.t == 1);
  }

  TEST_CASE("first Adam step has magnitude close to the learning rate") {
    const FitConfig cfg;
    for (double gval : {3.0, -0.02, 1e-3}) {
      Latents lat{AffineParams{}, AffineParams{}, AlphaField(2, 2)};
      AdamState st = AdamState::zeros(2, 2);
      LatentsGradient gr = zero_gradient(2, 2);
      gr.params1[2] = gval;
      gr.p.at(std::size_t{3}) = gval;
      adam_step(lat, gr, st, cfg);
      const double m = gval * (1 - cfg.beta1) / (1 - cfg.beta1);
      const double v = gval * gval * (1 - cfg.beta2) / (1 - cfg.beta2);
      const double expect = -m / (std::sqrt(v) + cfg.adam_eps);
      CHECK(lat.params1[2] == doctest::Approx(cfg.lr_params * expect).epsilon(1e-12));
      CHECK(lat.p.at(std::size_t{3}) == doctest::Approx(cfg.lr_alpha * expect).epsilon(1e-12));
      CHECK(lat.params1[2] == doctest::Approx(-cfg.lr_params * (gval > 0 ? 1 : -1)).epsilon(1e-4));
    }
  }

  TEST_CASE("constant gradient moves each step by the learning rate") {
    FitConfig cfg;
    Latents lat{AffineParams{}, AffineParams{}, AlphaField(1, 1)};
    AdamState st = AdamState::zeros(1, 1);
    LatentsGradient gr = zero_gradient(1, 1);
    gr.params2[0] = 0.7;
    double prev = 0.0, step = 0.0;
    for (int i = 0; i < 500; ++i) {
      adam_step(lat, gr, st, cfg);
      step = prev - lat.params2[0];
      prev = lat.params2[0];
    }
    CHECK(step == doctest::Approx(cfg.lr_params).epsilon(1e-6));
  }

  TEST_CASE("non-finite gradient is rejected without side effects") {
    Latents lat{AffineParams{}, AffineParams{}, AlphaField(2, 2, 0.4)};
    const Latents before = lat;
    AdamState st = AdamState::zeros(2, 2);
    LatentsGradient gr = zero_gradient(2, 2);
    gr.params1[0] = 1.0;
    gr.p.at(std::size_t{1}) = NAN;
    try {
      adam_step(lat, gr, st, FitConfig{});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::non_finite);
    }
    CHECK(lat.params1 == before.params1);
    CHECK(lat.p == before.p);
    CHECK(st.t == 0);
  }

  TEST_CASE("initial latents are deterministic, bounded and restart-specific") {
    const Latents a = init_latents(128, 64, 2, 9);
    const Latents b = init_latents(128, 64, 2, 9);
    CHECK(a.params1 == b.params1);
    CHECK(a.params2 == b.params2);
    CHECK(a.p == b.p);
    const Latents c = init_latents(128, 64, 3, 9);
    CHECK(!(c.params1 == a.params1));
    CHECK(!(c.p == a.p));
    gen::for_all(20, 72, [](gen::Gen& g) {
      const Latents l = init_latents(g.integer(1, 70), g.integer(1, 70), g.integer(0, 9), g.integer(0, 1000));
      for (const AffineParams* p : {&l.params1, &l.params2}) {
        for (int k = 0; k < 6; ++k) CHECK(std::abs((*p)[k]) <= ((k == 0 || k == 3) ? 0.1 : 0.05));
      }
      for (double v : l.p.values()) {
        CHECK(v >= 0.3);
        CHECK(v <= 0.7);
      }
    });
  }

  TEST_CASE("configuration validation") {
    FitConfig c;
    CHECK_NOTHROW(c.validate());
    c.lr_params = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = FitConfig{};
    c.restarts = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = FitConfig{};
    c.tau_end = -1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = FitConfig{};
    c.dominant_fraction = 0.8;
    c.support_fraction = 0.5;
    CHECK_THROWS_AS(c.validate(), Error);
  }

  TEST_CASE("temperature schedule is geometric between the endpoints") {
    const FitConfig c;
    CHECK(c.tau_at(0) == doctest::Approx(c.tau_start));
    CHECK(c.tau_at(c.max_iters - 1) == doctest::Approx(c.tau_end));
    const double r1 = c.tau_at(11) / c.tau_at(10), r2 = c.tau_at(1001) / c.tau_at(1000);
    CHECK(r1 == doctest::Approx(r2).epsilon(1e-12));
  }

  TEST_CASE("fit rejects tiny or mismatched frames") {
    gen::Gen g(73);
    CHECK_THROWS_AS(fit_pair(g.image(15, 20), g.image(15, 20), FitConfig{}), Error);
    CHECK_THROWS_AS(fit_pair(g.image(20, 20), g.image(21, 20), FitConfig{}), Error);
  }

  TEST_CASE("all-black frames make every restart degenerate") {
    FitConfig cfg;
    cfg.restarts = 2;
    cfg.max_iters = 60;
    try {
      fit_pair(Image(20, 16), Image(20, 16), cfg);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::degenerate);
    }
  }

  TEST_CASE("static pair converges to the identity loss bound") {
    gen::Gen g(74);
    const Image frame = texture(g, 128, 64);
    FitConfig cfg;
    cfg.restarts = 1;
    const FitResult r = fit_pair(frame, frame, cfg);
    CHECK(r.final_loss <= 1.05 * 0.001 * 3 * 128 * 64);
    CHECK(r.final_tau == cfg.tau_end);
  }

  TEST_CASE("translated sprite over a moving background is segmented") {
    const Pair p = translated_pair(128, 64, 4, -2, 75);
    FitConfig cfg;
    cfg.restarts = 2;
    const FitResult r = fit_pair(p.frame1, p.frame2, cfg);
    const Mask m = layer_mask(r.latents, cfg.tau_end, cfg.threshold);
    CHECK(jaccard_best_permutation(m, p.mask1).jaccard >= 0.8);

    // Invariants of the result.
    for (double v : r.loss_curve) CHECK(std::isfinite(v));
    CHECK(r.final_loss <= r.initial_loss);
    CHECK(r.restarts.size() == 2);
    for (const auto& s : r.restarts) {
      if (!s.degenerate) CHECK(r.final_loss <= s.final_loss);
    }
    CHECK(r.final_loss == r.restarts[r.restart].final_loss);
    CHECK(r.final_loss == doctest::Approx(fit_loss(p.frame1, p.frame2, r.latents, cfg, cfg.tau_end).loss));
  }

  TEST_CASE("fit is deterministic and independent of the thread count") {
    const Pair p = translated_pair(48, 32, 3, -1, 76);
    FitConfig cfg;
    cfg.restarts = 3;
    cfg.max_iters = 200;
    cfg.seed = 1;
    const FitResult a = fit_pair(p.frame1, p.frame2, cfg);
    const FitResult b = fit_pair(p.frame1, p.frame2, cfg);
    cfg.jobs = 3;
    const FitResult c = fit_pair(p.frame1, p.frame2, cfg);
    for (const FitResult* o : {&b, &c}) {
      CHECK(o->final_loss == a.final_loss);
      CHECK(o->restart == a.restart);
      CHECK(o->loss_curve == a.loss_curve);
      CHECK(o->latents.params1 == a.latents.params1);
      CHECK(o->latents.params2 == a.latents.params2);
      CHECK(o->latents.p == a.latents.p);
    }
  }
}
