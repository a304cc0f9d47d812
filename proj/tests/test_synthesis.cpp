#include <cmath>

#include <doctest.h>

#include "generators.hpp"
#include "ldis/oracle.hpp"
#include "ldis/synthesis.hpp"

using namespace ldis;

namespace {

PipelineConfig config(double tau = 0.05) {
  PipelineConfig pc;
  pc.binning.tau = tau;
  return pc;
}

Latents constant_latents(int w, int h, double p) {
  return Latents{AffineParams{}, AffineParams{}, AlphaField(w, h, p)};
}

Latents random_latents(gen::Gen& g, int w, int h) {
  Latents lat{g.params(0.3, 0.1), g.params(0.3, 0.1), AlphaField(w, h)};
  for (double& v : lat.p.values()) v = g.coin() ? g.uniform(0.55, 1.2) : g.uniform(-0.2, 0.45);
  return lat;
}

}  // namespace

TEST_SUITE("synthesis") {
  TEST_CASE("identity configurations reproduce frame 1") {
    gen::Gen g(51);
    const Image i1 = g.image(12, 9, 0.01, 1.0);
    const CoordMap cm(12, 9);
    for (double p : {1.0, 0.0}) {
      const SynthesisTape t = synthesize(i1, constant_latents(12, 9, p), config(), cm);
      CHECK(t.reconstruction == i1);
      CHECK(t.disoccluded == Mask(12, 9));
    }
  }

  TEST_CASE("translated square over a static background") {
    const int w = 32, h = 24;
    gen::Gen g(52);
    const Image i1 = g.image(w, h, 0.05, 1.0);
    const CoordMap cm(w, h);
    const PipelineConfig pc = config(0.05);
    Latents lat = constant_latents(w, h, 0.0);
    for (int y = 8; y < 16; ++y) {
      for (int x = 8; x < 16; ++x) lat.p.at(x, y) = 1.0;
    }
    // The pipeline moves a layer by alpha * W; compensate so the square moves 5 px.
    lat.params1[0] = 5.0 / cm.half_x() / bin_probability(1.0, pc.binning);
    const SynthesisTape t = synthesize(i1, lat, pc, cm);

    Image expected(w, h);
    Mask strip(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool in_new = y >= 8 && y < 16 && x - 5 >= 8 && x - 5 < 16;
        const bool in_old = y >= 8 && y < 16 && x >= 8 && x < 16;
        for (int c = 0; c < 3; ++c) {
          expected.at(x, y, c) = in_new ? i1.at(x - 5, y, c) : (in_old ? 0.0 : i1.at(x, y, c));
        }
        strip.at(x, y) = in_old && !in_new;
      }
    }
    CHECK(gen::max_abs_diff(t.reconstruction.values(), expected.values()) <= 1e-9);
    CHECK(t.disoccluded == strip);

    const oracle::Composite bf = oracle::brute_force_composite(i1, lat, pc, cm);
    CHECK(gen::max_abs_diff(t.reconstruction.values(), bf.reconstruction.values()) <= 1e-9);
    CHECK(t.disoccluded == bf.disoccluded);
  }

  TEST_CASE("everything moved out of frame is degenerate") {
    gen::Gen g(53);
    const Image i1 = g.image(10, 10, 0.1, 1.0);
    Latents lat = constant_latents(10, 10, 0.2);
    for (int y = 0; y < 10; y += 2) lat.p.at(3, y) = 0.9;
    lat.params1[0] = 30.0;
    lat.params2[3] = -30.0;
    const SynthesisTape t = synthesize(i1, lat, config(), CoordMap(10, 10));
    CHECK(t.disoccluded == Mask(10, 10, 1));
    const LossReport r = photometric_loss(i1, t, 1e-6);
    CHECK(r.loss == 0.0);
    CHECK(r.degenerate);
    CHECK(r.disoccluded_count == 100);
    CHECK(r.valid_pixel_count == 0);
  }

  TEST_CASE("disocclusion mask thresholds every channel") {
    Image img(3, 1);
    img.at(0, 0, 0) = 0.0;
    img.at(1, 0, 1) = 2e-6;
    img.at(2, 0, 2) = -5e-7;
    const Mask d = disocclusion_mask(img, 1e-6);
    CHECK(d.raw() == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(disocclusion_mask(Image(2, 2, 0.3), 1e-6) == Mask(2, 2));
  }

  TEST_CASE("Charbonnier penalty") {
    CHECK(charbonnier(0.0) == 0.001);
    CHECK(charbonnier(1.0) == doctest::Approx(1.0000005).epsilon(1e-12));
    gen::for_all(20, 54, [](gen::Gen& g) {
      const double x = g.uniform(-3, 3);
      CHECK(charbonnier(-x) == charbonnier(x));
      CHECK(charbonnier_derivative(x) == doctest::Approx(x / charbonnier(x)).epsilon(1e-15));
    });
  }

  TEST_CASE("photometric loss values") {
    const int w = 7, h = 5;
    gen::Gen g(55);
    const Image i1 = g.image(w, h, 0.05, 1.0);
    const CoordMap cm(w, h);
    const SynthesisTape t = synthesize(i1, constant_latents(w, h, 1.0), config(), cm);
    const LossReport exact = photometric_loss(i1, t, 1e-6);
    CHECK(exact.loss == doctest::Approx(3 * w * h * 0.001).epsilon(1e-12));
    CHECK(exact.valid_pixel_count == w * h);
    CHECK(!exact.degenerate);

    Image i2 = i1;
    i2.at(3, 2, 1) += 0.5;
    const LossReport one = photometric_loss(i2, t, 1e-6);
    CHECK(one.loss == doctest::Approx((3 * w * h - 1) * 0.001 + std::sqrt(0.25 + 1e-6)).epsilon(1e-12));

    const AlphaField ones(w, h, 1.0);
    CHECK(photometric_loss(i2, t, 1e-6, &ones).loss == one.loss);
    AlphaField half(w, h, 0.5);
    CHECK(photometric_loss(i2, t, 1e-6, &half).loss == doctest::Approx(0.5 * one.loss).epsilon(1e-14));
  }

  TEST_CASE("all-disoccluded tape has zero loss") {
    const Image black(6, 6);
    const SynthesisTape t = synthesize(black, constant_latents(6, 6, 1.0), config(), CoordMap(6, 6));
    gen::Gen g(56);
    const LossReport r = photometric_loss(g.image(6, 6), t, 1e-6);
    CHECK(r.loss == 0.0);
    CHECK(r.disoccluded_count == 36);
  }

  TEST_CASE("frame size mismatch is rejected") {
    gen::Gen g(57);
    const SynthesisTape t = synthesize(g.image(6, 6), constant_latents(6, 6, 1.0), config(), CoordMap(6, 6));
    CHECK_THROWS_AS(photometric_loss(g.image(5, 6), t, 1e-6), Error);
    CHECK_THROWS_AS(synthesize(g.image(6, 6), constant_latents(5, 6, 1.0), config(), CoordMap(6, 6)), Error);
  }

  TEST_CASE("gradient vanishes at the identity") {
    gen::Gen g(58);
    const Image i1 = g.image(9, 8, 0.05, 1.0);
    const CoordMap cm(9, 8);
    const PipelineConfig pc = config();
    const SynthesisTape t = synthesize(i1, constant_latents(9, 8, 1.0), pc, cm);
    const LatentsGradient gr = backward(t, i1, pc, cm);
    for (double v : gr.params1) CHECK(v == 0.0);
    for (double v : gr.params2) CHECK(v == 0.0);
    for (double v : gr.p.values()) CHECK(v == 0.0);
  }

  TEST_CASE("background-motion gradient matches finite differences") {
    gen::Gen g(59);
    const int w = 14, h = 12;
    const Image i1 = g.smooth_image(w, h, 0.05, 0.95);
    const Image i2 = g.smooth_image(w, h, 0.05, 0.95);
    const CoordMap cm(w, h);
    PipelineConfig pc = config(0.1);
    pc.disocclusion_eps = 0.0;
    Latents lat = constant_latents(w, h, 0.2);
    lat.params2 = g.params(0.05, 0.02);
    const auto fn = [&](std::span<const double> x) {
      Latents l = lat;
      std::copy(x.begin(), x.end(), l.params2.a.begin());
      return photometric_loss(i2, synthesize(i1, l, pc, cm), pc.disocclusion_eps).loss;
    };
    const SynthesisTape t = synthesize(i1, lat, pc, cm);
    const LatentsGradient gr = backward(t, i2, pc, cm);
    CHECK(oracle::relative_error(gr.params2, oracle::finite_diff(fn, lat.params2.a, 1e-5)) < 1e-4);
  }

  TEST_CASE("constant weight scales the gradient") {
    gen::Gen g(60);
    const int w = 10, h = 8;
    const Image i1 = g.smooth_image(w, h, 0.05, 0.95);
    const Image i2 = g.smooth_image(w, h, 0.05, 0.95);
    const CoordMap cm(w, h);
    const PipelineConfig pc = config(0.1);
    const Latents lat = random_latents(g, w, h);
    const SynthesisTape t = synthesize(i1, lat, pc, cm);
    const LatentsGradient plain = backward(t, i2, pc, cm);
    const AlphaField ones(w, h, 1.0), twos(w, h, 2.0);
    const LatentsGradient same = backward(t, i2, pc, cm, &ones);
    const LatentsGradient twice = backward(t, i2, pc, cm, &twos);
    for (int k = 0; k < 6; ++k) {
      CHECK(same.params1[k] == plain.params1[k]);
      CHECK(twice.params2[k] == doctest::Approx(2 * plain.params2[k]).epsilon(1e-13).scale(1.0));
    }
    CHECK(same.p == plain.p);
  }

  TEST_CASE("property: compositing selects exactly one warped layer") {
    gen::for_all(25, 61, [](gen::Gen& g) {
      const int w = g.integer(4, 16), h = g.integer(4, 16);
      const Image i1 = g.image(w, h);
      const SynthesisTape t = synthesize(i1, random_latents(g, w, h), config(g.uniform(0.05, 0.5)), CoordMap(w, h));
      for (std::size_t i = 0; i < t.top_weight.pixel_count(); ++i) {
        const double b = t.top_weight.at(i);
        REQUIRE((b == 0.0 || b == 1.0));
        const Image& src = b == 1.0 ? t.warped1 : t.warped2;
        for (int c = 0; c < 3; ++c) CHECK(t.reconstruction.at(i, c) == src.at(i, c));
      }
    });
  }

  TEST_CASE("property: layer intensities are disjoint") {
    gen::for_all(25, 62, [](gen::Gen& g) {
      const int w = g.integer(2, 16), h = g.integer(2, 16);
      const SynthesisTape t = synthesize(g.image(w, h), random_latents(g, w, h), config(), CoordMap(w, h));
      for (std::size_t i = 0; i < t.layer1.raw().size(); ++i) CHECK(t.layer1.raw()[i] * t.layer2.raw()[i] == 0.0);
    });
  }

  TEST_CASE("property: disoccluded pixels are near zero") {
    gen::for_all(25, 63, [](gen::Gen& g) {
      const int w = g.integer(2, 16), h = g.integer(2, 16);
      PipelineConfig pc = config();
      pc.disocclusion_eps = g.uniform(0.0, 1e-3);
      const SynthesisTape t = synthesize(g.image(w, h), random_latents(g, w, h), pc, CoordMap(w, h));
      for (std::size_t i = 0; i < t.disoccluded.pixel_count(); ++i) {
        if (!t.disoccluded.at(i)) continue;
        for (int c = 0; c < 3; ++c) CHECK(std::abs(t.reconstruction.at(i, c)) <= pc.disocclusion_eps);
      }
    });
  }

  TEST_CASE("property: hidden background content does not leak through the top layer") {
    gen::for_all(25, 64, [](gen::Gen& g) {
      const int w = g.integer(4, 16), h = g.integer(4, 16);
      const CoordMap cm(w, h);
      const Latents lat = random_latents(g, w, h);
      Image i1 = g.image(w, h);
      const SynthesisTape before = synthesize(i1, lat, config(), cm);
      for (std::size_t i = 0; i < i1.pixel_count(); ++i) {
        if (before.support2.at(i) == 0.0) continue;
        for (int c = 0; c < 3; ++c) i1.at(i, c) = g.uniform(0, 1);
      }
      const SynthesisTape after = synthesize(i1, lat, config(), cm);
      CHECK(after.top_weight == before.top_weight);
      for (std::size_t i = 0; i < i1.pixel_count(); ++i) {
        if (before.top_weight.at(i) != 1.0) continue;
        for (int c = 0; c < 3; ++c) CHECK(after.reconstruction.at(i, c) == before.reconstruction.at(i, c));
      }
    });
  }

  TEST_CASE("property: loss is bounded below by the valid-pixel floor") {
    gen::for_all(25, 65, [](gen::Gen& g) {
      const int w = g.integer(2, 12), h = g.integer(2, 12);
      const SynthesisTape t = synthesize(g.image(w, h), random_latents(g, w, h), config(), CoordMap(w, h));
      const LossReport r = photometric_loss(g.image(w, h), t, 1e-6);
      CHECK(r.valid_pixel_count + r.disoccluded_count == static_cast<std::size_t>(w * h));
      if (r.valid_pixel_count > 0) CHECK(r.loss > 0.003 * r.valid_pixel_count);
      const LossReport exact = photometric_loss(t.reconstruction, t, 1e-6);
      CHECK(exact.loss == doctest::Approx(0.003 * exact.valid_pixel_count).epsilon(1e-12));
    });
  }
}
