#include "ldis/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "random.hpp"

namespace ldis::oracle {

namespace {

double sum_product(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T, int C>
void fill_uniform(Grid<T, C>& g, detail::Rng& rng, double lo, double hi) {
  for (double& v : g.values()) v = rng.uniform(lo, hi);
}

// Uniform draw from [lo, hi] whose distance to every point of `kinks` exceeds `gap`.
double away_from(detail::Rng& rng, double lo, double hi, std::initializer_list<double> kinks,
                 double gap) {
  for (;;) {
    const double v = rng.uniform(lo, hi);
    bool ok = true;
    for (double k : kinks) ok = ok && std::abs(v - k) > gap;
    if (ok) return v;
  }
}

double frac_distance(double v) {
  const double f = v - std::floor(v);
  return std::min(f, 1.0 - f);
}

struct TrialResult {
  double error = 0.0;
};

// Accumulates trial errors into a report.
class Tracker {
 public:
  Tracker(std::string op, const GradCheckOptions& opts) {
    report_.op = std::move(op);
    report_.tolerance = opts.tolerance;
  }
  void add(double err, std::uint64_t seed) {
    ++report_.trials;
    if (!std::isfinite(err) || err >= report_.max_rel_error || report_.trials == 1) {
      if (!std::isfinite(err) || err > report_.max_rel_error || report_.trials == 1) {
        report_.max_rel_error = std::isfinite(err) ? err : INFINITY;
        report_.worst_seed = seed;
      }
    }
  }
  GradCheckReport finish() {
    report_.passed = report_.max_rel_error < report_.tolerance;
    return report_;
  }

 private:
  GradCheckReport report_;
};

std::uint64_t trial_seed(std::uint64_t seed, int op, int trial) {
  return detail::splitmix64(seed * 1000003ULL + static_cast<std::uint64_t>(op) * 7919ULL +
                            static_cast<std::uint64_t>(trial));
}

// ---- per-op checks -------------------------------------------------------

double check_affine(std::uint64_t seed, const GradCheckOptions& o) {
  detail::Rng rng(seed);
  const int w = rng.uniform_int(4, 12);
  const int h = rng.uniform_int(4, 12);
  const CoordMap cmap(w, h);
  FlowField cot(w, h);
  fill_uniform(cot, rng, -1.0, 1.0);
  std::vector<double> x(6);
  for (double& v : x) v = rng.uniform(-0.5, 0.5);
  const auto fn = [&](std::span<const double> a) {
    AffineParams p;
    std::copy(a.begin(), a.end(), p.a.begin());
    return sum_product(dense_flow(p, cmap).values(), cot.values());
  };
  const AffineGradient g = flow_param_vjp(cot, cmap);
  return relative_error(g, finite_diff(fn, x, o.step));
}

double check_dorelu(std::uint64_t seed, const GradCheckOptions& o) {
  detail::Rng rng(seed);
  const double gamma = 10.0;
  AlphaField x(7, 5);
  AlphaField cot(7, 5);
  for (double& v : x.values()) v = away_from(rng, -2.0, 3.0, {0.0, 1.0}, 10 * o.step);
  fill_uniform(cot, rng, -1.0, 1.0);
  const auto fn = [&](std::span<const double> v) {
    AlphaField in(7, 5);
    std::copy(v.begin(), v.end(), in.values().begin());
    return sum_product(leaky_dorelu(in, gamma).values(), cot.values());
  };
  const AlphaField g = leaky_dorelu_vjp(cot, x, gamma);
  return relative_error(g.values(), finite_diff(fn, x.values(), o.step));
}

double check_clamp(std::uint64_t seed, const GradCheckOptions& o) {
  detail::Rng rng(seed);
  AlphaField x(7, 5);
  AlphaField cot(7, 5);
  for (double& v : x.values()) v = away_from(rng, -0.5, 1.5, {0.0, 1.0}, 10 * o.step);
  fill_uniform(cot, rng, -1.0, 1.0);
  const auto fn = [&](std::span<const double> v) {
    AlphaField in(7, 5);
    std::copy(v.begin(), v.end(), in.values().begin());
    return sum_product(clamp01(in).values(), cot.values());
  };
  const AlphaField g = clamp01_vjp(cot, x);
  return relative_error(g.values(), finite_diff(fn, x.values(), o.step));
}

double check_binning(std::uint64_t seed, const GradCheckOptions& o) {
  detail::Rng rng(seed);
  BinningConfig cfg;
  cfg.tau = rng.uniform(0.05, 0.5);
  AlphaField p(7, 5);
  AlphaPair cot{AlphaField(7, 5), AlphaField(7, 5)};
  fill_uniform(p, rng, 0.0, 1.0);
  fill_uniform(cot.alpha0, rng, -1.0, 1.0);
  fill_uniform(cot.alpha1, rng, -1.0, 1.0);
  const auto fn = [&](std::span<const double> v) {
    AlphaField in(7, 5);
    std::copy(v.begin(), v.end(), in.values().begin());
    const AlphaPair out = softmax_binning(in, cfg);
    return sum_product(out.alpha0.values(), cot.alpha0.values()) +
           sum_product(out.alpha1.values(), cot.alpha1.values());
  };
  const AlphaField g = softmax_binning_vjp(cot, p, cfg);
  return relative_error(g.values(), finite_diff(fn, p.values(), o.step));
}

double check_maxout(std::uint64_t seed, const GradCheckOptions& o) {
  detail::Rng rng(seed);
  const int n = 35;
  std::vector<double> x(2 * n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform(0.0, 1.0);
    // Keep every pair at least 10h away from a tie.
    do {
      x[n + i] = rng.uniform(0.0, 1.0);
    } while (std::abs(x[n + i] - x[i]) <= 10 * o.step);
  }
  AlphaPair cot{AlphaField(7, 5), AlphaField(7, 5)};
  fill_uniform(cot.alpha0, rng, -1.0, 1.0);
  fill_uniform(cot.alpha1, rng, -1.0, 1.0);
  const auto unpack = [&](std::span<const double> v) {
    AlphaPair pair{AlphaField(7, 5), AlphaField(7, 5)};
    std::copy(v.begin(), v.begin() + n, pair.alpha0.values().begin());
    std::copy(v.begin() + n, v.end(), pair.alpha1.values().begin());
    return pair;
  };
  const auto fn = [&](std::span<const double> v) {
    const AlphaPair out = maxout_disjoint(unpack(v));
    return sum_product(out.alpha0.values(), cot.alpha0.values()) +
           sum_product(out.alpha1.values(), cot.alpha1.values());
  };
  const AlphaPair g = maxout_disjoint_vjp(cot, unpack(x));
  std::vector<double> flat(g.alpha0.values().begin(), g.alpha0.values().end());
  flat.insert(flat.end(), g.alpha1.values().begin(), g.alpha1.values().end());
  return relative_error(flat, finite_diff(fn, x, o.step));
}

// Random 6x5, C=3 splat instance with fractional landing offsets in [0.1, 0.9].
struct SplatInstance {
  SplatField<3> values{6, 5};
  FlowField flow{6, 5};
  SplatField<3> cot{6, 5};
};

SplatInstance splat_instance(std::uint64_t seed) {
  detail::Rng rng(seed);
  SplatInstance s;
  fill_uniform(s.values, rng, -1.0, 1.0);
  fill_uniform(s.cot, rng, -1.0, 1.0);
  for (std::size_t i = 0; i < s.flow.pixel_count(); ++i) {
    for (int c = 0; c < 2; ++c) {
      s.flow.at(i, c) = static_cast<double>(rng.uniform_int(-2, 1)) + rng.uniform(0.1, 0.9);
    }
  }
  return s;
}

SplatGradients<3> checked_splat_vjp(const SplatInstance& s, const GradCheckOptions& o) {
  auto g = forward_splat_vjp(s.cot, s.values, s.flow);
  if (o.mutation == Mutation::splat_flow_sign_flip) {
    for (double& v : g.flow.values()) v = -v;
  }
  return g;
}

double check_splat_values(std::uint64_t seed, const GradCheckOptions& o) {
  const SplatInstance s = splat_instance(seed);
  const auto fn = [&](std::span<const double> v) {
    SplatField<3> in(6, 5);
    std::copy(v.begin(), v.end(), in.values().begin());
    return sum_product(forward_splat(in, s.flow).values(), s.cot.values());
  };
  const auto g = checked_splat_vjp(s, o);
  return relative_error(g.values.values(), finite_diff(fn, s.values.values(), o.step));
}

double check_splat_flow(std::uint64_t seed, const GradCheckOptions& o) {
  const SplatInstance s = splat_instance(seed);
  const auto fn = [&](std::span<const double> v) {
    FlowField in(6, 5);
    std::copy(v.begin(), v.end(), in.values().begin());
    return sum_product(forward_splat(s.values, in).values(), s.cot.values());
  };
  const auto g = checked_splat_vjp(s, o);
  return relative_error(g.flow.values(), finite_diff(fn, s.flow.values(), o.step));
}

double check_charbonnier(std::uint64_t seed, const GradCheckOptions& o) {
  detail::Rng rng(seed);
  std::vector<double> x(8);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const auto fn = [](std::span<const double> v) {
    double s = 0.0;
    for (double e : v) s += charbonnier(e);
    return s;
  };
  std::vector<double> g(x.size());
  std::transform(x.begin(), x.end(), g.begin(), [](double v) { return charbonnier_derivative(v); });
  return relative_error(g, finite_diff(fn, x, o.step));
}

// ---- pipeline-level checks ----------------------------------------------

constexpr int kPipeW = 16;
constexpr int kPipeH = 16;
// Distance every landing position / selector value keeps from a kink.
constexpr double kKinkGap = 2e-3;

struct PipelineInstance {
  Image frame1;
  Image frame2;
  Latents latents;
  PipelineConfig cfg;
};

// Smooth random image: a few low-frequency sinusoids per channel mapped to [lo, hi].
Image smooth_image(detail::Rng& rng, int w, int h, double lo, double hi) {
  Image img(w, h);
  for (int c = 0; c < 3; ++c) {
    const double kx = rng.uniform(0.1, 0.5);
    const double ky = rng.uniform(0.1, 0.5);
    const double ph = rng.uniform(0.0, 6.28);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double s = 0.5 + 0.5 * std::sin(kx * x + ky * y + ph);
        img.at(x, y, c) = lo + (hi - lo) * s;
      }
    }
  }
  return img;
}

PipelineInstance draw_instance(detail::Rng& rng, BinarizeMode mode) {
  PipelineInstance in;
  // Frame 1 is dark and frame 2 bright, keeping every residual far from the
  // curvature scale of the Charbonnier penalty.
  in.frame1 = smooth_image(rng, kPipeW, kPipeH, 0.05, 0.4);
  in.frame2 = smooth_image(rng, kPipeW, kPipeH, 0.6, 0.95);
  for (AffineParams* a : {&in.latents.params1, &in.latents.params2}) {
    for (std::size_t k = 0; k < 6; ++k) {
      (*a)[k] = (k == 0 || k == 3) ? rng.uniform(-0.3, 0.3) : rng.uniform(-0.1, 0.1);
    }
  }
  in.latents.p = AlphaField(kPipeW, kPipeH);
  for (double& v : in.latents.p.values()) {
    v = rng.uniform() < 0.5 ? rng.uniform(0.05, 0.45) : rng.uniform(0.55, 0.95);
  }
  in.cfg.binning.tau = 0.1;
  in.cfg.mode = mode;
  // Exact-zero disocclusion test: D then changes only where a footprint
  // crosses a pixel boundary, which the kink gap excludes.
  in.cfg.disocclusion_eps = 0.0;
  return in;
}

bool landing_clear(const SynthesisTape& t, std::size_t i) {
  const int w = t.flow1.width();
  const double x = static_cast<double>(i % w);
  const double y = static_cast<double>(i / w);
  const bool top = t.alpha.alpha1.at(i) > 0.0;
  const FlowField& f = top ? t.flow1 : t.flow2;
  return frac_distance(x + f.at(i, 0)) > kKinkGap && frac_distance(y + f.at(i, 1)) > kKinkGap;
}

bool selectors_clear(const SynthesisTape& t, const PipelineConfig& cfg) {
  for (double v : t.warped_alpha.values()) {
    if (cfg.mode == BinarizeMode::hard && std::abs(std::min(v, 1.0) - cfg.threshold) <= kKinkGap) {
      return false;
    }
    if (cfg.mode == BinarizeMode::relaxed && std::abs(v - 1.0) <= kKinkGap) return false;
  }
  return true;
}

double pipeline_loss(const PipelineInstance& in, const Latents& lat, const CoordMap& cmap) {
  const SynthesisTape t = synthesize(in.frame1, lat, in.cfg, cmap);
  return photometric_loss(in.frame2, t, in.cfg.disocclusion_eps).loss;
}

double check_loss_params(std::uint64_t seed, const GradCheckOptions& o, int layer) {
  detail::Rng rng(seed);
  const CoordMap cmap(kPipeW, kPipeH);
  for (;;) {
    const PipelineInstance in = draw_instance(rng, BinarizeMode::hard);
    const SynthesisTape tape = synthesize(in.frame1, in.latents, in.cfg, cmap);
    bool clear = selectors_clear(tape, in.cfg);
    for (std::size_t i = 0; clear && i < tape.flow1.pixel_count(); ++i) clear = landing_clear(tape, i);
    if (!clear) continue;
    const LatentsGradient g = backward(tape, in.frame2, in.cfg, cmap);
    const AffineParams& p0 = layer == 1 ? in.latents.params1 : in.latents.params2;
    const auto fn = [&](std::span<const double> a) {
      Latents lat = in.latents;
      AffineParams& p = layer == 1 ? lat.params1 : lat.params2;
      std::copy(a.begin(), a.end(), p.a.begin());
      return pipeline_loss(in, lat, cmap);
    };
    return relative_error(layer == 1 ? g.params1 : g.params2, finite_diff(fn, p0.a, o.step));
  }
}

double check_loss_p(std::uint64_t seed, const GradCheckOptions& o, BinarizeMode mode) {
  detail::Rng rng(seed);
  const CoordMap cmap(kPipeW, kPipeH);
  for (;;) {
    const PipelineInstance in = draw_instance(rng, mode);
    const SynthesisTape tape = synthesize(in.frame1, in.latents, in.cfg, cmap);
    if (!selectors_clear(tape, in.cfg)) continue;
    std::vector<std::size_t> coords;
    for (std::size_t i = 0; i < in.latents.p.pixel_count(); ++i) {
      if (landing_clear(tape, i)) coords.push_back(i);
    }
    const LatentsGradient g = backward(tape, in.frame2, in.cfg, cmap);
    const auto fn = [&](std::span<const double> v) {
      Latents lat = in.latents;
      std::copy(v.begin(), v.end(), lat.p.values().begin());
      return pipeline_loss(in, lat, cmap);
    };
    const auto fd = finite_diff(fn, in.latents.p.values(), o.step, coords);
    std::vector<double> analytic;
    for (std::size_t i : coords) analytic.push_back(g.p.at(i));
    return relative_error(analytic, fd);
  }
}

}  // namespace

std::vector<double> finite_diff(const ScalarFn& fn, std::span<const double> x, double h) {
  std::vector<std::size_t> all(x.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return finite_diff(fn, x, h, all);
}

std::vector<double> finite_diff(const ScalarFn& fn, std::span<const double> x, double h,
                                std::span<const std::size_t> coords) {
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "finite_diff: step must be > 0");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g;
  g.reserve(coords.size());
  for (std::size_t k : coords) {
    const double saved = probe[k];
    probe[k] = saved + h;
    const double fp = fn(probe);
    probe[k] = saved - h;
    const double fm = fn(probe);
    probe[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error(ErrorCode::non_finite, "finite_diff: non-finite function value");
    }
    g.push_back((fp - fm) / (2.0 * h));
  }
  return g;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw Error(ErrorCode::dimension_mismatch, "relative_error: size mismatch");
  }
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    if (!std::isfinite(analytic[k]) || !std::isfinite(numeric[k])) return INFINITY;
    diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
    scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
  }
  return scale > 0.0 ? diff / scale : 0.0;
}

std::vector<GradCheckReport> gradcheck_suite(const GradCheckOptions& opts) {
  if (opts.trials < 1) throw Error(ErrorCode::invalid_argument, "gradcheck: trials must be >= 1");
  using Check = std::function<double(std::uint64_t)>;
  const std::vector<std::pair<std::string, Check>> checks = {
      {"dense_flow/flow_param_vjp", [&](std::uint64_t s) { return check_affine(s, opts); }},
      {"leaky_dorelu", [&](std::uint64_t s) { return check_dorelu(s, opts); }},
      {"clamp01", [&](std::uint64_t s) { return check_clamp(s, opts); }},
      {"softmax_binning", [&](std::uint64_t s) { return check_binning(s, opts); }},
      {"maxout_disjoint", [&](std::uint64_t s) { return check_maxout(s, opts); }},
      {"forward_splat_vjp/values", [&](std::uint64_t s) { return check_splat_values(s, opts); }},
      {"forward_splat_vjp/flow", [&](std::uint64_t s) { return check_splat_flow(s, opts); }},
      {"charbonnier", [&](std::uint64_t s) { return check_charbonnier(s, opts); }},
      {"loss/params1", [&](std::uint64_t s) { return check_loss_params(s, opts, 1); }},
      {"loss/params2", [&](std::uint64_t s) { return check_loss_params(s, opts, 2); }},
      {"relaxed_loss/p", [&](std::uint64_t s) { return check_loss_p(s, opts, BinarizeMode::relaxed); }},
      {"loss/p", [&](std::uint64_t s) { return check_loss_p(s, opts, BinarizeMode::hard); }},
  };
  std::vector<GradCheckReport> reports;
  for (std::size_t op = 0; op < checks.size(); ++op) {
    Tracker tracker(checks[op].first, opts);
    for (int t = 0; t < opts.trials; ++t) {
      const std::uint64_t s = trial_seed(opts.seed, static_cast<int>(op), t);
      tracker.add(checks[op].second(s), s);
    }
    reports.push_back(tracker.finish());
  }
  return reports;
}

nlohmann::json to_json(const std::vector<GradCheckReport>& reports) {
  nlohmann::json checks = nlohmann::json::array();
  bool all = true;
  for (const auto& r : reports) {
    all = all && r.passed;
    checks.push_back({{"op", r.op},
                      {"trials", r.trials},
                      {"max_rel_error", r.max_rel_error},
                      {"worst_seed", r.worst_seed},
                      {"tolerance", r.tolerance},
                      {"passed", r.passed}});
  }
  return {{"checks", checks}, {"all_passed", all}};
}

Composite brute_force_composite(const Image& frame1, const Latents& latents,
                                const PipelineConfig& cfg, const CoordMap& cmap) {
  const int W = frame1.width();
  const int H = frame1.height();
  if (latents.p.width() != W || latents.p.height() != H || cmap.width() != W || cmap.height() != H) {
    throw Error(ErrorCode::dimension_mismatch, "brute_force_composite: dimension mismatch");
  }
  if (W < 2 || H < 2) throw Error(ErrorCode::invalid_argument, "brute_force_composite: frame too small");
  const double tau = cfg.binning.tau;
  const double sx = (W - 1) / 2.0;
  const double sy = (H - 1) / 2.0;

  // Per-layer canvases: 3 intensity channels plus the warped top alpha.
  std::vector<double> top(static_cast<std::size_t>(W) * H * 3, 0.0);
  std::vector<double> bottom(static_cast<std::size_t>(W) * H * 3, 0.0);
  std::vector<double> top_alpha(static_cast<std::size_t>(W) * H, 0.0);

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double q = latents.p.at(x, y);
      if (q < 0.0) q = 0.0;
      if (q > 1.0) q = 1.0;
      const double z0 = q / tau;
      const double z1 = (2.0 * q - 0.5) / tau;
      const double zmax = z0 > z1 ? z0 : z1;
      const double e0 = std::exp(z0 - zmax);
      const double e1 = std::exp(z1 - zmax);
      const double s0 = e0 / (e0 + e1);
      const double s1 = e1 / (e0 + e1);
      // Winner takes the pixel; a tie goes to the bottom layer (interval 0).
      const bool is_top = s1 > s0;
      const double a = is_top ? s1 : s0;
      const AffineParams& A = is_top ? latents.params1 : latents.params2;
      const double xn = 2.0 * x / (W - 1) - 1.0;
      const double yn = 2.0 * y / (H - 1) - 1.0;
      const double u = sx * (A[0] + A[1] * xn + A[2] * yn);
      const double v = sy * (A[3] + A[4] * xn + A[5] * yn);
      const double tx = x + a * u;
      const double ty = y + a * v;
      const bool member = a > cfg.threshold;
      for (int oy = static_cast<int>(std::floor(ty)); oy <= static_cast<int>(std::floor(ty)) + 1; ++oy) {
        for (int ox = static_cast<int>(std::floor(tx)); ox <= static_cast<int>(std::floor(tx)) + 1; ++ox) {
          if (ox < 0 || oy < 0 || ox >= W || oy >= H) continue;
          const double wgt = std::max(0.0, 1.0 - std::abs(tx - ox)) * std::max(0.0, 1.0 - std::abs(ty - oy));
          const std::size_t o = static_cast<std::size_t>(oy) * W + ox;
          if (is_top) top_alpha[o] += a * wgt;
          if (!member) continue;
          std::vector<double>& canvas = is_top ? top : bottom;
          for (int c = 0; c < 3; ++c) canvas[o * 3 + c] += frame1.at(x, y, c) * wgt;
        }
      }
    }
  }

  Composite out{Image(W, H), Mask(W, H)};
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t o = static_cast<std::size_t>(y) * W + x;
      double ta = top_alpha[o];
      if (ta > 1.0) ta = 1.0;
      const bool front = ta > cfg.threshold;
      bool empty = true;
      for (int c = 0; c < 3; ++c) {
        const double v = front ? top[o * 3 + c] : bottom[o * 3 + c];
        out.reconstruction.at(x, y, c) = v;
        if (std::abs(v) > cfg.disocclusion_eps) empty = false;
      }
      out.disoccluded.at(x, y) = empty ? 1 : 0;
    }
  }
  return out;
}

}  // namespace ldis::oracle
