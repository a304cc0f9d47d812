#include "ldis/fit.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "random.hpp"

namespace ldis {

namespace {

LatentsGradient zero_gradient(int width, int height) {
  LatentsGradient g;
  g.p = AlphaField(width, height);
  return g;
}

bool gradient_finite(const LatentsGradient& g) {
  const auto finite6 = [](const AffineGradient& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
  };
  return finite6(g.params1) && finite6(g.params2) && all_finite(g.p.values());
}

double adam_update(double& x, double g, double& m, double& v, double lr, double c1, double c2,
                   const FitConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
  const double delta = -lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
  x += delta;
  return delta;
}

struct RestartOutcome {
  Latents latents;
  std::vector<double> curve;
  RestartSummary summary;
  double initial_loss = 0.0;
};

constexpr double kTopP = 0.9;
constexpr double kBottomP = 0.1;
// Per-pixel residual cap for the translation search.
constexpr double kSearchCap = 0.3;

// Alpha carried by a pixel with membership kTopP or kBottomP at `tau`. The
// pipeline scales flow by it, so a layer moves by alpha * dense_flow(A).
double carried_alpha(double tau) {
  BinningConfig bc;
  bc.tau = tau;
  return bin_probability(kTopP, bc);
}

AffineParams scaled(const AffineParams& a, double k) {
  AffineParams out = a;
  for (double& v : out.a) v *= k;
  return out;
}

// Fraction of a full footprint each output pixel receives from the layer it
// displays, capped at 1. Pixels only partly reached by splats take a small
// fraction of their weight and would otherwise put a jump into the loss at
// every integer crossing of the flow.
AlphaField coverage(const SynthesisTape& tape) {
  const AlphaField cov1 = forward_splat(tape.support1, tape.flow1);
  const AlphaField cov2 = forward_splat(tape.support2, tape.flow2);
  AlphaField out(cov1.width(), cov1.height());
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    const double b = tape.top_weight.at(i);
    out.at(i) = std::min(1.0, b * cov1.at(i) + (1.0 - b) * cov2.at(i));
  }
  return out;
}

// Photometric mismatch of moving I1(x) to x + W(x) in I2, summed over
// channels and box-averaged over a (2r+1)^2 window. NaN where the target
// falls outside the frame.
AlphaField motion_residual(const Image& frame1, const Image& frame2, const AffineParams& a,
                           const CoordMap& cmap, int r) {
  const int w = frame1.width();
  const int h = frame1.height();
  const FlowField flow = dense_flow(a, cmap);
  AlphaField raw(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tx = x + flow.at(x, y, 0);
      const double ty = y + flow.at(x, y, 1);
      if (!(tx >= 0.0 && ty >= 0.0 && tx <= w - 1 && ty <= h - 1)) {
        raw.at(x, y) = NAN;
        continue;
      }
      const int x0 = std::min(static_cast<int>(tx), w - 2);
      const int y0 = std::min(static_cast<int>(ty), h - 2);
      const double fx = tx - x0;
      const double fy = ty - y0;
      double sum = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * frame2.at(x0, y0, c) + fx * frame2.at(x0 + 1, y0, c)) +
                         fy * ((1 - fx) * frame2.at(x0, y0 + 1, c) + fx * frame2.at(x0 + 1, y0 + 1, c));
        sum += std::abs(v - frame1.at(x, y, c));
      }
      raw.at(x, y) = sum;
    }
  }
  if (r == 0) return raw;
  AlphaField out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (std::isnan(raw.at(x, y))) {
        out.at(x, y) = NAN;
        continue;
      }
      double sum = 0.0;
      int n = 0;
      for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r); ++j) {
        for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) {
          if (std::isnan(raw.at(i, j))) continue;
          sum += raw.at(i, j);
          ++n;
        }
      }
      out.at(x, y) = sum / n;
    }
  }
  return out;
}

double median_finite(const AlphaField& f) {
  std::vector<double> v;
  for (double x : f.values()) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.empty()) return 0.0;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

struct Translation {
  int dx = 0;
  int dy = 0;
  double score = 0.0;
};

// Integer translations that are local minima of the capped mean residual
// over `support`, best first.
std::vector<Translation> translation_candidates(const Image& frame1, const Image& frame2,
                                                const Mask& support, int radius) {
  const int w = frame1.width();
  const int h = frame1.height();
  const int side = 2 * radius + 1;
  std::vector<double> score(static_cast<std::size_t>(side) * side, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < support.pixel_count(); ++i) count += support.at(i) ? 1 : 0;
  if (count == 0) return {{0, 0, 0.0}};
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      double sum = 0.0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!support.at(x, y)) continue;
          const int tx = x + dx;
          const int ty = y + dy;
          if (tx < 0 || ty < 0 || tx >= w || ty >= h) {
            sum += kSearchCap;
            continue;
          }
          double r = 0.0;
          for (int c = 0; c < 3; ++c) r += std::abs(frame2.at(tx, ty, c) - frame1.at(x, y, c));
          sum += std::min(r, kSearchCap);
        }
      }
      score[static_cast<std::size_t>(dy + radius) * side + (dx + radius)] = sum / count;
    }
  }
  std::vector<Translation> minima;
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      const double v = score[static_cast<std::size_t>(j) * side + i];
      bool local = true;
      for (int nj = std::max(0, j - 1); local && nj <= std::min(side - 1, j + 1); ++nj) {
        for (int ni = std::max(0, i - 1); ni <= std::min(side - 1, i + 1); ++ni) {
          const double u = score[static_cast<std::size_t>(nj) * side + ni];
          // Strict on one side so plateaus yield a single representative.
          if (u < v || (u == v && (nj < j || (nj == j && ni < i)))) {
            local = false;
            break;
          }
        }
      }
      if (local) minima.push_back({i - radius, j - radius, v});
    }
  }
  std::stable_sort(minima.begin(), minima.end(),
                   [](const Translation& a, const Translation& b) { return a.score < b.score; });
  return minima;
}

// Motion seeded at an integer translation, carrying the restart's small
// random coefficients as a sub-pixel perturbation so no landing position
// sits exactly on the lattice.
AffineParams seeded_motion(const Translation& t, const AffineParams& jitter, const CoordMap& cmap,
                           double alpha) {
  AffineParams a = scaled(jitter, 0.1);
  a[0] += t.dx / cmap.half_x();
  a[3] += t.dy / cmap.half_y();
  return scaled(a, 1.0 / alpha);
}

// Settles pixels without a clear layer preference (label 2) by diffusing
// the decided labels (0 bottom, 1 top) along paths of similar color.
Mask diffuse_labels(const std::vector<std::uint8_t>& labels, const Image& frame1) {
  const int w = frame1.width();
  const int h = frame1.height();
  const std::size_t n = labels.size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = labels[i] == 2 ? 0.5 : labels[i];
  const auto affinity = [&](std::size_t a, std::size_t b) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double e = frame1.at(a, c) - frame1.at(b, c);
      d += e * e;
    }
    return std::exp(-d / (2.0 * 0.03 * 0.03));
  };
  std::vector<double> next(v);
  for (int round = 0; round < 100; ++round) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (labels[i] != 2) continue;
        double num = 0.0;
        double den = 0.0;
        for (int j = std::max(0, y - 1); j <= std::min(h - 1, y + 1); ++j) {
          for (int k = std::max(0, x - 1); k <= std::min(w - 1, x + 1); ++k) {
            const std::size_t o = static_cast<std::size_t>(j) * w + k;
            if (o == i) continue;
            const double a = affinity(i, o) + 1e-6;
            num += a * v[o];
            den += a;
          }
        }
        next[i] = num / den;
      }
    }
    v.swap(next);
  }
  Mask out(w, h);
  for (std::size_t i = 0; i < n; ++i) out.at(i) = v[i] > 0.5 ? 1 : 0;
  return out;
}

RestartOutcome run_restart(const Image& frame1, const Image& frame2, const FitConfig& cfg,
                           int restart) {
  const int width = frame1.width();
  const int height = frame1.height();
  const CoordMap cmap(width, height);
  RestartOutcome out;
  Latents lat = init_latents(width, height, restart, cfg.seed);
  const Latents initial = lat;
  AdamState st = AdamState::zeros(width, height);
  out.curve.reserve(static_cast<std::size_t>(cfg.max_iters));
  // Lightly smoothed copies for the residual tests between stages.
  const Image smooth1 = gaussian_blur(frame1, 1.0);
  const Image smooth2 = gaussian_blur(frame2, 1.0);
  const int support_start = cfg.support_start();
  const int refine_start = cfg.refine_start();

  const auto set_membership = [&](const Mask& top) {
    for (std::size_t i = 0; i < lat.p.pixel_count(); ++i) lat.p.at(i) = top.at(i) ? kTopP : kBottomP;
  };

  int iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    const double tau = cfg.tau_at(iter);
    const double alpha = carried_alpha(tau);
    if (iter > 0) {
      // Keep the carried motions fixed while annealing changes alpha.
      const double k = carried_alpha(cfg.tau_at(iter - 1)) / alpha;
      lat.params1 = scaled(lat.params1, k);
      lat.params2 = scaled(lat.params2, k);
    }
    if (iter == 0) {
      // Every pixel starts in the bottom layer, which takes the dominant motion.
      const Mask all(width, height, 1);
      const auto cands = translation_candidates(smooth1, smooth2, all, cfg.search_radius);
      lat.params2 = seeded_motion(cands.front(), initial.params2, cmap, alpha);
      set_membership(Mask(width, height, 0));
    }
    if (iter == support_start) {
      // Pixels the dominant motion explains poorly seed the top layer.
      const AlphaField r2 = motion_residual(smooth1, smooth2, scaled(lat.params2, alpha), cmap, 2);
      const double cut = std::max(0.03, 3.0 * median_finite(r2));
      Mask top(width, height);
      for (std::size_t i = 0; i < top.pixel_count(); ++i) top.at(i) = r2.at(i) > cut ? 1 : 0;
      const auto cands = translation_candidates(smooth1, smooth2, top, cfg.search_radius);
      const Translation& pick = cands[static_cast<std::size_t>(restart) % cands.size()];
      lat.params1 = seeded_motion(pick, initial.params1, cmap, alpha);
      set_membership(top);
      st = AdamState::zeros(width, height);
    }
    if (iter >= refine_start && (iter - refine_start) % cfg.reassign_every == 0 &&
        (iter == refine_start || iter + cfg.reassign_every <= cfg.max_iters)) {
      // A pixel is decided when one motion explains it well in absolute
      // terms and clearly better than the other. The rest (occluded in
      // frame 2, leaving the frame, or ambiguous texture) take the label of
      // similar-looking neighbors.
      const AlphaField r1 = motion_residual(frame1, frame2, scaled(lat.params1, alpha), cmap, 0);
      const AlphaField r2 = motion_residual(frame1, frame2, scaled(lat.params2, alpha), cmap, 0);
      const double cut = std::max(0.03, 3.0 * median_finite(r2));
      std::vector<std::uint8_t> labels(lat.p.pixel_count());
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const double a1 = std::isfinite(r1.at(i)) ? r1.at(i) : INFINITY;
        const double a2 = std::isfinite(r2.at(i)) ? r2.at(i) : INFINITY;
        if (a1 <= cut && a1 + cfg.assign_margin < a2) {
          labels[i] = 1;
        } else if (a2 <= cut && a2 + cfg.assign_margin < a1) {
          labels[i] = 0;
        } else {
          labels[i] = 2;
        }
      }
      set_membership(diffuse_labels(labels, frame1));
      if (iter == refine_start) st = AdamState::zeros(width, height);
    }
    const bool refining = iter >= refine_start;
    const PipelineConfig pc = pipeline_config(cfg, tau);
    const SynthesisTape tape = synthesize(frame1, lat, pc, cmap);
    const AlphaField weight = coverage(tape);
    const LossReport rep = photometric_loss(frame2, tape, pc.disocclusion_eps, &weight);
    out.curve.push_back(rep.loss);
    if (!std::isfinite(rep.loss)) {
      out.summary.diverged = true;
      break;
    }
    LatentsGradient grad = backward(tape, frame2, pc, cmap, &weight);
    FitConfig step_cfg = cfg;
    if (refining) {
      const int len = std::max(1, cfg.max_iters - refine_start);
      const double t = static_cast<double>(iter - refine_start) / len;
      const double factor = cfg.refine_lr * std::pow(cfg.lr_decay / cfg.refine_lr, t);
      step_cfg.lr_params *= factor;
      step_cfg.lr_alpha *= factor;
    } else {
      // Membership moves only during refinement; the motion stages fit
      // motions to a fixed assignment.
      std::fill(grad.p.values().begin(), grad.p.values().end(), 0.0);
    }
    try {
      adam_step(lat, grad, st, step_cfg);
    } catch (const Error&) {
      out.summary.diverged = true;
      break;
    }
    const int w = cfg.convergence_window;
    if (refining && iter - w >= refine_start) {
      const double prev = out.curve[static_cast<std::size_t>(iter - w)];
      if (std::abs(rep.loss - prev) <= cfg.convergence_tol * std::max(std::abs(prev), 1e-300)) {
        ++iter;
        break;
      }
    }
  }
  out.summary.iterations = iter;
  // Undo the carried-motion rescaling relative to the final temperature.
  if (iter > 0 && iter < cfg.max_iters) {
    const double k = carried_alpha(cfg.tau_at(iter - 1)) / carried_alpha(cfg.tau_end);
    lat.params1 = scaled(lat.params1, k);
    lat.params2 = scaled(lat.params2, k);
  }

  // Restarts are ranked at the final temperature so they are comparable.
  const auto evaluate = [&](const Latents& l) { return fit_loss(frame1, frame2, l, cfg, cfg.tau_end); };
  const LossReport start = evaluate(initial);
  out.initial_loss = start.loss;
  LossReport end = out.summary.diverged ? start : evaluate(lat);
  out.latents = out.summary.diverged ? initial : lat;
  // Never report an iterate worse than where the restart began.
  if (!start.degenerate && (end.degenerate || start.loss < end.loss)) {
    end = start;
    out.latents = initial;
  }
  out.summary.final_loss = end.loss;
  out.summary.degenerate = end.degenerate;
  return out;
}

}  // namespace

LossReport fit_loss(const Image& frame1, const Image& frame2, const Latents& lat, const FitConfig& cfg,
                    double tau) {
  const PipelineConfig pc = pipeline_config(cfg, tau);
  const SynthesisTape tape = synthesize(frame1, lat, pc, CoordMap(frame1.width(), frame1.height()));
  const AlphaField weight = coverage(tape);
  return photometric_loss(frame2, tape, pc.disocclusion_eps, &weight);
}

void FitConfig::validate() const {
  const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(lr_params) || !positive(lr_alpha)) {
    throw Error(ErrorCode::invalid_argument, "learning rates must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !positive(adam_eps)) {
    throw Error(ErrorCode::invalid_argument, "invalid Adam moments");
  }
  if (max_iters < 1) throw Error(ErrorCode::invalid_argument, "max_iters must be >= 1");
  if (restarts < 1) throw Error(ErrorCode::invalid_argument, "restarts must be >= 1");
  if (!positive(tau_start) || !positive(tau_end)) {
    throw Error(ErrorCode::invalid_argument, "temperatures must be > 0");
  }
  if (convergence_window < 1 || !(convergence_tol >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "invalid convergence settings");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "threshold must lie in [0,1]");
  }
  if (!(disocclusion_eps >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "disocclusion epsilon must be >= 0");
  }
  if (!(dominant_fraction >= 0.0 && support_fraction >= 0.0 &&
        dominant_fraction + support_fraction <= 1.0) ||
      search_radius < 0 || reassign_every < 1 || !(assign_margin >= 0.0) ||
      !(refine_lr > 0.0) || !(lr_decay > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "invalid stage schedule");
  }
  if (jobs < 1) throw Error(ErrorCode::invalid_argument, "jobs must be >= 1");
}

double FitConfig::tau_at(int iter) const {
  if (max_iters <= 1) return tau_end;
  const double s = std::clamp(static_cast<double>(iter) / (max_iters - 1), 0.0, 1.0);
  return tau_start * std::pow(tau_end / tau_start, s);
}

int FitConfig::support_start() const {
  return static_cast<int>(dominant_fraction * max_iters);
}

int FitConfig::refine_start() const {
  return std::min(max_iters, static_cast<int>((dominant_fraction + support_fraction) * max_iters));
}

AdamState AdamState::zeros(int width, int height) {
  return AdamState{zero_gradient(width, height), zero_gradient(width, height), 0};
}

void adam_step(Latents& lat, const LatentsGradient& grad, AdamState& st, const FitConfig& cfg) {
  require_same_shape(lat.p, grad.p, "adam_step");
  require_same_shape(st.m.p, grad.p, "adam_step");
  if (!gradient_finite(grad)) throw Error(ErrorCode::non_finite, "adam_step: non-finite gradient");
  st.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t k = 0; k < 6; ++k) {
    adam_update(lat.params1[k], grad.params1[k], st.m.params1[k], st.v.params1[k], cfg.lr_params, c1,
                c2, cfg);
    adam_update(lat.params2[k], grad.params2[k], st.m.params2[k], st.v.params2[k], cfg.lr_params, c1,
                c2, cfg);
  }
  for (std::size_t i = 0; i < lat.p.pixel_count(); ++i) {
    adam_update(lat.p.at(i), grad.p.at(i), st.m.p.at(i), st.v.p.at(i), cfg.lr_alpha, c1, c2, cfg);
  }
}

Latents init_latents(int width, int height, int restart, std::uint64_t seed) {
  if (width < 1 || height < 1) throw Error(ErrorCode::invalid_argument, "init_latents: empty frame");
  detail::Rng rng(seed, static_cast<std::uint64_t>(restart));
  Latents lat;
  for (AffineParams* a : {&lat.params1, &lat.params2}) {
    for (std::size_t k = 0; k < 6; ++k) {
      const bool translation = k == 0 || k == 3;
      (*a)[k] = translation ? rng.uniform(-0.1, 0.1) : rng.uniform(-0.05, 0.05);
    }
  }
  // Bilinear upsampling of a coarse random lattice with ~16 px cells; convex
  // combinations keep the noise inside [-0.2, 0.2].
  const int gx = std::max(2, width / 16 + 1);
  const int gy = std::max(2, height / 16 + 1);
  std::vector<double> lattice(static_cast<std::size_t>(gx) * gy);
  for (double& v : lattice) v = rng.uniform(-0.2, 0.2);
  lat.p = AlphaField(width, height);
  for (int y = 0; y < height; ++y) {
    const double ty = height > 1 ? static_cast<double>(y) * (gy - 1) / (height - 1) : 0.0;
    const int y0 = std::min(static_cast<int>(ty), gy - 2);
    const double fy = ty - y0;
    for (int x = 0; x < width; ++x) {
      const double tx = width > 1 ? static_cast<double>(x) * (gx - 1) / (width - 1) : 0.0;
      const int x0 = std::min(static_cast<int>(tx), gx - 2);
      const double fx = tx - x0;
      const auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gx + i]; };
      const double n = (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
                       fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
      lat.p.at(x, y) = 0.5 + n;
    }
  }
  return lat;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  const int w = img.width();
  const int h = img.height();
  Image tmp(w, h);
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * img.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp.at(x, y, c) = s;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        out.at(x, y, c) = s;
      }
    }
  }
  return out;
}

PipelineConfig pipeline_config(const FitConfig& cfg, double tau, BinarizeMode mode) {
  PipelineConfig pc;
  pc.mode = mode;
  pc.binning.tau = tau;
  pc.threshold = cfg.threshold;
  pc.disocclusion_eps = cfg.disocclusion_eps;
  return pc;
}

Mask layer_mask(const Latents& lat, double tau, double threshold) {
  BinningConfig bc;
  bc.tau = tau;
  const AlphaPair alpha = maxout_disjoint(softmax_binning(clamp01(lat.p), bc));
  return binarize(alpha.alpha1, threshold);
}

FitResult fit_pair(const Image& frame1, const Image& frame2, const FitConfig& cfg) {
  cfg.validate();
  require_same_shape(frame1, frame2, "fit_pair");
  if (frame1.width() < 16 || frame1.height() < 16) {
    throw Error(ErrorCode::invalid_argument, "fit_pair needs images of at least 16x16");
  }
  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(cfg.restarts));
  const int jobs = std::min(cfg.jobs, cfg.restarts);
  if (jobs <= 1) {
    for (int r = 0; r < cfg.restarts; ++r) outcomes[r] = run_restart(frame1, frame2, cfg, r);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        try {
          for (int r = j; r < cfg.restarts; r += jobs) outcomes[r] = run_restart(frame1, frame2, cfg, r);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  int best = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    const auto& s = outcomes[r].summary;
    if (s.degenerate) continue;
    if (best < 0 || s.final_loss < outcomes[best].summary.final_loss) best = r;
  }
  if (best < 0) throw Error(ErrorCode::degenerate, "fit_pair: every restart is degenerate");

  FitResult res;
  res.restart = best;
  res.latents = outcomes[best].latents;
  res.final_loss = outcomes[best].summary.final_loss;
  res.initial_loss = outcomes[best].initial_loss;
  res.loss_curve = outcomes[best].curve;
  res.iterations = outcomes[best].summary.iterations;
  res.degenerate = false;
  res.final_tau = cfg.tau_end;
  for (const auto& o : outcomes) res.restarts.push_back(o.summary);
  return res;
}

}  // namespace ldis
