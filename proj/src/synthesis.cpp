#include "ldis/synthesis.hpp"

#include <cmath>

namespace ldis {

namespace {

FlowField scale_flow(const AlphaField& alpha, const FlowField& dense) {
  FlowField out(dense.width(), dense.height());
  for (std::size_t i = 0; i < dense.pixel_count(); ++i) {
    out.at(i, 0) = alpha.at(i) * dense.at(i, 0);
    out.at(i, 1) = alpha.at(i) * dense.at(i, 1);
  }
  return out;
}

AlphaField layer_support(const AlphaField& alpha, const PipelineConfig& cfg) {
  if (cfg.mode == BinarizeMode::relaxed) return alpha;
  const Mask m = binarize(alpha, cfg.threshold);
  AlphaField out(alpha.width(), alpha.height());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) out.at(i) = m.at(i);
  return out;
}

Image apply_support(const AlphaField& support, const Image& img) {
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.at(i, c) = support.at(i) * img.at(i, c);
  }
  return out;
}

// Accumulates the pullback of w = alpha * W into the alpha and W cotangents.
void pull_flow_support(const FlowField& grad_flow, const AlphaField& alpha, const FlowField& dense,
                       AlphaField& grad_alpha, FlowField& grad_dense) {
  for (std::size_t i = 0; i < dense.pixel_count(); ++i) {
    const double gu = grad_flow.at(i, 0);
    const double gv = grad_flow.at(i, 1);
    grad_alpha.at(i) += gu * dense.at(i, 0) + gv * dense.at(i, 1);
    grad_dense.at(i, 0) = gu * alpha.at(i);
    grad_dense.at(i, 1) = gv * alpha.at(i);
  }
}

}  // namespace

SynthesisTape synthesize(const Image& frame1, const Latents& latents, const PipelineConfig& cfg,
                         const CoordMap& cmap) {
  require_same_shape(frame1, latents.p, "synthesize");
  if (frame1.width() != cmap.width() || frame1.height() != cmap.height()) {
    throw Error(ErrorCode::dimension_mismatch, "synthesize: coordinate map mismatch");
  }
  if (!all_finite(frame1.values()) || !all_finite(latents.p.values())) {
    throw Error(ErrorCode::non_finite, "synthesize: non-finite input");
  }
  SynthesisTape t;
  t.source = frame1;
  t.clamped = clamp01(latents.p);
  t.soft = softmax_binning(t.clamped, cfg.binning);
  t.alpha = maxout_disjoint(t.soft);
  t.dense1 = dense_flow(latents.params1, cmap);
  t.dense2 = dense_flow(latents.params2, cmap);
  t.flow1 = scale_flow(t.alpha.alpha1, t.dense1);
  t.flow2 = scale_flow(t.alpha.alpha0, t.dense2);
  t.support1 = layer_support(t.alpha.alpha1, cfg);
  t.support2 = layer_support(t.alpha.alpha0, cfg);
  t.layer1 = apply_support(t.support1, frame1);
  t.layer2 = apply_support(t.support2, frame1);
  t.warped1 = forward_splat(t.layer1, t.flow1);
  t.warped2 = forward_splat(t.layer2, t.flow2);
  t.warped_alpha = forward_splat(t.alpha.alpha1, t.flow1);
  t.top_weight = layer_support(clamp01(t.warped_alpha), cfg);

  t.reconstruction = Image(frame1.width(), frame1.height());
  for (std::size_t i = 0; i < frame1.pixel_count(); ++i) {
    const double b = t.top_weight.at(i);
    for (int c = 0; c < 3; ++c) {
      t.reconstruction.at(i, c) = b * t.warped1.at(i, c) + (1.0 - b) * t.warped2.at(i, c);
    }
  }
  t.disoccluded = disocclusion_mask(t.reconstruction, cfg.disocclusion_eps);
  return t;
}

Mask disocclusion_mask(const Image& reconstruction, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::invalid_argument, "disocclusion epsilon must be >= 0");
  Mask d(reconstruction.width(), reconstruction.height());
  for (std::size_t i = 0; i < reconstruction.pixel_count(); ++i) {
    bool empty = true;
    for (int c = 0; c < 3; ++c) empty = empty && std::abs(reconstruction.at(i, c)) <= epsilon;
    d.at(i) = empty ? 1 : 0;
  }
  return d;
}

double charbonnier(double x) noexcept { return std::sqrt(x * x + kCharbonnierEps * kCharbonnierEps); }

double charbonnier_derivative(double x) noexcept { return x / charbonnier(x); }

LossReport photometric_loss(const Image& frame2, const SynthesisTape& tape, double epsilon_d,
                            const AlphaField* weight) {
  require_same_shape(frame2, tape.reconstruction, "photometric_loss");
  if (weight) require_same_shape(frame2, *weight, "photometric_loss");
  const Mask d = disocclusion_mask(tape.reconstruction, epsilon_d);
  LossReport r;
  for (std::size_t i = 0; i < frame2.pixel_count(); ++i) {
    if (d.at(i)) {
      ++r.disoccluded_count;
      continue;
    }
    ++r.valid_pixel_count;
    double sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += charbonnier(frame2.at(i, c) - tape.reconstruction.at(i, c));
    r.loss += weight ? weight->at(i) * sum : sum;
  }
  r.degenerate = r.valid_pixel_count == 0;
  return r;
}

LatentsGradient backward(const SynthesisTape& tape, const Image& frame2, const PipelineConfig& cfg,
                         const CoordMap& cmap, const AlphaField* weight) {
  require_same_shape(frame2, tape.reconstruction, "backward");
  if (weight) require_same_shape(frame2, *weight, "backward");
  const int w = frame2.width();
  const int h = frame2.height();
  const bool relaxed = cfg.mode == BinarizeMode::relaxed;

  // Loss -> reconstruction. D is held constant.
  Image g_top(w, h);
  Image g_bottom(w, h);
  AlphaField g_weight(w, h);
  for (std::size_t i = 0; i < frame2.pixel_count(); ++i) {
    if (tape.disoccluded.at(i)) continue;
    const double b = tape.top_weight.at(i);
    const double wi = weight ? weight->at(i) : 1.0;
    double gb = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double g = -wi * charbonnier_derivative(frame2.at(i, c) - tape.reconstruction.at(i, c));
      g_top.at(i, c) = b * g;
      g_bottom.at(i, c) = (1.0 - b) * g;
      gb += g * (tape.warped1.at(i, c) - tape.warped2.at(i, c));
    }
    g_weight.at(i) = gb;
  }

  AlphaPair g_alpha{AlphaField(w, h), AlphaField(w, h)};
  FlowField g_flow1(w, h);

  // Warped alpha only matters when the top-layer selector is continuous.
  if (relaxed) {
    const AlphaField g_warped_alpha = clamp01_vjp(g_weight, tape.warped_alpha);
    const auto ga = forward_splat_vjp(g_warped_alpha, tape.alpha.alpha1, tape.flow1);
    for (std::size_t i = 0; i < frame2.pixel_count(); ++i) {
      g_alpha.alpha1.at(i) += ga.values.at(i);
      g_flow1.at(i, 0) += ga.flow.at(i, 0);
      g_flow1.at(i, 1) += ga.flow.at(i, 1);
    }
  }

  const auto g1 = forward_splat_vjp(g_top, tape.layer1, tape.flow1);
  const auto g2 = forward_splat_vjp(g_bottom, tape.layer2, tape.flow2);
  for (std::size_t i = 0; i < frame2.pixel_count(); ++i) {
    g_flow1.at(i, 0) += g1.flow.at(i, 0);
    g_flow1.at(i, 1) += g1.flow.at(i, 1);
  }
  if (relaxed) {
    // L_i = alpha_i * I1, so the layer cotangent reaches alpha through I1.
    for (std::size_t i = 0; i < frame2.pixel_count(); ++i) {
      for (int c = 0; c < 3; ++c) {
        g_alpha.alpha1.at(i) += g1.values.at(i, c) * tape.source.at(i, c);
        g_alpha.alpha0.at(i) += g2.values.at(i, c) * tape.source.at(i, c);
      }
    }
  }

  FlowField g_dense1(w, h);
  FlowField g_dense2(w, h);
  pull_flow_support(g_flow1, tape.alpha.alpha1, tape.dense1, g_alpha.alpha1, g_dense1);
  pull_flow_support(g2.flow, tape.alpha.alpha0, tape.dense2, g_alpha.alpha0, g_dense2);

  LatentsGradient grad;
  grad.params1 = flow_param_vjp(g_dense1, cmap);
  grad.params2 = flow_param_vjp(g_dense2, cmap);
  const AlphaPair g_soft = maxout_disjoint_vjp(g_alpha, tape.soft);
  const AlphaField g_clamped = softmax_binning_vjp(g_soft, tape.clamped, cfg.binning);
  grad.p = clamp01_vjp(g_clamped, tape.clamped);
  return grad;
}

void dump_tape(const SynthesisTape& tape, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_field_png(tape.clamped, dir / "p_clamped.png");
  save_field_png(tape.alpha.alpha0, dir / "alpha0.png");
  save_field_png(tape.alpha.alpha1, dir / "alpha1.png");
  save_field_png(tape.support1, dir / "support1.png");
  save_field_png(tape.support2, dir / "support2.png");
  save_flow(tape.dense1, dir / "dense1.flo");
  save_flow(tape.dense2, dir / "dense2.flo");
  save_flow(tape.flow1, dir / "flow1.flo");
  save_flow(tape.flow2, dir / "flow2.flo");
  save_image(tape.layer1, dir / "layer1.png");
  save_image(tape.layer2, dir / "layer2.png");
  save_image(tape.warped1, dir / "warped1.png");
  save_image(tape.warped2, dir / "warped2.png");
  save_field_png(tape.warped_alpha, dir / "warped_alpha.png");
  save_field_png(tape.top_weight, dir / "top_weight.png");
  save_image(tape.reconstruction, dir / "reconstruction.png");
  save_mask(tape.disoccluded, dir / "disoccluded.png");
}

}  // namespace ldis
