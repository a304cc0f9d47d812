#pragma once

#include <cstdint>
#include <exception>
#include <vector>

#include "ldis/synthesis.hpp"

namespace ldis {

struct FitConfig {
  double lr_params = 0.02;
  double lr_alpha = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_iters = 2000;
  int restarts = 5;
  // Geometric temperature schedule from tau_start to tau_end over max_iters.
  double tau_start = 0.5;
  double tau_end = 0.05;
  std::uint64_t seed = 0;
  // Stop once the relative loss change over `convergence_window` iterations
  // drops below `convergence_tol`.
  double convergence_tol = 1e-6;
  int convergence_window = 50;
  double threshold = 0.5;
  double disocclusion_eps = 1e-6;
  // Stage lengths as fractions of max_iters: the dominant motion on all
  // pixels, then the second motion on the pixels the first explains poorly,
  // then joint refinement with periodic layer reassignment.
  double dominant_fraction = 0.2;
  double support_fraction = 0.3;
  // Each motion stage starts from an exhaustive integer translation search
  // within this radius, pixels. Restart r takes the r-th best candidate for
  // the second motion.
  int search_radius = 10;
  int reassign_every = 200;
  // Residual difference (summed over channels) that counts as a clear
  // preference for one layer; closer calls are settled by their neighbors.
  double assign_margin = 0.03;
  // Refinement learning rates decay geometrically from refine_lr to
  // lr_decay times the base rates.
  double refine_lr = 0.1;
  double lr_decay = 0.05;
  // Restarts run on up to this many threads. Results do not depend on it.
  int jobs = 1;

  void validate() const;
  double tau_at(int iter) const;
  // First iterations of the support and refinement stages.
  int support_start() const;
  int refine_start() const;
};

struct AdamState {
  LatentsGradient m;
  LatentsGradient v;
  long t = 0;

  static AdamState zeros(int width, int height);
};

struct RestartSummary {
  double final_loss = 0.0;
  int iterations = 0;
  bool degenerate = false;
  bool diverged = false;
};

struct FitResult {
  Latents latents;
  double final_loss = 0.0;  // fit_loss at tau_end
  // Loss of the chosen restart's initial latents at the final temperature.
  double initial_loss = 0.0;
  std::vector<double> loss_curve;  // chosen restart, one value per iteration
  int restart = 0;
  int iterations = 0;
  bool degenerate = false;
  std::vector<RestartSummary> restarts;
  double final_tau = 0.0;
};

// Bias-corrected Adam step in place; affine coefficients use lr_params and
// the membership field uses lr_alpha. Throws ErrorCode::non_finite on a
// non-finite gradient, leaving `lat` and `st` untouched.
void adam_step(Latents& lat, const LatentsGradient& grad, AdamState& st, const FitConfig& cfg);

// Deterministic in (seed, restart). Affine coefficients ~ U[-0.05, 0.05] with
// translations ~ U[-0.1, 0.1]; p = 0.5 + low-frequency noise in [-0.2, 0.2].
Latents init_latents(int width, int height, int restart, std::uint64_t seed);

// Multi-start optimization of the photometric loss for one image pair.
// Throws ErrorCode::degenerate when every restart ends with no valid pixel.
FitResult fit_pair(const Image& frame1, const Image& frame2, const FitConfig& cfg);

// Pipeline settings at temperature `tau`.
PipelineConfig pipeline_config(const FitConfig& cfg, double tau,
                               BinarizeMode mode = BinarizeMode::hard);

// The fit objective at temperature `tau`: the photometric loss with each pixel
// weighted by the share of a full splat footprint it receives, capped at 1.
// Pixels only grazed by a splat would otherwise count as fully valid and put
// a jump into the loss at every integer crossing of a flow.
LossReport fit_loss(const Image& frame1, const Image& frame2, const Latents& lat, const FitConfig& cfg,
                    double tau);

// Separable Gaussian blur with clamped borders; sigma <= 0 copies.
Image gaussian_blur(const Image& img, double sigma);

// Top-layer membership mask: alpha1 > threshold after maxout at `tau`.
Mask layer_mask(const Latents& lat, double tau, double threshold);

}  // namespace ldis
