#pragma once

#include <filesystem>

#include "ldis/affine.hpp"
#include "ldis/seghead.hpp"
#include "ldis/splat.hpp"

namespace ldis {

// Optimization variables of one image pair: the top-layer and bottom-layer
// affine motions and the pre-clamp membership field p (p > 0.5 selects the
// top layer).
struct Latents {
  AffineParams params1;
  AffineParams params2;
  AlphaField p;
};

struct LatentsGradient {
  AffineGradient params1{};
  AffineGradient params2{};
  AlphaField p;
};

// hard: thresholded layer masks that pass no gradient (the production model).
// relaxed: every threshold replaced by the identity, in both passes. Used to
// validate the alpha-path derivatives against finite differences.
enum class BinarizeMode { hard, relaxed };

struct PipelineConfig {
  BinningConfig binning;
  double threshold = 0.5;
  double disocclusion_eps = 1e-6;
  BinarizeMode mode = BinarizeMode::hard;
};

struct SynthesisTape {
  Image source;              // I1
  AlphaField clamped;        // clamp01(p)
  AlphaPair soft;            // softmax binning output, pre-maxout
  AlphaPair alpha;           // post-maxout; alpha1 is the top layer
  FlowField dense1, dense2;  // W_i
  FlowField flow1, flow2;    // w_i = alpha_i * W_i
  AlphaField support1, support2;  // binary (hard) or continuous (relaxed) layer support
  Image layer1, layer2;           // L_i
  Image warped1, warped2;         // splatted L_i
  AlphaField warped_alpha;        // splatted alpha1, unclamped
  AlphaField top_weight;          // clamp, then binarize (hard) or identity (relaxed)
  Image reconstruction;           // I2 hat
  Mask disoccluded;               // D
};

struct LossReport {
  double loss = 0.0;
  std::size_t valid_pixel_count = 0;
  std::size_t disoccluded_count = 0;
  // No valid pixel left; loss is 0 by convention.
  bool degenerate = false;
};

SynthesisTape synthesize(const Image& frame1, const Latents& latents, const PipelineConfig& cfg,
                         const CoordMap& cmap);

// D(x) = 1 iff every channel of the reconstruction has magnitude <= epsilon.
Mask disocclusion_mask(const Image& reconstruction, double epsilon);

inline constexpr double kCharbonnierEps = 0.001;
double charbonnier(double x) noexcept;
double charbonnier_derivative(double x) noexcept;

// Sum over pixels and channels of (1 - D) * rho(I2 - I2hat). An optional
// per-pixel weight, held constant like D, scales each pixel's term.
LossReport photometric_loss(const Image& frame2, const SynthesisTape& tape, double epsilon_d,
                            const AlphaField* weight = nullptr);

LatentsGradient backward(const SynthesisTape& tape, const Image& frame2, const PipelineConfig& cfg,
                         const CoordMap& cmap, const AlphaField* weight = nullptr);

// Writes every intermediate of `tape` as PNG / .flo into `dir`.
void dump_tape(const SynthesisTape& tape, const std::filesystem::path& dir);

}  // namespace ldis
