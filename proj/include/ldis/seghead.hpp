#pragma once

#include "ldis/imagery.hpp"

namespace ldis {

// Two-interval softmax binning of a scalar p in [0,1]:
//   logit_k = (slope_k * p - cutoff_k) / tau,  k in {0,1}
// followed by a softmax over the two logits. Interval 1 (p > 0.5) is the top
// layer of the synthesis, interval 0 the bottom layer.
struct BinningConfig {
  double tau = 0.1;
  double slope0 = 1.0;
  double slope1 = 2.0;
  double cutoff0 = 0.0;
  double cutoff1 = 0.5;

  void validate() const;
};

struct AlphaPair {
  AlphaField alpha0;
  AlphaField alpha1;
};

// Scalar forms, exposed for the elementwise tests.
double leaky_dorelu(double x, double gamma) noexcept;
double leaky_dorelu_derivative(double x, double gamma) noexcept;
double clamp01(double x) noexcept;
double clamp01_derivative(double x) noexcept;
// Returns the interval-1 probability; interval 0 is its complement.
double bin_probability(double p, const BinningConfig& cfg) noexcept;

AlphaField leaky_dorelu(const AlphaField& x, double gamma);
AlphaField leaky_dorelu_vjp(const AlphaField& grad_out, const AlphaField& x, double gamma);

AlphaField clamp01(const AlphaField& x);
AlphaField clamp01_vjp(const AlphaField& grad_out, const AlphaField& x);

AlphaPair softmax_binning(const AlphaField& p, const BinningConfig& cfg);
AlphaField softmax_binning_vjp(const AlphaPair& grad_out, const AlphaField& p,
                               const BinningConfig& cfg);

// Per pixel keeps the larger of the two values and zeroes the other. Exact
// ties keep alpha0.
AlphaPair maxout_disjoint(const AlphaPair& pair);
// Gradient reaches only the entry that won in `pair` (the pre-maxout input).
AlphaPair maxout_disjoint_vjp(const AlphaPair& grad_out, const AlphaPair& pair);

// mask = alpha > threshold. Hard threshold: contributes no gradient.
Mask binarize(const AlphaField& alpha, double threshold);

}  // namespace ldis
