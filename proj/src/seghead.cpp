#include "ldis/seghead.hpp"

#include <algorithm>
#include <cmath>

namespace ldis {

void BinningConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::invalid_argument, "binning temperature must be > 0");
  }
}

double leaky_dorelu(double x, double gamma) noexcept {
  if (x > 1.0) return 1.0 + (x - 1.0) / gamma;
  if (x < 0.0) return x / gamma;
  return x;
}

double leaky_dorelu_derivative(double x, double gamma) noexcept {
  return (x > 1.0 || x < 0.0) ? 1.0 / gamma : 1.0;
}

double clamp01(double x) noexcept { return std::min(1.0, std::max(0.0, x)); }

double clamp01_derivative(double x) noexcept { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; }

double bin_probability(double p, const BinningConfig& cfg) noexcept {
  const double l0 = (cfg.slope0 * p - cfg.cutoff0) / cfg.tau;
  const double l1 = (cfg.slope1 * p - cfg.cutoff1) / cfg.tau;
  // Two-way softmax written as a logistic of the logit gap, stable for both signs.
  const double d = l1 - l0;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

AlphaField leaky_dorelu(const AlphaField& x, double gamma) {
  if (!(gamma > 1.0)) throw Error(ErrorCode::invalid_argument, "leaky DoReLU needs gamma > 1");
  AlphaField y(x.width(), x.height());
  std::transform(x.values().begin(), x.values().end(), y.values().begin(),
                 [gamma](double v) { return leaky_dorelu(v, gamma); });
  return y;
}

AlphaField leaky_dorelu_vjp(const AlphaField& grad_out, const AlphaField& x, double gamma) {
  require_same_shape(grad_out, x, "leaky_dorelu_vjp");
  AlphaField g(x.width(), x.height());
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    g.at(i) = grad_out.at(i) * leaky_dorelu_derivative(x.at(i), gamma);
  }
  return g;
}

AlphaField clamp01(const AlphaField& x) {
  AlphaField y(x.width(), x.height());
  std::transform(x.values().begin(), x.values().end(), y.values().begin(),
                 [](double v) { return clamp01(v); });
  return y;
}

AlphaField clamp01_vjp(const AlphaField& grad_out, const AlphaField& x) {
  require_same_shape(grad_out, x, "clamp01_vjp");
  AlphaField g(x.width(), x.height());
  for (std::size_t i = 0; i < x.pixel_count(); ++i) {
    g.at(i) = grad_out.at(i) * clamp01_derivative(x.at(i));
  }
  return g;
}

AlphaPair softmax_binning(const AlphaField& p, const BinningConfig& cfg) {
  cfg.validate();
  AlphaPair out{AlphaField(p.width(), p.height()), AlphaField(p.width(), p.height())};
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    const double s1 = bin_probability(p.at(i), cfg);
    out.alpha1.at(i) = s1;
    out.alpha0.at(i) = 1.0 - s1;
  }
  return out;
}

AlphaField softmax_binning_vjp(const AlphaPair& grad_out, const AlphaField& p,
                               const BinningConfig& cfg) {
  cfg.validate();
  require_same_shape(grad_out.alpha0, p, "softmax_binning_vjp");
  require_same_shape(grad_out.alpha1, p, "softmax_binning_vjp");
  // d s1/dp = s1*s0*(slope1 - slope0)/tau and d s0/dp is its negative.
  const double dlogit = (cfg.slope1 - cfg.slope0) / cfg.tau;
  AlphaField g(p.width(), p.height());
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    const double s1 = bin_probability(p.at(i), cfg);
    const double s0 = 1.0 - s1;
    g.at(i) = (grad_out.alpha1.at(i) - grad_out.alpha0.at(i)) * s1 * s0 * dlogit;
  }
  return g;
}

AlphaPair maxout_disjoint(const AlphaPair& pair) {
  require_same_shape(pair.alpha0, pair.alpha1, "maxout_disjoint");
  const int w = pair.alpha0.width();
  const int h = pair.alpha0.height();
  AlphaPair out{AlphaField(w, h), AlphaField(w, h)};
  for (std::size_t i = 0; i < pair.alpha0.pixel_count(); ++i) {
    const double a0 = pair.alpha0.at(i);
    const double a1 = pair.alpha1.at(i);
    if (a0 >= a1) {
      out.alpha0.at(i) = a0;
    } else {
      out.alpha1.at(i) = a1;
    }
  }
  return out;
}

AlphaPair maxout_disjoint_vjp(const AlphaPair& grad_out, const AlphaPair& pair) {
  require_same_shape(pair.alpha0, pair.alpha1, "maxout_disjoint_vjp");
  require_same_shape(grad_out.alpha0, pair.alpha0, "maxout_disjoint_vjp");
  const int w = pair.alpha0.width();
  const int h = pair.alpha0.height();
  AlphaPair g{AlphaField(w, h), AlphaField(w, h)};
  for (std::size_t i = 0; i < pair.alpha0.pixel_count(); ++i) {
    if (pair.alpha0.at(i) >= pair.alpha1.at(i)) {
      g.alpha0.at(i) = grad_out.alpha0.at(i);
    } else {
      g.alpha1.at(i) = grad_out.alpha1.at(i);
    }
  }
  return g;
}

Mask binarize(const AlphaField& alpha, double threshold) {
  Mask m(alpha.width(), alpha.height());
  for (std::size_t i = 0; i < alpha.pixel_count(); ++i) m.at(i) = alpha.at(i) > threshold ? 1 : 0;
  return m;
}

}  // namespace ldis
