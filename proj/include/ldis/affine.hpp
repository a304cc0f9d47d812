#pragma once

#include <array>

#include "ldis/imagery.hpp"

namespace ldis {

// Six coefficients of the affine flow model
//   u = a1 + a2*x + a3*y,   v = a4 + a5*x + a6*y
// evaluated at normalized coordinates (x,y) in [-1,1]^2. Displacements are
// rescaled to pixels by the half extents of the frame, so a1 and a4 are
// translations in normalized units.
struct AffineParams {
  std::array<double, 6> a{};

  double& operator[](std::size_t k) { return a[k]; }
  double operator[](std::size_t k) const { return a[k]; }
  bool finite() const noexcept;
  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

using AffineGradient = std::array<double, 6>;

// Pixel <-> normalized coordinate map for a width x height frame. Pixel (0,0)
// is the top-left pixel center; x_n = (x - cx) / hx with cx = hx = (W-1)/2.
// Degenerate one-pixel axes use a unit half extent centered on the pixel.
class CoordMap {
 public:
  CoordMap(int width, int height);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double half_x() const noexcept { return half_x_; }
  double half_y() const noexcept { return half_y_; }

  double norm_x(double x) const noexcept { return (x - center_x_) / half_x_; }
  double norm_y(double y) const noexcept { return (y - center_y_) / half_y_; }
  double pixel_x(double xn) const noexcept { return xn * half_x_ + center_x_; }
  double pixel_y(double yn) const noexcept { return yn * half_y_ + center_y_; }

 private:
  int width_;
  int height_;
  double center_x_;
  double center_y_;
  double half_x_;
  double half_y_;
};

// Pixel-space affine motion: u = m[0] + m[1]*x + m[2]*y, v = m[3] + m[4]*x + m[5]*y.
using PixelAffine = std::array<double, 6>;

AffineParams from_pixel_affine(const PixelAffine& m, const CoordMap& cmap);
PixelAffine to_pixel_affine(const AffineParams& p, const CoordMap& cmap);

FlowField dense_flow(const AffineParams& params, const CoordMap& cmap);

// Pulls a per-pixel cotangent on the flow back to the six coefficients.
AffineGradient flow_param_vjp(const FlowField& grad_flow, const CoordMap& cmap);

}  // namespace ldis
