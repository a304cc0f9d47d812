#include "ldis/affine.hpp"

#include <algorithm>
#include <cmath>

namespace ldis {

bool AffineParams::finite() const noexcept {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

CoordMap::CoordMap(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::invalid_argument, "coordinate map needs width, height >= 1");
  }
  center_x_ = (width - 1) / 2.0;
  center_y_ = (height - 1) / 2.0;
  half_x_ = width > 1 ? center_x_ : 1.0;
  half_y_ = height > 1 ? center_y_ : 1.0;
}

AffineParams from_pixel_affine(const PixelAffine& m, const CoordMap& cmap) {
  // Substitute x = hx*xn + cx into the pixel model and divide by the rescale.
  const double cx = cmap.pixel_x(0.0);
  const double cy = cmap.pixel_y(0.0);
  const double hx = cmap.half_x();
  const double hy = cmap.half_y();
  AffineParams p;
  p[0] = (m[0] + m[1] * cx + m[2] * cy) / hx;
  p[1] = m[1];
  p[2] = m[2] * hy / hx;
  p[3] = (m[3] + m[4] * cx + m[5] * cy) / hy;
  p[4] = m[4] * hx / hy;
  p[5] = m[5];
  return p;
}

PixelAffine to_pixel_affine(const AffineParams& p, const CoordMap& cmap) {
  const double cx = cmap.pixel_x(0.0);
  const double cy = cmap.pixel_y(0.0);
  const double hx = cmap.half_x();
  const double hy = cmap.half_y();
  PixelAffine m;
  m[1] = p[1];
  m[2] = p[2] * hx / hy;
  m[0] = p[0] * hx - m[1] * cx - m[2] * cy;
  m[4] = p[4] * hy / hx;
  m[5] = p[5];
  m[3] = p[3] * hy - m[4] * cx - m[5] * cy;
  return m;
}

FlowField dense_flow(const AffineParams& params, const CoordMap& cmap) {
  if (!params.finite()) throw Error(ErrorCode::non_finite, "dense_flow: non-finite parameters");
  FlowField flow(cmap.width(), cmap.height());
  const double hx = cmap.half_x();
  const double hy = cmap.half_y();
  for (int y = 0; y < cmap.height(); ++y) {
    const double yn = cmap.norm_y(y);
    for (int x = 0; x < cmap.width(); ++x) {
      const double xn = cmap.norm_x(x);
      flow.at(x, y, 0) = hx * (params[0] + params[1] * xn + params[2] * yn);
      flow.at(x, y, 1) = hy * (params[3] + params[4] * xn + params[5] * yn);
    }
  }
  return flow;
}

AffineGradient flow_param_vjp(const FlowField& grad_flow, const CoordMap& cmap) {
  if (grad_flow.width() != cmap.width() || grad_flow.height() != cmap.height()) {
    throw Error(ErrorCode::dimension_mismatch, "flow_param_vjp: dimension mismatch");
  }
  AffineGradient g{};
  for (int y = 0; y < cmap.height(); ++y) {
    const double yn = cmap.norm_y(y);
    for (int x = 0; x < cmap.width(); ++x) {
      const double xn = cmap.norm_x(x);
      const double gu = grad_flow.at(x, y, 0);
      const double gv = grad_flow.at(x, y, 1);
      g[0] += gu;
      g[1] += gu * xn;
      g[2] += gu * yn;
      g[3] += gv;
      g[4] += gv * xn;
      g[5] += gv * yn;
    }
  }
  const double hx = cmap.half_x();
  const double hy = cmap.half_y();
  for (int k = 0; k < 3; ++k) g[k] *= hx;
  for (int k = 3; k < 6; ++k) g[k] *= hy;
  return g;
}

}  // namespace ldis
