#include "ldis/splat.hpp"

#include <cmath>

namespace ldis {

namespace {

// Bilinear footprint of one landing position.
struct Footprint {
  int x0 = 0;
  int y0 = 0;
  double wx[2]{};
  double wy[2]{};
  double dwx[2]{};
  double dwy[2]{};
  bool visible = false;
};

Footprint footprint(double lx, double ly, int width, int height) {
  Footprint f;
  // Anything landing beyond one pixel outside the frame has no in-bounds corner.
  if (!(lx > -1.0 && lx < width && ly > -1.0 && ly < height)) return f;
  // Exact floor without a libm call; the range check above bounds lx, ly.
  f.x0 = static_cast<int>(lx);
  f.y0 = static_cast<int>(ly);
  if (f.x0 > lx) --f.x0;
  if (f.y0 > ly) --f.y0;
  const double fx = lx - f.x0;
  const double fy = ly - f.y0;
  f.wx[0] = 1.0 - fx;
  f.wx[1] = fx;
  f.wy[0] = 1.0 - fy;
  f.wy[1] = fy;
  const double sx = fx > 0.0 ? 1.0 : 0.0;
  const double sy = fy > 0.0 ? 1.0 : 0.0;
  f.dwx[0] = -sx;
  f.dwx[1] = sx;
  f.dwy[0] = -sy;
  f.dwy[1] = sy;
  f.visible = true;
  return f;
}

void check_inputs(const FlowField& flow, int width, int height, const char* what) {
  if (flow.width() != width || flow.height() != height) {
    throw Error(ErrorCode::dimension_mismatch, std::string(what) + ": dimension mismatch");
  }
  if (!all_finite(flow.values())) {
    throw Error(ErrorCode::non_finite, std::string(what) + ": non-finite flow");
  }
}

}  // namespace

template <int C>
SplatField<C> forward_splat(const SplatField<C>& values, const FlowField& flow) {
  const int w = values.width();
  const int h = values.height();
  check_inputs(flow, w, h, "forward_splat");
  SplatField<C> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Zero pixels add nothing; layers are zero outside their support.
      bool zero = true;
      for (int c = 0; c < C; ++c) zero = zero && values.at(x, y, c) == 0.0;
      if (zero) continue;
      const Footprint f = footprint(x + flow.at(x, y, 0), y + flow.at(x, y, 1), w, h);
      if (!f.visible) continue;
      for (int dy = 0; dy < 2; ++dy) {
        const int oy = f.y0 + dy;
        if (oy < 0 || oy >= h) continue;
        for (int dx = 0; dx < 2; ++dx) {
          const int ox = f.x0 + dx;
          if (ox < 0 || ox >= w) continue;
          const double wgt = f.wx[dx] * f.wy[dy];
          for (int c = 0; c < C; ++c) out.at(ox, oy, c) += values.at(x, y, c) * wgt;
        }
      }
    }
  }
  return out;
}

template <int C>
SplatGradients<C> forward_splat_vjp(const SplatField<C>& grad_out, const SplatField<C>& values,
                                    const FlowField& flow) {
  const int w = values.width();
  const int h = values.height();
  check_inputs(flow, w, h, "forward_splat_vjp");
  require_same_shape(grad_out, values, "forward_splat_vjp");
  SplatGradients<C> g{SplatField<C>(w, h), FlowField(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Footprint f = footprint(x + flow.at(x, y, 0), y + flow.at(x, y, 1), w, h);
      if (!f.visible) continue;
      double gu = 0.0;
      double gv = 0.0;
      for (int dy = 0; dy < 2; ++dy) {
        const int oy = f.y0 + dy;
        if (oy < 0 || oy >= h) continue;
        for (int dx = 0; dx < 2; ++dx) {
          const int ox = f.x0 + dx;
          if (ox < 0 || ox >= w) continue;
          // <values_j, grad_out(corner)> drives the flow gradient.
          double dot = 0.0;
          for (int c = 0; c < C; ++c) {
            const double go = grad_out.at(ox, oy, c);
            g.values.at(x, y, c) += f.wx[dx] * f.wy[dy] * go;
            dot += values.at(x, y, c) * go;
          }
          gu += f.dwx[dx] * f.wy[dy] * dot;
          gv += f.wx[dx] * f.dwy[dy] * dot;
        }
      }
      g.flow.at(x, y, 0) = gu;
      g.flow.at(x, y, 1) = gv;
    }
  }
  return g;
}

template SplatField<1> forward_splat<1>(const SplatField<1>&, const FlowField&);
template SplatField<2> forward_splat<2>(const SplatField<2>&, const FlowField&);
template SplatField<3> forward_splat<3>(const SplatField<3>&, const FlowField&);
template SplatGradients<1> forward_splat_vjp<1>(const SplatField<1>&, const SplatField<1>&,
                                                const FlowField&);
template SplatGradients<2> forward_splat_vjp<2>(const SplatField<2>&, const SplatField<2>&,
                                                const FlowField&);
template SplatGradients<3> forward_splat_vjp<3>(const SplatField<3>&, const SplatField<3>&,
                                                const FlowField&);

}  // namespace ldis
