#pragma once

#include "ldis/imagery.hpp"

namespace ldis {

// Summation splatting. Input pixel j lands at (x_j + u_j, y_j + v_j) and adds
// values_j * max(0, 1-|dx|) * max(0, 1-|dy|) to each of the (up to) four
// surrounding output pixels. Corners outside the frame are dropped
// individually. Accumulation runs in row-major input order, so results are
// bit-reproducible.
template <int C>
SplatField<C> forward_splat(const SplatField<C>& values, const FlowField& flow);

template <int C>
struct SplatGradients {
  SplatField<C> values;
  FlowField flow;
};

// Reverse pass of forward_splat for the cotangent `grad_out`. At exact integer
// landing coordinates the flow derivative of the bilinear weights is taken as
// 0 on both corners of that axis.
template <int C>
SplatGradients<C> forward_splat_vjp(const SplatField<C>& grad_out, const SplatField<C>& values,
                                    const FlowField& flow);

}  // namespace ldis
