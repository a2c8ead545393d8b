#pragma once

// OpenMP-parallel compute kernels behind the differentiable ops.
//
// Every kernel fixes the accumulation order of each output element independently of
// the thread count (work is split over disjoint output rows/planes only), so results
// are bitwise identical between serial and parallel runs. The *_ref functions are
// plain serial loops kept as test oracles and benchmark baselines.

#include "das/tensor.hpp"

namespace das::kernels {

// Number of OpenMP threads the kernels will use (1 without OpenMP).
int max_threads();
void set_threads(int n);

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const ConvGeometry& geom);
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weights,
                             const ConvGeometry& geom, const Shape& input_shape);
Tensor conv2d_backward_weight(const Tensor& grad_out, const Tensor& input,
                              const ConvGeometry& geom, const Shape& weight_shape);

// Modulated deformable convolution, odd square kernel k, stride 1, pad k/2.
//   offset: (n, 2*k*k, h, w), channel 2t = dy of tap t, 2t+1 = dx (t = ky*k + kx)
//   mask:   (n, k*k, h, w), multiplies each tap's sample
Tensor deform_conv2d_forward(const Tensor& input, const Tensor& offset, const Tensor& mask,
                             const Tensor& weights);

struct DeformConvGrads {
  Tensor input;
  Tensor offset;
  Tensor mask;
  Tensor weights;
};

DeformConvGrads deform_conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                       const Tensor& offset, const Tensor& mask,
                                       const Tensor& weights);

// Samples every channel at (y + flow_y, x + flow_x); flow is (n, 2, h, w).
Tensor grid_sample_forward(const Tensor& input, const Tensor& flow);

struct GridSampleGrads {
  Tensor input;
  Tensor flow;
};

GridSampleGrads grid_sample_backward(const Tensor& grad_out, const Tensor& input,
                                     const Tensor& flow);

Tensor deform_conv2d_ref(const Tensor& input, const Tensor& offset, const Tensor& mask,
                         const Tensor& weights);
Tensor grid_sample_ref(const Tensor& input, const Tensor& flow);

}  // namespace das::kernels
