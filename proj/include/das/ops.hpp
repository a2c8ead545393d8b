#pragma once

// Differentiable tensor operations recorded on a Graph.

#include <span>

#include "das/autodiff.hpp"
#include "das/tensor.hpp"

namespace das::ops {

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
Var mean(Var a);

Var relu(Var x);
Var sigmoid(Var x);
// Exact form x * Phi(x).
Var gelu(Var x);

Var conv2d(Var x, Var weights, const ConvGeometry& geom);
Var deform_conv2d(Var x, Var offset, Var mask, Var weights);
Var grid_sample(Var x, Var flow);

// (x - mean) / sqrt(var + eps) with population moments over `axes`.
Var standardize(Var x, AxisSet axes, double eps);
// x / sqrt(mean_c(x^2) + eps), per spatial location.
Var channel_rms_normalize(Var x, double eps);
// x * scale[c] + shift[c]; scale and shift have shape (1, c, 1, 1).
Var channel_affine(Var x, Var scale, Var shift);

Var concat_channels(Var a, Var b);
Var slice_channels(Var x, std::size_t begin, std::size_t count);

Var max_pool3s2p1(Var x);
Var global_avg_pool(Var x);

// x: (n, features, 1, 1); weights: (classes, features, 1, 1); bias: (1, classes, 1, 1).
Var linear(Var x, Var weights, Var bias);

// Mean softmax cross-entropy; logits (n, classes, 1, 1).
Var cross_entropy(Var logits, std::span<const int> labels);

// Scalar element logits[n, k] as a 1x1x1x1 node.
Var pick(Var x, std::size_t n, std::size_t c);

}  // namespace das::ops
