#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "das/autodiff.hpp"
#include "das/cost.hpp"
#include "das/tensor.hpp"

namespace das {

using Rng = std::mt19937_64;

enum class NormKind { BatchNorm, FeatureNorm, InstanceNorm, LayerNorm };
enum class ActivationKind { GELU, ReLU, Sigmoid };
enum class PoolKind { Max3s2p1, GlobalAvg };

inline constexpr double kNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

std::string_view to_string(NormKind k);
NormKind parse_norm_kind(std::string_view s);

// Kaiming-uniform fan-in init: U(-b, b), b = sqrt(6 / fan_in).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

// Bias-free 2-D convolution.
class ConvLayer {
 public:
  ConvLayer(std::string name, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t groups, Rng& rng);

  Parameter& weight() { return weight_; }
  const Parameter& weight() const { return weight_; }
  const ConvGeometry& geometry() const { return geom_; }
  std::size_t c_in() const { return weight_.value.shape().c * geom_.groups; }
  std::size_t c_out() const { return weight_.value.shape().n; }
  std::size_t kernel() const { return weight_.value.shape().h; }

  Shape output_shape(const Shape& in) const;
  // Adds one row (params, MACs) and returns the output shape.
  Shape trace(const Shape& in, CostReport& report) const;
  void collect(std::vector<Parameter*>& out) { out.push_back(&weight_); }

 private:
  std::string name_;
  Parameter weight_;
  ConvGeometry geom_;
};

Var conv2d(Var x, ConvLayer& layer);

// Depthwise 3x3 (groups = c_in) followed by pointwise 1x1.
Var depthwise_separable_conv(Var x, ConvLayer& depthwise, ConvLayer& pointwise);

// 3x3 modulated deformable convolution with a 3x3 offset/modulation predictor
// producing 2K offset channels (dy, dx per tap) followed by K modulation logits.
class DeformableConvLayer {
 public:
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kTaps = kKernel * kKernel;

  DeformableConvLayer(std::string name, std::size_t c_in, std::size_t c_out, Rng& rng);

  Parameter& weight() { return weight_; }
  ConvLayer& offset_predictor() { return predictor_; }
  std::size_t c_in() const { return weight_.value.shape().c; }
  std::size_t c_out() const { return weight_.value.shape().n; }

  // Test hook: replace sigmoid(logit) by a constant modulation (1 or 0 emulate +/- infinity).
  std::optional<double> modulation_override;

  Shape trace(const Shape& in, CostReport& report) const;
  void collect(std::vector<Parameter*>& out);

 private:
  std::string name_;
  Parameter weight_;
  ConvLayer predictor_;
};

Var deformable_conv2d(Var x, DeformableConvLayer& layer);

// Normalization with state; only BatchNorm carries parameters (affine) and running stats.
class NormLayer {
 public:
  NormLayer(std::string name, NormKind kind, std::size_t channels);

  NormKind kind() const { return kind_; }
  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Parameter& running_mean() { return running_mean_; }
  Parameter& running_var() { return running_var_; }

  Var forward(Var x, bool training);
  Shape trace(const Shape& in, CostReport& report) const;
  void collect(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<Parameter*>& out);

 private:
  NormKind kind_;
  std::string name_;
  Parameter gamma_, beta_, running_mean_, running_var_;
};

// Parameter-free normalizations (IN, LN, FN); BatchNorm in training-statistics mode.
Var normalize(Var x, NormKind kind, double eps = kNormEpsilon);

Var activation(Var x, ActivationKind kind);
Var pool(Var x, PoolKind kind);

class LinearLayer {
 public:
  LinearLayer(std::string name, std::size_t features, std::size_t classes, Rng& rng);

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

  Shape trace(const Shape& in, CostReport& report) const;
  void collect(std::vector<Parameter*>& out);

 private:
  std::string name_;
  Parameter weight_, bias_;
};

Var linear(Var x, LinearLayer& layer);

}  // namespace das
