#include "das/layers.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "das/ops.hpp"

namespace das {

std::uint64_t CostReport::total_params() const {
  std::uint64_t t = 0;
  for (const auto& r : rows) t += r.params;
  return t;
}

std::uint64_t CostReport::total_macs() const {
  std::uint64_t t = 0;
  for (const auto& r : rows) t += r.macs;
  return t;
}

void CostReport::write_csv(std::ostream& os) const {
  os << "name,params,macs\n";
  for (const auto& r : rows) os << r.name << ',' << r.params << ',' << r.macs << '\n';
  os << "total," << total_params() << ',' << total_macs() << '\n';
  for (const auto& n : notes) os << "# " << n << '\n';
}

std::string_view to_string(NormKind k) {
  switch (k) {
    case NormKind::BatchNorm: return "batch";
    case NormKind::FeatureNorm: return "feature";
    case NormKind::InstanceNorm: return "instance";
    case NormKind::LayerNorm: return "layer";
  }
  return "?";
}

NormKind parse_norm_kind(std::string_view s) {
  if (s == "batch" || s == "bn" || s == "BN") return NormKind::BatchNorm;
  if (s == "feature" || s == "fn" || s == "FN") return NormKind::FeatureNorm;
  if (s == "instance" || s == "in" || s == "IN") return NormKind::InstanceNorm;
  if (s == "layer" || s == "ln" || s == "LN") return NormKind::LayerNorm;
  throw std::invalid_argument("unknown normalization '" + std::string(s) + "'");
}

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

ConvLayer::ConvLayer(std::string name, std::size_t c_in, std::size_t c_out, std::size_t k,
                     std::size_t stride, std::size_t pad, std::size_t groups, Rng& rng)
    : name_(std::move(name)), geom_{stride, pad, groups} {
  if (groups == 0 || c_in % groups != 0 || c_out % groups != 0) {
    throw std::invalid_argument(name_ + ": groups " + std::to_string(groups) + " must divide c_in " +
                                std::to_string(c_in) + " and c_out " + std::to_string(c_out));
  }
  if (k % 2 == 0) throw std::invalid_argument(name_ + ": kernel size must be odd");
  const Shape ws{c_out, c_in / groups, k, k};
  weight_ = Parameter(name_ + ".weight", kaiming_uniform(ws, ws.c * k * k, rng));
}

Shape ConvLayer::output_shape(const Shape& in) const {
  return conv_output_shape(in, weight_.value.shape(), geom_);
}

Shape ConvLayer::trace(const Shape& in, CostReport& report) const {
  const Shape out = output_shape(in);
  const Shape& ws = weight_.value.shape();
  const std::uint64_t macs = static_cast<std::uint64_t>(ws.numel()) * out.h * out.w;
  report.add(name_, weight_.numel(), macs);
  return out;
}

Var conv2d(Var x, ConvLayer& layer) {
  return ops::conv2d(x, x.graph().param(layer.weight()), layer.geometry());
}

Var depthwise_separable_conv(Var x, ConvLayer& depthwise, ConvLayer& pointwise) {
  const std::size_t c = x.shape().c;
  if (depthwise.c_in() != c || depthwise.geometry().groups != c || depthwise.kernel() != 3 ||
      depthwise.geometry().pad != 1 || depthwise.geometry().stride != 1) {
    throw std::invalid_argument("depthwise_separable_conv: depthwise layer must be 3x3, pad 1, groups = " +
                                std::to_string(c));
  }
  if (pointwise.kernel() != 1 || pointwise.c_in() != depthwise.c_out()) {
    throw std::invalid_argument("depthwise_separable_conv: pointwise layer must be 1x1 from " +
                                std::to_string(depthwise.c_out()) + " channels");
  }
  return conv2d(conv2d(x, depthwise), pointwise);
}

DeformableConvLayer::DeformableConvLayer(std::string name, std::size_t c_in, std::size_t c_out, Rng& rng)
    : name_(std::move(name)),
      weight_(name_ + ".weight", kaiming_uniform({c_out, c_in, kKernel, kKernel}, c_in * kTaps, rng)),
      predictor_(name_ + ".offset", c_in, 3 * kTaps, kKernel, 1, 1, 1, rng) {
  // Zero offsets and w_p = 0.5: training starts from plain convolution.
  predictor_.weight().value.fill(0.0);
}

Shape DeformableConvLayer::trace(const Shape& in, CostReport& report) const {
  if (in.c != c_in()) {
    throw std::invalid_argument(name_ + ": expected " + std::to_string(c_in()) + " input channels, got " +
                                in.str());
  }
  predictor_.trace(in, report);
  const std::uint64_t sites = static_cast<std::uint64_t>(in.h) * in.w;
  const std::uint64_t conv = static_cast<std::uint64_t>(weight_.numel()) * sites;
  const std::uint64_t sampling = 4ull * kTaps * c_in() * sites;
  report.add(name_, weight_.numel(), conv + sampling);
  return {in.n, c_out(), in.h, in.w};
}

void DeformableConvLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  predictor_.collect(out);
}

Var deformable_conv2d(Var x, DeformableConvLayer& layer) {
  if (x.shape().c != layer.c_in()) {
    throw std::invalid_argument("deformable_conv2d: input " + x.shape().str() + " expects " +
                                std::to_string(layer.c_in()) + " channels");
  }
  constexpr std::size_t k = DeformableConvLayer::kTaps;
  Var pred = conv2d(x, layer.offset_predictor());
  Var offset = ops::slice_channels(pred, 0, 2 * k);
  Var mask;
  if (layer.modulation_override) {
    mask = x.graph().input(Tensor({x.shape().n, k, x.shape().h, x.shape().w}, *layer.modulation_override));
  } else {
    mask = ops::sigmoid(ops::slice_channels(pred, 2 * k, k));
  }
  return ops::deform_conv2d(x, offset, mask, x.graph().param(layer.weight()));
}

NormLayer::NormLayer(std::string name, NormKind kind, std::size_t channels)
    : kind_(kind), name_(std::move(name)) {
  if (kind_ == NormKind::BatchNorm) {
    gamma_ = Parameter(name_ + ".weight", Tensor({1, channels, 1, 1}, 1.0));
    beta_ = Parameter(name_ + ".bias", Tensor({1, channels, 1, 1}, 0.0));
    running_mean_ = Parameter(name_ + ".running_mean", Tensor({1, channels, 1, 1}, 0.0));
    running_var_ = Parameter(name_ + ".running_var", Tensor({1, channels, 1, 1}, 1.0));
    running_mean_.requires_grad = false;
    running_var_.requires_grad = false;
  }
}

Var NormLayer::forward(Var x, bool training) {
  if (kind_ != NormKind::BatchNorm) return normalize(x, kind_);
  Graph& g = x.graph();
  const std::size_t c = x.shape().c;
  if (gamma_.value.shape().c != c) {
    throw std::invalid_argument(name_ + ": expected " + std::to_string(gamma_.value.shape().c) +
                                " channels, got " + x.shape().str());
  }
  Var xhat;
  if (training) {
    const Moments m = reduce_moments(x.value(), kAxisN | kAxisH | kAxisW);
    for (std::size_t i = 0; i < c; ++i) {
      running_mean_.value[i] = (1 - kBatchNormMomentum) * running_mean_.value[i] + kBatchNormMomentum * m.mean[i];
      running_var_.value[i] = (1 - kBatchNormMomentum) * running_var_.value[i] + kBatchNormMomentum * m.var[i];
    }
    xhat = ops::standardize(x, kAxisN | kAxisH | kAxisW, kNormEpsilon);
  } else {
    Tensor scale({1, c, 1, 1}), shift({1, c, 1, 1});
    for (std::size_t i = 0; i < c; ++i) {
      scale[i] = 1.0 / std::sqrt(running_var_.value[i] + kNormEpsilon);
      shift[i] = -running_mean_.value[i] * scale[i];
    }
    xhat = ops::channel_affine(x, g.input(std::move(scale)), g.input(std::move(shift)));
  }
  return ops::channel_affine(xhat, g.param(gamma_), g.param(beta_));
}

Shape NormLayer::trace(const Shape& in, CostReport& report) const {
  if (kind_ == NormKind::BatchNorm) report.add(name_, gamma_.numel() + beta_.numel(), 0);
  return in;
}

void NormLayer::collect(std::vector<Parameter*>& out) {
  if (kind_ != NormKind::BatchNorm) return;
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

void NormLayer::collect_buffers(std::vector<Parameter*>& out) {
  if (kind_ != NormKind::BatchNorm) return;
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

Var normalize(Var x, NormKind kind, double eps) {
  if (x.shape().plane() == 0) throw std::invalid_argument("normalize: degenerate spatial extent");
  switch (kind) {
    case NormKind::BatchNorm: return ops::standardize(x, kAxisN | kAxisH | kAxisW, eps);
    case NormKind::InstanceNorm: return ops::standardize(x, kAxisH | kAxisW, eps);
    case NormKind::LayerNorm: return ops::standardize(x, kAxisC | kAxisH | kAxisW, eps);
    case NormKind::FeatureNorm: return ops::channel_rms_normalize(x, eps);
  }
  throw std::invalid_argument("normalize: unknown kind");
}

Var activation(Var x, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::GELU: return ops::gelu(x);
    case ActivationKind::ReLU: return ops::relu(x);
    case ActivationKind::Sigmoid: return ops::sigmoid(x);
  }
  throw std::invalid_argument("activation: unknown kind");
}

Var pool(Var x, PoolKind kind) {
  return kind == PoolKind::Max3s2p1 ? ops::max_pool3s2p1(x) : ops::global_avg_pool(x);
}

LinearLayer::LinearLayer(std::string name, std::size_t features, std::size_t classes, Rng& rng)
    : name_(std::move(name)),
      weight_(name_ + ".weight", kaiming_uniform({classes, features, 1, 1}, features, rng)),
      bias_(name_ + ".bias", Tensor({1, classes, 1, 1}, 0.0)) {}

Shape LinearLayer::trace(const Shape& in, CostReport& report) const {
  const Shape& ws = weight_.value.shape();
  if (in.c != ws.c || in.h != 1 || in.w != 1) {
    throw std::invalid_argument(name_ + ": expected (n," + std::to_string(ws.c) + ",1,1), got " + in.str());
  }
  report.add(name_, weight_.numel() + bias_.numel(), static_cast<std::uint64_t>(ws.n) * ws.c);
  return {in.n, ws.n, 1, 1};
}

void LinearLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Var linear(Var x, LinearLayer& layer) {
  Graph& g = x.graph();
  return ops::linear(x, g.param(layer.weight()), g.param(layer.bias()));
}

}  // namespace das
