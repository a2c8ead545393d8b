#include "das/gate.hpp"

#include <cmath>
#include <stdexcept>

#include "das/ops.hpp"

namespace das {

std::string_view to_string(GateVariant v) {
  switch (v) {
    case GateVariant::c_das: return "c";
    case GateVariant::a_gridsample_concat: return "a";
    case GateVariant::b_gridsample_gated: return "b";
    case GateVariant::d_deform_only: return "d";
    case GateVariant::e_dsc_only: return "e";
    case GateVariant::f_dsc_for_deform: return "f";
    case GateVariant::g_deform_feedforward: return "g";
    case GateVariant::h_gate_layers_feedforward: return "h";
  }
  return "?";
}

GateVariant parse_gate_variant(std::string_view s) {
  if (s == "c" || s == "c_das" || s == "das") return GateVariant::c_das;
  if (s == "a" || s == "a_gridsample_concat") return GateVariant::a_gridsample_concat;
  if (s == "b" || s == "b_gridsample_gated") return GateVariant::b_gridsample_gated;
  if (s == "d" || s == "d_deform_only") return GateVariant::d_deform_only;
  if (s == "e" || s == "e_dsc_only") return GateVariant::e_dsc_only;
  if (s == "f" || s == "f_dsc_for_deform") return GateVariant::f_dsc_for_deform;
  if (s == "g" || s == "g_deform_feedforward") return GateVariant::g_deform_feedforward;
  if (s == "h" || s == "h_gate_layers_feedforward") return GateVariant::h_gate_layers_feedforward;
  throw std::invalid_argument("unknown gate variant '" + std::string(s) + "'");
}

void GateConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("gate alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
}

std::size_t bottleneck_width(double alpha, std::size_t channels) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("gate alpha must lie in (0, 1], got " + std::to_string(alpha));
  }
  if (channels == 0) throw std::invalid_argument("gate channels must be >= 1");
  // Half-up rounding; the epsilon absorbs products like 0.1 * 25 landing just below .5.
  const double scaled = std::floor(alpha * static_cast<double>(channels) + 0.5 + 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(scaled));
}

GateState::GateState(std::string name, const GateConfig& cfg, std::size_t channels, Rng& rng)
    : name_(std::move(name)), cfg_(cfg), channels_(channels), width_(bottleneck_width(cfg.alpha, channels)) {
  cfg_.validate();
  const std::size_t c = channels_;
  const std::size_t b = width_;
  auto dsc = [&](const std::string& tag, std::size_t in, std::size_t out, std::unique_ptr<ConvLayer>& dw,
                 std::unique_ptr<ConvLayer>& pw) {
    dw = std::make_unique<ConvLayer>(name_ + ".dw" + tag, in, in, 3, 1, 1, in, rng);
    pw = std::make_unique<ConvLayer>(name_ + ".pw" + tag, in, out, 1, 1, 0, 1, rng);
  };
  auto zero_flow = [&](std::size_t in) {
    flow = std::make_unique<ConvLayer>(name_ + ".flow", in, 2, 3, 1, 1, 1, rng);
    flow->weight().value.fill(0.0);
  };

  switch (cfg_.variant) {
    case GateVariant::c_das:
    case GateVariant::h_gate_layers_feedforward:
      dsc("", c, b, depthwise, pointwise);
      norm1 = std::make_unique<NormLayer>(name_ + ".norm1", cfg_.first_norm, b);
      deform = std::make_unique<DeformableConvLayer>(name_ + ".deform", b, c, rng);
      norm2 = std::make_unique<NormLayer>(name_ + ".norm2", cfg_.second_norm, c);
      break;
    case GateVariant::f_dsc_for_deform:
      dsc("", c, b, depthwise, pointwise);
      norm1 = std::make_unique<NormLayer>(name_ + ".norm1", cfg_.first_norm, b);
      dsc("2", b, c, depthwise2, pointwise2);
      norm2 = std::make_unique<NormLayer>(name_ + ".norm2", cfg_.second_norm, c);
      break;
    case GateVariant::d_deform_only:
      deform = std::make_unique<DeformableConvLayer>(name_ + ".deform", c, c, rng);
      norm2 = std::make_unique<NormLayer>(name_ + ".norm2", cfg_.second_norm, c);
      break;
    case GateVariant::g_deform_feedforward:
      deform = std::make_unique<DeformableConvLayer>(name_ + ".deform", c, c, rng);
      break;
    case GateVariant::e_dsc_only:
      dsc("", c, c, depthwise, pointwise);
      norm2 = std::make_unique<NormLayer>(name_ + ".norm2", cfg_.second_norm, c);
      break;
    case GateVariant::a_gridsample_concat:
      zero_flow(c);
      fuse = std::make_unique<ConvLayer>(name_ + ".fuse", 2 * c, c, 3, 1, 1, 1, rng);
      break;
    case GateVariant::b_gridsample_gated:
      squeeze1 = std::make_unique<ConvLayer>(name_ + ".squeeze1", c, b, 1, 1, 0, 1, rng);
      squeeze2 = std::make_unique<ConvLayer>(name_ + ".squeeze2", c, b, 1, 1, 0, 1, rng);
      zero_flow(c);
      fuse = std::make_unique<ConvLayer>(name_ + ".fuse", 2 * b, c, 1, 1, 0, 1, rng);
      break;
  }
}

Shape GateState::trace(const Shape& in, CostReport& report) const {
  if (in.c != channels_) {
    throw std::invalid_argument(name_ + ": expected " + std::to_string(channels_) + " channels, got " + in.str());
  }
  // Layers in execution order; pure shape bookkeeping beyond what each layer reports.
  switch (cfg_.variant) {
    case GateVariant::a_gridsample_concat: {
      flow->trace(in, report);
      report.add(name_ + ".grid_sample", 0, 4ull * in.c * in.h * in.w);
      fuse->trace({in.n, 2 * in.c, in.h, in.w}, report);
      return in;
    }
    case GateVariant::b_gridsample_gated: {
      const Shape s1 = squeeze1->trace(in, report);
      const Shape s2 = squeeze2->trace(in, report);
      flow->trace(in, report);
      report.add(name_ + ".grid_sample", 0, 4ull * s2.c * s2.h * s2.w);
      fuse->trace({in.n, s1.c + s2.c, in.h, in.w}, report);
      return in;
    }
    default: break;
  }
  Shape s = in;
  if (depthwise) s = pointwise->trace(depthwise->trace(s, report), report);
  if (norm1) s = norm1->trace(s, report);
  if (deform) s = deform->trace(s, report);
  if (depthwise2) s = pointwise2->trace(depthwise2->trace(s, report), report);
  if (norm2) s = norm2->trace(s, report);
  if (s != in) throw std::logic_error(name_ + ": gate changes shape " + in.str() + " -> " + s.str());
  return s;
}

void GateState::collect(std::vector<Parameter*>& out) {
  for (auto* conv : {depthwise.get(), pointwise.get(), squeeze1.get(), squeeze2.get(), flow.get()})
    if (conv) conv->collect(out);
  if (norm1) norm1->collect(out);
  if (deform) deform->collect(out);
  for (auto* conv : {depthwise2.get(), pointwise2.get(), fuse.get()})
    if (conv) conv->collect(out);
  if (norm2) norm2->collect(out);
}

void GateState::collect_buffers(std::vector<Parameter*>& out) {
  if (norm1) norm1->collect_buffers(out);
  if (norm2) norm2->collect_buffers(out);
}

std::uint64_t GateState::param_count() {
  std::vector<Parameter*> ps;
  collect(ps);
  std::uint64_t n = 0;
  for (auto* p : ps) n += p->numel();
  return n;
}

namespace {

void require_channels(Var x, const GateState& gate) {
  if (x.shape().c != gate.channels()) {
    throw std::invalid_argument(gate.name() + ": input " + x.shape().str() + " expects " +
                                std::to_string(gate.channels()) + " channels");
  }
}

// GELU(N1(DSC(x))) -> width channels.
Var compress(Var x, GateState& gate) {
  return activation(gate.norm1->forward(depthwise_separable_conv(x, *gate.depthwise, *gate.pointwise), gate.training),
                    ActivationKind::GELU);
}

Var gated(Var x, Var pre_attention, GateState& gate) {
  if (gate.force_unit_attention) return x;
  return ops::mul(x, ops::sigmoid(pre_attention));
}

}  // namespace

Var das_attention(Var x, GateState& gate) {
  require_channels(x, gate);
  if (!gate.depthwise || !gate.norm1 || !gate.deform || !gate.norm2) {
    throw std::invalid_argument(gate.name() + ": gate was not built with the bottleneck + deformable layers");
  }
  Var xc = compress(x, gate);
  return ops::sigmoid(gate.norm2->forward(deformable_conv2d(xc, *gate.deform), gate.training));
}

Var das_forward(Var x, GateState& gate) {
  if (gate.force_unit_attention) {
    require_channels(x, gate);
    return x;
  }
  return ops::mul(x, das_attention(x, gate));
}

Var variant_forward(Var x, GateState& gate) {
  require_channels(x, gate);
  const bool train = gate.training;
  switch (gate.config().variant) {
    case GateVariant::c_das:
      return das_forward(x, gate);
    case GateVariant::a_gridsample_concat: {
      Var sampled = ops::grid_sample(x, conv2d(x, *gate.flow));
      return conv2d(ops::concat_channels(x, sampled), *gate.fuse);
    }
    case GateVariant::b_gridsample_gated: {
      Var compressed = conv2d(x, *gate.squeeze1);
      Var sampled = ops::grid_sample(conv2d(x, *gate.squeeze2), conv2d(x, *gate.flow));
      return gated(x, conv2d(ops::concat_channels(compressed, sampled), *gate.fuse), gate);
    }
    case GateVariant::d_deform_only:
      return gated(x, gate.norm2->forward(deformable_conv2d(x, *gate.deform), train), gate);
    case GateVariant::e_dsc_only:
      return gated(x, gate.norm2->forward(depthwise_separable_conv(x, *gate.depthwise, *gate.pointwise), train),
                   gate);
    case GateVariant::f_dsc_for_deform: {
      Var second = depthwise_separable_conv(compress(x, gate), *gate.depthwise2, *gate.pointwise2);
      return gated(x, gate.norm2->forward(second, train), gate);
    }
    case GateVariant::g_deform_feedforward:
      return deformable_conv2d(x, *gate.deform);
    case GateVariant::h_gate_layers_feedforward:
      return gate.norm2->forward(deformable_conv2d(compress(x, gate), *gate.deform), train);
  }
  throw std::invalid_argument(gate.name() + ": unknown gate variant");
}

}  // namespace das
