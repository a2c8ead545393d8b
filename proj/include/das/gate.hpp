#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "das/layers.hpp"

namespace das {

// Gate designs: the proposed gate (c_das) and the design-evolution / component
// ablations it is compared against.
enum class GateVariant {
  c_das,                      // x * sigmoid(N2(deform(GELU(N1(DSC(x))))))
  a_gridsample_concat,        // conv3x3(concat(x, grid_sample(x)))
  b_gridsample_gated,         // x * sigmoid(conv1x1(concat(conv1x1(x), grid_sample(conv1x1(x)))))
  d_deform_only,              // x * sigmoid(N2(deform(x)))
  e_dsc_only,                 // x * sigmoid(N2(DSC(x)))
  f_dsc_for_deform,           // c_das with the deformable conv replaced by a DSC
  g_deform_feedforward,       // deform(x)
  h_gate_layers_feedforward,  // N2(deform(GELU(N1(DSC(x)))))
};

inline constexpr GateVariant kAllVariants[] = {
    GateVariant::a_gridsample_concat, GateVariant::b_gridsample_gated, GateVariant::c_das,
    GateVariant::d_deform_only,       GateVariant::e_dsc_only,         GateVariant::f_dsc_for_deform,
    GateVariant::g_deform_feedforward, GateVariant::h_gate_layers_feedforward};

std::string_view to_string(GateVariant v);
GateVariant parse_gate_variant(std::string_view s);

struct GateConfig {
  double alpha = 0.2;
  NormKind first_norm = NormKind::InstanceNorm;
  NormKind second_norm = NormKind::LayerNorm;
  GateVariant variant = GateVariant::c_das;

  void validate() const;
};

// max(1, round_half_up(alpha * channels)); alpha must lie in (0, 1].
std::size_t bottleneck_width(double alpha, std::size_t channels);

// Parameters of one attached gate. Layers that a variant does not use stay null.
class GateState {
 public:
  GateState(std::string name, const GateConfig& cfg, std::size_t channels, Rng& rng);

  const GateConfig& config() const { return cfg_; }
  std::size_t channels() const { return channels_; }
  std::size_t width() const { return width_; }
  const std::string& name() const { return name_; }

  // Test hook: A = 1, so the gate returns its input unchanged.
  bool force_unit_attention = false;

  Shape trace(const Shape& in, CostReport& report) const;
  void collect(std::vector<Parameter*>& out);
  void collect_buffers(std::vector<Parameter*>& out);
  std::uint64_t param_count();

  // Layers (null when unused by the variant).
  std::unique_ptr<ConvLayer> depthwise, pointwise;    // bottleneck DSC c -> width (c -> c for e)
  std::unique_ptr<NormLayer> norm1, norm2;
  std::unique_ptr<DeformableConvLayer> deform;        // width -> c (c -> c for d, g)
  std::unique_ptr<ConvLayer> depthwise2, pointwise2;  // second-stage DSC for f
  std::unique_ptr<ConvLayer> flow;                    // learned grid for a, b
  std::unique_ptr<ConvLayer> fuse;                    // a: 3x3 2c -> c; b: 1x1 2*width -> c
  std::unique_ptr<ConvLayer> squeeze1, squeeze2;      // b: 1x1 c -> width

  bool training = true;

 private:
  std::string name_;
  GateConfig cfg_;
  std::size_t channels_;
  std::size_t width_;
};

// Proposed gate: X * sigmoid(N2(deform(GELU(N1(DSC(X)))))).
Var das_forward(Var x, GateState& gate);

// Dispatches on gate.config().variant.
Var variant_forward(Var x, GateState& gate);

// Attention tensor A of the proposed gate (before the multiply).
Var das_attention(Var x, GateState& gate);

}  // namespace das
