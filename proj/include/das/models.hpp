#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "das/gate.hpp"
#include "das/layers.hpp"

namespace das {

enum class GatePlacement { none, four_stages, all_blocks };

std::string_view to_string(GatePlacement p);
GatePlacement parse_gate_placement(std::string_view s);

struct ModelConfig {
  int depth = 18;
  std::size_t num_classes = 1000;
  std::size_t input_h = 224;
  std::size_t input_w = 224;
  GatePlacement gate_placement = GatePlacement::none;
  GateConfig gate;
  // Mini-network knobs: number of residual stages kept and the first stage width.
  std::size_t stages = 4;
  std::size_t base_width = 64;
  std::uint64_t seed = 0;

  // 3x3 stride-1 stem without max pool for small (CIFAR-sized) inputs.
  bool small_input_stem() const { return input_h <= 64 && input_w <= 64; }
  void validate() const;
};

// Named intermediate activations captured during a forward pass.
using ActivationTaps = std::map<std::string, Var>;

class ResidualBlock {
 public:
  virtual ~ResidualBlock() = default;
  virtual Var forward(Var x, bool training) = 0;
  virtual Shape trace(const Shape& in, CostReport& report) const = 0;
  virtual void collect(std::vector<Parameter*>& out) = 0;
  virtual void collect_buffers(std::vector<Parameter*>& out) = 0;
};

class Network {
 public:
  explicit Network(const ModelConfig& cfg);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const ModelConfig& config() const { return cfg_; }

  // Logits (n, classes, 1, 1).
  Var forward(Graph& g, const Tensor& batch, ActivationTaps* taps = nullptr);
  Var forward(Var x, ActivationTaps* taps = nullptr);

  void set_training(bool training);
  bool training() const { return training_; }

  // Trainable parameters in registration order; names are unique.
  std::vector<Parameter*> parameters();
  // Non-trainable state (BatchNorm running statistics).
  std::vector<Parameter*> buffers();
  std::uint64_t param_count();

  std::vector<GateState*> gates();
  // Names accepted by the activation taps, in forward order.
  std::vector<std::string> activation_names() const;

  // Analytic shape/cost walk for an (h, w) RGB input; no tensors are allocated.
  CostReport trace(std::size_t h, std::size_t w) const;

 private:
  struct StageBlock {
    std::unique_ptr<ResidualBlock> block;
    int gate = -1;  // index into gates_, or -1
    std::string name;
  };

  ModelConfig cfg_;
  bool training_ = true;
  std::unique_ptr<ConvLayer> stem_conv_;
  std::unique_ptr<NormLayer> stem_bn_;
  std::vector<std::vector<StageBlock>> stages_;
  std::vector<std::unique_ptr<GateState>> gates_;
  std::unique_ptr<LinearLayer> fc_;
};

// Validates the config, builds the network and dry-runs its shapes.
std::unique_ptr<Network> build_model(const ModelConfig& cfg);

}  // namespace das
