#include "das/models.hpp"

#include <set>
#include <stdexcept>

#include "das/ops.hpp"

namespace das {

std::string_view to_string(GatePlacement p) {
  switch (p) {
    case GatePlacement::none: return "none";
    case GatePlacement::four_stages: return "four";
    case GatePlacement::all_blocks: return "all";
  }
  return "?";
}

GatePlacement parse_gate_placement(std::string_view s) {
  if (s == "none") return GatePlacement::none;
  if (s == "four" || s == "four_stages" || s == "stages") return GatePlacement::four_stages;
  if (s == "all" || s == "all_blocks") return GatePlacement::all_blocks;
  throw std::invalid_argument("unknown gate placement '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (depth != 18 && depth != 50) {
    throw std::invalid_argument("unsupported ResNet depth " + std::to_string(depth) + " (expected 18 or 50)");
  }
  if (input_h < 32 || input_w < 32) throw std::invalid_argument("input size must be at least 32x32");
  if (num_classes == 0) throw std::invalid_argument("num_classes must be >= 1");
  if (stages < 1 || stages > 4) throw std::invalid_argument("stages must be in [1, 4]");
  if (base_width == 0) throw std::invalid_argument("base_width must be >= 1");
  if (gate_placement != GatePlacement::none) gate.validate();
}

namespace {

class BasicBlock final : public ResidualBlock {
 public:
  BasicBlock(const std::string& name, std::size_t in, std::size_t planes, std::size_t stride, Rng& rng)
      : conv1_(name + ".conv1", in, planes, 3, stride, 1, 1, rng),
        bn1_(name + ".bn1", NormKind::BatchNorm, planes),
        conv2_(name + ".conv2", planes, planes, 3, 1, 1, 1, rng),
        bn2_(name + ".bn2", NormKind::BatchNorm, planes) {
    if (stride != 1 || in != planes) {
      down_conv_ = std::make_unique<ConvLayer>(name + ".downsample.0", in, planes, 1, stride, 0, 1, rng);
      down_bn_ = std::make_unique<NormLayer>(name + ".downsample.1", NormKind::BatchNorm, planes);
    }
  }

  Var forward(Var x, bool training) override {
    Var out = ops::relu(bn1_.forward(conv2d(x, conv1_), training));
    out = bn2_.forward(conv2d(out, conv2_), training);
    Var identity = down_conv_ ? down_bn_->forward(conv2d(x, *down_conv_), training) : x;
    return ops::relu(ops::add(out, identity));
  }

  Shape trace(const Shape& in, CostReport& r) const override {
    Shape s = bn1_.trace(conv1_.trace(in, r), r);
    s = bn2_.trace(conv2_.trace(s, r), r);
    if (down_conv_) {
      const Shape d = down_bn_->trace(down_conv_->trace(in, r), r);
      if (d != s) throw std::logic_error("downsample shape mismatch");
    } else if (in != s) {
      throw std::logic_error("residual shape mismatch " + in.str() + " vs " + s.str());
    }
    return s;
  }

  void collect(std::vector<Parameter*>& out) override {
    conv1_.collect(out);
    bn1_.collect(out);
    conv2_.collect(out);
    bn2_.collect(out);
    if (down_conv_) {
      down_conv_->collect(out);
      down_bn_->collect(out);
    }
  }

  void collect_buffers(std::vector<Parameter*>& out) override {
    bn1_.collect_buffers(out);
    bn2_.collect_buffers(out);
    if (down_bn_) down_bn_->collect_buffers(out);
  }

 private:
  ConvLayer conv1_;
  NormLayer bn1_;
  ConvLayer conv2_;
  NormLayer bn2_;
  std::unique_ptr<ConvLayer> down_conv_;
  std::unique_ptr<NormLayer> down_bn_;
};

// 1x1 -> 3x3 (strided) -> 1x1 with 4x expansion.
class BottleneckBlock final : public ResidualBlock {
 public:
  static constexpr std::size_t kExpansion = 4;

  BottleneckBlock(const std::string& name, std::size_t in, std::size_t planes, std::size_t stride, Rng& rng)
      : conv1_(name + ".conv1", in, planes, 1, 1, 0, 1, rng),
        bn1_(name + ".bn1", NormKind::BatchNorm, planes),
        conv2_(name + ".conv2", planes, planes, 3, stride, 1, 1, rng),
        bn2_(name + ".bn2", NormKind::BatchNorm, planes),
        conv3_(name + ".conv3", planes, planes * kExpansion, 1, 1, 0, 1, rng),
        bn3_(name + ".bn3", NormKind::BatchNorm, planes * kExpansion) {
    if (stride != 1 || in != planes * kExpansion) {
      down_conv_ = std::make_unique<ConvLayer>(name + ".downsample.0", in, planes * kExpansion, 1, stride, 0, 1, rng);
      down_bn_ = std::make_unique<NormLayer>(name + ".downsample.1", NormKind::BatchNorm, planes * kExpansion);
    }
  }

  Var forward(Var x, bool training) override {
    Var out = ops::relu(bn1_.forward(conv2d(x, conv1_), training));
    out = ops::relu(bn2_.forward(conv2d(out, conv2_), training));
    out = bn3_.forward(conv2d(out, conv3_), training);
    Var identity = down_conv_ ? down_bn_->forward(conv2d(x, *down_conv_), training) : x;
    return ops::relu(ops::add(out, identity));
  }

  Shape trace(const Shape& in, CostReport& r) const override {
    Shape s = bn1_.trace(conv1_.trace(in, r), r);
    s = bn2_.trace(conv2_.trace(s, r), r);
    s = bn3_.trace(conv3_.trace(s, r), r);
    if (down_conv_) {
      const Shape d = down_bn_->trace(down_conv_->trace(in, r), r);
      if (d != s) throw std::logic_error("downsample shape mismatch");
    } else if (in != s) {
      throw std::logic_error("residual shape mismatch " + in.str() + " vs " + s.str());
    }
    return s;
  }

  void collect(std::vector<Parameter*>& out) override {
    conv1_.collect(out);
    bn1_.collect(out);
    conv2_.collect(out);
    bn2_.collect(out);
    conv3_.collect(out);
    bn3_.collect(out);
    if (down_conv_) {
      down_conv_->collect(out);
      down_bn_->collect(out);
    }
  }

  void collect_buffers(std::vector<Parameter*>& out) override {
    bn1_.collect_buffers(out);
    bn2_.collect_buffers(out);
    bn3_.collect_buffers(out);
    if (down_bn_) down_bn_->collect_buffers(out);
  }

 private:
  ConvLayer conv1_;
  NormLayer bn1_;
  ConvLayer conv2_;
  NormLayer bn2_;
  ConvLayer conv3_;
  NormLayer bn3_;
  std::unique_ptr<ConvLayer> down_conv_;
  std::unique_ptr<NormLayer> down_bn_;
};

}  // namespace

Network::Network(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.seed);
  // Separate stream so attaching gates leaves backbone initialization untouched.
  Rng gate_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ull);
  const bool small = cfg_.small_input_stem();
  const std::size_t w0 = cfg_.base_width;
  stem_conv_ = small ? std::make_unique<ConvLayer>("conv1", 3, w0, 3, 1, 1, 1, rng)
                     : std::make_unique<ConvLayer>("conv1", 3, w0, 7, 2, 3, 1, rng);
  stem_bn_ = std::make_unique<NormLayer>("bn1", NormKind::BatchNorm, w0);

  const bool bottleneck = cfg_.depth == 50;
  const std::size_t expansion = bottleneck ? BottleneckBlock::kExpansion : 1;
  const std::vector<std::size_t> counts = bottleneck ? std::vector<std::size_t>{3, 4, 6, 3}
                                                     : std::vector<std::size_t>{2, 2, 2, 2};
  std::size_t in = w0;
  int gate_index = 0;
  auto add_gate = [&](std::size_t channels) {
    gates_.push_back(std::make_unique<GateState>("gate." + std::to_string(gate_index), cfg_.gate, channels, gate_rng));
    return gate_index++;
  };
  for (std::size_t s = 0; s < cfg_.stages; ++s) {
    const std::size_t planes = w0 << s;
    std::vector<StageBlock> blocks;
    for (std::size_t b = 0; b < counts[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string name = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
      StageBlock sb;
      sb.name = name;
      if (bottleneck) {
        sb.block = std::make_unique<BottleneckBlock>(name, in, planes, stride, rng);
      } else {
        sb.block = std::make_unique<BasicBlock>(name, in, planes, stride, rng);
      }
      in = planes * expansion;
      const bool last = b + 1 == counts[s];
      if (cfg_.gate_placement == GatePlacement::all_blocks ||
          (cfg_.gate_placement == GatePlacement::four_stages && last)) {
        sb.gate = add_gate(in);
      }
      blocks.push_back(std::move(sb));
    }
    stages_.push_back(std::move(blocks));
  }
  fc_ = std::make_unique<LinearLayer>("fc", in, cfg_.num_classes, rng);

  // Dry run: throws on any shape inconsistency for the configured input.
  (void)trace(cfg_.input_h, cfg_.input_w);

  std::set<std::string> names;
  std::vector<Parameter*> all = parameters();
  for (Parameter* p : buffers()) all.push_back(p);
  for (Parameter* p : all) {
    if (!names.insert(p->name).second) throw std::logic_error("duplicate parameter name " + p->name);
  }
}

std::unique_ptr<Network> build_model(const ModelConfig& cfg) { return std::make_unique<Network>(cfg); }

Var Network::forward(Graph& g, const Tensor& batch, ActivationTaps* taps) {
  return forward(g.input(batch), taps);
}

Var Network::forward(Var x, ActivationTaps* taps) {
  const Shape& s = x.shape();
  if (s.c != 3 || s.h != cfg_.input_h || s.w != cfg_.input_w) {
    throw std::invalid_argument("network expects (n,3," + std::to_string(cfg_.input_h) + "," +
                                std::to_string(cfg_.input_w) + ") input, got " + s.str());
  }
  auto tap = [&](const std::string& name, Var v) {
    if (taps) (*taps)[name] = v;
  };
  Var out = ops::relu(stem_bn_->forward(conv2d(x, *stem_conv_), training_));
  if (!cfg_.small_input_stem()) out = ops::max_pool3s2p1(out);
  tap("stem", out);
  for (std::size_t si = 0; si < stages_.size(); ++si) {
    for (StageBlock& sb : stages_[si]) {
      out = sb.block->forward(out, training_);
      if (sb.gate >= 0) out = variant_forward(out, *gates_[static_cast<std::size_t>(sb.gate)]);
      tap(sb.name, out);
    }
    tap("layer" + std::to_string(si + 1), out);
  }
  return linear(ops::global_avg_pool(out), *fc_);
}

void Network::set_training(bool training) {
  training_ = training;
  for (auto& g : gates_) g->training = training;
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  stem_conv_->collect(out);
  stem_bn_->collect(out);
  for (auto& stage : stages_)
    for (auto& sb : stage) sb.block->collect(out);
  fc_->collect(out);
  for (auto& g : gates_) g->collect(out);
  return out;
}

std::vector<Parameter*> Network::buffers() {
  std::vector<Parameter*> out;
  stem_bn_->collect_buffers(out);
  for (auto& stage : stages_)
    for (auto& sb : stage) sb.block->collect_buffers(out);
  for (auto& g : gates_) g->collect_buffers(out);
  return out;
}

std::uint64_t Network::param_count() {
  std::uint64_t n = 0;
  for (Parameter* p : parameters()) n += p->numel();
  return n;
}

std::vector<GateState*> Network::gates() {
  std::vector<GateState*> out;
  for (auto& g : gates_) out.push_back(g.get());
  return out;
}

std::vector<std::string> Network::activation_names() const {
  std::vector<std::string> out{"stem"};
  for (std::size_t si = 0; si < stages_.size(); ++si) {
    for (const StageBlock& sb : stages_[si]) out.push_back(sb.name);
    out.push_back("layer" + std::to_string(si + 1));
  }
  return out;
}

CostReport Network::trace(std::size_t h, std::size_t w) const {
  CostReport r;
  Shape s = stem_bn_->trace(stem_conv_->trace({1, 3, h, w}, r), r);
  if (!cfg_.small_input_stem()) s = {s.n, s.c, conv_out_dim(s.h, 3, 2, 1), conv_out_dim(s.w, 3, 2, 1)};
  for (const auto& stage : stages_) {
    for (const StageBlock& sb : stage) {
      s = sb.block->trace(s, r);
      if (sb.gate >= 0) s = gates_[static_cast<std::size_t>(sb.gate)]->trace(s, r);
    }
  }
  s = {s.n, s.c, 1, 1};
  fc_->trace(s, r);
  return r;
}

}  // namespace das
