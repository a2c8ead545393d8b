#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "das/models.hpp"
#include "das/ops.hpp"
#include "support.hpp"

using namespace das;
using das::test::random_tensor;

namespace {

ModelConfig mini(GatePlacement placement = GatePlacement::none) {
  ModelConfig m;
  m.num_classes = 3;
  m.input_h = m.input_w = 32;
  m.stages = 2;
  m.base_width = 8;
  m.gate_placement = placement;
  m.seed = 7;
  return m;
}

}  // namespace

TEST_CASE("ResNet-18 has 11,689,512 parameters") {
  ModelConfig m;
  auto net = build_model(m);
  CHECK(net->param_count() == 11689512);
}

TEST_CASE("ResNet-50 has 25.56M parameters") {
  ModelConfig m;
  m.depth = 50;
  auto net = build_model(m);
  CHECK(std::abs(static_cast<double>(net->param_count()) - 25.56e6) / 25.56e6 < 1e-3);
}

TEST_CASE("four-stage placement attaches one gate per stage width") {
  ModelConfig m;
  m.gate_placement = GatePlacement::four_stages;
  auto net = build_model(m);
  const auto gates = net->gates();
  REQUIRE(gates.size() == 4);
  const std::size_t widths[] = {64, 128, 256, 512};
  for (std::size_t i = 0; i < 4; ++i) CHECK(gates[i]->channels() == widths[i]);

  m.gate_placement = GatePlacement::all_blocks;
  CHECK(build_model(m)->gates().size() == 8);
  m.depth = 50;
  CHECK(build_model(m)->gates().size() == 16);
}

TEST_CASE("stage resolutions at 224x224") {
  ModelConfig m;
  m.num_classes = 10;
  auto net = build_model(m);
  net->set_training(false);
  Graph g;
  ActivationTaps taps;
  const Var logits = net->forward(g, random_tensor({1, 3, 224, 224}, 1), &taps);
  CHECK(logits.shape() == Shape{1, 10, 1, 1});
  const std::size_t side[] = {56, 28, 14, 7};
  for (std::size_t s = 0; s < 4; ++s) {
    const Shape& sh = taps.at("layer" + std::to_string(s + 1)).shape();
    CHECK(sh.h == side[s]);
    CHECK(sh.w == side[s]);
  }
}

TEST_CASE("gates never change backbone parameter names") {
  ModelConfig base;
  ModelConfig gated = base;
  gated.gate_placement = GatePlacement::four_stages;
  auto a = build_model(base);
  auto b = build_model(gated);
  const auto pa = a->parameters(), pb = b->parameters();
  REQUIRE(pb.size() > pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value.shape() == pb[i]->value.shape());
    CHECK(max_abs_diff(pa[i]->value, pb[i]->value) == 0.0);
  }
  for (std::size_t i = pa.size(); i < pb.size(); ++i) CHECK(pb[i]->name.rfind("gate.", 0) == 0);
  std::set<std::string> names;
  for (Parameter* p : pb) names.insert(p->name);
  CHECK(names.size() == pb.size());
}

TEST_CASE("identical images give identical logit rows in eval mode") {
  auto net = build_model(mini(GatePlacement::four_stages));
  net->set_training(false);
  const Tensor img = random_tensor({1, 3, 32, 32}, 2, 0.0, 1.0);
  Tensor batch({2, 3, 32, 32});
  std::copy_n(img.ptr(), img.numel(), batch.ptr());
  std::copy_n(img.ptr(), img.numel(), batch.ptr() + img.numel());
  Graph g;
  const Tensor logits = net->forward(g, batch).value();
  for (std::size_t k = 0; k < 3; ++k) CHECK(logits.at(0, k, 0, 0) == logits.at(1, k, 0, 0));
  Graph g2;
  CHECK(max_abs_diff(net->forward(g2, batch).value(), logits) == 0.0);
}

TEST_CASE("gates forced to unit attention leave logits unchanged") {
  for (bool training : {false, true}) {
    auto plain = build_model(mini());
    auto gated = build_model(mini(GatePlacement::four_stages));
    for (GateState* gate : gated->gates()) gate->force_unit_attention = true;
    plain->set_training(training);
    gated->set_training(training);
    const Tensor batch = random_tensor({2, 3, 32, 32}, 3, 0.0, 1.0);
    Graph g1, g2;
    CHECK(max_abs_diff(plain->forward(g1, batch).value(), gated->forward(g2, batch).value()) == 0.0);
  }
}

TEST_CASE("cross-entropy gradient on a sampled 1% of parameters passes finite differences") {
  auto net = build_model(mini(GatePlacement::four_stages));
  for (GateState* gate : net->gates()) test::randomize(gate->deform->offset_predictor().weight().value, 4, 0.1);
  const Tensor batch = random_tensor({2, 3, 32, 32}, 5, 0.0, 1.0);
  const std::vector<int> labels{0, 2};
  const auto params = net->parameters();
  const auto all = all_coordinates(params);
  std::vector<GradProbe> sample;
  std::mt19937_64 rng(6);
  std::sample(all.begin(), all.end(), std::back_inserter(sample), all.size() / 100, rng);
  REQUIRE(sample.size() > 10);
  const auto r = finite_diff_check(
      [&](Graph& g) { return ops::cross_entropy(net->forward(g, batch), labels); }, sample);
  CHECK(r.pass);
}

TEST_CASE("model construction errors") {
  ModelConfig m;
  m.depth = 34;
  CHECK_THROWS_AS(build_model(m), std::invalid_argument);
  m = ModelConfig{};
  m.input_h = 16;
  CHECK_THROWS_AS(build_model(m), std::invalid_argument);
  auto net = build_model(mini());
  Graph g;
  CHECK_THROWS_AS(net->forward(g, Tensor({1, 3, 40, 32})), std::invalid_argument);
  CHECK_THROWS_AS(net->forward(g, Tensor({1, 1, 32, 32})), std::invalid_argument);
}

TEST_CASE("activation taps cover the advertised names") {
  auto net = build_model(mini(GatePlacement::all_blocks));
  Graph g;
  ActivationTaps taps;
  net->forward(g, random_tensor({1, 3, 32, 32}, 8), &taps);
  for (const std::string& name : net->activation_names()) CHECK(taps.count(name) == 1);
}
