#include <doctest.h>

#include <cmath>

#include "das/gate.hpp"
#include "das/ops.hpp"
#include "support.hpp"

using namespace das;
using das::test::probe_loss;
using das::test::random_tensor;

namespace {

GateState make_gate(GateVariant v, std::size_t c, double alpha = 0.2, std::uint64_t seed = 1) {
  Rng rng(seed);
  GateConfig cfg;
  cfg.variant = v;
  cfg.alpha = alpha;
  return GateState("gate", cfg, c, rng);
}

// Moves sampling points off the integer grid so finite differences stay on smooth pieces.
void randomize_predictors(GateState& g, std::uint64_t seed) {
  if (g.deform) test::randomize(g.deform->offset_predictor().weight().value, seed, 0.25);
  if (g.flow) test::randomize(g.flow->weight().value, seed + 1, 0.25);
}

bool has_multiply(GateVariant v) {
  return v == GateVariant::b_gridsample_gated || v == GateVariant::c_das || v == GateVariant::d_deform_only ||
         v == GateVariant::e_dsc_only || v == GateVariant::f_dsc_for_deform;
}

}  // namespace

TEST_CASE("bottleneck width examples") {
  CHECK(bottleneck_width(0.2, 64) == 13);
  CHECK(bottleneck_width(0.2, 512) == 102);
  CHECK(bottleneck_width(0.01, 64) == 1);
  CHECK(bottleneck_width(0.1, 25) == 3);
  CHECK(bottleneck_width(1.0, 7) == 7);
  CHECK_THROWS_AS(bottleneck_width(0.0, 64), std::invalid_argument);
  CHECK_THROWS_AS(bottleneck_width(1.5, 64), std::invalid_argument);
  CHECK_THROWS_AS(bottleneck_width(0.2, 0), std::invalid_argument);
}

TEST_CASE("variant names round trip") {
  for (GateVariant v : kAllVariants) CHECK(parse_gate_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_gate_variant("z"), std::invalid_argument);
}

TEST_CASE("das_forward semantics") {
  GateState gate = make_gate(GateVariant::c_das, 6);
  Graph g;
  SUBCASE("zero input gives zero output") {
    for (double v : das_forward(g.input(Tensor({2, 6, 5, 5})), gate).value().data()) CHECK(v == 0.0);
  }
  SUBCASE("shape is preserved") {
    for (Shape s : {Shape{1, 6, 3, 3}, Shape{2, 6, 7, 5}, Shape{3, 6, 1, 1}}) {
      CHECK(das_forward(g.input(random_tensor(s, s.h)), gate).shape() == s);
    }
  }
  SUBCASE("output magnitude never exceeds input, strictly for nonzero input") {
    const Tensor x = random_tensor({2, 6, 5, 4}, 3, -3.0, 3.0);
    const Tensor y = das_forward(g.input(x), gate).value();
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y[i]) < std::abs(x[i]));
  }
  SUBCASE("attention lies in (0, 1)") {
    const Tensor a = das_attention(g.input(random_tensor({2, 6, 5, 4}, 4, -3.0, 3.0)), gate).value();
    for (double v : a.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("channel mismatch is an error") {
    CHECK_THROWS_AS(das_forward(g.input(Tensor({1, 5, 4, 4})), gate), std::invalid_argument);
  }
}

TEST_CASE("variant c is das_forward") {
  GateState gate = make_gate(GateVariant::c_das, 5);
  randomize_predictors(gate, 5);
  const Tensor x = random_tensor({2, 5, 6, 6}, 6);
  Graph g;
  CHECK(max_abs_diff(variant_forward(g.input(x), gate).value(), das_forward(g.input(x), gate).value()) == 0.0);
}

TEST_CASE("every variant preserves shape; gated variants bound the amplitude") {
  const Tensor x = random_tensor({2, 8, 6, 5}, 7, -2.0, 2.0);
  for (GateVariant v : kAllVariants) {
    CAPTURE(to_string(v));
    GateState gate = make_gate(v, 8, 0.25, 8);
    randomize_predictors(gate, 9);
    Graph g;
    const Tensor y = variant_forward(g.input(x), gate).value();
    CHECK(y.shape() == x.shape());
    CHECK(y.all_finite());
    if (has_multiply(v))
      for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y[i]) <= std::abs(x[i]));
  }
}

TEST_CASE("gate parameter counts: compressed grid-sample is cheaper than the concat design") {
  for (std::size_t c : {16u, 64u, 256u}) {
    GateState a = make_gate(GateVariant::a_gridsample_concat, c);
    GateState b = make_gate(GateVariant::b_gridsample_gated, c);
    GateState cc = make_gate(GateVariant::c_das, c);
    CHECK(b.param_count() < a.param_count());
    CHECK(cc.param_count() < a.param_count());
  }
}

TEST_CASE("gate parameter count is non-decreasing in alpha") {
  std::uint64_t prev = 0;
  for (double alpha : {0.01, 0.1, 0.2, 0.3, 0.5, 1.0}) {
    GateState gate = make_gate(GateVariant::c_das, 64, alpha);
    CHECK(gate.param_count() >= prev);
    prev = gate.param_count();
  }
}

TEST_CASE("DAS gate parameter count matches its closed form") {
  // DSC: 9c + c*w; deform: predictor 9*w*27 + main 9*w*c; IN and LN carry no parameters.
  const std::size_t c = 64, w = bottleneck_width(0.2, c);
  GateState gate = make_gate(GateVariant::c_das, c, 0.2);
  CHECK(gate.param_count() == 9 * c + c * w + 9 * w * 27 + 9 * w * c);
}

TEST_CASE("attention at initialization hovers around one half") {
  GateState gate = make_gate(GateVariant::c_das, 16);
  Graph g;
  const Tensor a = das_attention(g.input(test::gaussian_tensor({2, 16, 8, 8}, 10)), gate).value();
  const double mean = sum(a) / static_cast<double>(a.numel());
  CHECK(mean > 0.3);
  CHECK(mean < 0.7);
}

TEST_CASE("das_forward passes finite differences in input and every parameter") {
  GateState gate = make_gate(GateVariant::c_das, 8, 0.25, 11);
  randomize_predictors(gate, 12);
  const Tensor x = random_tensor({1, 8, 6, 6}, 13);
  CHECK(finite_diff_check([&](Graph&, Var v) { return probe_loss(das_forward(v, gate), 1); }, x).pass);
  std::vector<Parameter*> params;
  gate.collect(params);
  CHECK(params.size() == 4);
  const auto r = finite_diff_check([&](Graph& g) { return probe_loss(das_forward(g.input(x), gate), 2); },
                                   all_coordinates(params));
  CHECK(r.pass);
}

TEST_CASE("every variant passes finite differences") {
  const Tensor x = random_tensor({1, 4, 5, 5}, 14);
  for (GateVariant v : kAllVariants) {
    CAPTURE(to_string(v));
    GateState gate = make_gate(v, 4, 0.5, 15);
    randomize_predictors(gate, 16);
    CHECK(finite_diff_check([&](Graph&, Var in) { return probe_loss(variant_forward(in, gate), 3); }, x).pass);
    std::vector<Parameter*> params;
    gate.collect(params);
    CHECK(!params.empty());
    CHECK(finite_diff_check([&](Graph& g) { return probe_loss(variant_forward(g.input(x), gate), 4); },
                            all_coordinates(params))
              .pass);
  }
}

TEST_CASE("gate accepts every normalization pairing") {
  const Tensor x = random_tensor({2, 6, 5, 5}, 17);
  for (NormKind n1 : {NormKind::BatchNorm, NormKind::FeatureNorm, NormKind::InstanceNorm, NormKind::LayerNorm})
    for (NormKind n2 : {NormKind::BatchNorm, NormKind::FeatureNorm, NormKind::InstanceNorm, NormKind::LayerNorm}) {
      Rng rng(18);
      GateConfig cfg;
      cfg.first_norm = n1;
      cfg.second_norm = n2;
      GateState gate("gate", cfg, 6, rng);
      Graph g;
      const Tensor y = das_forward(g.input(x), gate).value();
      CHECK(y.shape() == x.shape());
      for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y[i]) <= std::abs(x[i]));
    }
}
