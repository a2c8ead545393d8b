// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
// Usage: das_acceptance [out_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "das/ablation.hpp"
#include "das/analysis.hpp"
#include "das/checkpoint.hpp"
#include "das/gate.hpp"
#include "das/layers.hpp"
#include "das/models.hpp"
#include "das/ops.hpp"
#include "das/training.hpp"
#include "support.hpp"

using namespace das;
using das::test::probe_loss;
using das::test::random_tensor;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr std::uint64_t kResNet18Params = 11689512;
constexpr double kResNet18GMacs = 1.82, kResNet18MacTol = 0.01;
constexpr double kResNet50MParams = 25.56, kResNet50ParamTol = 0.001;
constexpr double kResNet50GMacs = 4.12, kResNet50MacTol = 0.02;
constexpr double kCountSeconds = 1.0;
constexpr std::uint64_t kMaxGateParams = 1200000;
constexpr double kMaxGateGMacs = 0.15;
constexpr int kReductionTrials = 100;
constexpr double kReductionTol = 1e-9;
constexpr double kGradientSeconds = 120.0;
constexpr int kSemanticsInputs = 1000;
constexpr double kSfdTol = 1e-6;
constexpr std::size_t kDeskEpochs = 30;
constexpr double kDeskTargetAcc = 0.90;
constexpr double kDeskSeconds = 15 * 60.0;
constexpr double kDescentLr = 0.01;
constexpr int kDescentSteps = 5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Criterion {
  std::string name;
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    details.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
    pass = pass && ok;
  }
  void note(const std::string& what) { details.push_back("info  " + what); }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void report(const Criterion& c, double secs, int& failures) {
  std::printf("%s %s (%.1f s)\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), secs);
  for (const std::string& d : c.details) std::printf("    %s\n", d.c_str());
  std::fflush(stdout);
  if (!c.pass) ++failures;
}

// ---------------------------------------------------------------------------

Criterion structural() {
  Criterion c;
  c.name = "structural: ResNet-18/50 parameter and MAC counts";
  auto measure = [](int depth) {
    const auto t = Clock::now();
    ModelConfig m;
    m.depth = depth;
    auto net = build_model(m);
    const std::uint64_t params = count_params(*net).total_params();
    const std::uint64_t macs = count_macs(*net, 224, 224).total_macs();
    return std::tuple{params, macs, seconds_since(t)};
  };
  const auto [p18, m18, t18] = measure(18);
  c.check(p18 == kResNet18Params, fmt("ResNet-18 params %llu (expected %llu)", (unsigned long long)p18,
                                      (unsigned long long)kResNet18Params));
  const double g18 = static_cast<double>(m18) / 1e9;
  c.check(std::abs(g18 - kResNet18GMacs) / kResNet18GMacs <= kResNet18MacTol,
          fmt("ResNet-18 %.4f GMACs vs %.2f (tol %.0f%%)", g18, kResNet18GMacs, kResNet18MacTol * 100));
  c.check(t18 < kCountSeconds, fmt("ResNet-18 count took %.3f s (< %.1f s)", t18, kCountSeconds));

  const auto [p50, m50, t50] = measure(50);
  const double mp50 = static_cast<double>(p50) / 1e6;
  c.check(std::abs(mp50 - kResNet50MParams) / kResNet50MParams <= kResNet50ParamTol,
          fmt("ResNet-50 params %.4fM vs %.2fM (tol %.1f%%)", mp50, kResNet50MParams, kResNet50ParamTol * 100));
  const double g50 = static_cast<double>(m50) / 1e9;
  c.check(std::abs(g50 - kResNet50GMacs) / kResNet50GMacs <= kResNet50MacTol,
          fmt("ResNet-50 %.4f GMACs vs %.2f (tol %.0f%%)", g50, kResNet50GMacs, kResNet50MacTol * 100));
  c.check(t50 < kCountSeconds, fmt("ResNet-50 count took %.3f s (< %.1f s)", t50, kCountSeconds));
  return c;
}

Criterion overhead() {
  Criterion c;
  c.name = "DAS overhead: four gates on ResNet-18, monotone in alpha";
  ModelConfig base;
  auto b = build_model(base);
  const std::uint64_t bp = b->param_count();
  const std::uint64_t bm = count_macs(*b, 224, 224).total_macs();
  b.reset();
  std::vector<std::uint64_t> params;
  for (double alpha : {0.1, 0.2, 0.5, 1.0}) {
    ModelConfig m = base;
    m.gate_placement = GatePlacement::four_stages;
    m.gate.alpha = alpha;
    auto net = build_model(m);
    const std::uint64_t p = net->param_count();
    const std::uint64_t mac = count_macs(*net, 224, 224).total_macs();
    params.push_back(p);
    c.note(fmt("alpha %.1f: %.4fM params (+%.4fM), %.4f GMACs (+%.4fG)", alpha, p / 1e6, (p - bp) / 1e6,
               mac / 1e9, (double(mac) - double(bm)) / 1e9));
    if (alpha == 0.2) {
      c.check(p > bp && p - bp < kMaxGateParams, fmt("alpha 0.2 adds %llu params (0 < d < %llu)",
                                                     (unsigned long long)(p - bp), (unsigned long long)kMaxGateParams));
      c.check(mac > bm && double(mac - bm) / 1e9 < kMaxGateGMacs,
              fmt("alpha 0.2 adds %.4f GMACs (< %.2f)", double(mac - bm) / 1e9, kMaxGateGMacs));
    }
  }
  c.check(params[0] < params[1] && params[1] < params[2] && params[2] < params[3],
          "params(0.1) < params(0.2) < params(0.5) < params(1.0)");
  return c;
}

Criterion reduction() {
  Criterion c;
  c.name = "reduction: zero offsets and unit modulation equal a plain convolution";
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> small(1, 3), cin(1, 6), cout(1, 6), side(1, 9);
  double worst = 0.0;
  for (int trial = 0; trial < kReductionTrials; ++trial) {
    const Shape s{static_cast<std::size_t>(small(rng)), static_cast<std::size_t>(cin(rng)),
                  static_cast<std::size_t>(side(rng)), static_cast<std::size_t>(side(rng))};
    const std::size_t co = static_cast<std::size_t>(cout(rng));
    Rng layer_rng(rng());
    DeformableConvLayer layer("d", s.c, co, layer_rng);
    test::randomize(layer.weight().value, rng(), 1.0);
    layer.modulation_override = 1.0;
    const Tensor x = random_tensor(s, rng(), -2.0, 2.0);
    Graph g;
    const Tensor y = deformable_conv2d(g.input(x), layer).value();
    const Tensor ref = conv2d_ref(x, KernelWeights{layer.weight().value, 1}, 1, 1);
    worst = std::max(worst, max_abs_diff(y, ref));
  }
  c.check(worst <= kReductionTol, fmt("max abs diff %.3e over %d trials (<= %.0e)", worst, kReductionTrials,
                                      kReductionTol));
  return c;
}

Criterion gradients() {
  Criterion c;
  c.name = "gradient suite: layers, DAS gate and variants a-h vs finite differences";
  const auto start = Clock::now();
  auto run = [&](const std::string& what, const std::function<Var(Graph&, Var)>& f, const Tensor& x,
                 std::vector<Parameter*> params) {
    const GradCheckResult in = finite_diff_check(f, x);
    GradCheckResult pr{0.0, true};
    if (!params.empty()) {
      const auto probes = all_coordinates(params);
      pr = finite_diff_check([&](Graph& g) { return f(g, g.input(x)); }, probes);
    }
    c.check(in.pass && pr.pass, fmt("%-30s input %.1e  params %.1e", what.c_str(), in.max_rel_err, pr.max_rel_err));
  };
  std::uint64_t seed = 100;
  auto next = [&] { return ++seed; };
  Rng rng(7);
  const Tensor x = random_tensor({2, 4, 5, 5}, next());

  {
    ConvLayer conv("conv", 4, 3, 3, 1, 1, 1, rng);
    std::vector<Parameter*> p;
    conv.collect(p);
    run("conv 3x3", [&](Graph&, Var v) { return probe_loss(conv2d(v, conv), 1); }, x, p);
    ConvLayer strided("conv_s", 4, 4, 3, 2, 1, 2, rng);
    std::vector<Parameter*> ps;
    strided.collect(ps);
    run("conv 3x3 stride 2 groups 2", [&](Graph&, Var v) { return probe_loss(conv2d(v, strided), 2); }, x, ps);
  }
  {
    ConvLayer dw("dw", 4, 4, 3, 1, 1, 4, rng), pw("pw", 4, 6, 1, 1, 0, 1, rng);
    std::vector<Parameter*> p;
    dw.collect(p);
    pw.collect(p);
    run("depthwise separable", [&](Graph&, Var v) { return probe_loss(depthwise_separable_conv(v, dw, pw), 3); },
        x, p);
  }
  {
    DeformableConvLayer d("deform", 4, 3, rng);
    test::randomize(d.offset_predictor().weight().value, next(), 0.25);
    std::vector<Parameter*> p;
    d.collect(p);
    run("deformable conv", [&](Graph&, Var v) { return probe_loss(deformable_conv2d(v, d), 4); }, x, p);
  }
  for (NormKind k : {NormKind::BatchNorm, NormKind::FeatureNorm, NormKind::InstanceNorm, NormKind::LayerNorm}) {
    NormLayer n("norm", k, 4);
    test::randomize(n.gamma().value, next(), 1.0);
    test::randomize(n.beta().value, next(), 1.0);
    std::vector<Parameter*> p;
    n.collect(p);
    run(std::string("norm ") + std::string(to_string(k)), [&](Graph&, Var v) { return probe_loss(n.forward(v, true), 5); }, x, p);
  }
  for (auto [k, name] : {std::pair{ActivationKind::GELU, "gelu"}, std::pair{ActivationKind::ReLU, "relu"},
                         std::pair{ActivationKind::Sigmoid, "sigmoid"}}) {
    run(std::string("activation ") + name, [&](Graph&, Var v) { return probe_loss(activation(v, k), 6); }, x, {});
  }
  for (auto [k, name] : {std::pair{PoolKind::Max3s2p1, "max pool 3s2p1"}, std::pair{PoolKind::GlobalAvg, "global avg pool"}}) {
    run(std::string(name), [&](Graph&, Var v) { return probe_loss(pool(v, k), 7); }, x, {});
  }
  {
    LinearLayer fc("fc", 4, 3, rng);
    std::vector<Parameter*> p;
    fc.collect(p);
    const Tensor feats = random_tensor({3, 4, 1, 1}, next());
    const std::vector<int> labels{0, 2, 1};
    run("linear + cross-entropy", [&](Graph&, Var v) { return ops::cross_entropy(linear(v, fc), labels); }, feats,
        p);
  }
  {
    GateConfig cfg;
    cfg.alpha = 0.25;
    Rng grng(8);
    GateState gate("gate", cfg, 8, grng);
    test::randomize(gate.deform->offset_predictor().weight().value, next(), 0.25);
    std::vector<Parameter*> p;
    gate.collect(p);
    run("DAS gate (das_forward)", [&](Graph&, Var v) { return probe_loss(das_forward(v, gate), 8); },
        random_tensor({1, 8, 6, 6}, next()), p);
  }
  for (GateVariant v : kAllVariants) {
    GateConfig cfg;
    cfg.alpha = 0.5;
    cfg.variant = v;
    Rng grng(9);
    GateState gate("gate", cfg, 4, grng);
    if (gate.deform) test::randomize(gate.deform->offset_predictor().weight().value, next(), 0.25);
    if (gate.flow) test::randomize(gate.flow->weight().value, next(), 0.25);
    std::vector<Parameter*> p;
    gate.collect(p);
    run(std::string("variant ") + std::string(to_string(v)), [&](Graph&, Var in) { return probe_loss(variant_forward(in, gate), 9); },
        random_tensor({1, 4, 5, 5}, next()), p);
  }
  const double secs = seconds_since(start);
  c.check(secs < kGradientSeconds, fmt("suite took %.1f s (< %.0f s)", secs, kGradientSeconds));
  return c;
}

Criterion semantics() {
  Criterion c;
  c.name = "gate semantics: zero in zero out, shape kept, |out| <= |in|";
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> n_dist(1, 2), side(1, 8), gate_pick(0, 3);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  const std::size_t channels[] = {4, 8, 16, 3};
  const NormKind norms[] = {NormKind::InstanceNorm, NormKind::BatchNorm, NormKind::FeatureNorm, NormKind::LayerNorm};
  std::vector<std::unique_ptr<GateState>> gates;
  for (int i = 0; i < 4; ++i) {
    GateConfig cfg;
    cfg.alpha = 0.2 + 0.2 * i;
    cfg.first_norm = norms[i];
    cfg.second_norm = norms[3 - i];
    Rng grng(50 + i);
    gates.push_back(std::make_unique<GateState>("gate", cfg, channels[i], grng));
    test::randomize(gates.back()->deform->offset_predictor().weight().value, 60 + i, 0.5);
    gates.back()->training = (i % 2 == 0);
  }
  int zero_fail = 0, shape_fail = 0, bound_fail = 0;
  for (int trial = 0; trial < kSemanticsInputs; ++trial) {
    GateState& gate = *gates[gate_pick(rng)];
    const Shape s{static_cast<std::size_t>(n_dist(rng)), gate.channels(), static_cast<std::size_t>(side(rng)),
                  static_cast<std::size_t>(side(rng))};
    const double a = scale(rng);
    const Tensor x = random_tensor(s, rng(), -a, a);
    Graph g;
    const Tensor y = das_forward(g.input(x), gate).value();
    if (y.shape() != s) {
      ++shape_fail;
      continue;
    }
    for (std::size_t i = 0; i < x.numel(); ++i)
      if (!(std::abs(y[i]) <= std::abs(x[i]))) {
        ++bound_fail;
        break;
      }
    const Tensor z = das_forward(g.input(Tensor(s)), gate).value();
    for (double v : z.data())
      if (v != 0.0) {
        ++zero_fail;
        break;
      }
  }
  c.check(zero_fail == 0, fmt("zero input -> zero output on %d inputs (%d failures)", kSemanticsInputs, zero_fail));
  c.check(shape_fail == 0, fmt("shape preserved on %d inputs (%d failures)", kSemanticsInputs, shape_fail));
  c.check(bound_fail == 0, fmt("|out| <= |in| elementwise on %d inputs (%d failures)", kSemanticsInputs, bound_fail));
  return c;
}

Criterion sfd() {
  Criterion c;
  c.name = "sfd: worked examples and monotonicity";
  RegionMask strip;
  strip.h = 1;
  strip.w = 4;
  strip.region = {1, 0, 0, 0};
  strip.box = {1, 1, 1, 0};
  auto map = [](std::vector<double> v) {
    SaliencyMap m;
    m.h = 1;
    m.w = v.size();
    m.weights = std::move(v);
    return m;
  };
  const double s1 = sfd_score(map({1.0, 0.0, 0.0, 0.0}), strip).score;
  const double s2 = sfd_score(map({0.7, 0.7, 0.7, 0.0}), strip).score;
  const double s3 = sfd_score(map({1.0, 0.5, 0.5, 0.0}), strip).score;
  const double e = std::exp(1.0);
  const double expect3 = (e - 1.0) / ((e - 1.0) + (std::sqrt(e) - 1.0));
  c.check(std::abs(s1 - 1.0) <= kSfdTol, fmt("all weight in R -> %.9f (1.0)", s1));
  c.check(std::abs(s2 - 0.5) <= kSfdTol, fmt("equal weight in R and B-R -> %.9f (0.5)", s2));
  c.check(std::abs(s3 - expect3) <= kSfdTol && std::abs(s3 - 0.726) < 5e-4,
          fmt("R = 1, B-R = 0.5 -> %.9f (%.9f, ~0.726)", s3, expect3));

  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_int_distribution<int> dim(4, 12);
  int violations = 0, trials = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t h = static_cast<std::size_t>(dim(rng)), w = static_cast<std::size_t>(dim(rng));
    RegionMask m;
    m.h = h;
    m.w = w;
    m.region.assign(h * w, 0);
    m.box.assign(h * w, 0);
    for (std::size_t y = 1; y + 1 < h; ++y)
      for (std::size_t x = 1; x + 1 < w; ++x) m.box[y * w + x] = 1;
    m.region[1 * w + 1] = 1;
    m.region[2 * w + 2] = 1;
    SaliencyMap s;
    s.h = h;
    s.w = w;
    s.weights.assign(h * w, 0.0);
    for (std::size_t i = 0; i < h * w; ++i)
      if (m.box[i]) s.weights[i] = u(rng);
    s.weights[1 * w + 1] = 1.0;
    std::vector<std::size_t> context;
    for (std::size_t i = 0; i < h * w; ++i)
      if (m.box[i] && !m.region[i]) context.push_back(i);
    const std::size_t pick = context[rng() % context.size()];
    const double before = sfd_score(s, m).score;
    // Move weight from B-R into R: both directions must agree.
    SaliencyMap weaker = s;
    weaker.weights[pick] *= 0.5;
    SaliencyMap stronger = s;
    stronger.weights[2 * w + 2] = std::min(1.0, stronger.weights[2 * w + 2] + 0.04);
    ++trials;
    if (!(sfd_score(weaker, m).score > before)) ++violations;
    if (!(sfd_score(stronger, m).score >= before)) ++violations;
  }
  c.check(violations == 0, fmt("monotone on %d randomized maps (%d violations)", trials, violations));
  return c;
}

// ---------------------------------------------------------------------------

ModelConfig desk_model(bool gated) {
  ModelConfig m;
  m.num_classes = 3;
  m.input_h = m.input_w = 32;
  m.stages = 2;
  m.base_width = 16;
  m.gate_placement = gated ? GatePlacement::four_stages : GatePlacement::none;
  m.seed = 1;
  return m;
}

TrainConfig desk_train() {
  TrainConfig t;
  t.batch_size = 32;
  t.epochs = kDeskEpochs;
  t.lr0 = 0.05;
  t.milestones.clear();
  t.seed = 1;
  return t;
}

DatasetSpec desk_data(std::size_t samples) {
  DatasetSpec d;
  d.n_classes = 3;
  d.n_samples = samples;
  return d;
}

Criterion desk_training() {
  Criterion c;
  c.name = "desk training: synthetic 3-class, mini-CNN baseline and +DAS";
  const auto start = Clock::now();
  const Dataset train_set = gen_synthetic(desk_data(300), 11);
  const Dataset eval_set = gen_synthetic(desk_data(150), 12);

  double eval_acc[2] = {0.0, 0.0};
  for (bool gated : {false, true}) {
    const char* name = gated ? "+DAS" : "baseline";
    auto net = build_model(desk_model(gated));
    TrainConfig cfg = desk_train();
    TrainState state;
    std::size_t reached = 0;
    EpochLog last;
    for (std::size_t e = 0; e < kDeskEpochs && !reached; ++e) {
      cfg.epochs = e + 1;
      last = train(*net, train_set, &eval_set, cfg, &state).back();
      if (last.train_acc >= kDeskTargetAcc) reached = e + 1;
    }
    eval_acc[gated] = last.eval_acc;
    c.check(reached > 0, fmt("%-8s train acc %.3f at epoch %zu (>= %.2f within %zu epochs), loss %.4f", name,
                             last.train_acc, last.epoch + 1, kDeskTargetAcc, kDeskEpochs, last.train_loss));
  }

  // Full-batch descent at a small learning rate.
  for (bool gated : {false, true}) {
    auto net = build_model(desk_model(gated));
    TrainConfig cfg = desk_train();
    SgdState sgd;
    std::vector<int> labels(train_set.labels.begin(), train_set.labels.end());
    std::vector<std::size_t> all(train_set.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Tensor batch = train_set.batch(all);
    std::vector<double> losses;
    for (int s = 0; s <= kDescentSteps; ++s)
      losses.push_back(train_step(*net, batch, labels, sgd, kDescentLr, cfg, 0, s).loss);
    bool decreasing = true;
    std::string trace;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      if (i > 0) decreasing = decreasing && losses[i] < losses[i - 1];
      trace += fmt("%s%.6f", i ? " > " : "", losses[i]);
    }
    c.check(decreasing, fmt("%-8s full-batch loss over %d steps at lr %.2f: %s", gated ? "+DAS" : "baseline",
                            kDescentSteps, kDescentLr, trace.c_str()));
  }

  // Sequential-mode reproducibility.
  {
    const Dataset small = gen_synthetic(desk_data(96), 13);
    TrainConfig cfg = desk_train();
    cfg.epochs = 2;
    cfg.augment = true;
    auto run = [&] {
      auto net = build_model(desk_model(true));
      auto log = train(*net, small, nullptr, cfg);
      std::vector<Tensor> params;
      for (Parameter* p : net->parameters()) params.push_back(p->value);
      return std::pair{log, params};
    };
    const auto [log1, p1] = run();
    const auto [log2, p2] = run();
    bool same = log1.size() == log2.size() && p1.size() == p2.size();
    for (std::size_t i = 0; same && i < log1.size(); ++i)
      same = log1[i].train_loss == log2[i].train_loss && log1[i].train_acc == log2[i].train_acc;
    for (std::size_t i = 0; same && i < p1.size(); ++i) same = max_abs_diff(p1[i], p2[i]) == 0.0;
    c.check(same, "two seeded +DAS runs give bit-identical logs and parameters");
  }

  c.note(fmt("eval accuracy (non-gating): baseline %.3f, +DAS %.3f on %zu held-out samples", eval_acc[0],
             eval_acc[1], eval_set.size()));
  const double secs = seconds_since(start);
  c.check(secs < kDeskSeconds, fmt("desk training took %.0f s (< %.0f s)", secs, kDeskSeconds));
  return c;
}

Criterion ablation(const fs::path& out_dir) {
  Criterion c;
  c.name = "ablation: variants a-h train for 2 epochs; params(b) < params(c) < params(a)";
  const AblationConfig cfg = AblationConfig::defaults();
  const auto rows = run_ablation(cfg);
  const fs::path csv = out_dir / "ablation.csv";
  {
    std::ofstream f(csv);
    write_ablation_csv(f, rows);
  }
  c.check(rows.size() == 1 + std::size(kAllVariants), fmt("%zu rows written to %s", rows.size(), csv.c_str()));
  std::uint64_t pa = 0, pb = 0, pc = 0;
  bool finite = true;
  for (const AblationRow& r : rows) {
    c.note(fmt("%-8s %.4fM params %.4f GMACs, mini train loss %.4f acc %.3f eval %.3f", r.name.c_str(),
               r.params / 1e6, r.macs / 1e9, r.train_loss, r.train_acc, r.eval_acc));
    finite = finite && std::isfinite(r.train_loss) && r.macs > 0;
    if (r.variant == GateVariant::a_gridsample_concat) pa = r.params;
    if (r.variant == GateVariant::b_gridsample_gated) pb = r.params;
    if (r.variant == GateVariant::c_das) pc = r.params;
  }
  c.check(finite, "every variant ran end to end with a finite loss");
  c.check(pb < pc && pc < pa, fmt("params b %.4fM < c %.4fM < a %.4fM", pb / 1e6, pc / 1e6, pa / 1e6));
  return c;
}

Criterion persistence(const fs::path& out_dir) {
  Criterion c;
  c.name = "persistence: bit-exact round trip, distinct corruption errors";
  auto net = build_model(desk_model(true));
  const Dataset data = gen_synthetic(desk_data(32), 21);
  TrainConfig cfg = desk_train();
  cfg.epochs = 1;
  TrainState state;
  train(*net, data, nullptr, cfg, &state);
  const fs::path path = out_dir / "acceptance.ckpt";
  save_checkpoint(*net, state, path.string());

  auto other = build_model(desk_model(true));
  TrainState restored;
  restore_checkpoint(load_checkpoint(path.string()), *other, &restored);
  bool exact = true;
  const auto pa = net->parameters(), pb = other->parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    exact = exact && std::memcmp(pa[i]->value.ptr(), pb[i]->value.ptr(), pa[i]->numel() * sizeof(double)) == 0 &&
            max_abs_diff(state.sgd.velocity[i], restored.sgd.velocity[i]) == 0.0;
  const auto ba = net->buffers(), bb = other->buffers();
  for (std::size_t i = 0; i < ba.size(); ++i) exact = exact && max_abs_diff(ba[i]->value, bb[i]->value) == 0.0;
  exact = exact && restored.epoch == state.epoch && restored.seed == state.seed;
  c.check(exact, fmt("%zu parameters, %zu buffers, momentum, epoch and seed restored bit-exactly", pa.size(),
                     ba.size()));

  std::string bytes;
  {
    std::ifstream f(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  auto classify = [&](std::string corrupted) -> std::string {
    {
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      f.write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
    }
    try {
      load_checkpoint(path.string());
      return "none";
    } catch (const BadMagicError&) {
      return "BadMagicError";
    } catch (const UnsupportedVersionError&) {
      return "UnsupportedVersionError";
    } catch (const TruncatedCheckpointError&) {
      return "TruncatedCheckpointError";
    } catch (const std::exception&) {
      return "other";
    }
  };
  std::string magic = bytes, version = bytes;
  magic[3] = 'X';
  version[8] = 2;
  const std::string e1 = classify(magic), e2 = classify(version), e3 = classify(bytes.substr(0, bytes.size() - 3));
  c.check(e1 == "BadMagicError", "corrupt magic -> " + e1);
  c.check(e2 == "UnsupportedVersionError", "unknown version -> " + e2);
  c.check(e3 == "TruncatedCheckpointError", "truncated file -> " + e3);
  fs::remove(path);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : fs::current_path();
  fs::create_directories(out_dir);
  const std::vector<std::pair<std::string, std::function<Criterion()>>> criteria{
      {"structural", structural},
      {"overhead", overhead},
      {"reduction", reduction},
      {"gradients", gradients},
      {"semantics", semantics},
      {"sfd", sfd},
      {"desk", desk_training},
      {"ablation", [&] { return ablation(out_dir); }},
      {"persistence", [&] { return persistence(out_dir); }},
  };
  int failures = 0;
  for (const auto& [key, run] : criteria) {
    const auto t = Clock::now();
    Criterion c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.name = key;
      c.check(false, std::string("exception: ") + e.what());
    }
    report(c, seconds_since(t), failures);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
