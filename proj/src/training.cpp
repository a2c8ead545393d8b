#include "das/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include "das/ops.hpp"

namespace das {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be positive");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be non-negative");
  for (std::size_t i = 1; i < milestones.size(); ++i)
    if (milestones[i] <= milestones[i - 1]) throw std::invalid_argument("train: milestones must be strictly increasing");
  if (schedule == LrSchedule::step && !(gamma > 0.0)) throw std::invalid_argument("train: gamma must be positive");
  if (schedule == LrSchedule::cosine && epochs == 0) throw std::invalid_argument("train: cosine schedule needs epochs > 0");
}

TrainConfig TrainConfig::cifar_preset() { return TrainConfig{}; }

TrainConfig TrainConfig::imagenet_preset() {
  TrainConfig c;
  c.batch_size = 256;
  c.epochs = 100;
  c.weight_decay = 1e-4;
  c.milestones = {30, 60, 90};
  c.gamma = 0.1;
  return c;
}

TrainConfig TrainConfig::cosine_preset(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.schedule = LrSchedule::cosine;
  c.milestones.clear();
  c.augment = true;
  return c;
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.schedule == LrSchedule::cosine) {
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
    return cfg.eta_min + (cfg.lr0 - cfg.eta_min) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
  }
  double lr = cfg.lr0;
  for (std::size_t m : cfg.milestones)
    if (epoch >= m) lr *= cfg.gamma;
  return lr;
}

void sgd_update(std::span<Parameter* const> params, SgdState& state, double lr, const TrainConfig& cfg) {
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (Parameter* p : params) state.velocity.emplace_back(p->value.shape());
  }
  if (state.velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_update: " + std::to_string(state.velocity.size()) + " momentum buffers for " +
                                std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Tensor& v = state.velocity[i];
    if (v.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw std::invalid_argument("sgd_update: shape mismatch for " + p.name);
    }
    if (!p.requires_grad) continue;
    double* pv = p.value.ptr();
    const double* g = p.grad.ptr();
    double* vv = v.ptr();
    for (std::size_t k = 0; k < p.numel(); ++k) {
      vv[k] = cfg.momentum * vv[k] + (g[k] + cfg.weight_decay * pv[k]);
      pv[k] -= lr * vv[k];
    }
  }
}

StepResult train_step(Network& net, const Tensor& batch, std::span<const int> labels, SgdState& sgd, double lr,
                      const TrainConfig& cfg, std::size_t epoch, std::size_t step) {
  net.set_training(true);
  std::vector<Parameter*> params = net.parameters();
  for (Parameter* p : params) p->zero_grad();
  Graph g;
  Var logits = net.forward(g, batch);
  Var loss = ops::cross_entropy(logits, labels);
  StepResult r;
  r.loss = loss.value().item();
  if (!std::isfinite(r.loss)) {
    throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                        std::to_string(step));
  }
  const Tensor& lv = logits.value();
  const std::size_t k = lv.shape().c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = lv.ptr() + i * k;
    if (static_cast<int>(std::max_element(row, row + k) - row) == labels[i]) ++r.correct;
  }
  g.backward(loss);
  sgd_update(params, sgd, lr, cfg);
  return r;
}

void augment_batch(Tensor& batch, std::uint64_t seed) {
  constexpr long kPad = 4;
  const Shape s = batch.shape();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> shift(-kPad, kPad);
  std::bernoulli_distribution flip(0.5);
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const bool f = flip(rng);
    const long dy = shift(rng), dx = shift(rng);
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          const long sy = static_cast<long>(y) + dy;
          long sx = static_cast<long>(x) + dx;
          if (sy < 0 || sx < 0 || sy >= static_cast<long>(s.h) || sx >= static_cast<long>(s.w)) continue;
          if (f) sx = static_cast<long>(s.w) - 1 - sx;
          out.at(n, c, y, x) = batch.at(n, c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
  }
  batch = std::move(out);
}

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<EpochLog> train(Network& net, const Dataset& train_set, const Dataset* eval_set, const TrainConfig& cfg,
                            TrainState* state, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");
  const std::size_t classes = net.config().num_classes;
  if (train_set.n_classes > classes || (eval_set && eval_set->n_classes > classes)) {
    throw std::invalid_argument("train: dataset has " + std::to_string(train_set.n_classes) +
                                " classes but the model head has " + std::to_string(classes));
  }
  TrainState local;
  TrainState& st = state ? *state : local;
  st.seed = cfg.seed;

  std::vector<EpochLog> log;
  std::vector<std::size_t> order(train_set.size());
  for (; st.epoch < cfg.epochs; ++st.epoch) {
    const std::size_t epoch = st.epoch;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng = epoch_rng(cfg.seed, epoch);
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);

    EpochLog row;
    row.epoch = epoch;
    row.lr = lr_at_epoch(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(std::min(start + cfg.batch_size, order.size())));
      Tensor batch = train_set.batch(idx);
      if (cfg.augment) augment_batch(batch, rng());
      const std::vector<int> labels = train_set.batch_labels(idx);
      const StepResult r = train_step(net, batch, labels, st.sgd, row.lr, cfg, epoch, step);
      loss_sum += r.loss * static_cast<double>(idx.size());
      correct += r.correct;
    }
    row.train_loss = loss_sum / static_cast<double>(order.size());
    row.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    row.eval_acc = eval_set ? evaluate(net, *eval_set, cfg.batch_size) : std::numeric_limits<double>::quiet_NaN();
    log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return log;
}

double evaluate(Network& net, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be positive");
  const bool was_training = net.training();
  net.set_training(false);
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    Graph g;
    const Tensor& lv = net.forward(g, data.batch(idx)).value();
    const std::size_t k = lv.shape().c;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double* row = lv.ptr() + i * k;
      if (static_cast<int>(std::max_element(row, row + k) - row) == data.labels[idx[i]]) ++correct;
    }
  }
  net.set_training(was_training);
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,lr,train_loss,train_acc,eval_acc\n";
  const auto old = os.precision(10);
  for (const EpochLog& r : log)
    os << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.train_acc << ',' << r.eval_acc << '\n';
  os.precision(old);
}

namespace {

std::array<double, 3> triple(const Config& cfg, const std::string& key, const std::array<double, 3>& fallback) {
  const std::vector<double> v = cfg.get_list(key, {fallback.begin(), fallback.end()});
  if (v.size() != 3) throw std::invalid_argument("config key " + key + ": expected 3 values");
  return {v[0], v[1], v[2]};
}

std::size_t non_negative(const Config& cfg, const std::string& key, long long fallback) {
  const long long v = cfg.get_int(key, fallback);
  if (v < 0) throw std::invalid_argument("config key " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig run_config_from(const Config& cfg) {
  static const char* const kKnown[] = {
      "model.depth", "model.classes", "model.gates", "model.stages", "model.width", "model.input", "gate.variant",
      "gate.alpha", "gate.first_norm", "gate.second_norm", "train.preset", "train.batch_size", "train.epochs",
      "train.lr", "train.weight_decay", "train.momentum", "train.schedule", "train.milestones", "train.gamma",
      "train.eta_min", "train.seed", "train.augment", "train.shuffle", "data.kind", "data.path", "data.classes",
      "data.samples", "data.mean", "data.std", "data.eval_path", "data.eval_samples"};
  for (const auto& [key, value] : cfg.values()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return key == k; }) ==
        std::end(kKnown)) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }

  RunConfig rc;
  const std::string preset = cfg.get_string("train.preset", "cifar");
  if (preset == "cifar") rc.train = TrainConfig::cifar_preset();
  else if (preset == "imagenet") rc.train = TrainConfig::imagenet_preset();
  else if (preset == "cosine") rc.train = TrainConfig::cosine_preset(non_negative(cfg, "train.epochs", 100));
  else throw std::invalid_argument("unknown train.preset '" + preset + "' (cifar, imagenet, cosine)");

  TrainConfig& t = rc.train;
  t.batch_size = non_negative(cfg, "train.batch_size", static_cast<long long>(t.batch_size));
  t.epochs = non_negative(cfg, "train.epochs", static_cast<long long>(t.epochs));
  t.lr0 = cfg.get_double("train.lr", t.lr0);
  t.weight_decay = cfg.get_double("train.weight_decay", t.weight_decay);
  t.momentum = cfg.get_double("train.momentum", t.momentum);
  const std::string sched = cfg.get_string("train.schedule", t.schedule == LrSchedule::step ? "step" : "cosine");
  if (sched == "step") t.schedule = LrSchedule::step;
  else if (sched == "cosine") t.schedule = LrSchedule::cosine;
  else throw std::invalid_argument("unknown train.schedule '" + sched + "' (step, cosine)");
  if (cfg.has("train.milestones")) {
    t.milestones.clear();
    for (double m : cfg.get_list("train.milestones", {})) {
      if (m < 0 || m != std::floor(m)) throw std::invalid_argument("train.milestones must be non-negative integers");
      t.milestones.push_back(static_cast<std::size_t>(m));
    }
  }
  t.gamma = cfg.get_double("train.gamma", t.gamma);
  t.eta_min = cfg.get_double("train.eta_min", t.eta_min);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
  t.augment = cfg.get_bool("train.augment", t.augment);
  t.shuffle = cfg.get_bool("train.shuffle", t.shuffle);

  DatasetSpec& d = rc.data;
  const std::string kind = cfg.get_string("data.kind", "synthetic");
  if (kind == "synthetic") d.kind = DatasetKind::synthetic;
  else if (kind == "cifar100") d.kind = DatasetKind::cifar100;
  else throw std::invalid_argument("unknown data.kind '" + kind + "' (synthetic, cifar100)");
  d.path = cfg.get_string("data.path", "");
  d.n_classes = d.kind == DatasetKind::cifar100 ? kCifarClasses : non_negative(cfg, "data.classes", 3);
  d.n_samples = non_negative(cfg, "data.samples", 300);
  d.mean = triple(cfg, "data.mean", d.mean);
  d.std = triple(cfg, "data.std", d.std);
  if (d.kind == DatasetKind::cifar100 && d.path.empty()) throw std::invalid_argument("data.path is required for cifar100");
  if (cfg.has("data.eval_path") || cfg.has("data.eval_samples")) {
    rc.has_eval_data = true;
    rc.eval_data = d;
    rc.eval_data.path = cfg.get_string("data.eval_path", "");
    rc.eval_data.n_samples = non_negative(cfg, "data.eval_samples", static_cast<long long>(d.n_samples));
    if (d.kind == DatasetKind::cifar100 && rc.eval_data.path.empty()) {
      throw std::invalid_argument("data.eval_path is required for cifar100 evaluation");
    }
  }

  ModelConfig& m = rc.model;
  m.depth = static_cast<int>(cfg.get_int("model.depth", 18));
  m.num_classes = non_negative(cfg, "model.classes", static_cast<long long>(d.n_classes));
  const std::size_t input = non_negative(cfg, "model.input", 32);
  m.input_h = m.input_w = input;
  d.image_size = rc.eval_data.image_size = input;
  m.gate_placement = parse_gate_placement(cfg.get_string("model.gates", "none"));
  m.stages = non_negative(cfg, "model.stages", 4);
  m.base_width = non_negative(cfg, "model.width", 64);
  m.seed = t.seed;
  m.gate.variant = parse_gate_variant(cfg.get_string("gate.variant", "c"));
  m.gate.alpha = cfg.get_double("gate.alpha", m.gate.alpha);
  m.gate.first_norm = parse_norm_kind(cfg.get_string("gate.first_norm", std::string(to_string(m.gate.first_norm))));
  m.gate.second_norm = parse_norm_kind(cfg.get_string("gate.second_norm", std::string(to_string(m.gate.second_norm))));

  m.validate();
  m.gate.validate();
  t.validate();
  return rc;
}

}  // namespace das
