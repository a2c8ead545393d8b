#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "das/autodiff.hpp"
#include "das/config.hpp"
#include "das/data.hpp"
#include "das/models.hpp"

namespace das {

enum class LrSchedule { step, cosine };

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 300;
  double lr0 = 0.1;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  LrSchedule schedule = LrSchedule::step;
  std::vector<std::size_t> milestones{70, 130, 200, 260};
  double gamma = 0.2;
  double eta_min = 0.0;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Random horizontal flip + 4-pixel zero pad-and-crop.
  bool augment = false;

  void validate() const;

  static TrainConfig cifar_preset();
  static TrainConfig imagenet_preset();
  static TrainConfig cosine_preset(std::size_t epochs);
};

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

// Momentum buffers aligned with a parameter list; created on first update.
struct SgdState {
  std::vector<Tensor> velocity;
};

// v <- momentum * v + (g + weight_decay * p); p <- p - lr * v.
void sgd_update(std::span<Parameter* const> params, SgdState& state, double lr, const TrainConfig& cfg);

// Resumable optimizer state; `epoch` is the next epoch to run.
struct TrainState {
  SgdState sgd;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_acc = 0.0;  // NaN without an eval set
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepResult {
  double loss = 0.0;
  std::size_t correct = 0;
};

// One forward/backward/update on a batch in training mode. Throws TrainingError on a
// non-finite loss, naming `epoch` and `step`.
StepResult train_step(Network& net, const Tensor& batch, std::span<const int> labels, SgdState& sgd, double lr,
                      const TrainConfig& cfg, std::size_t epoch = 0, std::size_t step = 0);

using EpochCallback = std::function<void(const EpochLog&)>;

// Runs epochs state.epoch .. cfg.epochs-1. Per-epoch order comes from a PRNG seeded by
// (cfg.seed, epoch), so a resumed run continues the same sequence.
std::vector<EpochLog> train(Network& net, const Dataset& train_set, const Dataset* eval_set, const TrainConfig& cfg,
                            TrainState* state = nullptr, const EpochCallback& on_epoch = {});

// Top-1 accuracy in eval mode; the previous mode is restored.
double evaluate(Network& net, const Dataset& data, std::size_t batch_size = 128);

// Flip and pad-crop each sample of `batch` in place.
void augment_batch(Tensor& batch, std::uint64_t seed);

void write_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

// Settings read from `model.*`, `gate.*`, `train.*` and `data.*` keys.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSpec data;
  DatasetSpec eval_data;
  bool has_eval_data = false;
};

RunConfig run_config_from(const Config& cfg);

}  // namespace das
