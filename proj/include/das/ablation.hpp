#pragma once

#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "das/gate.hpp"
#include "das/models.hpp"
#include "das/training.hpp"

namespace das {

// Each variant is costed on `reference` (a full-size model) and trained on `mini`.
struct AblationConfig {
  ModelConfig reference;
  ModelConfig mini;
  TrainConfig train;
  DatasetSpec data;
  DatasetSpec eval_data;
  std::vector<GateVariant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
  bool include_baseline = true;

  // ResNet-18 / 120 classes at 224 with four gates; mini network on synthetic data, 2 epochs.
  static AblationConfig defaults();
};

struct AblationRow {
  std::string name;                  // "baseline" or the variant letter
  std::optional<GateVariant> variant;
  std::uint64_t params = 0;          // reference model
  std::uint64_t macs = 0;            // reference model
  std::uint64_t mini_params = 0;
  double train_loss = 0.0;           // last epoch
  double train_acc = 0.0;
  double eval_acc = 0.0;
  double seconds = 0.0;
};

using AblationCallback = std::function<void(const AblationRow&)>;

std::vector<AblationRow> run_ablation(const AblationConfig& cfg, const AblationCallback& on_row = {});

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace das
