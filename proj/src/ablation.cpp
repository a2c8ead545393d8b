#include "das/ablation.hpp"

#include <chrono>
#include <iomanip>

#include "das/analysis.hpp"

namespace das {

AblationConfig AblationConfig::defaults() {
  AblationConfig cfg;
  cfg.reference.depth = 18;
  cfg.reference.num_classes = 120;
  cfg.reference.gate_placement = GatePlacement::four_stages;

  cfg.mini.num_classes = 3;
  cfg.mini.input_h = cfg.mini.input_w = 32;
  cfg.mini.stages = 2;
  cfg.mini.base_width = 16;
  cfg.mini.gate_placement = GatePlacement::four_stages;

  cfg.train.batch_size = 32;
  cfg.train.epochs = 2;
  cfg.train.lr0 = 0.05;
  cfg.train.milestones.clear();

  cfg.data.n_classes = 3;
  cfg.data.n_samples = 96;
  cfg.eval_data = cfg.data;
  cfg.eval_data.n_samples = 48;
  return cfg;
}

namespace {

AblationRow run_one(const AblationConfig& cfg, std::optional<GateVariant> variant, const Dataset& train_set,
                    const Dataset& eval_set) {
  const auto start = std::chrono::steady_clock::now();
  AblationRow row;
  row.variant = variant;
  row.name = variant ? std::string(to_string(*variant)) : "baseline";

  ModelConfig ref = cfg.reference;
  ModelConfig mini = cfg.mini;
  if (variant) {
    ref.gate.variant = mini.gate.variant = *variant;
  } else {
    ref.gate_placement = mini.gate_placement = GatePlacement::none;
  }
  {
    auto net = build_model(ref);
    row.params = net->param_count();
    row.macs = count_macs(*net, ref.input_h, ref.input_w).total_macs();
  }
  auto net = build_model(mini);
  row.mini_params = net->param_count();
  const auto log = train(*net, train_set, &eval_set, cfg.train);
  if (!log.empty()) {
    row.train_loss = log.back().train_loss;
    row.train_acc = log.back().train_acc;
    row.eval_acc = log.back().eval_acc;
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationConfig& cfg, const AblationCallback& on_row) {
  cfg.reference.validate();
  cfg.mini.validate();
  cfg.train.validate();
  const Dataset train_set = load_dataset(cfg.data, cfg.train.seed);
  const Dataset eval_set = load_dataset(cfg.eval_data, cfg.train.seed + 1);

  std::vector<AblationRow> rows;
  auto emit = [&](AblationRow row) {
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  };
  if (cfg.include_baseline) emit(run_one(cfg, std::nullopt, train_set, eval_set));
  for (GateVariant v : cfg.variants) emit(run_one(cfg, v, train_set, eval_set));
  return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "variant,params,macs,mini_params,train_loss,train_acc,eval_acc,seconds\n";
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(6);
  for (const AblationRow& r : rows) {
    os << r.name << ',' << r.params << ',' << r.macs << ',' << r.mini_params << ',' << r.train_loss << ','
       << r.train_acc << ',' << r.eval_acc << ',' << r.seconds << '\n';
  }
  os.flags(flags);
  os.precision(prec);
}

}  // namespace das
