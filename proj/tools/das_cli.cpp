#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "das/ablation.hpp"
#include "das/analysis.hpp"
#include "das/checkpoint.hpp"
#include "das/config.hpp"
#include "das/image_io.hpp"
#include "das/training.hpp"

using namespace das;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out_dir = ".";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.overrides, "Override a configuration key (key=value), repeatable");
  app->add_option("--seed", c.seed, "Seed for weights, data order and synthetic data");
  app->add_option("--out-dir", c.out_dir, "Directory for output files");
}

Config load_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : Config::load(c.config_path);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (c.seed >= 0) cfg.set("train.seed", std::to_string(c.seed));
  return cfg;
}

fs::path out_path(const Common& c, const std::string& file) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / file;
}

void print_epoch(const EpochLog& e) {
  std::printf("epoch %3zu  lr %.5f  loss %.4f  train_acc %.4f", e.epoch, e.lr, e.train_loss, e.train_acc);
  if (!std::isnan(e.eval_acc)) std::printf("  eval_acc %.4f", e.eval_acc);
  std::printf("\n");
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& resume) {
  const RunConfig rc = run_config_from(load_config(c));
  const Dataset train_set = load_dataset(rc.data, rc.train.seed);
  std::optional<Dataset> eval_set;
  if (rc.has_eval_data) eval_set = load_dataset(rc.eval_data, rc.train.seed + 1);

  ModelConfig model = rc.model;
  model.input_h = train_set.h;
  model.input_w = train_set.w;
  auto net = build_model(model);
  TrainState state;
  if (!resume.empty()) {
    restore_checkpoint(load_checkpoint(resume), *net, &state);
    std::printf("resumed from %s at epoch %zu\n", resume.c_str(), state.epoch);
  }
  std::printf("model: ResNet-%d, %zu stages, width %zu, %zu classes, gates %s, %llu params\n", model.depth,
              model.stages, model.base_width, model.num_classes, std::string(to_string(model.gate_placement)).c_str(),
              static_cast<unsigned long long>(net->param_count()));
  std::printf("data: %zu training samples%s\n", train_set.size(),
              eval_set ? (", " + std::to_string(eval_set->size()) + " eval samples").c_str() : "");

  const fs::path ckpt = out_path(c, "checkpoint.ckpt");
  const auto log = train(*net, train_set, eval_set ? &*eval_set : nullptr, rc.train, &state, [&](const EpochLog& e) {
    print_epoch(e);
    save_checkpoint(*net, state, ckpt.string());
  });
  std::ofstream csv(out_path(c, "train_log.csv"));
  write_log_csv(csv, log);
  save_checkpoint(*net, state, ckpt.string());
  std::printf("wrote %s and %s\n", ckpt.c_str(), out_path(c, "train_log.csv").c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint) {
  const RunConfig rc = run_config_from(load_config(c));
  const DatasetSpec& spec = rc.has_eval_data ? rc.eval_data : rc.data;
  const Dataset data = load_dataset(spec, rc.train.seed + (rc.has_eval_data ? 1 : 0));
  ModelConfig model = rc.model;
  model.input_h = data.h;
  model.input_w = data.w;
  auto net = build_model(model);
  restore_checkpoint(load_checkpoint(checkpoint), *net);
  const double acc = evaluate(*net, data, rc.train.batch_size);
  std::printf("top-1 accuracy %.4f on %zu samples\n", acc, data.size());
  return 0;
}

int cmd_count(const Common& c, bool params_only) {
  Config cfg = load_config(c);
  if (!cfg.has("model.input")) cfg.set("model.input", "224");
  if (!cfg.has("model.classes")) cfg.set("model.classes", "1000");
  const RunConfig rc = run_config_from(cfg);
  auto net = build_model(rc.model);
  const CostReport report = params_only ? count_params(*net) : count_macs(*net, rc.model.input_h, rc.model.input_w);
  report.write_csv(std::cout);
  return 0;
}

// Standardizes like the training data so saliency reflects what the model saw.
void standardize_like(Tensor& image, const DatasetSpec& spec) {
  if (spec.kind != DatasetKind::cifar100) return;
  const Shape s = image.shape();
  for (std::size_t ch = 0; ch < s.c; ++ch)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) image.at(0, ch, y, x) = (image.at(0, ch, y, x) - spec.mean[ch]) / spec.std[ch];
}

int cmd_gradcam(const Common& c, const std::string& image_path, int sample, const std::string& checkpoint,
                const std::string& layer, int class_idx) {
  const RunConfig rc = run_config_from(load_config(c));
  Tensor image;
  if (!image_path.empty()) {
    image = io::read_ppm(image_path);
    standardize_like(image, rc.data);
  } else {
    const Dataset data = load_dataset(rc.data, rc.train.seed);
    if (sample < 0 || static_cast<std::size_t>(sample) >= data.size())
      throw std::invalid_argument("--sample out of range: " + std::to_string(sample));
    image = data.batch({static_cast<std::size_t>(sample)});
    if (rc.data.kind == DatasetKind::synthetic) io::write_ppm(out_path(c, "input.ppm").string(), image);
    std::printf("sample %d, label %d\n", sample, data.labels[static_cast<std::size_t>(sample)]);
  }
  ModelConfig model = rc.model;
  model.input_h = image.shape().h;
  model.input_w = image.shape().w;
  auto net = build_model(model);
  if (!checkpoint.empty()) restore_checkpoint(load_checkpoint(checkpoint), *net);

  const SaliencyMap map = grad_cam(*net, image, class_idx, layer);
  const fs::path pgm = out_path(c, "gradcam.pgm"), csv = out_path(c, "gradcam.csv");
  io::write_pgm(pgm.string(), map);
  io::write_map_csv(csv.string(), map);
  std::printf("class %d at %s: wrote %s and %s\n", map.class_index, map.layer.c_str(), pgm.c_str(), csv.c_str());
  return 0;
}

SaliencyMap read_map(const std::string& path) {
  if (fs::path(path).extension() == ".csv") return io::read_map_csv(path);
  const io::GrayImage g = io::read_gray(path);
  SaliencyMap m;
  m.h = g.h;
  m.w = g.w;
  m.weights = g.values;
  return m;
}

int cmd_sfd(const std::string& map_path, const std::string& region_path, const std::string& box_path,
            double threshold) {
  const SaliencyMap map = read_map(map_path);
  std::size_t h = 0, w = 0;
  const std::vector<std::uint8_t> region = io::read_mask(region_path, h, w);
  if (h != map.h || w != map.w) throw std::invalid_argument("region mask size differs from the saliency map");
  RegionMask mask;
  if (!box_path.empty()) {
    std::size_t bh = 0, bw = 0;
    mask.h = map.h;
    mask.w = map.w;
    mask.region = region;
    mask.box = io::read_mask(box_path, bh, bw);
    if (bh != h || bw != w) throw std::invalid_argument("box mask size differs from the saliency map");
  } else {
    mask = infer_box(map, region, threshold);
  }
  const SfdResult r = sfd_score(map, mask);
  std::printf("sfd,relevant_weight,context_weight,degenerate\n%.6f,%.6f,%.6f,%d\n", r.score, r.relevant_weight,
              r.context_weight, r.degenerate ? 1 : 0);
  return 0;
}

int cmd_ablate(const Common& c, std::size_t epochs, std::size_t samples) {
  const Config cfg = load_config(c);
  const RunConfig rc = run_config_from(cfg);
  AblationConfig ab = AblationConfig::defaults();
  ab.train.epochs = epochs;
  ab.train.seed = rc.train.seed;
  ab.reference.gate.alpha = ab.mini.gate.alpha = rc.model.gate.alpha;
  ab.reference.gate.first_norm = ab.mini.gate.first_norm = rc.model.gate.first_norm;
  ab.reference.gate.second_norm = ab.mini.gate.second_norm = rc.model.gate.second_norm;
  if (cfg.has("model.gates")) ab.reference.gate_placement = ab.mini.gate_placement = rc.model.gate_placement;
  ab.mini.seed = rc.train.seed;
  ab.data.n_samples = samples;
  ab.eval_data.n_samples = std::max<std::size_t>(samples / 2, ab.data.n_classes);

  std::printf("%-8s %10s %8s %8s %8s %8s\n", "variant", "params(M)", "GMACs", "loss", "train", "eval");
  const auto rows = run_ablation(ab, [](const AblationRow& r) {
    std::printf("%-8s %10.4f %8.4f %8.4f %8.3f %8.3f\n", r.name.c_str(), r.params / 1e6, r.macs / 1e9, r.train_loss,
                r.train_acc, r.eval_acc);
    std::fflush(stdout);
  });
  const fs::path csv = out_path(c, "ablation.csv");
  std::ofstream f(csv);
  write_ablation_csv(f, rows);
  std::printf("wrote %s\n", csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable attention gate: training, cost counting and saliency analysis"};
  app.require_subcommand(1);

  Common train_c, eval_c, count_c, cam_c, sfd_c, ablate_c;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write train_log.csv and checkpoint.ckpt");
  add_common(train_cmd, train_c);
  std::string resume;
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

  auto* eval_cmd = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint");
  add_common(eval_cmd, eval_c);
  std::string eval_ckpt;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);

  auto* count_cmd = app.add_subcommand("count", "Per-layer parameter and MAC counts as CSV on stdout (default 224x224, 1000 classes)");
  add_common(count_cmd, count_c);
  bool params_only = false;
  count_cmd->add_flag("--params-only", params_only, "One row per parameter tensor, no MACs");

  auto* cam_cmd = app.add_subcommand("gradcam", "gradCAM heat map as PGM and CSV");
  add_common(cam_cmd, cam_c);
  std::string image, cam_ckpt, layer;
  int sample = 0, class_idx = -1;
  auto* image_opt = cam_cmd->add_option("--image", image, "Input PPM image")->check(CLI::ExistingFile);
  cam_cmd->add_option("--sample", sample, "Dataset sample to explain when no --image is given")->excludes(image_opt);
  cam_cmd->add_option("--checkpoint", cam_ckpt, "Trained weights")->check(CLI::ExistingFile);
  cam_cmd->add_option("--layer", layer, "Activation to explain (stem, layerS or layerS.B); default is the last stage");
  cam_cmd->add_option("--class", class_idx, "Target class; default is the predicted class");

  auto* sfd_cmd = app.add_subcommand("sfd", "Saliency focus degree of a map for a region mask");
  add_common(sfd_cmd, sfd_c);
  std::string map_path, region_path, box_path;
  double threshold = 0.5;
  sfd_cmd->add_option("--map", map_path, "Saliency map (CSV or PGM)")->required()->check(CLI::ExistingFile);
  sfd_cmd->add_option("--region", region_path, "Relevant region mask R (PGM/PBM)")->required()->check(CLI::ExistingFile);
  auto* box_opt = sfd_cmd->add_option("--box", box_path, "Box mask B (PGM/PBM)")->check(CLI::ExistingFile);
  sfd_cmd->add_option("--threshold", threshold, "Normalized saliency threshold for inferring B")
      ->capture_default_str()
      ->excludes(box_opt)
      ->check(CLI::Range(0.0, 1.0));

  auto* ablate_cmd = app.add_subcommand("ablate", "Train every gate variant briefly and write ablation.csv");
  add_common(ablate_cmd, ablate_c);
  std::size_t ab_epochs = 2, ab_samples = 96;
  ablate_cmd->add_option("--epochs", ab_epochs, "Epochs per variant")->capture_default_str()->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--samples", ab_samples, "Synthetic training samples")->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return cmd_train(train_c, resume);
    if (*eval_cmd) return cmd_eval(eval_c, eval_ckpt);
    if (*count_cmd) return cmd_count(count_c, params_only);
    if (*cam_cmd) {
      if (layer.empty()) layer = "layer" + std::to_string(run_config_from(load_config(cam_c)).model.stages);
      return cmd_gradcam(cam_c, image, sample, cam_ckpt, layer, class_idx);
    }
    if (*sfd_cmd) return cmd_sfd(map_path, region_path, box_path, threshold);
    if (*ablate_cmd) return cmd_ablate(ablate_c, ab_epochs, ab_samples);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
