#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "das/config.hpp"
#include "das/image_io.hpp"
#include "das/training.hpp"
#include "support.hpp"

using namespace das;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("das_io_" + name); }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << s;
}

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse("# comment\nmodel.depth = 50  # trailing\n\n gate.alpha=0.5\ntrain.milestones = 3, 7 9\n");
  CHECK(c.get_int("model.depth", 18) == 50);
  CHECK(c.get_double("gate.alpha", 0.2) == 0.5);
  CHECK(c.get_list("train.milestones", {}) == std::vector<double>{3, 7, 9});
  CHECK(c.get_string("missing", "x") == "x");
  CHECK_THROWS_AS(Config::parse("novalue\n"), std::invalid_argument);
  CHECK_THROWS_AS(Config::parse("model.depth = abc").get_int("model.depth", 1), std::invalid_argument);
  CHECK_THROWS_AS(Config::parse("train.augment = maybe").get_bool("train.augment", false), std::invalid_argument);
}

TEST_CASE("run config from keys") {
  const Config c = Config::parse(
      "model.depth = 18\nmodel.gates = four\nmodel.stages = 2\nmodel.width = 16\n"
      "gate.variant = b\ngate.alpha = 0.3\ngate.first_norm = batch\ngate.second_norm = feature\n"
      "train.epochs = 12\ntrain.lr = 0.05\ntrain.milestones = 5, 10\ntrain.seed = 4\n"
      "data.kind = synthetic\ndata.classes = 4\ndata.samples = 60\ndata.eval_samples = 30\n");
  const RunConfig rc = run_config_from(c);
  CHECK(rc.model.gate_placement == GatePlacement::four_stages);
  CHECK(rc.model.stages == 2);
  CHECK(rc.model.base_width == 16);
  CHECK(rc.model.num_classes == 4);
  CHECK(rc.model.gate.variant == GateVariant::b_gridsample_gated);
  CHECK(rc.model.gate.alpha == 0.3);
  CHECK(rc.model.gate.first_norm == NormKind::BatchNorm);
  CHECK(rc.model.gate.second_norm == NormKind::FeatureNorm);
  CHECK(rc.train.epochs == 12);
  CHECK(rc.train.lr0 == 0.05);
  CHECK(rc.train.milestones == std::vector<std::size_t>{5, 10});
  CHECK(rc.train.seed == 4);
  CHECK(rc.data.n_classes == 4);
  CHECK(rc.has_eval_data);
  CHECK(rc.eval_data.n_samples == 30);

  CHECK_THROWS_AS(run_config_from(Config::parse("model.dept = 18")), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from(Config::parse("gate.alpha = 2")), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from(Config::parse("train.milestones = 5, 4")), std::invalid_argument);
  CHECK_THROWS_AS(run_config_from(Config::parse("data.kind = cifar100")), std::invalid_argument);
}

TEST_CASE("PPM round trip") {
  Tensor img({1, 3, 4, 5});
  for (std::size_t i = 0; i < img.numel(); ++i) img[i] = static_cast<double>(i % 256) / 255.0;
  const fs::path p = temp_file("img.ppm");
  io::write_ppm(p.string(), img);
  const Tensor back = io::read_ppm(p.string());
  CHECK(back.shape() == img.shape());
  CHECK(max_abs_diff(back, img) < 1e-12);
  fs::remove(p);
}

TEST_CASE("PGM and PBM masks") {
  const fs::path p = temp_file("mask");
  write_text(p, "P2\n# c\n3 2\n255\n0 10 0\n255 0 0\n");
  std::size_t h = 0, w = 0;
  CHECK(io::read_mask(p.string(), h, w) == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 0});
  CHECK(h == 2);
  CHECK(w == 3);
  write_text(p, "P1\n3 2\n0 1 0\n1 1 0\n");
  CHECK(io::read_mask(p.string(), h, w) == std::vector<std::uint8_t>{0, 1, 0, 1, 1, 0});
  write_text(p, std::string("P4\n10 2\n") + std::string("\x80\x40\x01\x80", 4));
  const auto m = io::read_mask(p.string(), h, w);
  CHECK(w == 10);
  CHECK(m[0] == 1);
  CHECK(m[1] == 0);
  CHECK(m[9] == 1);
  CHECK(m[10 + 7] == 1);
  write_text(p, std::string("P5\n2 2\n255\n") + std::string("\x00\x05\xff\x00", 4));
  CHECK(io::read_mask(p.string(), h, w) == std::vector<std::uint8_t>{0, 1, 1, 0});
  write_text(p, "P5\n4 4\n255\n\x01");
  CHECK_THROWS(io::read_gray(p.string()));
  write_text(p, "hello");
  CHECK_THROWS(io::read_gray(p.string()));
  fs::remove(p);
}

TEST_CASE("saliency map PGM and CSV output") {
  SaliencyMap m;
  m.h = 2;
  m.w = 3;
  m.weights = {0.0, 0.5, 1.0, 2.0, 0.25, 0.125};
  const fs::path pgm = temp_file("map.pgm"), csv = temp_file("map.csv");
  io::write_pgm(pgm.string(), m);
  const io::GrayImage g = io::read_gray(pgm.string());
  CHECK(g.h == 2);
  CHECK(g.w == 3);
  CHECK(g.values[3] == 1.0);
  CHECK(g.values[0] == 0.0);
  io::write_map_csv(csv.string(), m);
  const SaliencyMap back = io::read_map_csv(csv.string());
  CHECK(back.h == 2);
  CHECK(back.w == 3);
  CHECK(back.weights == m.weights);
  fs::remove(pgm);
  fs::remove(csv);
}
