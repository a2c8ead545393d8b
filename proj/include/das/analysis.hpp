#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "das/cost.hpp"
#include "das/models.hpp"

namespace das {

// One row per registered parameter tensor (macs = 0).
CostReport count_params(Network& net);
CostReport count_params(std::vector<Parameter*> params);

// One row per layer at the given input size. Convention: 1 MAC = one multiply-add;
// normalization, activation and pooling count as zero.
CostReport count_macs(const Network& net, std::size_t h, std::size_t w);

// Row-major non-negative heat map.
struct SaliencyMap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> weights;
  std::string layer;
  int class_index = -1;

  double at(std::size_t y, std::size_t x) const { return weights[y * w + x]; }
};

// Binary masks; `region` (R) must lie inside `box` (B).
struct RegionMask {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::uint8_t> region;
  std::vector<std::uint8_t> box;
};

// ReLU(sum_c mean(gradient_c) * activation_c) for one sample, bilinearly resized to (out_h, out_w).
SaliencyMap grad_cam_from(const Tensor& activation, const Tensor& gradient, std::size_t out_h,
                          std::size_t out_w);

// Runs the network in eval mode on a single (1,3,h,w) image and builds the gradCAM map of
// `class_idx` at the named activation. The previous train/eval mode is restored.
SaliencyMap grad_cam(Network& net, const Tensor& image, int class_idx, const std::string& layer_name);

// Half-pixel-centre bilinear resize of a (h, w) plane, edges clamped.
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t h, std::size_t w,
                                    std::size_t out_h, std::size_t out_w);

// Min-max scaling to [0, 1]; a constant map becomes all zeros.
std::vector<double> minmax_normalize(const std::vector<double>& v);

struct SfdResult {
  double score = 0.0;
  double relevant_weight = 0.0;  // W_r
  double context_weight = 0.0;   // W_n
  bool degenerate = false;       // W_r = W_n = 0
};

// W_r / (W_r + W_n) with W = mean(exp(w) - 1) of the min-max-normalized map over R and B - R.
SfdResult sfd_score(const SaliencyMap& map, const RegionMask& mask);

// B = bounding box of R united with every pixel whose normalized weight >= threshold.
RegionMask infer_box(const SaliencyMap& map, const std::vector<std::uint8_t>& region, double threshold);

}  // namespace das
