#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "das/tensor.hpp"

namespace das {

enum class DatasetKind { cifar100, synthetic };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synthetic;
  std::string path;  // cifar100 binary file
  std::size_t n_classes = 3;
  std::size_t n_samples = 300;
  std::size_t image_size = 32;
  // Per-channel standardization applied after scaling to [0, 1] (cifar100 only).
  std::array<double, 3> mean{0.5071, 0.4865, 0.4409};
  std::array<double, 3> std{0.2673, 0.2564, 0.2762};
};

// Labeled images stored contiguously as (size, 3, h, w).
struct Dataset {
  std::size_t channels = 3;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t n_classes = 0;
  std::vector<double> pixels;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_numel() const { return channels * h * w; }
  const double* sample(std::size_t i) const { return pixels.data() + i * sample_numel(); }

  // Samples at `indices` as one (indices.size(), 3, h, w) batch.
  Tensor batch(const std::vector<std::size_t>& indices) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& indices) const;
  // First `count` samples.
  Dataset head(std::size_t count) const;
};

inline constexpr std::size_t kCifarRecordBytes = 3074;
inline constexpr std::size_t kCifarClasses = 100;

// CIFAR-100 binary records: coarse label, fine label, 3072 CHW RGB bytes.
Dataset load_cifar100(const std::string& path, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std);

// Balanced shape-classification images (label = i mod n_classes) in [0, 1].
Dataset gen_synthetic(const DatasetSpec& spec, std::uint64_t seed);

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

}  // namespace das
