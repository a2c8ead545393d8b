#include "das/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace das {

Tensor Dataset::batch(const std::vector<std::size_t>& indices) const {
  Tensor t({indices.size(), channels, h, w});
  const std::size_t k = sample_numel();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw std::out_of_range("dataset index " + std::to_string(indices[i]));
    std::copy_n(sample(indices[i]), k, t.ptr() + i * k);
  }
  return t;
}

std::vector<int> Dataset::batch_labels(const std::vector<std::size_t>& indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  Dataset d = *this;
  count = std::min(count, size());
  d.labels.resize(count);
  d.pixels.resize(count * sample_numel());
  return d;
}

Dataset load_cifar100(const std::string& path, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open CIFAR-100 file " + path);
  const auto bytes = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  const std::size_t records = bytes / kCifarRecordBytes;
  if (bytes == 0 || bytes % kCifarRecordBytes != 0) {
    throw std::runtime_error(path + ": truncated record at byte offset " +
                             std::to_string(records * kCifarRecordBytes) + " (file size " + std::to_string(bytes) +
                             " is not a multiple of " + std::to_string(kCifarRecordBytes) + ")");
  }
  for (int c = 0; c < 3; ++c)
    if (!(std[c] > 0.0)) throw std::invalid_argument("CIFAR-100 standardization std must be positive");

  Dataset d;
  d.h = d.w = 32;
  d.n_classes = kCifarClasses;
  d.labels.resize(records);
  d.pixels.resize(records * 3 * 32 * 32);
  std::vector<unsigned char> rec(kCifarRecordBytes);
  for (std::size_t r = 0; r < records; ++r) {
    if (!f.read(reinterpret_cast<char*>(rec.data()), kCifarRecordBytes)) {
      throw std::runtime_error(path + ": read failed at byte offset " + std::to_string(r * kCifarRecordBytes));
    }
    const unsigned fine = rec[1];
    if (fine >= kCifarClasses) {
      throw std::runtime_error(path + ": fine label " + std::to_string(fine) + " >= 100 at byte offset " +
                               std::to_string(r * kCifarRecordBytes + 1));
    }
    d.labels[r] = static_cast<int>(fine);
    double* out = d.pixels.data() + r * 3072;
    for (std::size_t i = 0; i < 3072; ++i) {
      const std::size_t c = i / 1024;
      out[i] = (rec[2 + i] / 255.0 - mean[c]) / std[c];
    }
  }
  return d;
}

namespace {

// Membership test for shape `kind` at offset (dy, dx) from the centre, radius r.
bool inside(std::size_t kind, double dy, double dx, double r) {
  const double ay = std::abs(dy), ax = std::abs(dx);
  const double cheb = std::max(ay, ax);
  const double dist = std::sqrt(dy * dy + dx * dx);
  switch (kind) {
    case 0: return dist <= r;                                   // disc
    case 1: return cheb <= 0.8 * r;                             // square
    case 2: return dy >= -r && dy <= r && ax <= (dy + r) / 2;   // triangle
    case 3: return cheb <= r && (ay <= r / 3 || ax <= r / 3);   // plus
    case 4: return dist <= r && dist >= 0.55 * r;               // ring
    case 5: return ay <= r / 3 && ax <= r;                      // horizontal bar
    case 6: return ax <= r / 3 && ay <= r;                      // vertical bar
    case 7: return ay + ax <= r;                                // diamond
    case 8: return cheb <= r && std::abs(ay - ax) <= r / 4;     // X
    case 9: return cheb <= 0.85 * r && cheb >= 0.5 * r;         // hollow square
    default: return false;
  }
}

}  // namespace

Dataset gen_synthetic(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.n_classes < 2 || spec.n_classes > 10) {
    throw std::invalid_argument("gen_synthetic: n_classes must be in [2, 10], got " + std::to_string(spec.n_classes));
  }
  if (spec.n_samples == 0) throw std::invalid_argument("gen_synthetic: n_samples must be positive");
  const std::size_t s = spec.image_size;
  if (s < 16) throw std::invalid_argument("gen_synthetic: image_size must be at least 16");

  Dataset d;
  d.h = d.w = s;
  d.n_classes = spec.n_classes;
  d.labels.resize(spec.n_samples);
  d.pixels.resize(spec.n_samples * 3 * s * s);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.35);
  std::uniform_real_distribution<double> colour(0.45, 1.0);
  const double size = static_cast<double>(s);
  std::uniform_real_distribution<double> radius(0.19 * size, 0.34 * size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t hw = s * s;
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    const std::size_t label = i % spec.n_classes;
    d.labels[i] = static_cast<int>(label);
    double* img = d.pixels.data() + i * 3 * hw;
    for (std::size_t p = 0; p < 3 * hw; ++p) img[p] = noise(rng);
    const double r = radius(rng);
    const double cy = r + unit(rng) * (size - 1 - 2 * r);
    const double cx = r + unit(rng) * (size - 1 - 2 * r);
    const double rgb[3] = {colour(rng), colour(rng), colour(rng)};
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        if (!inside(label, static_cast<double>(y) - cy, static_cast<double>(x) - cx, r)) continue;
        for (std::size_t c = 0; c < 3; ++c) img[c * hw + y * s + x] = rgb[c];
      }
  }
  return d;
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.kind == DatasetKind::cifar100) return load_cifar100(spec.path, spec.mean, spec.std);
  return gen_synthetic(spec, seed);
}

}  // namespace das
