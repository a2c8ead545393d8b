#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "das/analysis.hpp"
#include "das/tensor.hpp"

namespace das::io {

// Binary PPM (P6, maxval <= 255) as a (1, 3, h, w) tensor scaled to [0, 1].
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

struct GrayImage {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> values;  // scaled to [0, 1]
};

// PGM (P2/P5) or PBM (P1/P4). PBM "1" (black) pixels read as 1.0.
GrayImage read_gray(const std::string& path);

// Nonzero pixels of a PGM/PBM file.
std::vector<std::uint8_t> read_mask(const std::string& path, std::size_t& h, std::size_t& w);

// 8-bit binary PGM of the min-max scaled map.
void write_pgm(const std::string& path, const SaliencyMap& map);

// One row per image row, comma-separated.
void write_map_csv(const std::string& path, const SaliencyMap& map);
SaliencyMap read_map_csv(const std::string& path);

}  // namespace das::io
