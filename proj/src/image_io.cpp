#include "das/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace das::io {

namespace {

struct Netpbm {
  std::string magic;
  std::size_t w = 0;
  std::size_t h = 0;
  unsigned maxval = 1;
  std::string body;  // bytes after the header (binary) or remaining text (ASCII)
};

// Next whitespace-delimited header token, skipping `#` comments.
std::string next_token(const std::string& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
  if (start == pos) throw std::runtime_error("netpbm: truncated header");
  return buf.substr(start, pos - start);
}

std::size_t header_number(const std::string& buf, std::size_t& pos, const char* what) {
  const std::string tok = next_token(buf, pos);
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("netpbm: bad ") + what + " '" + tok + "'");
  }
}

Netpbm read_netpbm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();
  std::size_t pos = 0;
  Netpbm img;
  img.magic = next_token(buf, pos);
  if (img.magic.size() != 2 || img.magic[0] != 'P' || img.magic[1] < '1' || img.magic[1] > '6') {
    throw std::runtime_error(path + ": not a netpbm image");
  }
  img.w = header_number(buf, pos, "width");
  img.h = header_number(buf, pos, "height");
  if (img.w == 0 || img.h == 0) throw std::runtime_error(path + ": empty image");
  if (img.magic != "P1" && img.magic != "P4") {
    img.maxval = static_cast<unsigned>(header_number(buf, pos, "maxval"));
    if (img.maxval == 0 || img.maxval > 255) throw std::runtime_error(path + ": only 8-bit maxval is supported");
  }
  // Exactly one whitespace byte separates a binary header from the raster.
  if (pos < buf.size()) ++pos;
  img.body = buf.substr(pos);
  return img;
}

std::vector<double> ascii_values(const Netpbm& img, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  std::size_t pos = 0;
  const bool bitmap = img.magic == "P1";
  while (out.size() < count) {
    while (pos < img.body.size() &&
           (std::isspace(static_cast<unsigned char>(img.body[pos])) || img.body[pos] == '#')) {
      if (img.body[pos] == '#')
        while (pos < img.body.size() && img.body[pos] != '\n') ++pos;
      else
        ++pos;
    }
    if (pos >= img.body.size()) throw std::runtime_error("netpbm: truncated raster");
    if (bitmap) {
      // P1 digits may be packed without separators.
      out.push_back(img.body[pos] == '1' ? 1.0 : 0.0);
      ++pos;
    } else {
      std::size_t start = pos;
      while (pos < img.body.size() && std::isdigit(static_cast<unsigned char>(img.body[pos]))) ++pos;
      if (start == pos) throw std::runtime_error("netpbm: bad raster value");
      out.push_back(std::stod(img.body.substr(start, pos - start)) / img.maxval);
    }
  }
  return out;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  const Netpbm img = read_netpbm(path);
  if (img.magic != "P6" && img.magic != "P3") throw std::runtime_error(path + ": expected a PPM (P6/P3) image");
  const std::size_t hw = img.h * img.w;
  std::vector<double> rgb;
  if (img.magic == "P6") {
    if (img.body.size() < 3 * hw) throw std::runtime_error(path + ": truncated raster");
    rgb.resize(3 * hw);
    for (std::size_t i = 0; i < 3 * hw; ++i) rgb[i] = static_cast<unsigned char>(img.body[i]) / double(img.maxval);
  } else {
    rgb = ascii_values(img, 3 * hw);
  }
  Tensor t({1, 3, img.h, img.w});
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < 3; ++c) t[c * hw + p] = rgb[p * 3 + c];
  return t;
}

void write_ppm(const std::string& path, const Tensor& image) {
  const Shape& s = image.shape();
  if (s.n != 1 || s.c != 3) throw std::invalid_argument("write_ppm expects (1,3,h,w), got " + s.str());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << s.w << ' ' << s.h << "\n255\n";
  const std::size_t hw = s.plane();
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(image[c * hw + p], 0.0, 1.0);
      f.put(static_cast<char>(std::lround(v * 255.0)));
    }
}

GrayImage read_gray(const std::string& path) {
  const Netpbm img = read_netpbm(path);
  GrayImage out;
  out.h = img.h;
  out.w = img.w;
  const std::size_t hw = img.h * img.w;
  if (img.magic == "P5") {
    if (img.body.size() < hw) throw std::runtime_error(path + ": truncated raster");
    out.values.resize(hw);
    for (std::size_t i = 0; i < hw; ++i) out.values[i] = static_cast<unsigned char>(img.body[i]) / double(img.maxval);
  } else if (img.magic == "P4") {
    const std::size_t row_bytes = (img.w + 7) / 8;
    if (img.body.size() < row_bytes * img.h) throw std::runtime_error(path + ": truncated raster");
    out.values.resize(hw);
    for (std::size_t y = 0; y < img.h; ++y)
      for (std::size_t x = 0; x < img.w; ++x) {
        const auto byte = static_cast<unsigned char>(img.body[y * row_bytes + x / 8]);
        out.values[y * img.w + x] = (byte >> (7 - x % 8)) & 1u ? 1.0 : 0.0;
      }
  } else if (img.magic == "P1" || img.magic == "P2") {
    out.values = ascii_values(img, hw);
  } else {
    throw std::runtime_error(path + ": expected a PGM or PBM image");
  }
  return out;
}

std::vector<std::uint8_t> read_mask(const std::string& path, std::size_t& h, std::size_t& w) {
  const GrayImage g = read_gray(path);
  h = g.h;
  w = g.w;
  std::vector<std::uint8_t> m(g.values.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = g.values[i] > 0.0 ? 1 : 0;
  return m;
}

void write_pgm(const std::string& path, const SaliencyMap& map) {
  if (map.weights.size() != map.h * map.w) throw std::invalid_argument("write_pgm: map size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << map.w << ' ' << map.h << "\n255\n";
  for (double v : minmax_normalize(map.weights)) f.put(static_cast<char>(std::lround(v * 255.0)));
}

void write_map_csv(const std::string& path, const SaliencyMap& map) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.precision(17);
  for (std::size_t y = 0; y < map.h; ++y) {
    for (std::size_t x = 0; x < map.w; ++x) f << (x ? "," : "") << map.at(y, x);
    f << '\n';
  }
}

SaliencyMap read_map_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open map " + path);
  SaliencyMap m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream in(line);
    std::size_t cols = 0;
    double v;
    while (in >> v) {
      m.weights.push_back(v);
      ++cols;
    }
    if (!in.eof()) throw std::runtime_error(path + ": non-numeric value on row " + std::to_string(m.h + 1));
    if (m.h == 0) m.w = cols;
    if (cols != m.w) throw std::runtime_error(path + ": ragged row " + std::to_string(m.h + 1));
    ++m.h;
  }
  if (m.h == 0 || m.w == 0) throw std::runtime_error(path + ": empty map");
  return m;
}

}  // namespace das::io
