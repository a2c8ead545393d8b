#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace das {

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Dense NCHW array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Scalar value of a 1x1x1x1 tensor.
  double item() const;

  void fill(double v);
  bool all_finite() const;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);
// Elementwise (Hadamard) product.
Tensor hadamard(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

// (c_out, c_in / groups, k, k) convolution weights.
struct KernelWeights {
  Tensor weights;
  std::size_t groups = 1;

  std::size_t c_out() const { return weights.shape().n; }
  std::size_t c_in() const { return weights.shape().c * groups; }
  std::size_t k() const { return weights.shape().h; }
};

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t groups = 1;
};

// Output spatial extent for a sliding window; throws when it would be empty.
std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad);

// Validates operands and returns the convolution output shape.
Shape conv_output_shape(const Shape& input, const Shape& weights, const ConvGeometry& geom);

// Direct sliding-window cross-correlation with zero padding, no bias.
// Serial reference used as the oracle for every convolution kernel.
Tensor conv2d_ref(const Tensor& input, const KernelWeights& weights, std::size_t stride,
                  std::size_t pad);

// Bilinear interpolation at pixel-centre coordinates; out-of-range neighbours read as zero.
double bilinear_sample(const Tensor& input, double y, double x, std::size_t n, std::size_t c);

enum Axis : unsigned { kAxisN = 1u, kAxisC = 2u, kAxisH = 4u, kAxisW = 8u };
using AxisSet = unsigned;

struct Moments {
  Tensor mean;
  Tensor var;
};

// Population mean/variance over `axes`; reduced axes are kept with extent 1.
Moments reduce_moments(const Tensor& input, AxisSet axes);

// Shape with the axes in `axes` collapsed to 1.
Shape reduced_shape(const Shape& s, AxisSet axes);

}  // namespace das
