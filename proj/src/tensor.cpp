#include "das/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace das {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_.str());
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = s * a[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw std::invalid_argument("convolution stride must be >= 1");
  const auto padded = static_cast<long long>(in + 2 * pad);
  const auto span = padded - static_cast<long long>(k);
  if (span < 0) {
    throw std::invalid_argument("convolution output would be empty: input " + std::to_string(in) +
                                ", kernel " + std::to_string(k) + ", pad " + std::to_string(pad));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

Shape conv_output_shape(const Shape& input, const Shape& weights, const ConvGeometry& geom) {
  if (geom.groups == 0) throw std::invalid_argument("convolution groups must be >= 1");
  if (weights.h != weights.w) throw std::invalid_argument("only square kernels are supported");
  if (input.c != weights.c * geom.groups) {
    throw std::invalid_argument("convolution channel mismatch: input " + input.str() +
                                " weights " + weights.str() + " groups " +
                                std::to_string(geom.groups));
  }
  if (weights.n % geom.groups != 0) {
    throw std::invalid_argument("output channels " + std::to_string(weights.n) +
                                " not divisible by groups " + std::to_string(geom.groups));
  }
  return {input.n, weights.n, conv_out_dim(input.h, weights.h, geom.stride, geom.pad),
          conv_out_dim(input.w, weights.w, geom.stride, geom.pad)};
}

Tensor conv2d_ref(const Tensor& input, const KernelWeights& kw, std::size_t stride,
                  std::size_t pad) {
  const ConvGeometry geom{stride, pad, kw.groups};
  const Shape os = conv_output_shape(input.shape(), kw.weights.shape(), geom);
  const Shape& is = input.shape();
  const std::size_t k = kw.k();
  const std::size_t cin_g = kw.weights.shape().c;
  const std::size_t cout_g = os.c / kw.groups;
  const auto ih = static_cast<long long>(is.h);
  const auto iw = static_cast<long long>(is.w);

  Tensor out(os);
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t co = 0; co < os.c; ++co) {
      const std::size_t g = co / cout_g;
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          double acc = 0.0;
          for (std::size_t ci = 0; ci < cin_g; ++ci) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long long y = static_cast<long long>(oy * stride + ky) - static_cast<long long>(pad);
              if (y < 0 || y >= ih) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long long x = static_cast<long long>(ox * stride + kx) - static_cast<long long>(pad);
                if (x < 0 || x >= iw) continue;
                acc += kw.weights.at(co, ci, ky, kx) *
                       input.at(n, g * cin_g + ci, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
              }
            }
          }
          out.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  return out;
}

double bilinear_sample(const Tensor& input, double y, double x, std::size_t n, std::size_t c) {
  const Shape& s = input.shape();
  if (n >= s.n || c >= s.c) throw std::out_of_range("bilinear_sample: index out of range");
  const double fy = std::floor(y);
  const double fx = std::floor(x);
  if (!std::isfinite(fy) || !std::isfinite(fx)) return 0.0;
  const double ly = y - fy;
  const double lx = x - fx;
  const auto y0 = static_cast<long long>(fy);
  const auto x0 = static_cast<long long>(fx);
  const auto h = static_cast<long long>(s.h);
  const auto w = static_cast<long long>(s.w);
  auto pix = [&](long long yy, long long xx) {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return input.at(n, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
  };
  return (1 - ly) * (1 - lx) * pix(y0, x0) + (1 - ly) * lx * pix(y0, x0 + 1) +
         ly * (1 - lx) * pix(y0 + 1, x0) + ly * lx * pix(y0 + 1, x0 + 1);
}

Shape reduced_shape(const Shape& s, AxisSet axes) {
  return {(axes & kAxisN) ? 1 : s.n, (axes & kAxisC) ? 1 : s.c, (axes & kAxisH) ? 1 : s.h,
          (axes & kAxisW) ? 1 : s.w};
}

Moments reduce_moments(const Tensor& input, AxisSet axes) {
  if ((axes & (kAxisN | kAxisC | kAxisH | kAxisW)) == 0) {
    throw std::invalid_argument("reduce_moments: empty axis set");
  }
  const Shape& s = input.shape();
  const Shape rs = reduced_shape(s, axes);
  const std::size_t count = s.numel() / std::max<std::size_t>(rs.numel(), 1);
  if (s.numel() == 0 || count == 0) throw std::invalid_argument("reduce_moments: empty reduction extent");

  Moments m{Tensor(rs), Tensor(rs)};
  auto ridx = [&](std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return m.mean.index(rs.n == 1 ? 0 : n, rs.c == 1 ? 0 : c, rs.h == 1 ? 0 : h, rs.w == 1 ? 0 : w);
  };
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) m.mean[ridx(n, c, h, w)] += input.at(n, c, h, w);
  const double inv = 1.0 / static_cast<double>(count);
  for (double& v : m.mean.data()) v *= inv;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) {
          const std::size_t r = ridx(n, c, h, w);
          const double d = input.at(n, c, h, w) - m.mean[r];
          m.var[r] += d * d;
        }
  for (double& v : m.var.data()) v *= inv;
  return m;
}

}  // namespace das
