#include "das/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "das/kernels.hpp"

namespace das::ops {

namespace {

using Index = long long;

void require_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out(x.shape());
  const auto n = static_cast<Index>(x.numel());
  const double* src = x.ptr();
  double* dst = out.ptr();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (Index i = 0; i < n; ++i) dst[i] = f(src[i]);
  return out;
}

// Group index of every element when reducing over `axes`.
std::vector<std::size_t> group_index(const Shape& s, AxisSet axes, std::size_t& groups) {
  const Shape rs = reduced_shape(s, axes);
  groups = rs.numel();
  std::vector<std::size_t> idx(s.numel());
  std::size_t i = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w)
          idx[i++] = (((rs.n == 1 ? 0 : n) * rs.c + (rs.c == 1 ? 0 : c)) * rs.h + (rs.h == 1 ? 0 : h)) * rs.w +
                     (rs.w == 1 ? 0 : w);
  return idx;
}

inline double gauss_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double gauss_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  require_same(a.shape(), b.shape(), "add");
  return a.graph().record(a.value() + b.value(), {a, b}, [a, b](Graph& g, const Tensor& go) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

Var mul(Var a, Var b) {
  require_same(a.shape(), b.shape(), "mul");
  return a.graph().record(hadamard(a.value(), b.value()), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (a.requires_grad()) g.accumulate(a, hadamard(go, b.value()));
    if (b.requires_grad()) g.accumulate(b, hadamard(go, a.value()));
  });
}

Var scale(Var a, double s) {
  return a.graph().record(s * a.value(), {a}, [a, s](Graph& g, const Tensor& go) { g.accumulate(a, s * go); });
}

Var sum(Var a) {
  return a.graph().record(Tensor::scalar(das::sum(a.value())), {a}, [a](Graph& g, const Tensor& go) {
    g.accumulate(a, Tensor(a.shape(), go.item()));
  });
}

Var mean(Var a) {
  const double inv = 1.0 / static_cast<double>(a.value().numel());
  return scale(sum(a), inv);
}

Var relu(Var x) {
  return x.graph().record(map(x.value(), [](double v) { return v > 0 ? v : 0.0; }), {x},
                          [x](Graph& g, const Tensor& go) {
                            Tensor gx(x.shape());
                            const Tensor& xv = x.value();
                            for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = xv[i] > 0 ? go[i] : 0.0;
                            g.accumulate(x, gx);
                          });
}

Var sigmoid(Var x) {
  return x.graph().record(map(x.value(), logistic), {x}, [x](Graph& g, const Tensor& go) {
    const Tensor& xv = x.value();
    Tensor gx(x.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      const double s = logistic(xv[i]);
      gx[i] = go[i] * s * (1.0 - s);
    }
    g.accumulate(x, gx);
  });
}

Var gelu(Var x) {
  return x.graph().record(map(x.value(), [](double v) { return v * gauss_cdf(v); }), {x},
                          [x](Graph& g, const Tensor& go) {
                            const Tensor& xv = x.value();
                            Tensor gx(x.shape());
                            for (std::size_t i = 0; i < gx.numel(); ++i)
                              gx[i] = go[i] * (gauss_cdf(xv[i]) + xv[i] * gauss_pdf(xv[i]));
                            g.accumulate(x, gx);
                          });
}

Var conv2d(Var x, Var weights, const ConvGeometry& geom) {
  Tensor y = kernels::conv2d_forward(x.value(), weights.value(), geom);
  return x.graph().record(std::move(y), {x, weights}, [x, weights, geom](Graph& g, const Tensor& go) {
    if (x.requires_grad())
      g.accumulate(x, kernels::conv2d_backward_input(go, weights.value(), geom, x.shape()));
    if (weights.requires_grad())
      g.accumulate(weights, kernels::conv2d_backward_weight(go, x.value(), geom, weights.shape()));
  });
}

Var deform_conv2d(Var x, Var offset, Var mask, Var weights) {
  Tensor y = kernels::deform_conv2d_forward(x.value(), offset.value(), mask.value(), weights.value());
  return x.graph().record(std::move(y), {x, offset, mask, weights},
                          [x, offset, mask, weights](Graph& g, const Tensor& go) {
                            auto grads = kernels::deform_conv2d_backward(go, x.value(), offset.value(),
                                                                         mask.value(), weights.value());
                            g.accumulate(x, grads.input);
                            g.accumulate(offset, grads.offset);
                            g.accumulate(mask, grads.mask);
                            g.accumulate(weights, grads.weights);
                          });
}

Var grid_sample(Var x, Var flow) {
  Tensor y = kernels::grid_sample_forward(x.value(), flow.value());
  return x.graph().record(std::move(y), {x, flow}, [x, flow](Graph& g, const Tensor& go) {
    auto grads = kernels::grid_sample_backward(go, x.value(), flow.value());
    g.accumulate(x, grads.input);
    g.accumulate(flow, grads.flow);
  });
}

Var standardize(Var x, AxisSet axes, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("normalization epsilon must be positive");
  const Tensor& xv = x.value();
  const Moments m = reduce_moments(xv, axes);
  std::size_t groups = 0;
  auto gidx = std::make_shared<std::vector<std::size_t>>(group_index(xv.shape(), axes, groups));
  auto inv_std = std::make_shared<std::vector<double>>(groups);
  for (std::size_t r = 0; r < groups; ++r) (*inv_std)[r] = 1.0 / std::sqrt(m.var[r] + eps);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const std::size_t r = (*gidx)[i];
    y[i] = (xv[i] - m.mean[r]) * (*inv_std)[r];
  }
  const double count = static_cast<double>(xv.numel() / groups);
  auto mean = std::make_shared<std::vector<double>>(m.mean.data().begin(), m.mean.data().end());
  return x.graph().record(std::move(y), {x}, [x, gidx, mean, inv_std, groups, count](Graph& g, const Tensor& go) {
    const Tensor& xv = x.value();
    Tensor yv(go.shape());
    for (std::size_t i = 0; i < yv.numel(); ++i) {
      const std::size_t r = (*gidx)[i];
      yv[i] = (xv[i] - (*mean)[r]) * (*inv_std)[r];
    }
    std::vector<double> mg(groups, 0.0), mgy(groups, 0.0);
    for (std::size_t i = 0; i < go.numel(); ++i) {
      const std::size_t r = (*gidx)[i];
      mg[r] += go[i];
      mgy[r] += go[i] * yv[i];
    }
    for (std::size_t r = 0; r < groups; ++r) {
      mg[r] /= count;
      mgy[r] /= count;
    }
    Tensor gx(go.shape());
    for (std::size_t i = 0; i < gx.numel(); ++i) {
      const std::size_t r = (*gidx)[i];
      gx[i] = (*inv_std)[r] * (go[i] - mg[r] - yv[i] * mgy[r]);
    }
    g.accumulate(x, gx);
  });
}

Var channel_rms_normalize(Var x, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("normalization epsilon must be positive");
  const Tensor& xv = x.value();
  const Shape s = xv.shape();
  const std::size_t hw = s.plane();
  auto inv_rms = std::make_shared<std::vector<double>>(s.n * hw, 0.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t p = 0; p < hw; ++p) {
      double ss = 0.0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const double v = xv[(n * s.c + c) * hw + p];
        ss += v * v;
      }
      (*inv_rms)[n * hw + p] = 1.0 / std::sqrt(ss / static_cast<double>(s.c) + eps);
    }
  Tensor y(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (n * s.c + c) * hw + p;
        y[i] = xv[i] * (*inv_rms)[n * hw + p];
      }
  return x.graph().record(std::move(y), {x}, [x, inv_rms](Graph& g, const Tensor& go) {
    const Shape s = go.shape();
    const Tensor& xv = x.value();
    const std::size_t hw = s.plane();
    Tensor gx(s);
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t p = 0; p < hw; ++p) {
        double mgy = 0.0;
        for (std::size_t c = 0; c < s.c; ++c) {
          const std::size_t i = (n * s.c + c) * hw + p;
          mgy += go[i] * xv[i] * (*inv_rms)[n * hw + p];
        }
        mgy /= static_cast<double>(s.c);
        const double r = (*inv_rms)[n * hw + p];
        for (std::size_t c = 0; c < s.c; ++c) {
          const std::size_t i = (n * s.c + c) * hw + p;
          gx[i] = r * (go[i] - xv[i] * r * mgy);
        }
      }
    g.accumulate(x, gx);
  });
}

Var channel_affine(Var x, Var scale_v, Var shift) {
  const Shape s = x.shape();
  const Shape ps{1, s.c, 1, 1};
  require_same(scale_v.shape(), ps, "channel_affine scale");
  require_same(shift.shape(), ps, "channel_affine shift");
  const std::size_t hw = s.plane();
  Tensor y(s);
  const Tensor& xv = x.value();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const double a = scale_v.value()[c];
      const double b = shift.value()[c];
      const std::size_t base = (n * s.c + c) * hw;
      for (std::size_t p = 0; p < hw; ++p) y[base + p] = xv[base + p] * a + b;
    }
  return x.graph().record(std::move(y), {x, scale_v, shift}, [x, scale_v, shift](Graph& g, const Tensor& go) {
    const Shape s = go.shape();
    const std::size_t hw = s.plane();
    const Tensor& xv = x.value();
    Tensor gx(s), ga({1, s.c, 1, 1}), gb({1, s.c, 1, 1});
    for (std::size_t n = 0; n < s.n; ++n)
      for (std::size_t c = 0; c < s.c; ++c) {
        const double a = scale_v.value()[c];
        const std::size_t base = (n * s.c + c) * hw;
        double sa = 0.0, sb = 0.0;
        for (std::size_t p = 0; p < hw; ++p) {
          gx[base + p] = go[base + p] * a;
          sa += go[base + p] * xv[base + p];
          sb += go[base + p];
        }
        ga[c] += sa;
        gb[c] += sb;
      }
    if (x.requires_grad()) g.accumulate(x, gx);
    g.accumulate(scale_v, ga);
    g.accumulate(shift, gb);
  });
}

Var concat_channels(Var a, Var b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw std::invalid_argument("concat_channels: incompatible shapes " + sa.str() + " and " + sb.str());
  }
  const std::size_t hw = sa.plane();
  Tensor y({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().ptr() + n * sa.c * hw, sa.c * hw, y.ptr() + n * (sa.c + sb.c) * hw);
    std::copy_n(b.value().ptr() + n * sb.c * hw, sb.c * hw, y.ptr() + (n * (sa.c + sb.c) + sa.c) * hw);
  }
  return a.graph().record(std::move(y), {a, b}, [a, b](Graph& g, const Tensor& go) {
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    const std::size_t hw = sa.plane();
    Tensor ga(sa), gb(sb);
    for (std::size_t n = 0; n < sa.n; ++n) {
      std::copy_n(go.ptr() + n * (sa.c + sb.c) * hw, sa.c * hw, ga.ptr() + n * sa.c * hw);
      std::copy_n(go.ptr() + (n * (sa.c + sb.c) + sa.c) * hw, sb.c * hw, gb.ptr() + n * sb.c * hw);
    }
    g.accumulate(a, ga);
    g.accumulate(b, gb);
  });
}

Var slice_channels(Var x, std::size_t begin, std::size_t count) {
  const Shape s = x.shape();
  if (begin + count > s.c || count == 0) {
    throw std::invalid_argument("slice_channels: range [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") outside " + s.str());
  }
  const std::size_t hw = s.plane();
  Tensor y({s.n, count, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    std::copy_n(x.value().ptr() + (n * s.c + begin) * hw, count * hw, y.ptr() + n * count * hw);
  return x.graph().record(std::move(y), {x}, [x, begin, count](Graph& g, const Tensor& go) {
    const Shape s = x.shape();
    const std::size_t hw = s.plane();
    Tensor gx(s);
    for (std::size_t n = 0; n < s.n; ++n)
      std::copy_n(go.ptr() + n * count * hw, count * hw, gx.ptr() + (n * s.c + begin) * hw);
    g.accumulate(x, gx);
  });
}

Var max_pool3s2p1(Var x) {
  const Shape s = x.shape();
  const std::size_t oh = conv_out_dim(s.h, 3, 2, 1);
  const std::size_t ow = conv_out_dim(s.w, 3, 2, 1);
  Tensor y({s.n, s.c, oh, ow});
  auto arg = std::make_shared<std::vector<std::size_t>>(y.numel());
  const Tensor& xv = x.value();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = 0;
          for (std::size_t ky = 0; ky < 3; ++ky) {
            const long long iy = static_cast<long long>(oy * 2 + ky) - 1;
            if (iy < 0 || iy >= static_cast<long long>(s.h)) continue;
            for (std::size_t kx = 0; kx < 3; ++kx) {
              const long long ix = static_cast<long long>(ox * 2 + kx) - 1;
              if (ix < 0 || ix >= static_cast<long long>(s.w)) continue;
              const std::size_t i = xv.index(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              if (xv[i] > best) {
                best = xv[i];
                best_i = i;
              }
            }
          }
          const std::size_t o = y.index(n, c, oy, ox);
          y[o] = best;
          (*arg)[o] = best_i;
        }
  return x.graph().record(std::move(y), {x}, [x, arg](Graph& g, const Tensor& go) {
    Tensor gx(x.shape());
    for (std::size_t o = 0; o < go.numel(); ++o) gx[(*arg)[o]] += go[o];
    g.accumulate(x, gx);
  });
}

Var global_avg_pool(Var x) {
  const Shape s = x.shape();
  const std::size_t hw = s.plane();
  Tensor y({s.n, s.c, 1, 1});
  for (std::size_t i = 0; i < s.n * s.c; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += x.value()[i * hw + p];
    y[i] = acc / static_cast<double>(hw);
  }
  return x.graph().record(std::move(y), {x}, [x](Graph& g, const Tensor& go) {
    const Shape s = x.shape();
    const std::size_t hw = s.plane();
    Tensor gx(s);
    for (std::size_t i = 0; i < s.n * s.c; ++i) {
      const double v = go[i] / static_cast<double>(hw);
      for (std::size_t p = 0; p < hw; ++p) gx[i * hw + p] = v;
    }
    g.accumulate(x, gx);
  });
}

Var linear(Var x, Var weights, Var bias) {
  const Shape xs = x.shape();
  const Shape ws = weights.shape();
  if (xs.h != 1 || xs.w != 1 || ws.h != 1 || ws.w != 1 || ws.c != xs.c) {
    throw std::invalid_argument("linear: input " + xs.str() + " incompatible with weights " + ws.str());
  }
  if (bias.shape() != Shape{1, ws.n, 1, 1}) {
    throw std::invalid_argument("linear: bias shape " + bias.shape().str() + " expected (1," +
                                std::to_string(ws.n) + ",1,1)");
  }
  const std::size_t nf = xs.c;
  const std::size_t nk = ws.n;
  Tensor y({xs.n, nk, 1, 1});
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t k = 0; k < nk; ++k) {
      double acc = 0.0;
      for (std::size_t f = 0; f < nf; ++f) acc += weights.value()[k * nf + f] * x.value()[n * nf + f];
      y[n * nk + k] = acc + bias.value()[k];
    }
  return x.graph().record(std::move(y), {x, weights, bias}, [x, weights, bias](Graph& g, const Tensor& go) {
    const std::size_t batch = x.shape().n;
    const std::size_t nf = x.shape().c;
    const std::size_t nk = weights.shape().n;
    Tensor gx(x.shape()), gw(weights.shape()), gb(bias.shape());
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t k = 0; k < nk; ++k) {
        const double gv = go[n * nk + k];
        gb[k] += gv;
        for (std::size_t f = 0; f < nf; ++f) {
          gx[n * nf + f] += weights.value()[k * nf + f] * gv;
          gw[k * nf + f] += gv * x.value()[n * nf + f];
        }
      }
    if (x.requires_grad()) g.accumulate(x, gx);
    g.accumulate(weights, gw);
    g.accumulate(bias, gb);
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Shape s = logits.shape();
  if (s.h != 1 || s.w != 1 || labels.size() != s.n) {
    throw std::invalid_argument("cross_entropy: logits " + s.str() + " with " + std::to_string(labels.size()) +
                                " labels");
  }
  auto probs = std::make_shared<Tensor>(s);
  double loss = 0.0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= s.c) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(label) + " out of range");
    }
    const double* z = logits.value().ptr() + n * s.c;
    const double zmax = *std::max_element(z, z + s.c);
    double denom = 0.0;
    for (std::size_t k = 0; k < s.c; ++k) denom += std::exp(z[k] - zmax);
    for (std::size_t k = 0; k < s.c; ++k) (*probs)[n * s.c + k] = std::exp(z[k] - zmax) / denom;
    loss += -(z[label] - zmax - std::log(denom));
  }
  loss /= static_cast<double>(s.n);
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.graph().record(Tensor::scalar(loss), {logits}, [logits, probs, lab](Graph& g, const Tensor& go) {
    const Shape s = logits.shape();
    Tensor gl = *probs;
    for (std::size_t n = 0; n < s.n; ++n) gl[n * s.c + static_cast<std::size_t>(lab[n])] -= 1.0;
    g.accumulate(logits, (go.item() / static_cast<double>(s.n)) * gl);
  });
}

Var pick(Var x, std::size_t n, std::size_t c) {
  const Shape s = x.shape();
  if (n >= s.n || c >= s.c) throw std::out_of_range("pick: index outside " + s.str());
  const std::size_t i = x.value().index(n, c, 0, 0);
  return x.graph().record(Tensor::scalar(x.value()[i]), {x}, [x, i](Graph& g, const Tensor& go) {
    Tensor gx(x.shape());
    gx[i] = go.item();
    g.accumulate(x, gx);
  });
}

}  // namespace das::ops
