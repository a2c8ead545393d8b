#include "das/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace das::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace {

using Index = long long;

// C (m x n) = or += sum_p A(i, p) * B(p, j), with A(i, p) = a[i * ars + p * acs] and B, C
// row-major with n columns. Each output sums p in ascending order, so results match a
// direct loop bit for bit.
template <bool Accumulate>
void gemm_tiled(Index m, Index n, Index k, const double* a, Index ars, Index acs, const double* b, double* c) {
  constexpr Index MR = 4;
  constexpr Index NR = 8;
  auto edge = [&](Index i0, Index i1, Index j0) {
    for (Index i = i0; i < i1; ++i)
      for (Index j = j0; j < n; ++j) {
        double acc = 0.0;
        for (Index p = 0; p < k; ++p) acc += a[i * ars + p * acs] * b[p * n + j];
        double& dst = c[i * n + j];
        dst = Accumulate ? dst + acc : acc;
      }
  };
  Index i = 0;
  for (; i + MR <= m; i += MR) {
    Index j = 0;
    for (; j + NR <= n; j += NR) {
      double acc[MR][NR] = {};
      for (Index p = 0; p < k; ++p) {
        const double* bp = b + p * n + j;
        for (Index r = 0; r < MR; ++r) {
          const double av = a[(i + r) * ars + p * acs];
          for (Index q = 0; q < NR; ++q) acc[r][q] += av * bp[q];
        }
      }
      for (Index r = 0; r < MR; ++r)
        for (Index q = 0; q < NR; ++q) {
          double& dst = c[(i + r) * n + j + q];
          dst = Accumulate ? dst + acc[r][q] : acc[r][q];
        }
    }
    if (j < n) edge(i, i + MR, j);
  }
  if (i < m) edge(i, m, 0);
}

// C(m x n) = A(m x k) * B(k x n)
void gemm_nn(Index m, Index n, Index k, const double* a, const double* b, double* c) {
  gemm_tiled<false>(m, n, k, a, k, 1, b, c);
}

// C(k x n) = A(m x k)^T * B(m x n)
void gemm_tn(Index m, Index n, Index k, const double* a, const double* b, double* c) {
  gemm_tiled<false>(k, n, m, a, 1, k, b, c);
}

// C(m x k) += A(m x n) * B(k x n)^T, row blocks of C split across threads.
void gemm_nt_acc(Index m, Index n, Index k, const double* a, const double* b, double* c) {
  std::vector<double> bt(static_cast<std::size_t>(n * k));
  for (Index p = 0; p < k; ++p)
    for (Index j = 0; j < n; ++j) bt[static_cast<std::size_t>(j * k + p)] = b[p * n + j];
  constexpr Index kBlock = 4;
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; i += kBlock) {
    gemm_tiled<true>(std::min(kBlock, m - i), k, n, a + i * n, n, 1, bt.data(), c + i * k);
  }
}

struct ConvDims {
  Index n, cin, h, w;
  Index cout, oh, ow;
  Index k, stride, pad, groups;
  Index cin_g, cout_g;
  Index rows() const { return cin_g * k * k; }
  Index cols() const { return oh * ow; }
  bool is_pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

ConvDims conv_dims(const Shape& in, const Shape& wshape, const ConvGeometry& geom) {
  const Shape os = conv_output_shape(in, wshape, geom);
  ConvDims d{};
  d.n = static_cast<Index>(in.n);
  d.cin = static_cast<Index>(in.c);
  d.h = static_cast<Index>(in.h);
  d.w = static_cast<Index>(in.w);
  d.cout = static_cast<Index>(os.c);
  d.oh = static_cast<Index>(os.h);
  d.ow = static_cast<Index>(os.w);
  d.k = static_cast<Index>(wshape.h);
  d.stride = static_cast<Index>(geom.stride);
  d.pad = static_cast<Index>(geom.pad);
  d.groups = static_cast<Index>(geom.groups);
  d.cin_g = d.cin / d.groups;
  d.cout_g = d.cout / d.groups;
  return d;
}

// Column layout: row (ci, ky, kx), column (oy, ox).
void im2col(const ConvDims& d, const double* plane0, double* col) {
  for (Index ci = 0; ci < d.cin_g; ++ci) {
    const double* src = plane0 + ci * d.h * d.w;
    for (Index ky = 0; ky < d.k; ++ky) {
      for (Index kx = 0; kx < d.k; ++kx) {
        double* dst = col + ((ci * d.k + ky) * d.k + kx) * d.oh * d.ow;
        for (Index oy = 0; oy < d.oh; ++oy) {
          const Index y = oy * d.stride - d.pad + ky;
          double* drow = dst + oy * d.ow;
          if (y < 0 || y >= d.h) {
            std::memset(drow, 0, sizeof(double) * static_cast<std::size_t>(d.ow));
            continue;
          }
          const double* srow = src + y * d.w;
          for (Index ox = 0; ox < d.ow; ++ox) {
            const Index x = ox * d.stride - d.pad + kx;
            drow[ox] = (x >= 0 && x < d.w) ? srow[x] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_acc(const ConvDims& d, const double* col, double* plane0) {
  for (Index ci = 0; ci < d.cin_g; ++ci) {
    double* dst = plane0 + ci * d.h * d.w;
    for (Index ky = 0; ky < d.k; ++ky) {
      for (Index kx = 0; kx < d.k; ++kx) {
        const double* src = col + ((ci * d.k + ky) * d.k + kx) * d.oh * d.ow;
        for (Index oy = 0; oy < d.oh; ++oy) {
          const Index y = oy * d.stride - d.pad + ky;
          if (y < 0 || y >= d.h) continue;
          const double* srow = src + oy * d.ow;
          double* drow = dst + y * d.w;
          for (Index ox = 0; ox < d.ow; ++ox) {
            const Index x = ox * d.stride - d.pad + kx;
            if (x >= 0 && x < d.w) drow[x] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const ConvGeometry& geom) {
  const ConvDims d = conv_dims(input.shape(), weights.shape(), geom);
  Tensor out({input.shape().n, static_cast<std::size_t>(d.cout), static_cast<std::size_t>(d.oh),
              static_cast<std::size_t>(d.ow)});
  const Index units = d.n * d.groups;
  const bool direct = d.is_pointwise();

#pragma omp parallel
  {
    std::vector<double> col(direct ? 0 : static_cast<std::size_t>(d.rows() * d.cols()));
#pragma omp for schedule(static)
    for (Index u = 0; u < units; ++u) {
      const Index n = u / d.groups;
      const Index g = u % d.groups;
      const double* src = input.ptr() + (n * d.cin + g * d.cin_g) * d.h * d.w;
      if (!direct) {
        im2col(d, src, col.data());
        src = col.data();
      }
      const double* wg = weights.ptr() + g * d.cout_g * d.rows();
      double* dst = out.ptr() + (n * d.cout + g * d.cout_g) * d.cols();
      gemm_nn(d.cout_g, d.cols(), d.rows(), wg, src, dst);
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weights,
                             const ConvGeometry& geom, const Shape& input_shape) {
  const ConvDims d = conv_dims(input_shape, weights.shape(), geom);
  Tensor gin(input_shape);
  const Index units = d.n * d.groups;
  const bool direct = d.is_pointwise();

#pragma omp parallel
  {
    std::vector<double> col(static_cast<std::size_t>(d.rows() * d.cols()));
#pragma omp for schedule(static)
    for (Index u = 0; u < units; ++u) {
      const Index n = u / d.groups;
      const Index g = u % d.groups;
      const double* wg = weights.ptr() + g * d.cout_g * d.rows();
      const double* go = grad_out.ptr() + (n * d.cout + g * d.cout_g) * d.cols();
      double* dst = gin.ptr() + (n * d.cin + g * d.cin_g) * d.h * d.w;
      if (direct) {
        gemm_tn(d.cout_g, d.cols(), d.rows(), wg, go, dst);
      } else {
        gemm_tn(d.cout_g, d.cols(), d.rows(), wg, go, col.data());
        col2im_acc(d, col.data(), dst);
      }
    }
  }
  return gin;
}

Tensor conv2d_backward_weight(const Tensor& grad_out, const Tensor& input,
                              const ConvGeometry& geom, const Shape& weight_shape) {
  const ConvDims d = conv_dims(input.shape(), weight_shape, geom);
  Tensor gw(weight_shape);
  const bool direct = d.is_pointwise();
  std::vector<double> col(direct ? 0 : static_cast<std::size_t>(d.rows() * d.cols()));
  // Batch loop stays serial so every weight gradient sums samples in order.
  for (Index n = 0; n < d.n; ++n) {
    for (Index g = 0; g < d.groups; ++g) {
      const double* src = input.ptr() + (n * d.cin + g * d.cin_g) * d.h * d.w;
      if (!direct) {
        im2col(d, src, col.data());
        src = col.data();
      }
      const double* go = grad_out.ptr() + (n * d.cout + g * d.cout_g) * d.cols();
      gemm_nt_acc(d.cout_g, d.cols(), d.rows(), go, src, gw.ptr() + g * d.cout_g * d.rows());
    }
  }
  return gw;
}

namespace {

// One bilinear tap: up to four neighbours (index -1 when out of bounds).
struct Tap {
  Index idx[4];
  double wt[4];
  double ly, lx;
};

Tap make_tap(double y, double x, Index h, Index w) {
  Tap t{};
  const double fy = std::floor(y);
  const double fx = std::floor(x);
  if (!std::isfinite(fy) || !std::isfinite(fx) || fy < -2.0 || fx < -2.0 ||
      fy > static_cast<double>(h) || fx > static_cast<double>(w)) {
    for (int i = 0; i < 4; ++i) {
      t.idx[i] = -1;
      t.wt[i] = 0.0;
    }
    t.ly = t.lx = 0.0;
    return t;
  }
  t.ly = y - fy;
  t.lx = x - fx;
  const auto y0 = static_cast<Index>(fy);
  const auto x0 = static_cast<Index>(fx);
  const Index ys[4] = {y0, y0, y0 + 1, y0 + 1};
  const Index xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const double ws[4] = {(1 - t.ly) * (1 - t.lx), (1 - t.ly) * t.lx, t.ly * (1 - t.lx), t.ly * t.lx};
  for (int i = 0; i < 4; ++i) {
    const bool in = ys[i] >= 0 && ys[i] < h && xs[i] >= 0 && xs[i] < w;
    t.idx[i] = in ? ys[i] * w + xs[i] : -1;
    t.wt[i] = ws[i];
  }
  return t;
}

inline double corner(const double* plane, Index idx) { return idx >= 0 ? plane[idx] : 0.0; }

inline double tap_value(const Tap& t, const double* plane) {
  return t.wt[0] * corner(plane, t.idx[0]) + t.wt[1] * corner(plane, t.idx[1]) +
         t.wt[2] * corner(plane, t.idx[2]) + t.wt[3] * corner(plane, t.idx[3]);
}

// d(value)/dy and d(value)/dx; floor() makes these the right-hand derivatives at integers.
inline void tap_coord_grad(const Tap& t, const double* plane, double& dy, double& dx) {
  const double v00 = corner(plane, t.idx[0]);
  const double v01 = corner(plane, t.idx[1]);
  const double v10 = corner(plane, t.idx[2]);
  const double v11 = corner(plane, t.idx[3]);
  dy = (1 - t.lx) * (v10 - v00) + t.lx * (v11 - v01);
  dx = (1 - t.ly) * (v01 - v00) + t.ly * (v11 - v10);
}

inline void tap_scatter(const Tap& t, double g, double* plane) {
  for (int i = 0; i < 4; ++i)
    if (t.idx[i] >= 0) plane[t.idx[i]] += g * t.wt[i];
}

struct DeformDims {
  Index n, cin, h, w, cout, k, kk, pad;
  Index plane() const { return h * w; }
  Index rows() const { return cin * kk; }
};

DeformDims deform_dims(const Tensor& input, const Tensor& offset, const Tensor& mask,
                       const Tensor& weights) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  if (ws.h != ws.w || ws.h % 2 == 0) throw std::invalid_argument("deformable kernel must be odd and square");
  if (ws.c != is.c) {
    throw std::invalid_argument("deformable conv channel mismatch: input " + is.str() +
                                " weights " + ws.str());
  }
  const std::size_t kk = ws.h * ws.w;
  if (offset.shape() != Shape{is.n, 2 * kk, is.h, is.w}) {
    throw std::invalid_argument("deformable conv offset shape " + offset.shape().str() +
                                " does not match input " + is.str());
  }
  if (mask.shape() != Shape{is.n, kk, is.h, is.w}) {
    throw std::invalid_argument("deformable conv mask shape " + mask.shape().str() +
                                " does not match input " + is.str());
  }
  DeformDims d{};
  d.n = static_cast<Index>(is.n);
  d.cin = static_cast<Index>(is.c);
  d.h = static_cast<Index>(is.h);
  d.w = static_cast<Index>(is.w);
  d.cout = static_cast<Index>(ws.n);
  d.k = static_cast<Index>(ws.h);
  d.kk = static_cast<Index>(kk);
  d.pad = d.k / 2;
  return d;
}

// Taps for sample n, layout [t][p].
void build_taps(const DeformDims& d, const double* off_n, std::vector<Tap>& taps) {
  const Index hw = d.plane();
  for (Index t = 0; t < d.kk; ++t) {
    const Index ky = t / d.k;
    const Index kx = t % d.k;
    const double* dy = off_n + (2 * t) * hw;
    const double* dx = off_n + (2 * t + 1) * hw;
    for (Index p = 0; p < hw; ++p) {
      const Index oy = p / d.w;
      const Index ox = p % d.w;
      const double y = static_cast<double>(oy - d.pad + ky) + dy[p];
      const double x = static_cast<double>(ox - d.pad + kx) + dx[p];
      taps[static_cast<std::size_t>(t * hw + p)] = make_tap(y, x, d.h, d.w);
    }
  }
}

// Modulated deformable columns: row (ci, t), column p.
void deform_im2col(const DeformDims& d, const double* x_n, const double* mask_n,
                   const std::vector<Tap>& taps, double* col) {
  const Index hw = d.plane();
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < d.cin; ++ci) {
    const double* plane = x_n + ci * hw;
    for (Index t = 0; t < d.kk; ++t) {
      double* dst = col + (ci * d.kk + t) * hw;
      const Tap* tp = taps.data() + t * hw;
      const double* m = mask_n + t * hw;
      for (Index p = 0; p < hw; ++p) dst[p] = m[p] * tap_value(tp[p], plane);
    }
  }
}

}  // namespace

Tensor deform_conv2d_forward(const Tensor& input, const Tensor& offset, const Tensor& mask,
                             const Tensor& weights) {
  const DeformDims d = deform_dims(input, offset, mask, weights);
  const Index hw = d.plane();
  Tensor out({input.shape().n, static_cast<std::size_t>(d.cout), input.shape().h, input.shape().w});
  std::vector<Tap> taps(static_cast<std::size_t>(d.kk * hw));
  std::vector<double> col(static_cast<std::size_t>(d.rows() * hw));
  for (Index n = 0; n < d.n; ++n) {
    build_taps(d, offset.ptr() + n * 2 * d.kk * hw, taps);
    deform_im2col(d, input.ptr() + n * d.cin * hw, mask.ptr() + n * d.kk * hw, taps, col.data());
    double* dst = out.ptr() + n * d.cout * hw;
#pragma omp parallel for schedule(static)
    for (Index co = 0; co < d.cout; co += 4) {
      gemm_nn(std::min<Index>(4, d.cout - co), hw, d.rows(), weights.ptr() + co * d.rows(), col.data(),
              dst + co * hw);
    }
  }
  return out;
}

DeformConvGrads deform_conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                       const Tensor& offset, const Tensor& mask,
                                       const Tensor& weights) {
  const DeformDims d = deform_dims(input, offset, mask, weights);
  const Index hw = d.plane();
  DeformConvGrads g{Tensor(input.shape()), Tensor(offset.shape()), Tensor(mask.shape()),
                    Tensor(weights.shape())};
  std::vector<Tap> taps(static_cast<std::size_t>(d.kk * hw));
  std::vector<double> col(static_cast<std::size_t>(d.rows() * hw));
  std::vector<double> gcol(static_cast<std::size_t>(d.rows() * hw));

  for (Index n = 0; n < d.n; ++n) {
    const double* x_n = input.ptr() + n * d.cin * hw;
    const double* m_n = mask.ptr() + n * d.kk * hw;
    const double* go_n = grad_out.ptr() + n * d.cout * hw;
    build_taps(d, offset.ptr() + n * 2 * d.kk * hw, taps);
    deform_im2col(d, x_n, m_n, taps, col.data());

    gemm_nt_acc(d.cout, hw, d.rows(), go_n, col.data(), g.weights.ptr());

#pragma omp parallel for schedule(static)
    for (Index r = 0; r < d.rows(); ++r) {
      double* crow = gcol.data() + r * hw;
      std::memset(crow, 0, sizeof(double) * static_cast<std::size_t>(hw));
      for (Index co = 0; co < d.cout; ++co) {
        const double wv = weights[static_cast<std::size_t>(co * d.rows() + r)];
        const double* grow = go_n + co * hw;
        for (Index p = 0; p < hw; ++p) crow[p] += wv * grow[p];
      }
    }

    // Coordinate and modulation gradients: one writer per (t, p), channels summed in order.
    double* goff_n = g.offset.ptr() + n * 2 * d.kk * hw;
    double* gmask_n = g.mask.ptr() + n * d.kk * hw;
#pragma omp parallel for schedule(static)
    for (Index t = 0; t < d.kk; ++t) {
      const Tap* tp = taps.data() + t * hw;
      const double* m = m_n + t * hw;
      for (Index p = 0; p < hw; ++p) {
        double gy = 0.0, gx = 0.0, gm = 0.0;
        for (Index ci = 0; ci < d.cin; ++ci) {
          const double gc = gcol[static_cast<std::size_t>((ci * d.kk + t) * hw + p)];
          const double* plane = x_n + ci * hw;
          double dy, dx;
          tap_coord_grad(tp[p], plane, dy, dx);
          gm += gc * tap_value(tp[p], plane);
          gy += gc * m[p] * dy;
          gx += gc * m[p] * dx;
        }
        goff_n[(2 * t) * hw + p] = gy;
        goff_n[(2 * t + 1) * hw + p] = gx;
        gmask_n[t * hw + p] = gm;
      }
    }

    double* gx_n = g.input.ptr() + n * d.cin * hw;
#pragma omp parallel for schedule(static)
    for (Index ci = 0; ci < d.cin; ++ci) {
      double* plane = gx_n + ci * hw;
      for (Index t = 0; t < d.kk; ++t) {
        const Tap* tp = taps.data() + t * hw;
        const double* m = m_n + t * hw;
        const double* gc = gcol.data() + (ci * d.kk + t) * hw;
        for (Index p = 0; p < hw; ++p) tap_scatter(tp[p], gc[p] * m[p], plane);
      }
    }
  }
  return g;
}

namespace {

void check_flow(const Tensor& input, const Tensor& flow) {
  const Shape& s = input.shape();
  if (flow.shape() != Shape{s.n, 2, s.h, s.w}) {
    throw std::invalid_argument("grid_sample flow shape " + flow.shape().str() +
                                " does not match input " + s.str());
  }
}

void build_flow_taps(const Shape& s, const double* flow_n, std::vector<Tap>& taps) {
  const auto h = static_cast<Index>(s.h);
  const auto w = static_cast<Index>(s.w);
  const Index hw = h * w;
  for (Index p = 0; p < hw; ++p) {
    const double y = static_cast<double>(p / w) + flow_n[p];
    const double x = static_cast<double>(p % w) + flow_n[hw + p];
    taps[static_cast<std::size_t>(p)] = make_tap(y, x, h, w);
  }
}

}  // namespace

Tensor grid_sample_forward(const Tensor& input, const Tensor& flow) {
  check_flow(input, flow);
  const Shape& s = input.shape();
  const auto hw = static_cast<Index>(s.plane());
  const auto c = static_cast<Index>(s.c);
  Tensor out(s);
  std::vector<Tap> taps(static_cast<std::size_t>(hw));
  for (Index n = 0; n < static_cast<Index>(s.n); ++n) {
    build_flow_taps(s, flow.ptr() + n * 2 * hw, taps);
#pragma omp parallel for schedule(static)
    for (Index ci = 0; ci < c; ++ci) {
      const double* plane = input.ptr() + (n * c + ci) * hw;
      double* dst = out.ptr() + (n * c + ci) * hw;
      for (Index p = 0; p < hw; ++p) dst[p] = tap_value(taps[static_cast<std::size_t>(p)], plane);
    }
  }
  return out;
}

GridSampleGrads grid_sample_backward(const Tensor& grad_out, const Tensor& input,
                                     const Tensor& flow) {
  check_flow(input, flow);
  const Shape& s = input.shape();
  const auto hw = static_cast<Index>(s.plane());
  const auto c = static_cast<Index>(s.c);
  GridSampleGrads g{Tensor(s), Tensor(flow.shape())};
  std::vector<Tap> taps(static_cast<std::size_t>(hw));
  for (Index n = 0; n < static_cast<Index>(s.n); ++n) {
    build_flow_taps(s, flow.ptr() + n * 2 * hw, taps);
    double* gf = g.flow.ptr() + n * 2 * hw;
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < hw; ++p) {
      double gy = 0.0, gx = 0.0;
      for (Index ci = 0; ci < c; ++ci) {
        double dy, dx;
        tap_coord_grad(taps[static_cast<std::size_t>(p)], input.ptr() + (n * c + ci) * hw, dy, dx);
        const double go = grad_out[static_cast<std::size_t>((n * c + ci) * hw + p)];
        gy += go * dy;
        gx += go * dx;
      }
      gf[p] = gy;
      gf[hw + p] = gx;
    }
#pragma omp parallel for schedule(static)
    for (Index ci = 0; ci < c; ++ci) {
      double* plane = g.input.ptr() + (n * c + ci) * hw;
      const double* go = grad_out.ptr() + (n * c + ci) * hw;
      for (Index p = 0; p < hw; ++p) tap_scatter(taps[static_cast<std::size_t>(p)], go[p], plane);
    }
  }
  return g;
}

Tensor deform_conv2d_ref(const Tensor& input, const Tensor& offset, const Tensor& mask,
                         const Tensor& weights) {
  const DeformDims d = deform_dims(input, offset, mask, weights);
  Tensor out({input.shape().n, static_cast<std::size_t>(d.cout), input.shape().h, input.shape().w});
  for (Index n = 0; n < d.n; ++n)
    for (Index co = 0; co < d.cout; ++co)
      for (Index oy = 0; oy < d.h; ++oy)
        for (Index ox = 0; ox < d.w; ++ox) {
          const auto un = static_cast<std::size_t>(n);
          const auto uy = static_cast<std::size_t>(oy);
          const auto ux = static_cast<std::size_t>(ox);
          double acc = 0.0;
          for (Index ci = 0; ci < d.cin; ++ci)
            for (Index t = 0; t < d.kk; ++t) {
              const auto ut = static_cast<std::size_t>(t);
              const double y = static_cast<double>(oy - d.pad + t / d.k) + offset.at(un, 2 * ut, uy, ux);
              const double x = static_cast<double>(ox - d.pad + t % d.k) + offset.at(un, 2 * ut + 1, uy, ux);
              const double v = mask.at(un, ut, uy, ux) * bilinear_sample(input, y, x, un, static_cast<std::size_t>(ci));
              acc += weights.at(static_cast<std::size_t>(co), static_cast<std::size_t>(ci),
                                static_cast<std::size_t>(t / d.k), static_cast<std::size_t>(t % d.k)) * v;
            }
          out.at(un, static_cast<std::size_t>(co), uy, ux) = acc;
        }
  return out;
}

Tensor grid_sample_ref(const Tensor& input, const Tensor& flow) {
  check_flow(input, flow);
  const Shape& s = input.shape();
  Tensor out(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x)
          out.at(n, c, y, x) = bilinear_sample(input, static_cast<double>(y) + flow.at(n, 0, y, x),
                                               static_cast<double>(x) + flow.at(n, 1, y, x), n, c);
  return out;
}

}  // namespace das::kernels
