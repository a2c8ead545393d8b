#include "das/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "das/ops.hpp"

namespace das {

CostReport count_params(std::vector<Parameter*> params) {
  CostReport r;
  for (Parameter* p : params) r.add(p->name, p->numel(), 0);
  return r;
}

CostReport count_params(Network& net) { return count_params(net.parameters()); }

CostReport count_macs(const Network& net, std::size_t h, std::size_t w) {
  CostReport r = net.trace(h, w);
  r.notes.push_back("1 MAC = one multiply-accumulate; norms, activations, pooling and the gate multiply count 0");
  r.notes.push_back("deformable conv = offset predictor conv + k*k*c_in*c_out per site + 9 taps x 4 bilinear MACs per input channel per site");
  return r;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t h, std::size_t w,
                                    std::size_t out_h, std::size_t out_w) {
  if (src.size() != h * w || h == 0 || w == 0) throw std::invalid_argument("resize_bilinear: bad source plane");
  std::vector<double> out(out_h * out_w);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ly = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double lx = fx - static_cast<double>(x0);
      out[y * out_w + x] = (1 - ly) * ((1 - lx) * src[y0 * w + x0] + lx * src[y0 * w + x1]) +
                           ly * ((1 - lx) * src[y1 * w + x0] + lx * src[y1 * w + x1]);
    }
  }
  return out;
}

SaliencyMap grad_cam_from(const Tensor& activation, const Tensor& gradient, std::size_t out_h,
                          std::size_t out_w) {
  const Shape& s = activation.shape();
  if (gradient.shape() != s) {
    throw std::invalid_argument("grad_cam: gradient " + gradient.shape().str() + " does not match activation " +
                                s.str());
  }
  if (s.n < 1 || s.plane() == 0) throw std::invalid_argument("grad_cam: empty activation");
  const std::size_t hw = s.plane();
  std::vector<double> cam(hw, 0.0);
  for (std::size_t c = 0; c < s.c; ++c) {
    double weight = 0.0;
    for (std::size_t p = 0; p < hw; ++p) weight += gradient[c * hw + p];
    weight /= static_cast<double>(hw);
    for (std::size_t p = 0; p < hw; ++p) cam[p] += weight * activation[c * hw + p];
  }
  for (double& v : cam) v = std::max(v, 0.0);
  SaliencyMap m;
  m.h = out_h;
  m.w = out_w;
  m.weights = resize_bilinear(cam, s.h, s.w, out_h, out_w);
  for (double& v : m.weights) v = std::max(v, 0.0);
  return m;
}

SaliencyMap grad_cam(Network& net, const Tensor& image, int class_idx, const std::string& layer_name) {
  const Shape& s = image.shape();
  if (s.n != 1) throw std::invalid_argument("grad_cam expects a single image, got " + s.str());
  const bool was_training = net.training();
  std::vector<Parameter*> params = net.parameters();
  std::vector<Tensor> saved;
  saved.reserve(params.size());
  for (Parameter* p : params) saved.push_back(p->grad);

  net.set_training(false);
  Graph g;
  ActivationTaps taps;
  Var logits = net.forward(g, image, &taps);
  auto it = taps.find(layer_name);
  if (it == taps.end()) {
    net.set_training(was_training);
    throw std::invalid_argument("grad_cam: unknown layer '" + layer_name + "'");
  }
  if (class_idx < 0) {
    const Tensor& lv = logits.value();
    class_idx = static_cast<int>(std::max_element(lv.data().begin(), lv.data().end()) - lv.data().begin());
  }
  if (static_cast<std::size_t>(class_idx) >= logits.shape().c) {
    net.set_training(was_training);
    throw std::invalid_argument("grad_cam: class index " + std::to_string(class_idx) + " out of range");
  }
  g.backward(ops::pick(logits, 0, static_cast<std::size_t>(class_idx)));
  SaliencyMap m = grad_cam_from(it->second.value(), g.grad(it->second), s.h, s.w);
  m.layer = layer_name;
  m.class_index = class_idx;

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->grad = saved[i];
  net.set_training(was_training);
  return m;
}

std::vector<double> minmax_normalize(const std::vector<double>& v) {
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  std::vector<double> out(v.size(), 0.0);
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

SfdResult sfd_score(const SaliencyMap& map, const RegionMask& mask) {
  const std::size_t n = map.h * map.w;
  if (map.weights.size() != n || mask.h != map.h || mask.w != map.w || mask.region.size() != n ||
      mask.box.size() != n) {
    throw std::invalid_argument("sfd_score: map and masks must share dimensions");
  }
  const std::vector<double> w = minmax_normalize(map.weights);
  double sum_r = 0.0, sum_n = 0.0;
  std::size_t count_r = 0, count_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double scaled = std::exp(w[i]) - 1.0;
    if (mask.region[i]) {
      if (!mask.box[i]) throw std::invalid_argument("sfd_score: region R must lie inside box B");
      sum_r += scaled;
      ++count_r;
    } else if (mask.box[i]) {
      sum_n += scaled;
      ++count_n;
    }
  }
  if (count_r == 0) throw std::invalid_argument("sfd_score: region R is empty");
  SfdResult r;
  r.relevant_weight = sum_r / static_cast<double>(count_r);
  r.context_weight = count_n ? sum_n / static_cast<double>(count_n) : 0.0;
  const double denom = r.relevant_weight + r.context_weight;
  if (denom == 0.0) {
    r.score = 0.5;
    r.degenerate = true;
  } else {
    r.score = r.relevant_weight / denom;
  }
  return r;
}

RegionMask infer_box(const SaliencyMap& map, const std::vector<std::uint8_t>& region, double threshold) {
  const std::size_t n = map.h * map.w;
  if (map.weights.size() != n || region.size() != n) throw std::invalid_argument("infer_box: dimension mismatch");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("infer_box: threshold must be in [0, 1]");
  const std::vector<double> w = minmax_normalize(map.weights);
  std::size_t y0 = map.h, y1 = 0, x0 = map.w, x1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < map.h; ++y)
    for (std::size_t x = 0; x < map.w; ++x) {
      const std::size_t i = y * map.w + x;
      if (region[i] || w[i] >= threshold) {
        any = true;
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
      }
    }
  RegionMask m;
  m.h = map.h;
  m.w = map.w;
  m.region = region;
  m.box.assign(n, 0);
  if (!any) return m;
  for (std::size_t y = y0; y <= y1; ++y)
    for (std::size_t x = x0; x <= x1; ++x) m.box[y * map.w + x] = 1;
  return m;
}

}  // namespace das
