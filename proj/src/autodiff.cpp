#include "das/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace das {

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

Var Graph::input(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::param(Parameter& p) {
  Node node;
  node.value = p.value;
  node.requires_grad = p.requires_grad;
  node.param = &p;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.leaf = false;
  for (const Var& p : parents) {
    if (p.graph_ != this) throw std::invalid_argument("operand recorded on a different graph");
    node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (!backward) node.requires_grad = false;
  node.parents = std::move(parents);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Graph::grad_buffer(Node& node) {
  if (node.grad.shape() != node.value.shape() || node.grad.empty() != node.value.empty()) {
    node.grad = Tensor(node.value.shape());
  }
  return node.grad;
}

const Tensor& Graph::grad(Var v) {
  // Nodes no gradient has reached report zeros.
  return grad_buffer(nodes_.at(v.id_));
}

void Graph::accumulate(Var v, const Tensor& g) {
  Node& node = nodes_.at(v.id_);
  if (!node.requires_grad) return;
  Tensor& buf = grad_buffer(node);
  if (g.shape() != buf.shape()) {
    throw std::logic_error("gradient shape " + g.shape().str() + " does not match value " +
                           buf.shape().str());
  }
  double* dst = buf.ptr();
  const double* src = g.ptr();
  for (std::size_t i = 0; i < buf.numel(); ++i) dst[i] += src[i];
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw std::invalid_argument("loss belongs to a different graph");
  Node& root = nodes_.at(loss.id_);
  if (root.value.shape() != Shape{1, 1, 1, 1}) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                root.value.shape().str());
  }
  for (Node& node : nodes_) {
    if (!node.leaf) node.grad = Tensor();
  }
  if (!root.requires_grad) return;
  if (root.leaf) {
    grad_buffer(root)[0] += 1.0;
  } else {
    root.grad = Tensor::scalar(1.0);
  }

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.leaf || !node.requires_grad || node.grad.empty()) continue;
    node.backward(*this, node.grad);
  }

  for (Node& node : nodes_) {
    if (node.param == nullptr || !node.requires_grad || node.grad.empty()) continue;
    Parameter& p = *node.param;
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    for (std::size_t k = 0; k < p.grad.numel(); ++k) p.grad[k] += node.grad[k];
    // Parameter leaves forward their gradient once per backward.
    node.grad = Tensor();
  }
}

namespace {

double rel_err(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

}  // namespace

GradCheckResult finite_diff_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point,
                                  double epsilon) {
  Tensor analytic;
  {
    Graph g;
    Var x = g.input(point, true);
    Var y = f(g, x);
    g.backward(y);
    analytic = g.grad(x);
  }
  auto eval = [&](const Tensor& at) {
    Graph g;
    Var x = g.input(at, false);
    return f(g, x).value().item();
  };
  GradCheckResult r;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + epsilon;
    const double fp = eval(probe);
    probe[i] = orig - epsilon;
    const double fm = eval(probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * epsilon);
    r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic[i], numeric));
  }
  r.pass = r.max_rel_err < kGradCheckTolerance;
  return r;
}

GradCheckResult finite_diff_check(const std::function<Var(Graph&)>& loss,
                                  std::span<const GradProbe> probes, double epsilon) {
  std::vector<Parameter*> touched;
  for (const GradProbe& p : probes) {
    if (std::find(touched.begin(), touched.end(), p.param) == touched.end()) touched.push_back(p.param);
  }
  std::vector<Tensor> saved;
  for (Parameter* p : touched) {
    saved.push_back(p->grad);
    p->zero_grad();
  }
  {
    Graph g;
    g.backward(loss(g));
  }
  std::vector<double> analytic;
  analytic.reserve(probes.size());
  for (const GradProbe& p : probes) analytic.push_back(p.param->grad[p.index]);
  for (std::size_t i = 0; i < touched.size(); ++i) touched[i]->grad = saved[i];

  auto eval = [&]() {
    Graph g;
    return loss(g).value().item();
  };
  GradCheckResult r;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    double& v = probes[i].param->value[probes[i].index];
    const double orig = v;
    v = orig + epsilon;
    const double fp = eval();
    v = orig - epsilon;
    const double fm = eval();
    v = orig;
    const double numeric = (fp - fm) / (2.0 * epsilon);
    r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic[i], numeric));
  }
  r.pass = r.max_rel_err < kGradCheckTolerance;
  return r;
}

std::vector<GradProbe> all_coordinates(std::span<Parameter* const> params) {
  std::vector<GradProbe> out;
  for (Parameter* p : params)
    for (std::size_t i = 0; i < p->numel(); ++i) out.push_back({p, i});
  return out;
}

}  // namespace das
