#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "das/tensor.hpp"

namespace das {

// A trainable (or frozen) tensor owned by a layer. Gradients accumulate into `grad`
// across backward passes until zero_grad().
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  std::size_t numel() const { return value.numel(); }
  void zero_grad() { grad = Tensor(value.shape()); }
};

class Graph;

// Handle to a node recorded on a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Graph& graph() const { return *graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Operations are recorded in execution order, which is a
// topological order, and backward() replays them in reverse.
class Graph {
 public:
  // Propagates the output gradient to parents via Graph::accumulate.
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value, bool requires_grad = false);
  Var param(Parameter& p);

  // Records a derived node. `backward` may be empty for non-differentiable outputs.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. Intermediate gradients are reset on
  // every call; leaf and parameter gradients accumulate.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_.at(v.id_).value; }
  const Tensor& grad(Var v);
  bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }

  // Adds `g` into the gradient buffer of `v` when it requires grad.
  void accumulate(Var v, const Tensor& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = true;
    Parameter* param = nullptr;
    std::vector<Var> parents;
    BackwardFn backward;
  };

  Tensor& grad_buffer(Node& node);

  std::deque<Node> nodes_;  // stable addresses: value() references survive later records
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool pass = false;
};

inline constexpr double kGradCheckTolerance = 1e-3;

// Central-difference check of d f / d point against reverse mode.
GradCheckResult finite_diff_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point,
                                  double epsilon = 1e-6);

// Same check with respect to selected coordinates of parameters used inside `loss`.
struct GradProbe {
  Parameter* param = nullptr;
  std::size_t index = 0;
};

GradCheckResult finite_diff_check(const std::function<Var(Graph&)>& loss,
                                  std::span<const GradProbe> probes, double epsilon = 1e-6);

// Every coordinate of every listed parameter.
std::vector<GradProbe> all_coordinates(std::span<Parameter* const> params);

}  // namespace das
