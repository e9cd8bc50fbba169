#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "xcos/ops.hpp"
#include "xcos/tensor.hpp"

namespace xcos {

// Record of forward operations supporting a single reverse pass from a
// scalar output. Leaves are either constants (no gradient) or bound
// Parameters; backward() accumulates d(output)/d(value) into each bound
// Parameter's gradient, additively.
class Graph {
 public:
  using NodeId = int;

  NodeId constant(Tensor value);
  NodeId param(Parameter& p);

  NodeId conv2d(NodeId input, NodeId kernel, NodeId bias, int stride, int padding);
  NodeId relu(NodeId x);
  NodeId l2_normalize(NodeId v, double epsilon = ops::kNormEpsilon);
  NodeId cosine(NodeId u, NodeId v);
  NodeId softmax_flat(NodeId x);
  NodeId concat_channels(NodeId a, NodeId b);
  NodeId reshape(NodeId x, std::vector<int> new_shape);
  NodeId linear(NodeId x, NodeId weight, NodeId bias);
  NodeId row_cosines(NodeId v, NodeId rows);
  NodeId grid_cosine_map(NodeId fa, NodeId fb);
  NodeId frobenius_inner(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId sum(NodeId x);
  // Additive angular margin cross-entropy over a vector of class cosines.
  NodeId margin_softmax(NodeId cosines, int label, double scale_s, double margin_m);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  bool wants_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
  size_t size() const { return nodes_.size(); }

  // Reverse pass from a scalar output node. Each recorded op is visited at
  // most once, in reverse insertion order (a reverse topological order).
  void backward(NodeId output);

  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    bool needs_grad = false;
    Parameter* bound = nullptr;
    std::function<void(Graph&, NodeId)> backprop;
  };

  NodeId push(Tensor value, std::initializer_list<NodeId> inputs,
              std::function<void(Graph&, NodeId)> backprop);
  Tensor& grad_buf(NodeId id);
  const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

// value <- value - lr * gradient, then gradient <- 0, for each parameter.
void sgd_step(const std::vector<Parameter*>& params, double lr);

void zero_gradients(const std::vector<Parameter*>& params);

// Compares the gradients produced by `run` against central finite
// differences. `run` must build a fresh graph over the given parameters,
// call backward, and return the scalar objective value; it must be a
// deterministic function of the parameter values. Returns the max over all
// parameter entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<double()>& run, const std::vector<Parameter*>& params,
                  double eps = 1e-6);

}  // namespace xcos
