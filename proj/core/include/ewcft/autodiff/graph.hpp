#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ewcft/autodiff/tensor.hpp"

namespace ewcft::autodiff {

// Handle to a node on a Graph. Only meaningful for the graph that issued it.
struct Var {
  std::size_t index = 0;
};

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kAddRowBroadcast,
  kSub,
  kMul,
  kRelu,
  kTanh,
  kEmbeddingBag,
  kConcat,
  kLogSoftmax,
  kNll,
  kSum,
  kScale,
  kAddScalar,
};

std::string_view op_name(OpKind op);

// Gradients of named parameter leaves, keyed by parameter id.
using GradientMap = std::map<std::string, Tensor>;

using TokenSpan = std::span<const std::uint32_t>;

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
// the node index is a valid topological order. A Graph is single-threaded.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Leaf whose gradient is reported by backward() under `id`.
  Var parameter(std::string id, const Tensor& value);
  // Anonymous differentiable leaf.
  Var variable(Tensor value);
  Var constant(Tensor value);
  // Constant copy of an existing node's value; gradients do not flow through.
  Var detach(Var x);

  // [n,k] x [k,m] -> [n,m]
  Var matmul(Var a, Var b);
  // Same-shape elementwise sum, or [n,m] + [m] added to every row.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  // Elementwise product of same-shape operands.
  Var mul(Var a, Var b);
  Var relu(Var x);
  Var tanh(Var x);
  // Row b of the [bags.size(), D] result is the mean of table rows named in bags[b].
  Var embedding_bag(Var table, std::span<const TokenSpan> bags);
  // Column-wise concatenation of [n,p] and [n,q].
  Var concat(Var a, Var b);
  // Row-wise log-softmax of a rank-1 or rank-2 tensor.
  Var log_softmax(Var x);
  // Mean over rows of weights[i] * -logp[i, targets[i]]. Empty weights means 1.
  Var nll(Var logp, std::span<const std::size_t> targets, std::span<const double> weights = {});
  Var sum(Var x);
  Var scale(Var x, double factor);
  Var add_scalar(Var x, double offset);

  const Tensor& value(Var v) const { return node(v).out; }
  const std::optional<std::vector<double>>& grad(Var v) const { return node(v).out.grad(); }
  OpKind op(Var v) const { return node(v).op; }
  std::span<const std::size_t> inputs(Var v) const;
  // Parameter id of a parameter leaf, or nullptr.
  const std::string* parameter_id(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Reverse pass from a scalar loss. Every stale gradient is reset first, so
  // repeated calls return identical results.
  GradientMap backward(Var loss);

 private:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::array<std::size_t, 2> in{};
    std::size_t n_in = 0;
    Tensor out;
    double scalar = 0.0;
    std::vector<std::size_t> targets;
    std::vector<double> weights;
    std::vector<std::uint32_t> bag_ids;
    std::vector<std::size_t> bag_offsets;
    std::string param_id;
    bool is_parameter = false;
  };

  const Node& node(Var v) const;
  Var push(Node n);
  Node make(OpKind op, std::initializer_list<Var> ins, Tensor out) const;
  void backprop(std::size_t index);

  std::vector<Node> nodes_;
};

}  // namespace ewcft::autodiff
