#include <stdexcept>

#include "ewcft/continual/regularizer.hpp"

namespace ewcft::continual {

using autodiff::Graph;
using autodiff::Tensor;
using autodiff::Var;

Var elastic_penalty(Graph& g, std::span<const Var> theta, const ParameterSnapshot& anchor,
                    const FisherDiagonal& fisher, double lambda) {
  check_compatible(anchor.values(), fisher.values(), "elastic_penalty snapshot/fisher");
  if (theta.size() != anchor.size()) {
    throw autodiff::ShapeError("elastic_penalty: parameter count", {theta.size()}, {anchor.size()});
  }
  Var total = g.constant(Tensor::scalar(0.0));
  for (Var p : theta) {
    const std::string* id = g.parameter_id(p);
    if (id == nullptr) throw std::invalid_argument("elastic_penalty: theta entries must be parameter leaves");
    // Copied: adding nodes may reallocate the graph's storage.
    const autodiff::Shape shape = g.value(p).shape();
    const auto& star = anchor.at(*id);
    const auto& f = fisher.at(*id);
    if (star.size() != autodiff::element_count(shape)) {
      throw autodiff::ShapeError("elastic_penalty:" + *id, shape, {star.size()});
    }
    Var d = g.sub(p, g.constant(Tensor(shape, star)));
    Var weighted = g.mul(g.constant(Tensor(shape, f)), g.mul(d, d));
    total = g.add(total, g.sum(weighted));
  }
  return g.scale(total, lambda / 2.0);
}

Var l2_penalty(Graph& g, std::span<const Var> theta, const ParameterSnapshot& anchor, double lambda) {
  return elastic_penalty(g, theta, anchor, unit_fisher(anchor), lambda);
}

double elastic_penalty(const ParameterArrays& theta, const ParameterSnapshot& anchor, const FisherDiagonal& fisher,
                       double lambda) {
  check_compatible(theta, anchor.values(), "elastic_penalty theta/snapshot");
  Graph g;
  std::vector<Var> leaves;
  for (const auto& [id, v] : theta) leaves.push_back(g.parameter(id, Tensor({v.size()}, v)));
  return g.value(elastic_penalty(g, leaves, anchor, fisher, lambda)).item();
}

double l2_penalty(const ParameterArrays& theta, const ParameterSnapshot& anchor, double lambda) {
  return elastic_penalty(theta, anchor, unit_fisher(anchor), lambda);
}

Var regularized_loss(Graph& g, Var task_loss, Var penalty) {
  if (!g.value(task_loss).is_scalar() || !g.value(penalty).is_scalar()) {
    throw std::invalid_argument("regularized_loss: both terms must be scalars");
  }
  return g.add(task_loss, penalty);
}

}  // namespace ewcft::continual
