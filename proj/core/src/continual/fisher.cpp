#include <stdexcept>

#include "ewcft/continual/regularizer.hpp"
#include "ewcft/util/rng.hpp"

namespace ewcft::continual {

std::vector<std::size_t> fisher_sample_indices(std::size_t dataset_size, std::size_t n, std::uint64_t seed) {
  if (dataset_size == 0) throw std::invalid_argument("fisher_sample_indices: empty dataset");
  util::Rng rng(seed);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = rng.index(dataset_size);
  return out;
}

FisherDiagonal estimate_fisher_diagonal(const model::Classifier& model, const data::Dataset& original, std::size_t n,
                                        std::uint64_t seed) {
  if (original.empty()) throw std::invalid_argument("estimate_fisher_diagonal: empty dataset");
  if (n == 0) throw std::invalid_argument("estimate_fisher_diagonal: sample size must be >= 1");

  ParameterArrays sums;
  for (const auto& p : model.parameters()) sums.emplace(p.id, std::vector<double>(p.value.size(), 0.0));

  for (std::size_t index : fisher_sample_indices(original.size(), n, seed)) {
    const data::Instance* one[] = {&original[index]};
    const std::size_t gold[] = {original[index].label};
    autodiff::Graph g;
    // -log p(gold | x); its gradient squares to the same value as that of log p.
    const autodiff::Var loss = g.nll(model.forward(g, model::Batch(one)), gold);
    for (const auto& [id, grad] : g.backward(loss)) {
      auto& acc = sums.at(id);
      const auto values = grad.values();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += values[i] * values[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& [id, acc] : sums) {
    for (double& v : acc) v *= inv;
  }
  return FisherDiagonal(std::move(sums), n, original.provenance().generator);
}

}  // namespace ewcft::continual
