#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ewcft/autodiff/graph.hpp"
#include "ewcft/continual/state.hpp"
#include "ewcft/data/dataset.hpp"
#include "ewcft/model/classifier.hpp"

namespace ewcft::continual {

ParameterArrays parameter_arrays(const model::Classifier& model);

// Deep copy of the model's current parameters.
ParameterSnapshot snapshot(const model::Classifier& model);

// FNV-1a digest of the ids and raw value bytes, as 16 hex digits.
std::string checksum(const ParameterArrays& values);

// Indices drawn uniformly with replacement from [0, dataset_size).
std::vector<std::size_t> fisher_sample_indices(std::size_t dataset_size, std::size_t n, std::uint64_t seed);

// Empirical diagonal Fisher: mean over n sampled instances of the squared
// gradient of log p(gold | x) with respect to every parameter. Throws
// std::invalid_argument on an empty dataset or n == 0.
FisherDiagonal estimate_fisher_diagonal(const model::Classifier& model, const data::Dataset& original, std::size_t n,
                                        std::uint64_t seed);

// F ≡ 1 with the snapshot's shapes.
FisherDiagonal unit_fisher(const ParameterSnapshot& anchor);

// Σ_i (λ/2) F_i (θ_i - θ*_i)² over the parameter leaves `theta`, recorded on
// the graph so backward() yields λ F_i (θ_i - θ*_i). Each leaf must be a
// parameter whose id appears in both maps with a matching length.
autodiff::Var elastic_penalty(autodiff::Graph& graph, std::span<const autodiff::Var> theta,
                              const ParameterSnapshot& anchor, const FisherDiagonal& fisher, double lambda);

// elastic_penalty with F ≡ 1.
autodiff::Var l2_penalty(autodiff::Graph& graph, std::span<const autodiff::Var> theta, const ParameterSnapshot& anchor,
                         double lambda);

// Value-only forms over plain arrays; same arithmetic as the graph forms.
double elastic_penalty(const ParameterArrays& theta, const ParameterSnapshot& anchor, const FisherDiagonal& fisher,
                       double lambda);
double l2_penalty(const ParameterArrays& theta, const ParameterSnapshot& anchor, double lambda);

autodiff::Var regularized_loss(autodiff::Graph& graph, autodiff::Var task_loss, autodiff::Var penalty);

}  // namespace ewcft::continual
