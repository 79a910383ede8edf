#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ewcft/autodiff/graph.hpp"
#include "ewcft/data/dataset.hpp"

namespace ewcft::model {

struct Parameter {
  std::string id;
  autodiff::Tensor value;
};

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t num_classes = 3;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Init {
  kRandom,
  // Random everywhere except a zero output layer, so every input maps to the
  // uniform distribution.
  kZeroOutput,
};

using Batch = std::span<const data::Instance* const>;

// A classifier owns a fixed list of named parameters and records its forward
// computation on a caller-supplied Graph. Instances of a trained (frozen)
// classifier may be read concurrently.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string_view kind() const = 0;
  virtual std::unique_ptr<Classifier> clone() const = 0;

  // Records every parameter as a graph leaf, in parameters() order, with
  // `prefix` prepended to each leaf id.
  std::vector<autodiff::Var> bind(autodiff::Graph& graph, std::string_view prefix = {}) const;

  // [batch, num_classes] log-probabilities using leaves returned by bind().
  virtual autodiff::Var forward(autodiff::Graph& graph, std::span<const autodiff::Var> params,
                                Batch batch) const = 0;
  autodiff::Var forward(autodiff::Graph& graph, Batch batch) const;

  // Graph-free convenience: log-probabilities for each instance of a batch.
  std::vector<std::vector<double>> log_probs(Batch batch) const;
  std::vector<double> log_probs(const data::Instance& instance) const;

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  const Parameter& parameter(std::string_view id) const;
  Parameter& parameter(std::string_view id);
  std::size_t parameter_count() const noexcept;

  const ModelDims& dims() const noexcept { return dims_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // Replaces every parameter value; ids and shapes must match exactly.
  void load_parameters(const std::vector<Parameter>& params);

  // Throws std::invalid_argument when empty, std::out_of_range on an id
  // outside the vocabulary.
  void check_tokens(const data::TokenIds& tokens, std::string_view what) const;

 protected:
  Classifier(ModelDims dims, std::uint64_t seed) : dims_(dims), seed_(seed) {}
  Classifier(const Classifier&) = default;

  ModelDims dims_;
  std::uint64_t seed_;
  std::vector<Parameter> params_;
};

// Mean-pooled claim and evidence embeddings (separate tables), concatenated,
// one tanh hidden layer, linear output, log-softmax.
class PairClassifier final : public Classifier {
 public:
  PairClassifier(ModelDims dims, std::uint64_t seed, Init init = Init::kRandom);

  std::string_view kind() const override { return "pair"; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<PairClassifier>(*this); }
  using Classifier::forward;
  autodiff::Var forward(autodiff::Graph& graph, std::span<const autodiff::Var> params, Batch batch) const override;
};

// Same architecture over the claim alone; the hypothesis-only bias probe and
// the expert used by PoE / DFL training.
class ClaimOnlyClassifier final : public Classifier {
 public:
  ClaimOnlyClassifier(ModelDims dims, std::uint64_t seed, Init init = Init::kRandom);

  std::string_view kind() const override { return "claim_only"; }
  std::unique_ptr<Classifier> clone() const override { return std::make_unique<ClaimOnlyClassifier>(*this); }
  using Classifier::forward;
  autodiff::Var forward(autodiff::Graph& graph, std::span<const autodiff::Var> params, Batch batch) const override;
};

std::unique_ptr<Classifier> make_classifier(std::string_view kind, ModelDims dims, std::uint64_t seed,
                                            Init init = Init::kRandom);

// Log-probabilities for one claim/evidence pair. Throws std::invalid_argument
// on an empty token list and std::out_of_range on an out-of-vocabulary id.
std::vector<double> forward_pair(const PairClassifier& model, const data::TokenIds& claim,
                                 const data::TokenIds& evidence);
std::vector<double> forward_claim_only(const ClaimOnlyClassifier& model, const data::TokenIds& claim);

// Argmax with ties going to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace ewcft::model
