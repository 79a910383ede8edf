#include "ewcft/model/classifier.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "ewcft/util/rng.hpp"

namespace ewcft::model {

using autodiff::Graph;
using autodiff::Shape;
using autodiff::Tensor;
using autodiff::TokenSpan;
using autodiff::Var;

namespace {

constexpr double kEmbeddingScale = 0.5;

Tensor normal_tensor(util::Rng& rng, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal() * stddev;
  return t;
}

Tensor xavier_tensor(util::Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  Tensor t(Shape{fan_in, fan_out});
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

void check_dims(const ModelDims& dims) {
  if (dims.vocab_size == 0 || dims.embed_dim == 0 || dims.hidden_dim == 0 || dims.num_classes < 2) {
    throw std::invalid_argument("ModelDims: sizes must be positive and num_classes >= 2");
  }
}

std::vector<TokenSpan> claim_bags(Batch batch) {
  std::vector<TokenSpan> bags;
  bags.reserve(batch.size());
  for (const auto* inst : batch) bags.emplace_back(inst->claim);
  return bags;
}

std::vector<TokenSpan> evidence_bags(Batch batch) {
  std::vector<TokenSpan> bags;
  bags.reserve(batch.size());
  for (const auto* inst : batch) bags.emplace_back(inst->evidence);
  return bags;
}

// Hidden tanh layer, output layer and log-softmax over an encoded batch.
Var classify(Graph& g, Var features, Var w1, Var b1, Var w2, Var b2) {
  Var hidden = g.tanh(g.add(g.matmul(features, w1), b1));
  return g.log_softmax(g.add(g.matmul(hidden, w2), b2));
}

}  // namespace

std::vector<Var> Classifier::bind(Graph& graph, std::string_view prefix) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) vars.push_back(graph.parameter(std::string(prefix) + p.id, p.value));
  return vars;
}

Var Classifier::forward(Graph& graph, Batch batch) const {
  const auto vars = bind(graph);
  return forward(graph, vars, batch);
}

std::vector<std::vector<double>> Classifier::log_probs(Batch batch) const {
  std::vector<std::vector<double>> out;
  if (batch.empty()) return out;
  Graph g;
  const Tensor& lp = g.value(forward(g, batch));
  const std::size_t c = lp.cols();
  out.reserve(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    out.emplace_back(lp.data().begin() + static_cast<std::ptrdiff_t>(r * c),
                     lp.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  }
  return out;
}

std::vector<double> Classifier::log_probs(const data::Instance& instance) const {
  const data::Instance* one[] = {&instance};
  return std::move(log_probs(Batch(one)).front());
}

const Parameter& Classifier::parameter(std::string_view id) const {
  for (const auto& p : params_) {
    if (p.id == id) return p;
  }
  throw std::out_of_range("Classifier: no parameter '" + std::string(id) + "'");
}

Parameter& Classifier::parameter(std::string_view id) {
  return const_cast<Parameter&>(std::as_const(*this).parameter(id));
}

std::size_t Classifier::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Classifier::load_parameters(const std::vector<Parameter>& params) {
  if (params.size() != params_.size()) {
    throw std::invalid_argument("load_parameters: expected " + std::to_string(params_.size()) + " parameters, got " +
                                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].id != params_[i].id) {
      throw std::invalid_argument("load_parameters: expected '" + params_[i].id + "', got '" + params[i].id + "'");
    }
    if (params[i].value.shape() != params_[i].value.shape()) {
      throw autodiff::ShapeError("load_parameters:" + params_[i].id, params_[i].value.shape(),
                                 params[i].value.shape());
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params_[i].value = Tensor(params[i].value.shape(), params[i].value.data());
  }
}

void Classifier::check_tokens(const data::TokenIds& tokens, std::string_view what) const {
  if (tokens.empty()) throw std::invalid_argument(std::string(what) + ": empty token list");
  for (auto id : tokens) {
    if (id >= dims_.vocab_size) {
      throw std::out_of_range(std::string(what) + ": token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(dims_.vocab_size));
    }
  }
}

PairClassifier::PairClassifier(ModelDims dims, std::uint64_t seed, Init init) : Classifier(dims, seed) {
  check_dims(dims);
  util::Rng rng(seed);
  const std::size_t v = dims.vocab_size, d = dims.embed_dim, h = dims.hidden_dim, c = dims.num_classes;
  params_.push_back({"claim_embedding", normal_tensor(rng, {v, d}, kEmbeddingScale)});
  params_.push_back({"evidence_embedding", normal_tensor(rng, {v, d}, kEmbeddingScale)});
  params_.push_back({"hidden.weight", xavier_tensor(rng, 2 * d, h)});
  params_.push_back({"hidden.bias", Tensor(Shape{h})});
  params_.push_back({"output.weight", init == Init::kZeroOutput ? Tensor(Shape{h, c}) : xavier_tensor(rng, h, c)});
  params_.push_back({"output.bias", Tensor(Shape{c})});
}

Var PairClassifier::forward(Graph& g, std::span<const Var> p, Batch batch) const {
  if (p.size() != params_.size()) throw std::invalid_argument("PairClassifier::forward: wrong parameter count");
  const auto claims = claim_bags(batch);
  const auto evidence = evidence_bags(batch);
  Var features = g.concat(g.embedding_bag(p[0], claims), g.embedding_bag(p[1], evidence));
  return classify(g, features, p[2], p[3], p[4], p[5]);
}

ClaimOnlyClassifier::ClaimOnlyClassifier(ModelDims dims, std::uint64_t seed, Init init) : Classifier(dims, seed) {
  check_dims(dims);
  util::Rng rng(seed);
  const std::size_t v = dims.vocab_size, d = dims.embed_dim, h = dims.hidden_dim, c = dims.num_classes;
  params_.push_back({"claim_embedding", normal_tensor(rng, {v, d}, kEmbeddingScale)});
  params_.push_back({"hidden.weight", xavier_tensor(rng, d, h)});
  params_.push_back({"hidden.bias", Tensor(Shape{h})});
  params_.push_back({"output.weight", init == Init::kZeroOutput ? Tensor(Shape{h, c}) : xavier_tensor(rng, h, c)});
  params_.push_back({"output.bias", Tensor(Shape{c})});
}

Var ClaimOnlyClassifier::forward(Graph& g, std::span<const Var> p, Batch batch) const {
  if (p.size() != params_.size()) throw std::invalid_argument("ClaimOnlyClassifier::forward: wrong parameter count");
  const auto claims = claim_bags(batch);
  return classify(g, g.embedding_bag(p[0], claims), p[1], p[2], p[3], p[4]);
}

std::unique_ptr<Classifier> make_classifier(std::string_view kind, ModelDims dims, std::uint64_t seed, Init init) {
  if (kind == "pair") return std::make_unique<PairClassifier>(dims, seed, init);
  if (kind == "claim_only") return std::make_unique<ClaimOnlyClassifier>(dims, seed, init);
  throw std::invalid_argument("make_classifier: unknown kind '" + std::string(kind) + "'");
}

std::vector<double> forward_pair(const PairClassifier& model, const data::TokenIds& claim,
                                 const data::TokenIds& evidence) {
  model.check_tokens(claim, "forward_pair claim");
  model.check_tokens(evidence, "forward_pair evidence");
  return model.log_probs(data::Instance{"", claim, evidence, 0});
}

std::vector<double> forward_claim_only(const ClaimOnlyClassifier& model, const data::TokenIds& claim) {
  model.check_tokens(claim, "forward_claim_only claim");
  // The evidence slot is ignored by the claim-only model.
  return model.log_probs(data::Instance{"", claim, claim, 0});
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace ewcft::model
