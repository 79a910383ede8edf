#include "ewcft/model/bias_losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ewcft::model {

using autodiff::Graph;
using autodiff::Var;

std::string_view to_string(BiasMode mode) {
  switch (mode) {
    case BiasMode::kNone: return "none";
    case BiasMode::kPoe: return "poe";
    case BiasMode::kDfl: return "dfl";
  }
  return "unknown";
}

BiasMode parse_bias_mode(std::string_view text) {
  if (text == "none") return BiasMode::kNone;
  if (text == "poe") return BiasMode::kPoe;
  if (text == "dfl") return BiasMode::kDfl;
  throw std::invalid_argument("unknown bias mode '" + std::string(text) + "'");
}

void BiasModelConfig::validate() const {
  if (mode != BiasMode::kNone && mode != BiasMode::kPoe && mode != BiasMode::kDfl) {
    throw std::invalid_argument("BiasModelConfig: unknown mode");
  }
  if (!(beta >= 0.0)) throw std::invalid_argument("BiasModelConfig: beta must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("BiasModelConfig: gamma must be >= 0");
}

namespace {

void check_gold(std::span<const double> v, std::size_t gold) {
  if (gold >= v.size()) {
    throw std::out_of_range("gold class " + std::to_string(gold) + " outside " + std::to_string(v.size()) +
                            " classes");
  }
}

}  // namespace

double cross_entropy(std::span<const double> logp, std::size_t gold) {
  check_gold(logp, gold);
  return -logp[gold];
}

std::vector<double> poe_combine(std::span<const double> pair_logp, std::span<const double> claim_logp) {
  if (pair_logp.size() != claim_logp.size()) {
    throw autodiff::ShapeError("poe_combine", {pair_logp.size()}, {claim_logp.size()});
  }
  std::vector<double> joint(pair_logp.size());
  for (std::size_t i = 0; i < joint.size(); ++i) joint[i] = pair_logp[i] + claim_logp[i];
  const double mx = *std::max_element(joint.begin(), joint.end());
  double total = 0.0;
  for (double v : joint) total += std::exp(v - mx);
  const double lse = mx + std::log(total);
  for (double& v : joint) v -= lse;
  return joint;
}

double dfl_loss(std::span<const double> pair_logp, std::span<const double> claim_probs, std::size_t gold,
                double gamma) {
  check_gold(pair_logp, gold);
  check_gold(claim_probs, gold);
  if (!(gamma >= 0.0)) throw std::invalid_argument("dfl_loss: gamma must be >= 0");
  const double weight = std::pow(std::max(0.0, 1.0 - claim_probs[gold]), gamma);
  return weight * -pair_logp[gold];
}

double combined_bias_loss(std::span<const double> pair_logp, std::span<const double> claim_logp, std::size_t gold,
                          const BiasModelConfig& config) {
  switch (config.mode) {
    case BiasMode::kNone:
      return cross_entropy(pair_logp, gold);
    case BiasMode::kPoe:
      return cross_entropy(poe_combine(pair_logp, claim_logp), gold) + config.beta * cross_entropy(claim_logp, gold);
    case BiasMode::kDfl: {
      std::vector<double> probs(claim_logp.size());
      for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(claim_logp[i]);
      return dfl_loss(pair_logp, probs, gold, config.gamma) + config.beta * cross_entropy(claim_logp, gold);
    }
  }
  throw std::invalid_argument("combined_bias_loss: unknown bias mode");
}

Var combined_bias_loss(Graph& g, Var pair_logp, Var claim_logp, std::span<const std::size_t> gold,
                       const BiasModelConfig& config) {
  switch (config.mode) {
    case BiasMode::kNone:
      return g.nll(pair_logp, gold);
    case BiasMode::kPoe: {
      Var combined = g.log_softmax(g.add(pair_logp, g.detach(claim_logp)));
      return g.add(g.nll(combined, gold), g.scale(g.nll(claim_logp, gold), config.beta));
    }
    case BiasMode::kDfl: {
      const auto& expert = g.value(claim_logp);
      const std::size_t classes = expert.cols();
      std::vector<double> weights(gold.size());
      for (std::size_t r = 0; r < gold.size(); ++r) {
        const double p = std::exp(expert[r * classes + gold[r]]);
        weights[r] = std::pow(std::max(0.0, 1.0 - p), config.gamma);
      }
      return g.add(g.nll(pair_logp, gold, weights), g.scale(g.nll(claim_logp, gold), config.beta));
    }
  }
  throw std::invalid_argument("combined_bias_loss: unknown bias mode");
}

}  // namespace ewcft::model
