#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ewcft/autodiff/graph.hpp"

namespace ewcft::model {

enum class BiasMode { kNone, kPoe, kDfl };

std::string_view to_string(BiasMode mode);
// Accepts "none", "poe" and "dfl"; throws std::invalid_argument otherwise.
BiasMode parse_bias_mode(std::string_view text);

// beta weights the claim-only expert's own cross-entropy term; gamma is the
// focal exponent and only matters for DFL.
struct BiasModelConfig {
  BiasMode mode = BiasMode::kNone;
  double beta = 0.0;
  double gamma = 0.0;
  // When false (the default) predictions come from the pair model alone.
  bool use_expert_at_inference = false;

  void validate() const;

  friend bool operator==(const BiasModelConfig&, const BiasModelConfig&) = default;
};

// -logp[gold]
double cross_entropy(std::span<const double> logp, std::size_t gold);

// Renormalized sum of log-probabilities (product of experts).
std::vector<double> poe_combine(std::span<const double> pair_logp, std::span<const double> claim_logp);

// (1 - claim_probs[gold])^gamma * -pair_logp[gold]
double dfl_loss(std::span<const double> pair_logp, std::span<const double> claim_probs, std::size_t gold,
                double gamma);

// none: CE(pair); poe: CE(poe_combine(pair, claim)) + beta CE(claim);
// dfl: dfl_loss(pair, exp(claim)) + beta CE(claim).
double combined_bias_loss(std::span<const double> pair_logp, std::span<const double> claim_logp, std::size_t gold,
                          const BiasModelConfig& config);

// Batched, differentiable counterpart over [batch, classes] log-probabilities,
// averaged over the batch. The expert enters the PoE / DFL term as a constant,
// so it is trained only through its own beta-weighted cross-entropy.
autodiff::Var combined_bias_loss(autodiff::Graph& graph, autodiff::Var pair_logp, autodiff::Var claim_logp,
                                 std::span<const std::size_t> gold, const BiasModelConfig& config);

}  // namespace ewcft::model
