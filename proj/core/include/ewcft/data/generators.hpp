#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "ewcft/data/dataset.hpp"

namespace ewcft::data {

// Vocabulary entries whose text starts with this prefix are giveaway cues.
inline constexpr std::string_view kCuePrefix = "cue_";

// Token ids of the synthetic vocabulary, as laid out by synthetic_vocabulary().
class TokenInventory {
 public:
  explicit TokenInventory(const GeneratorConfig& config);

  TokenId keyword(std::size_t topic) const { return static_cast<TokenId>(topic); }
  TokenId antonym(std::size_t topic) const { return static_cast<TokenId>(n_topics_ + topic); }
  TokenId cue(std::size_t label) const { return static_cast<TokenId>(2 * n_topics_ + label); }
  TokenId alt_keyword(std::size_t topic) const { return static_cast<TokenId>(2 * n_topics_ + kCues + topic); }
  TokenId alt_antonym(std::size_t topic) const { return static_cast<TokenId>(3 * n_topics_ + kCues + topic); }
  TokenId filler(std::size_t j) const { return static_cast<TokenId>(first_filler_ + j); }
  std::size_t n_topics() const noexcept { return n_topics_; }
  std::size_t n_fillers() const noexcept { return n_fillers_; }

 private:
  static constexpr std::size_t kCues = 3;
  std::size_t n_topics_;
  std::size_t first_filler_;
  std::size_t n_fillers_;
};

Vocabulary synthetic_vocabulary(const GeneratorConfig& config);

// FEVER-like corpus. The label follows from whether the evidence holds the
// claim topic's keyword (SUPPORTS), its antonym (REFUTES) or neither (NEI);
// every evidence passage carries exactly one keyword and one antonym so the
// label cannot be read off token counts. With probability bias_strength the
// claim also carries the label's giveaway cue.
Dataset generate_biased_original(const GeneratorConfig& config);

// 2·n_pairs SUPPORTS/REFUTES instances; each claim appears once with
// supporting and once with refuting evidence, so any cue it carries is
// balanced across labels. Generation rules come from base.provenance().config;
// topic tokens switch to their alternate forms at alt_form_rate.
Dataset generate_symmetric_counterfactual(const Dataset& base, std::size_t n_pairs, std::uint64_t seed);

// n_instances REFUTES instances with antonym-bearing evidence. Cues, when
// injected, are drawn uniformly over all labels; topic tokens switch to their
// alternate forms at alt_form_rate.
Dataset generate_single_label_challenge(const GeneratorConfig& config);

// Plug-in estimate, in bits, of the mutual information between the label and
// the set of giveaway cues present in the claim (cues found by kCuePrefix).
double claim_label_mutual_information(const Dataset& dataset);

// Same estimator with an explicit list of feature tokens.
double claim_label_mutual_information(const Dataset& dataset, std::span<const TokenId> feature_tokens);

}  // namespace ewcft::data
