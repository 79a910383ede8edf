#include "ewcft/data/generators.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ewcft/util/rng.hpp"

namespace ewcft::data {

namespace {

constexpr std::size_t kMaxClaimAttempts = 1000;

std::size_t other_topic(util::Rng& rng, std::size_t n_topics, std::size_t avoid) {
  std::size_t t = rng.index(n_topics - 1);
  return t >= avoid ? t + 1 : t;
}

std::size_t other_topic(util::Rng& rng, std::size_t n_topics, std::size_t avoid1, std::size_t avoid2) {
  std::size_t t = other_topic(rng, n_topics, avoid1);
  while (t == avoid2) t = other_topic(rng, n_topics, avoid1);
  return t;
}

// Base or alternate form of a topic token; draws from rng only when alt_rate > 0.
TokenId surface(util::Rng& rng, TokenId base, TokenId alt, double alt_rate) {
  return alt_rate > 0.0 && rng.bernoulli(alt_rate) ? alt : base;
}

TokenIds make_claim(util::Rng& rng, const TokenInventory& inv, const GeneratorConfig& config, std::size_t topic,
                    double alt_rate) {
  TokenIds claim{surface(rng, inv.keyword(topic), inv.alt_keyword(topic), alt_rate)};
  for (std::size_t i = 1; i < config.claim_length; ++i) claim.push_back(inv.filler(rng.index(inv.n_fillers())));
  return claim;
}

// Evidence for `label` about `topic`: one keyword and one antonym token, at most
// one of which belongs to `topic`, plus distractor pairs and fillers.
TokenIds make_evidence(util::Rng& rng, const TokenInventory& inv, const GeneratorConfig& config,
                       std::size_t topic, std::size_t label, double alt_rate) {
  TokenIds evidence;
  const std::size_t n = inv.n_topics();
  const auto keyword = [&](std::size_t t) { return surface(rng, inv.keyword(t), inv.alt_keyword(t), alt_rate); };
  const auto antonym = [&](std::size_t t) { return surface(rng, inv.antonym(t), inv.alt_antonym(t), alt_rate); };
  switch (label) {
    case kSupports:
      evidence.push_back(keyword(topic));
      evidence.push_back(antonym(other_topic(rng, n, topic)));
      break;
    case kRefutes:
      evidence.push_back(antonym(topic));
      evidence.push_back(keyword(other_topic(rng, n, topic)));
      break;
    default: {
      const std::size_t a = other_topic(rng, n, topic);
      const std::size_t b = other_topic(rng, n, topic, a);
      evidence.push_back(keyword(a));
      evidence.push_back(antonym(b));
      break;
    }
  }
  for (std::size_t d = 0; d < config.distractor_pairs; ++d) {
    evidence.push_back(keyword(other_topic(rng, n, topic)));
    evidence.push_back(antonym(other_topic(rng, n, topic)));
  }
  while (evidence.size() < config.evidence_length) evidence.push_back(inv.filler(rng.index(inv.n_fillers())));
  rng.shuffle(evidence);
  return evidence;
}

std::string instance_id(std::string_view prefix, std::uint64_t seed, std::size_t i) {
  return std::string(prefix) + "-" + std::to_string(seed) + "-" + std::to_string(i);
}

}  // namespace

TokenInventory::TokenInventory(const GeneratorConfig& config)
    : n_topics_(config.n_topics),
      first_filler_(4 * config.n_topics + kCues),
      n_fillers_(config.vocab_size - first_filler_) {
  config.validate();
}

Vocabulary synthetic_vocabulary(const GeneratorConfig& config) {
  const TokenInventory inv(config);
  std::vector<std::string> tokens;
  tokens.reserve(config.vocab_size);
  for (std::size_t t = 0; t < inv.n_topics(); ++t) tokens.push_back("kw" + std::to_string(t));
  for (std::size_t t = 0; t < inv.n_topics(); ++t) tokens.push_back("ant" + std::to_string(t));
  for (const auto& label : default_label_names()) {
    std::string lower = label;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    tokens.push_back(std::string(kCuePrefix) + lower);
  }
  for (std::size_t t = 0; t < inv.n_topics(); ++t) tokens.push_back("kw" + std::to_string(t) + "_alt");
  for (std::size_t t = 0; t < inv.n_topics(); ++t) tokens.push_back("ant" + std::to_string(t) + "_alt");
  for (std::size_t j = 0; j < inv.n_fillers(); ++j) tokens.push_back("w" + std::to_string(j));
  return Vocabulary(std::move(tokens));
}

Dataset generate_biased_original(const GeneratorConfig& config) {
  const TokenInventory inv(config);
  util::Rng rng(config.seed);
  Dataset out(synthetic_vocabulary(config), default_label_names(),
              Provenance{"biased_original", config.seed, config});
  out.reserve(config.n_instances);
  for (std::size_t i = 0; i < config.n_instances; ++i) {
    const std::size_t label = rng.categorical(config.label_distribution);
    const std::size_t topic = rng.index(inv.n_topics());
    TokenIds claim = make_claim(rng, inv, config, topic, 0.0);
    if (rng.bernoulli(config.bias_strength)) claim.push_back(inv.cue(label));
    rng.shuffle(claim);
    TokenIds evidence = make_evidence(rng, inv, config, topic, label, 0.0);
    out.add(Instance{instance_id("orig", config.seed, i), std::move(claim), std::move(evidence), label});
  }
  return out;
}

Dataset generate_symmetric_counterfactual(const Dataset& base, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs < 1) throw std::invalid_argument("generate_symmetric_counterfactual: n_pairs must be at least 1");
  if (!base.provenance().config) {
    throw std::invalid_argument("generate_symmetric_counterfactual: base dataset carries no generator config");
  }
  GeneratorConfig config = *base.provenance().config;
  config.seed = seed;
  const TokenInventory inv(config);
  if (!(synthetic_vocabulary(config) == base.vocab())) {
    throw std::invalid_argument("generate_symmetric_counterfactual: base vocabulary does not match its config");
  }
  util::Rng rng(seed);
  Dataset out(base.vocab(), base.label_names(), Provenance{"symmetric_counterfactual", seed, config});
  out.reserve(2 * n_pairs);
  std::set<TokenIds> seen_claims;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    TokenIds claim;
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == kMaxClaimAttempts) {
        throw std::invalid_argument("generate_symmetric_counterfactual: cannot draw enough distinct claims");
      }
      const std::size_t topic = rng.index(inv.n_topics());
      claim = make_claim(rng, inv, config, topic, config.alt_form_rate);
      if (rng.bernoulli(config.bias_strength)) claim.push_back(inv.cue(rng.bernoulli(0.5) ? kSupports : kRefutes));
      rng.shuffle(claim);
      TokenIds key = claim;
      std::sort(key.begin(), key.end());
      if (seen_claims.insert(std::move(key)).second) {
        TokenIds support = make_evidence(rng, inv, config, topic, kSupports, config.alt_form_rate);
        TokenIds refute = make_evidence(rng, inv, config, topic, kRefutes, config.alt_form_rate);
        const std::string stem = instance_id("sym", seed, i);
        out.add(Instance{stem + "-s", claim, std::move(support), kSupports});
        out.add(Instance{stem + "-r", claim, std::move(refute), kRefutes});
        break;
      }
    }
  }
  return out;
}

Dataset generate_single_label_challenge(const GeneratorConfig& config) {
  const TokenInventory inv(config);
  util::Rng rng(config.seed);
  Dataset out(synthetic_vocabulary(config), default_label_names(),
              Provenance{"single_label_challenge", config.seed, config});
  out.reserve(config.n_instances);
  const std::size_t n_labels = default_label_names().size();
  for (std::size_t i = 0; i < config.n_instances; ++i) {
    const std::size_t topic = rng.index(inv.n_topics());
    TokenIds claim = make_claim(rng, inv, config, topic, config.alt_form_rate);
    if (rng.bernoulli(config.bias_strength)) claim.push_back(inv.cue(rng.index(n_labels)));
    rng.shuffle(claim);
    TokenIds evidence = make_evidence(rng, inv, config, topic, kRefutes, config.alt_form_rate);
    out.add(Instance{instance_id("chal", config.seed, i), std::move(claim), std::move(evidence), kRefutes});
  }
  return out;
}

}  // namespace ewcft::data
