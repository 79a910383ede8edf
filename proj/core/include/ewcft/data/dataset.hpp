#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ewcft::data {

using TokenId = std::uint32_t;
using TokenIds = std::vector<TokenId>;

inline constexpr std::size_t kSupports = 0;
inline constexpr std::size_t kRefutes = 1;
inline constexpr std::size_t kNei = 2;

// {"SUPPORTS", "REFUTES", "NEI"}
const std::vector<std::string>& default_label_names();

struct Instance {
  std::string id;
  TokenIds claim;
  TokenIds evidence;
  std::size_t label = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Bidirectional token <-> id table. Ids are dense and assigned in insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // Id of `token`, appending it if absent.
  TokenId add(std::string_view token);
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Parameters of the synthetic generative story. Vocabulary layout is a pure
// function of (vocab_size, n_topics): keywords, their antonyms, one giveaway
// cue per label, alternate forms of every keyword and antonym, then fillers.
struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t n_instances = 20000;
  std::size_t vocab_size = 160;
  std::size_t n_topics = 12;
  double bias_strength = 0.6;
  std::vector<double> label_distribution{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::size_t claim_length = 4;
  std::size_t evidence_length = 8;
  // Extra (keyword, antonym) pairs from unrelated topics mixed into evidence.
  std::size_t distractor_pairs = 0;
  // Probability that a topic keyword or antonym in a counterfactual or
  // challenge instance is written with its alternate form. The biased
  // original corpus never uses alternate forms.
  double alt_form_rate = 0.3;

  // Throws std::invalid_argument on out-of-range fields or a vocabulary too
  // small for the token inventory.
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct Provenance {
  std::string generator;
  std::uint64_t seed = 0;
  std::optional<GeneratorConfig> config;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// Labeled sentence-pair records over a shared vocabulary. Instances are
// validated on insertion: non-empty token lists, in-vocabulary ids, label in
// range and unique ids.
class Dataset {
 public:
  Dataset() : Dataset(Vocabulary{}) {}
  explicit Dataset(Vocabulary vocab, std::vector<std::string> label_names = default_label_names(),
                   Provenance provenance = {});

  void add(Instance instance);
  void reserve(std::size_t n) { instances_.reserve(n); }

  const std::vector<Instance>& instances() const noexcept { return instances_; }
  const Instance& operator[](std::size_t i) const { return instances_[i]; }
  std::size_t size() const noexcept { return instances_.size(); }
  bool empty() const noexcept { return instances_.empty(); }

  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::size_t num_classes() const noexcept { return label_names_.size(); }
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = std::move(p); }

  // New dataset holding the given instances, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> label_histogram() const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.vocab_ == b.vocab_ && a.label_names_ == b.label_names_ && a.provenance_ == b.provenance_ &&
           a.instances_ == b.instances_;
  }

 private:
  Vocabulary vocab_;
  std::vector<std::string> label_names_;
  Provenance provenance_;
  std::vector<Instance> instances_;
  std::unordered_set<std::string> ids_;
};

// Concatenation a-then-b. Throws std::invalid_argument when vocabularies or
// label sets differ.
Dataset merge(const Dataset& a, const Dataset& b);

struct Fold {
  Dataset train;
  Dataset validation;
};

// Seeded k-way partition; each instance lands in exactly one validation fold.
std::vector<Fold> kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed);

// Validation-fold index sets used by kfold, exposed for inspection.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace ewcft::data
