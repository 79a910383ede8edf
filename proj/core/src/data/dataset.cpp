#include "ewcft/data/dataset.hpp"

#include <cmath>
#include <numeric>

namespace ewcft::data {

const std::vector<std::string>& default_label_names() {
  static const std::vector<std::string> names{"SUPPORTS", "REFUTES", "NEI"};
  return names;
}

void GeneratorConfig::validate() const {
  if (n_topics < 3) throw std::invalid_argument("GeneratorConfig: n_topics must be at least 3");
  if (claim_length < 1) throw std::invalid_argument("GeneratorConfig: claim_length must be at least 1");
  if (evidence_length < 2 * (distractor_pairs + 1)) {
    throw std::invalid_argument("GeneratorConfig: evidence_length too short for topic tokens");
  }
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) {
    throw std::invalid_argument("GeneratorConfig: bias_strength must lie in [0, 1]");
  }
  if (label_distribution.size() != default_label_names().size()) {
    throw std::invalid_argument("GeneratorConfig: label_distribution needs one weight per class");
  }
  double total = 0.0;
  for (double w : label_distribution) {
    if (!(w >= 0.0)) throw std::invalid_argument("GeneratorConfig: negative label weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("GeneratorConfig: label_distribution must sum to 1");
  }
  if (!(alt_form_rate >= 0.0 && alt_form_rate <= 1.0)) {
    throw std::invalid_argument("GeneratorConfig: alt_form_rate must lie in [0, 1]");
  }
  const std::size_t reserved = 4 * n_topics + default_label_names().size();
  // Fillers must cover a claim plus evidence without exhausting the pool.
  const std::size_t min_fillers = std::max(claim_length, evidence_length);
  if (vocab_size < reserved + min_fillers) {
    throw std::invalid_argument("GeneratorConfig: vocab_size " + std::to_string(vocab_size) +
                                " too small for keyword/antonym/giveaway inventory (need at least " +
                                std::to_string(reserved + min_fillers) + ")");
  }
}

Dataset::Dataset(Vocabulary vocab, std::vector<std::string> label_names, Provenance provenance)
    : vocab_(std::move(vocab)), label_names_(std::move(label_names)), provenance_(std::move(provenance)) {
  if (label_names_.empty()) throw std::invalid_argument("Dataset: at least one label is required");
}

void Dataset::add(Instance instance) {
  if (instance.claim.empty() || instance.evidence.empty()) {
    throw std::invalid_argument("Dataset: instance '" + instance.id + "' has an empty token list");
  }
  if (instance.label >= label_names_.size()) {
    throw std::invalid_argument("Dataset: instance '" + instance.id + "' label " +
                                std::to_string(instance.label) + " out of range");
  }
  for (const auto* tokens : {&instance.claim, &instance.evidence}) {
    for (auto id : *tokens) {
      if (id >= vocab_.size()) {
        throw std::invalid_argument("Dataset: instance '" + instance.id + "' token id " + std::to_string(id) +
                                    " outside vocabulary");
      }
    }
  }
  if (!ids_.insert(instance.id).second) {
    throw std::invalid_argument("Dataset: duplicate instance id '" + instance.id + "'");
  }
  instances_.push_back(std::move(instance));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(vocab_, label_names_, provenance_);
  out.reserve(indices.size());
  for (auto i : indices) out.add(instances_.at(i));
  return out;
}

std::vector<std::size_t> Dataset::label_histogram() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (const auto& inst : instances_) ++counts[inst.label];
  return counts;
}

Dataset merge(const Dataset& a, const Dataset& b) {
  if (!(a.vocab() == b.vocab())) throw std::invalid_argument("merge: vocabularies differ");
  if (a.label_names() != b.label_names()) throw std::invalid_argument("merge: label sets differ");
  Provenance p{"merge(" + a.provenance().generator + "," + b.provenance().generator + ")",
               a.provenance().seed, a.provenance().config};
  Dataset out(a.vocab(), a.label_names(), std::move(p));
  out.reserve(a.size() + b.size());
  for (const auto& inst : a.instances()) out.add(inst);
  for (const auto& inst : b.instances()) out.add(inst);
  return out;
}

}  // namespace ewcft::data
