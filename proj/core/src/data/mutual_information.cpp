#include <algorithm>
#include <cmath>
#include <map>

#include "ewcft/data/generators.hpp"

namespace ewcft::data {

double claim_label_mutual_information(const Dataset& dataset) {
  std::vector<TokenId> cues;
  const auto& tokens = dataset.vocab().tokens();
  for (std::size_t id = 0; id < tokens.size(); ++id) {
    if (tokens[id].starts_with(kCuePrefix)) cues.push_back(static_cast<TokenId>(id));
  }
  return claim_label_mutual_information(dataset, cues);
}

double claim_label_mutual_information(const Dataset& dataset, std::span<const TokenId> feature_tokens) {
  if (dataset.empty()) return 0.0;
  // Feature value: sorted list of which feature tokens occur in the claim.
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> joint;
  std::vector<std::size_t> label_counts(dataset.num_classes(), 0);
  for (const auto& inst : dataset.instances()) {
    std::vector<std::size_t> present;
    for (std::size_t f = 0; f < feature_tokens.size(); ++f) {
      if (std::find(inst.claim.begin(), inst.claim.end(), feature_tokens[f]) != inst.claim.end()) {
        present.push_back(f);
      }
    }
    auto& row = joint[present];
    if (row.empty()) row.assign(dataset.num_classes(), 0);
    ++row[inst.label];
    ++label_counts[inst.label];
  }
  const double n = static_cast<double>(dataset.size());
  double mi = 0.0;
  for (const auto& [feature, counts] : joint) {
    double feature_total = 0.0;
    for (auto c : counts) feature_total += static_cast<double>(c);
    for (std::size_t y = 0; y < counts.size(); ++y) {
      if (counts[y] == 0) continue;
      const double pxy = static_cast<double>(counts[y]) / n;
      const double px = feature_total / n;
      const double py = static_cast<double>(label_counts[y]) / n;
      mi += pxy * std::log2(pxy / (px * py));
    }
  }
  return std::max(0.0, mi);
}

}  // namespace ewcft::data
