#pragma once

#include <string>
#include <vector>

#include "ewcft/data/dataset.hpp"
#include "ewcft/model/classifier.hpp"
#include "ewcft/util/rng.hpp"

namespace ewcft::test {

// Vocabulary t0..t{n-1}.
inline data::Vocabulary plain_vocab(std::size_t n) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
  return data::Vocabulary(tokens);
}

// n random instances over a vocabulary of dims.vocab_size tokens.
inline data::Dataset random_dataset(util::Rng& rng, std::size_t n, const model::ModelDims& dims) {
  data::Dataset d(plain_vocab(dims.vocab_size));
  for (std::size_t i = 0; i < n; ++i) {
    data::Instance inst{"r" + std::to_string(i), {}, {}, rng.index(dims.num_classes)};
    for (std::size_t k = 1 + rng.index(3); k > 0; --k) {
      inst.claim.push_back(static_cast<data::TokenId>(rng.index(dims.vocab_size)));
    }
    for (std::size_t k = 1 + rng.index(4); k > 0; --k) {
      inst.evidence.push_back(static_cast<data::TokenId>(rng.index(dims.vocab_size)));
    }
    d.add(std::move(inst));
  }
  return d;
}

inline std::vector<const data::Instance*> all_of(const data::Dataset& d) {
  std::vector<const data::Instance*> out;
  for (const auto& inst : d.instances()) out.push_back(&inst);
  return out;
}

inline std::vector<std::size_t> gold_of(const data::Dataset& d) {
  std::vector<std::size_t> out;
  for (const auto& inst : d.instances()) out.push_back(inst.label);
  return out;
}

}  // namespace ewcft::test
