#include <algorithm>

#include "ewcft/data/dataset.hpp"
#include "ewcft/util/rng.hpp"

namespace ewcft::data {

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be at least 2");
  if (k > n) {
    throw std::invalid_argument("kfold: k = " + std::to_string(k) + " exceeds dataset size " + std::to_string(n));
  }
  const auto order = util::permutation(n, seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                    order.begin() + static_cast<std::ptrdiff_t>(start + len));
    std::sort(folds[f].begin(), folds[f].end());
    start += len;
  }
  return folds;
}

std::vector<Fold> kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  const auto folds = kfold_indices(dataset.size(), k, seed);
  std::vector<Fold> out;
  out.reserve(k);
  std::vector<char> held(dataset.size());
  for (const auto& validation : folds) {
    std::fill(held.begin(), held.end(), 0);
    for (auto i : validation) held[i] = 1;
    std::vector<std::size_t> train;
    train.reserve(dataset.size() - validation.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (!held[i]) train.push_back(i);
    }
    out.push_back(Fold{dataset.subset(train), dataset.subset(validation)});
  }
  return out;
}

}  // namespace ewcft::data
