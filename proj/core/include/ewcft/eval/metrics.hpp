#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ewcft/data/dataset.hpp"
#include "ewcft/model/bias_losses.hpp"
#include "ewcft/model/classifier.hpp"

namespace ewcft::eval {

// Predicted class per instance (argmax, ties to the lowest index).
std::vector<std::size_t> predict(const model::Classifier& model, const data::Dataset& dataset);

// Fraction of argmax predictions equal to the gold label. Throws
// std::invalid_argument on an empty dataset.
double accuracy(const model::Classifier& model, const data::Dataset& dataset);

// Accuracy under a bias configuration: the pair model alone unless
// config.use_expert_at_inference, in which case predictions come from
// poe_combine(pair, expert). `expert` may be null when it is not needed.
double accuracy(const model::Classifier& model, const model::Classifier* expert, const data::Dataset& dataset,
                const model::BiasModelConfig& config);

// Fraction of positions where predictions equal gold labels.
double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> gold);

struct AccuracyStats {
  double mean = 0.0;
  // Sample standard deviation (n - 1 denominator); 0 when n == 1.
  double std = 0.0;
  std::size_t n = 0;
  std::vector<double> values;
};

// Throws std::invalid_argument on an empty sample.
AccuracyStats summarize(std::span<const double> values);

}  // namespace ewcft::eval
