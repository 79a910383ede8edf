#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "ewcft/data/dataset.hpp"
#include "ewcft/model/classifier.hpp"
#include "ewcft/train/config.hpp"

namespace ewcft::train {

// Fresh copy of the model every fold starts from (typically a clone of a
// base-trained model).
using ModelFactory = std::function<std::unique_ptr<model::Classifier>()>;

struct CvRow {
  double learning_rate = 0.0;
  double lambda = 0.0;
  std::size_t epochs = 0;
  double mean_accuracy = 0.0;
  std::vector<double> fold_accuracies;
};

struct CvResult {
  FinetuneConfig best;
  CvRow best_row;
  // |learning_rates| x |lambdas| x epochs_max rows, learning-rate major, then
  // lambda, then epochs ascending.
  std::vector<CvRow> table;
};

// k-fold cross-validation of finetune() over the grid. Each (lr, lambda) pair
// is trained for epochs_max epochs per fold and scored on the held-out fold
// after every epoch. The best row maximizes mean validation accuracy; ties go
// to the smaller lambda, then the smaller learning rate, then fewer epochs.
// The returned config is `base` with those three values substituted.
CvResult grid_search_cv(const ModelFactory& factory, const data::Dataset& ft_train, const data::Dataset& original,
                        const SweepGrid& grid, const FinetuneConfig& base, std::uint64_t fold_seed = 1,
                        std::size_t jobs = 1);

// Orders rows by the selection rule: true when a should be preferred over b.
bool better_cv_row(const CvRow& a, const CvRow& b);

}  // namespace ewcft::train
