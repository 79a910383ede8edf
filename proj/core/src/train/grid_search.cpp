#include "ewcft/train/grid_search.hpp"

#include <stdexcept>

#include "ewcft/train/trainer.hpp"
#include "ewcft/util/parallel.hpp"

namespace ewcft::train {

bool better_cv_row(const CvRow& a, const CvRow& b) {
  if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  if (a.learning_rate != b.learning_rate) return a.learning_rate < b.learning_rate;
  return a.epochs < b.epochs;
}

CvResult grid_search_cv(const ModelFactory& factory, const data::Dataset& ft_train, const data::Dataset& original,
                        const SweepGrid& grid, const FinetuneConfig& base, std::uint64_t fold_seed,
                        std::size_t jobs) {
  grid.validate();
  base.validate();
  if (base.bias.mode != model::BiasMode::kNone) {
    throw std::invalid_argument("grid_search_cv: bias-model fine-tuning is not cross-validated");
  }
  const auto folds = data::kfold(ft_train, grid.k_folds, fold_seed);
  const std::size_t n_lr = grid.learning_rates.size(), n_lambda = grid.lambdas.size(), k = folds.size();
  const std::size_t n_configs = n_lr * n_lambda;

  // accuracy[config][fold][epoch]
  std::vector<std::vector<std::vector<double>>> accuracy(
      n_configs, std::vector<std::vector<double>>(k, std::vector<double>(grid.epochs_max, 0.0)));
  util::parallel_for(n_configs * k, jobs, [&](std::size_t task) {
    const std::size_t config_index = task / k, fold = task % k;
    FinetuneConfig cfg = base;
    cfg.train.learning_rate = grid.learning_rates[config_index / n_lambda];
    cfg.regularizer.lambda = grid.lambdas[config_index % n_lambda];
    cfg.train.epochs = grid.epochs_max;
    cfg.train.early_stopping_patience.reset();
    auto m = factory();
    FinetuneOptions options;
    options.monitors.push_back({std::string(kValidationMonitor), &folds[fold].validation});
    const auto result = finetune(*m, folds[fold].train, original, cfg, options);
    for (const auto& rec : result.history.epochs) {
      accuracy[config_index][fold][rec.epoch - 1] = rec.accuracies.at(std::string(kValidationMonitor));
    }
  });

  CvResult out;
  out.table.reserve(n_configs * grid.epochs_max);
  for (std::size_t c = 0; c < n_configs; ++c) {
    for (std::size_t e = 0; e < grid.epochs_max; ++e) {
      CvRow row;
      row.learning_rate = grid.learning_rates[c / n_lambda];
      row.lambda = grid.lambdas[c % n_lambda];
      row.epochs = e + 1;
      double sum = 0.0;
      for (std::size_t f = 0; f < k; ++f) {
        row.fold_accuracies.push_back(accuracy[c][f][e]);
        sum += accuracy[c][f][e];
      }
      row.mean_accuracy = sum / static_cast<double>(k);
      out.table.push_back(std::move(row));
    }
  }
  out.best_row = out.table.front();
  for (const auto& row : out.table) {
    if (better_cv_row(row, out.best_row)) out.best_row = row;
  }
  out.best = base;
  out.best.train.learning_rate = out.best_row.learning_rate;
  out.best.regularizer.lambda = out.best_row.lambda;
  out.best.train.epochs = out.best_row.epochs;
  return out;
}

}  // namespace ewcft::train
