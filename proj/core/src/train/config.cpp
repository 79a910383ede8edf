#include "ewcft/train/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ewcft::train {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdam: return "adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be finite and >= 0");
  }
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (gradient_norm_clip && !(*gradient_norm_clip > 0.0)) {
    throw std::invalid_argument("TrainConfig: gradient_norm_clip must be > 0");
  }
  if (early_stopping_patience && *early_stopping_patience < 1) {
    throw std::invalid_argument("TrainConfig: early_stopping_patience must be >= 1");
  }
  if (optimizer == OptimizerKind::kAdam) {
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.epsilon > 0.0)) {
      throw std::invalid_argument("TrainConfig: invalid Adam parameters");
    }
  }
}

void FinetuneConfig::validate() const {
  train.validate();
  regularizer.validate();
  bias.validate();
  if (ft_train_size && *ft_train_size < 1) throw std::invalid_argument("FinetuneConfig: ft_train_size must be >= 1");
}

void SweepGrid::validate() const {
  if (learning_rates.empty()) throw std::invalid_argument("SweepGrid: learning_rates is empty");
  if (lambdas.empty()) throw std::invalid_argument("SweepGrid: lambdas is empty");
  if (epochs_max < 1) throw std::invalid_argument("SweepGrid: epochs_max must be >= 1");
  if (k_folds < 2) throw std::invalid_argument("SweepGrid: k_folds must be >= 2");
  for (double lr : learning_rates) {
    if (!(lr >= 0.0)) throw std::invalid_argument("SweepGrid: learning rates must be >= 0");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw std::invalid_argument("SweepGrid: lambdas must be >= 0");
  }
}

std::vector<double> default_lambda_grid(double scale) {
  std::vector<double> out;
  for (double l : {1e6, 2e6, 4e6, 8e6, 1e7, 2e7, 4e7, 6e7, 8e7, 1e8}) out.push_back(l * scale);
  return out;
}

std::vector<double> default_learning_rates() { return {0.01, 0.03, 0.1}; }

SweepGrid default_sweep_grid(double lambda_scale) {
  return SweepGrid{default_learning_rates(), default_lambda_grid(lambda_scale), 8, 5};
}

}  // namespace ewcft::train
