#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ewcft/continual/state.hpp"
#include "ewcft/model/bias_losses.hpp"

namespace ewcft::train {

enum class OptimizerKind { kSgd, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view text);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamParams&, const AdamParams&) = default;
};

struct TrainConfig {
  // Zero is accepted and leaves parameters untouched.
  double learning_rate = 1e-2;
  std::size_t epochs = 8;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamParams adam;
  // Global L2 norm cap on the gradient; nullopt disables clipping.
  std::optional<double> gradient_norm_clip = 10.0;
  // Stop after this many epochs without a validation-accuracy improvement and
  // restore the best parameters. Needs a validation set.
  std::optional<std::size_t> early_stopping_patience;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct FinetuneConfig {
  TrainConfig train;
  continual::RegularizerConfig regularizer;
  model::BiasModelConfig bias;
  // Use only the first ft_train_size instances of the fine-tuning set.
  std::optional<std::size_t> ft_train_size;

  void validate() const;

  friend bool operator==(const FinetuneConfig&, const FinetuneConfig&) = default;
};

// Cartesian (learning rate x lambda) grid; every configuration is trained for
// epochs_max epochs and scored after each one.
struct SweepGrid {
  std::vector<double> learning_rates;
  std::vector<double> lambdas;
  std::size_t epochs_max = 8;
  std::size_t k_folds = 5;

  void validate() const;

  friend bool operator==(const SweepGrid&, const SweepGrid&) = default;
};

// The ten-point lambda ladder {1e6 ... 1e8} multiplied by `scale`.
std::vector<double> default_lambda_grid(double scale);

// Ladder scales for the desk-scale pair classifier. Fisher values of a
// fine-tuned model sit around 1e-2 per coordinate, so EWC's useful range is
// roughly 1 to 100; the unit-weighted L2 penalty needs a thousandfold smaller
// lambda to leave the fine-tuning gain intact.
inline constexpr double kEwcLambdaScale = 1e-6;
inline constexpr double kL2LambdaScale = 1e-9;

// {0.01, 0.03, 0.1}
std::vector<double> default_learning_rates();

// default_learning_rates() x default_lambda_grid(scale), epochs_max 8, 5 folds.
SweepGrid default_sweep_grid(double lambda_scale);

}  // namespace ewcft::train
