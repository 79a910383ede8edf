#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ewcft/continual/state.hpp"
#include "ewcft/data/dataset.hpp"
#include "ewcft/model/bias_losses.hpp"
#include "ewcft/model/classifier.hpp"
#include "ewcft/train/config.hpp"

namespace ewcft::train {

// Non-finite loss or gradient. Epoch and batch are 1-based.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch);
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double mean_penalty = 0.0;
  bool fisher_recomputed = false;
  // Accuracy per monitor name, measured after the epoch.
  std::map<std::string, double> accuracies;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  // Epoch whose parameters were kept under early stopping.
  std::optional<std::size_t> best_epoch;
  bool stopped_early = false;
};

// A dataset scored after every epoch under the given name.
struct Monitor {
  std::string name;
  const data::Dataset* dataset = nullptr;
};

inline constexpr std::string_view kValidationMonitor = "validation";

struct TrainOptions {
  // Used for early stopping; also reported as the "validation" monitor.
  const data::Dataset* validation = nullptr;
  // Claim-only expert trained jointly when bias.mode is poe or dfl.
  model::Classifier* bias_expert = nullptr;
  model::BiasModelConfig bias;
  std::vector<Monitor> monitors;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Mini-batch training on `dataset`. Batch order in epoch e is
// permutation(n, mix_seed(seed, e)), so runs are reproducible from the config.
TrainHistory train(model::Classifier& model, const data::Dataset& dataset, const TrainConfig& config,
                   const TrainOptions& options = {});

struct FinetuneOptions {
  model::Classifier* bias_expert = nullptr;
  std::vector<Monitor> monitors;
  std::function<void(const EpochRecord&)> on_epoch;
  // Receives one line per Fisher estimate.
  std::function<void(const std::string&)> log;
};

struct FinetuneResult {
  TrainHistory history;
  continual::ParameterSnapshot anchor;
  std::string anchor_checksum_before;
  std::string anchor_checksum_after;
  std::size_t fisher_estimates = 0;
  std::optional<continual::FisherDiagonal> last_fisher;
};

// Fixed-epoch fine-tuning on ft_train, minimizing task loss plus the
// configured penalty against a snapshot taken once at the start. For ewc the
// Fisher is estimated on `original` before the first epoch and, when
// recompute_each_epoch, before every later epoch.
FinetuneResult finetune(model::Classifier& model, const data::Dataset& ft_train, const data::Dataset& original,
                        const FinetuneConfig& config, const FinetuneOptions& options = {});

// Seed of the Fisher sample drawn before `epoch` of a run seeded with `seed`.
std::uint64_t fisher_seed(std::uint64_t seed, std::size_t epoch);

}  // namespace ewcft::train
