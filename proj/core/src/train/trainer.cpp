#include "ewcft/train/trainer.hpp"

#include <cmath>
#include <stdexcept>

#include "ewcft/continual/regularizer.hpp"
#include "ewcft/eval/metrics.hpp"
#include "ewcft/train/optimizer.hpp"
#include "ewcft/util/rng.hpp"

namespace ewcft::train {

using autodiff::Graph;
using autodiff::Var;

namespace {

constexpr std::string_view kExpertPrefix = "expert/";
constexpr std::uint64_t kBatchStream = 0x6261746368ULL;
constexpr std::uint64_t kFisherStream = 0x666973686572ULL;

// Returns the penalty term for one step, or nullopt for none.
using PenaltyFn = std::function<std::optional<Var>(Graph&, std::span<const Var>)>;
// Called before each epoch; returns whether a Fisher estimate was made.
using EpochStartFn = std::function<bool(std::size_t epoch)>;

struct Loop {
  model::Classifier* expert = nullptr;
  model::BiasModelConfig bias;
  const data::Dataset* validation = nullptr;
  std::optional<std::size_t> patience;
  std::vector<Monitor> monitors;
  std::function<void(const EpochRecord&)> on_epoch;
  PenaltyFn penalty;
  EpochStartFn epoch_start;
};

bool uses_expert(const model::BiasModelConfig& bias) { return bias.mode != model::BiasMode::kNone; }

std::vector<model::Parameter> copy_parameters(const model::Classifier& m) { return m.parameters(); }

TrainHistory run_loop(model::Classifier& model, const data::Dataset& dataset, const TrainConfig& config,
                      const Loop& loop) {
  config.validate();
  loop.bias.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (uses_expert(loop.bias) && loop.expert == nullptr) {
    throw std::invalid_argument("train: bias mode " + std::string(model::to_string(loop.bias.mode)) +
                                " needs a claim-only expert");
  }
  if (loop.patience && loop.validation == nullptr) {
    throw std::invalid_argument("train: early stopping needs a validation set");
  }
  model::Classifier* expert = uses_expert(loop.bias) ? loop.expert : nullptr;

  auto optimizer = make_optimizer(config);
  std::vector<std::string> keys;
  for (const auto& p : model.parameters()) keys.push_back(p.id);
  if (expert) {
    for (const auto& p : expert->parameters()) keys.push_back(std::string(kExpertPrefix) + p.id);
  }

  TrainHistory history;
  double best_accuracy = -1.0;
  std::vector<model::Parameter> best_params;
  std::vector<model::Parameter> best_expert_params;
  std::size_t epochs_since_best = 0;

  const std::size_t n = dataset.size();
  std::vector<const data::Instance*> batch;
  std::vector<std::size_t> gold;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    if (loop.epoch_start) record.fisher_recomputed = loop.epoch_start(epoch);

    const auto order = util::permutation(n, util::mix_seed(config.seed ^ kBatchStream, epoch));
    double loss_sum = 0.0, penalty_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      ++n_batches;
      batch.clear();
      gold.clear();
      for (std::size_t i = start; i < std::min(n, start + config.batch_size); ++i) {
        batch.push_back(&dataset[order[i]]);
        gold.push_back(dataset[order[i]].label);
      }
      Graph g;
      const auto vars = model.bind(g);
      const Var logp = model.forward(g, vars, batch);
      Var loss;
      if (expert) {
        const auto evars = expert->bind(g, kExpertPrefix);
        loss = model::combined_bias_loss(g, logp, expert->forward(g, evars, batch), gold, loop.bias);
      } else {
        loss = g.nll(logp, gold);
      }
      if (loop.penalty) {
        if (auto pen = loop.penalty(g, vars)) {
          penalty_sum += g.value(*pen).item();
          loss = continual::regularized_loss(g, loss, *pen);
        }
      }
      const double loss_value = g.value(loss).item();
      if (!std::isfinite(loss_value)) throw DivergenceError(epoch, n_batches);
      loss_sum += loss_value;

      auto grads = g.backward(loss);
      std::vector<autodiff::Tensor*> grad_ptrs;
      for (auto& [id, t] : grads) grad_ptrs.push_back(&t);
      for (const auto* t : grad_ptrs) {
        for (double x : t->values()) {
          if (!std::isfinite(x)) throw DivergenceError(epoch, n_batches);
        }
      }
      if (config.gradient_norm_clip) clip_gradient_norm(grad_ptrs, *config.gradient_norm_clip);

      std::vector<ParamSlot> slots;
      std::size_t k = 0;
      for (auto& p : model.parameters()) slots.push_back({&keys[k++], &p.value, &grads.at(p.id)});
      if (expert) {
        for (auto& p : expert->parameters()) slots.push_back({&keys[k], &p.value, &grads.at(keys[k])}), ++k;
      }
      optimizer->step(slots);
    }
    record.mean_loss = loss_sum / static_cast<double>(n_batches);
    record.mean_penalty = penalty_sum / static_cast<double>(n_batches);

    for (const auto& m : loop.monitors) record.accuracies[m.name] = eval::accuracy(model, expert, *m.dataset, loop.bias);
    if (loop.validation) {
      const double acc = eval::accuracy(model, expert, *loop.validation, loop.bias);
      record.accuracies[std::string(kValidationMonitor)] = acc;
      if (loop.patience) {
        if (acc > best_accuracy) {
          best_accuracy = acc;
          history.best_epoch = epoch;
          best_params = copy_parameters(model);
          if (expert) best_expert_params = copy_parameters(*expert);
          epochs_since_best = 0;
        } else {
          ++epochs_since_best;
        }
      }
    }
    history.epochs.push_back(record);
    if (loop.on_epoch) loop.on_epoch(history.epochs.back());
    if (loop.patience && epochs_since_best >= *loop.patience) {
      history.stopped_early = epoch < config.epochs;
      break;
    }
  }
  if (loop.patience && history.best_epoch) {
    model.load_parameters(best_params);
    if (expert) expert->load_parameters(best_expert_params);
  }
  return history;
}

std::string checksum(const continual::ParameterSnapshot& s) { return continual::checksum(s.values()); }

}  // namespace

DivergenceError::DivergenceError(std::size_t epoch, std::size_t batch)
    : std::runtime_error("training diverged: non-finite loss or gradient at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch)),
      epoch_(epoch),
      batch_(batch) {}

std::uint64_t fisher_seed(std::uint64_t seed, std::size_t epoch) {
  return util::mix_seed(seed ^ kFisherStream, epoch);
}

TrainHistory train(model::Classifier& model, const data::Dataset& dataset, const TrainConfig& config,
                   const TrainOptions& options) {
  Loop loop;
  loop.expert = options.bias_expert;
  loop.bias = options.bias;
  loop.validation = options.validation;
  loop.patience = config.early_stopping_patience;
  loop.monitors = options.monitors;
  loop.on_epoch = options.on_epoch;
  return run_loop(model, dataset, config, loop);
}

FinetuneResult finetune(model::Classifier& model, const data::Dataset& ft_train, const data::Dataset& original,
                        const FinetuneConfig& config, const FinetuneOptions& options) {
  config.validate();
  const auto& reg = config.regularizer;
  if (reg.kind == continual::RegularizerKind::kEwc && original.empty()) {
    throw std::invalid_argument("finetune: ewc needs a non-empty original dataset for the Fisher estimate");
  }

  data::Dataset truncated;
  const data::Dataset* train_set = &ft_train;
  if (config.ft_train_size && *config.ft_train_size < ft_train.size()) {
    std::vector<std::size_t> prefix(*config.ft_train_size);
    for (std::size_t i = 0; i < prefix.size(); ++i) prefix[i] = i;
    truncated = ft_train.subset(prefix);
    train_set = &truncated;
  }

  FinetuneResult result;
  result.anchor = continual::snapshot(model);
  result.anchor_checksum_before = checksum(result.anchor);

  std::optional<continual::FisherDiagonal> fisher;
  if (reg.kind == continual::RegularizerKind::kL2) fisher = continual::unit_fisher(result.anchor);

  Loop loop;
  loop.expert = options.bias_expert;
  loop.bias = config.bias;
  loop.monitors = options.monitors;
  loop.on_epoch = options.on_epoch;
  if (reg.kind == continual::RegularizerKind::kEwc) {
    loop.epoch_start = [&](std::size_t epoch) {
      if (epoch > 1 && !reg.recompute_each_epoch) return false;
      fisher = continual::estimate_fisher_diagonal(model, original, reg.fisher_sample_size,
                                                   fisher_seed(config.train.seed, epoch));
      ++result.fisher_estimates;
      if (options.log) {
        options.log("epoch " + std::to_string(epoch) + ": estimated Fisher diagonal from " +
                    std::to_string(reg.fisher_sample_size) + " original instances");
      }
      return true;
    };
  }
  if (reg.kind != continual::RegularizerKind::kNone) {
    loop.penalty = [&](Graph& g, std::span<const Var> theta) -> std::optional<Var> {
      return continual::elastic_penalty(g, theta, result.anchor, *fisher, reg.lambda);
    };
  }
  result.history = run_loop(model, *train_set, config.train, loop);
  result.anchor_checksum_after = checksum(result.anchor);
  if (reg.kind == continual::RegularizerKind::kEwc) result.last_fisher = fisher;
  return result;
}

}  // namespace ewcft::train
