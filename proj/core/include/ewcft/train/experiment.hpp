#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ewcft/continual/state.hpp"
#include "ewcft/data/dataset.hpp"
#include "ewcft/eval/pareto.hpp"
#include "ewcft/model/bias_losses.hpp"
#include "ewcft/model/classifier.hpp"
#include "ewcft/train/config.hpp"
#include "ewcft/train/grid_search.hpp"
#include "ewcft/train/trainer.hpp"

namespace ewcft::train {

enum class FtKind {
  kSymmetric,    // paired SUPPORTS/REFUTES counterfactuals
  kSingleLabel,  // REFUTES-only challenge set
};

std::string_view to_string(FtKind kind);
FtKind parse_ft_kind(std::string_view text);

struct CorpusConfig {
  // Original-task generator; n_instances is the training-set size.
  data::GeneratorConfig generator;
  std::size_t original_dev = 1000;
  std::size_t original_test = 2000;
  FtKind ft_kind = FtKind::kSymmetric;
  // Symmetric sets hold two instances per pair; single-label sets hold
  // 2·pairs instances as well, so both kinds have the same size.
  std::size_t ft_train_pairs = 350;
  std::size_t ft_test_pairs = 350;

  void validate() const;

  friend bool operator==(const CorpusConfig&, const CorpusConfig&) = default;
};

struct Corpora {
  data::Dataset original_train;
  data::Dataset original_dev;
  data::Dataset original_test;
  data::Dataset ft_train;
  data::Dataset ft_test;
};

Corpora build_corpora(const CorpusConfig& config);

// TrainConfig defaults with 20 epochs.
TrainConfig default_base_train_config();
// FinetuneConfig defaults with learning rate 0.03.
FinetuneConfig default_finetune_config();

struct ExperimentConfig {
  CorpusConfig corpus;
  // vocab_size is taken from the corpus.
  model::ModelDims dims;
  // Base (original-task) training; early stopping uses the original dev set.
  TrainConfig base_train = default_base_train_config();
  // Fine-tuning schedule shared by every ft condition; the regularizer kind
  // and lambda are set per condition from the fields below.
  FinetuneConfig finetune = default_finetune_config();
  double l2_lambda = 0.01;
  double ewc_lambda = 10.0;
  model::BiasModelConfig poe{model::BiasMode::kPoe, 0.4, 0.0, false};
  model::BiasModelConfig dfl{model::BiasMode::kDfl, 0.4, 1.0, false};

  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

enum class BaseKind { kOriginal, kMerged };

// A named experimental condition: how the base model is trained and which
// fine-tuning, if any, follows. Names are "original", "merged", "poe", "dfl",
// "ft", "ft_l2", "ft_ewc", and "poe+ft..." / "dfl+ft..." combinations.
struct Condition {
  std::string name;
  BaseKind base = BaseKind::kOriginal;
  model::BiasMode bias = model::BiasMode::kNone;
  std::optional<continual::RegularizerKind> finetune;
};

Condition parse_condition(std::string_view name);
const std::vector<std::string>& table_conditions();
std::vector<std::size_t> default_ablation_sizes();

struct SeedResult {
  std::uint64_t seed = 0;
  double original_acc = 0.0;
  double ft_acc = 0.0;
  // Per-epoch records of the fine-tuning stage (empty without fine-tuning),
  // with "original_test" and "ft_test" monitors.
  std::vector<EpochRecord> history;
};

struct RunResult {
  std::string condition;
  std::vector<SeedResult> seeds;
  std::string config_hash;
};

inline constexpr std::string_view kOriginalTestMonitor = "original_test";
inline constexpr std::string_view kFtTestMonitor = "ft_test";

// Trained base models of one seed, shared by every condition built on them.
class BaseModelCache {
 public:
  BaseModelCache(const ExperimentConfig& config, const Corpora& corpora, std::uint64_t seed)
      : config_(config), corpora_(corpora), seed_(seed) {}

  struct Entry {
    std::unique_ptr<model::Classifier> model;
    std::unique_ptr<model::Classifier> expert;
  };
  const Entry& get(BaseKind base, model::BiasMode bias);

 private:
  const ExperimentConfig& config_;
  const Corpora& corpora_;
  std::uint64_t seed_;
  std::vector<std::pair<std::pair<BaseKind, model::BiasMode>, Entry>> entries_;
};

// Fine-tuning config used for `condition`, derived from config.finetune.
FinetuneConfig condition_finetune_config(const ExperimentConfig& config, const Condition& condition,
                                         std::uint64_t seed);

// One RunResult per condition, each with one SeedResult per seed in order.
// Seeds run in parallel on up to `jobs` threads.
std::vector<RunResult> run_conditions(const ExperimentConfig& config, const Corpora& corpora,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<std::string>& conditions, std::size_t jobs = 1);

struct AblationRow {
  std::size_t size = 0;
  std::string condition;
  std::uint64_t seed = 0;
  double original_acc = 0.0;
  double ft_acc = 0.0;
};

// For every seed, FT-train is permuted once and each size uses a prefix of
// that permutation, so smaller subsets are nested in larger ones. Sizes must
// be ascending and at most |FT-train|. Rows are ordered by size, condition,
// seed.
std::vector<AblationRow> ablation_sweep(const ExperimentConfig& config, const Corpora& corpora,
                                        const std::vector<std::size_t>& sizes,
                                        const std::vector<std::string>& conditions,
                                        const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

struct ParetoSweep {
  // Points keyed by condition name ("ft", "ft_l2", "ft_ewc"); one point per
  // (learning rate, lambda, epoch).
  std::vector<std::pair<std::string, std::vector<eval::ParetoPoint>>> points;
  const std::vector<eval::ParetoPoint>& at(std::string_view condition) const;
};

// Fine-tunes the seed's base model over learning_rates x lambdas (lambda
// only for regularized conditions) for up to epochs_max epochs and records
// (original_test, ft_test) accuracy after every epoch.
ParetoSweep pareto_sweep(const ExperimentConfig& config, const Corpora& corpora,
                         const std::vector<std::string>& conditions, const std::vector<double>& learning_rates,
                         const std::vector<double>& lambdas, std::size_t epochs_max, std::uint64_t seed,
                         std::size_t jobs = 1);

struct LabelShiftSeed {
  std::uint64_t seed = 0;
  double ft_original_acc = 0.0;
  double ft_ft_acc = 0.0;
  double ewc_original_acc = 0.0;
  double ewc_ft_acc = 0.0;
  // Cross-validated (lr, lambda, epochs) used for the EWC run.
  CvRow selected;
};

// Per seed: unregularized fine-tuning with the "ft" condition's config, and
// EWC fine-tuning with the configuration chosen by grid_search_cv over `grid`
// on FT-train. Meant for corpora built with FtKind::kSingleLabel, but any
// corpora work. Seeds run in parallel on up to `jobs` threads.
std::vector<LabelShiftSeed> label_shift_experiment(const ExperimentConfig& config, const Corpora& corpora,
                                                   const SweepGrid& grid, const std::vector<std::uint64_t>& seeds,
                                                   std::size_t jobs = 1);

struct ProbeResult {
  double original_test_acc = 0.0;
  double ft_test_acc = 0.0;
};

// Claim-only classifier trained on the original training set with the base
// training schedule, scored on the original and FT test sets.
ProbeResult claim_only_probe(const ExperimentConfig& config, const Corpora& corpora, std::uint64_t seed);

}  // namespace ewcft::train
