#include "ewcft/train/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "ewcft/data/generators.hpp"
#include "ewcft/eval/metrics.hpp"
#include "ewcft/train/config_json.hpp"
#include "ewcft/util/parallel.hpp"
#include "ewcft/util/rng.hpp"

namespace ewcft::train {

namespace {

constexpr std::uint64_t kDevTestStream = 11;
constexpr std::uint64_t kFtTrainStream = 12;
constexpr std::uint64_t kFtTestStream = 13;
constexpr std::uint64_t kExpertInitStream = 21;
constexpr std::uint64_t kAblationStream = 31;

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out(end - begin);
  std::iota(out.begin(), out.end(), begin);
  return out;
}

data::Dataset make_ft_set(const CorpusConfig& config, const data::Dataset& base, std::size_t pairs,
                          std::uint64_t seed) {
  if (config.ft_kind == FtKind::kSymmetric) return data::generate_symmetric_counterfactual(base, pairs, seed);
  data::GeneratorConfig g = config.generator;
  g.seed = seed;
  g.n_instances = 2 * pairs;
  return data::generate_single_label_challenge(g);
}

model::ModelDims resolved_dims(const ExperimentConfig& config, const Corpora& corpora) {
  model::ModelDims dims = config.dims;
  dims.vocab_size = corpora.original_train.vocab().size();
  dims.num_classes = corpora.original_train.num_classes();
  return dims;
}

const model::BiasModelConfig& bias_config(const ExperimentConfig& config, model::BiasMode mode) {
  static const model::BiasModelConfig kNone{};
  switch (mode) {
    case model::BiasMode::kPoe: return config.poe;
    case model::BiasMode::kDfl: return config.dfl;
    case model::BiasMode::kNone: break;
  }
  return kNone;
}

// Trains a base model, and its expert for PoE / DFL, on `train_set`.
BaseModelCache::Entry train_base(const ExperimentConfig& config, const Corpora& corpora, std::uint64_t seed,
                                 model::BiasMode bias, const data::Dataset& train_set) {
  const auto dims = resolved_dims(config, corpora);
  BaseModelCache::Entry entry;
  entry.model = std::make_unique<model::PairClassifier>(dims, seed);
  TrainConfig tc = config.base_train;
  tc.seed = seed;
  TrainOptions options;
  options.validation = &corpora.original_dev;
  options.bias = bias_config(config, bias);
  if (bias != model::BiasMode::kNone) {
    entry.expert = std::make_unique<model::ClaimOnlyClassifier>(dims, util::mix_seed(seed, kExpertInitStream));
    options.bias_expert = entry.expert.get();
  }
  train(*entry.model, train_set, tc, options);
  return entry;
}

struct Evaluated {
  double original_acc;
  double ft_acc;
};

Evaluated evaluate(const model::Classifier& m, const model::Classifier* expert, const Corpora& corpora,
                   const model::BiasModelConfig& bias) {
  return {eval::accuracy(m, expert, corpora.original_test, bias), eval::accuracy(m, expert, corpora.ft_test, bias)};
}

std::vector<Monitor> test_monitors(const Corpora& corpora) {
  return {{std::string(kOriginalTestMonitor), &corpora.original_test}, {std::string(kFtTestMonitor), &corpora.ft_test}};
}

// Result of one condition on one seed, training on `ft_train` for ft stages.
SeedResult run_one(const ExperimentConfig& config, const Corpora& corpora, BaseModelCache& cache,
                   const Condition& condition, std::uint64_t seed, const data::Dataset& ft_train) {
  SeedResult r;
  r.seed = seed;
  const auto& bias = bias_config(config, condition.bias);
  if (condition.base == BaseKind::kMerged && &ft_train != &corpora.ft_train) {
    auto entry = train_base(config, corpora, seed, condition.bias, data::merge(corpora.original_train, ft_train));
    const auto e = evaluate(*entry.model, entry.expert.get(), corpora, bias);
    r.original_acc = e.original_acc;
    r.ft_acc = e.ft_acc;
    return r;
  }
  const auto& entry = cache.get(condition.base, condition.bias);
  if (!condition.finetune) {
    const auto e = evaluate(*entry.model, entry.expert.get(), corpora, bias);
    r.original_acc = e.original_acc;
    r.ft_acc = e.ft_acc;
    return r;
  }
  auto tuned = entry.model->clone();
  FinetuneOptions options;
  options.monitors = test_monitors(corpora);
  const auto result =
      finetune(*tuned, ft_train, corpora.original_train, condition_finetune_config(config, condition, seed), options);
  r.history = result.history.epochs;
  const auto e = evaluate(*tuned, nullptr, corpora, model::BiasModelConfig{});
  r.original_acc = e.original_acc;
  r.ft_acc = e.ft_acc;
  return r;
}

std::string run_hash(const ExperimentConfig& config, const std::string& condition) {
  nlohmann::json j = config;
  j["condition"] = condition;
  return config_hash(j);
}

}  // namespace

std::string_view to_string(FtKind kind) { return kind == FtKind::kSymmetric ? "symmetric" : "single-label"; }

FtKind parse_ft_kind(std::string_view text) {
  if (text == "symmetric") return FtKind::kSymmetric;
  if (text == "single-label" || text == "single_label") return FtKind::kSingleLabel;
  throw std::invalid_argument("unknown fine-tuning set kind '" + std::string(text) + "'");
}

void CorpusConfig::validate() const {
  generator.validate();
  if (generator.n_instances < 1) throw std::invalid_argument("CorpusConfig: empty original training set");
  if (original_dev < 1 || original_test < 1) throw std::invalid_argument("CorpusConfig: dev/test sizes must be >= 1");
  if (ft_train_pairs < 1 || ft_test_pairs < 1) throw std::invalid_argument("CorpusConfig: ft pair counts must be >= 1");
}

Corpora build_corpora(const CorpusConfig& config) {
  config.validate();
  data::GeneratorConfig g = config.generator;
  Corpora c;
  c.original_train = data::generate_biased_original(g);
  g.seed = util::mix_seed(config.generator.seed, kDevTestStream);
  g.n_instances = config.original_dev + config.original_test;
  const auto held_out = data::generate_biased_original(g);
  c.original_dev = held_out.subset(iota_indices(0, config.original_dev));
  c.original_test = held_out.subset(iota_indices(config.original_dev, held_out.size()));
  c.ft_train = make_ft_set(config, c.original_train, config.ft_train_pairs,
                           util::mix_seed(config.generator.seed, kFtTrainStream));
  c.ft_test = make_ft_set(config, c.original_train, config.ft_test_pairs,
                          util::mix_seed(config.generator.seed, kFtTestStream));
  return c;
}

void ExperimentConfig::validate() const {
  corpus.validate();
  base_train.validate();
  finetune.validate();
  poe.validate();
  dfl.validate();
  if (poe.mode != model::BiasMode::kPoe) throw std::invalid_argument("ExperimentConfig: poe.mode must be poe");
  if (dfl.mode != model::BiasMode::kDfl) throw std::invalid_argument("ExperimentConfig: dfl.mode must be dfl");
  if (!(l2_lambda >= 0.0) || !(ewc_lambda >= 0.0)) throw std::invalid_argument("ExperimentConfig: negative lambda");
}

Condition parse_condition(std::string_view name) {
  Condition c;
  c.name = std::string(name);
  std::string_view rest = name;
  if (rest == "original") return c;
  if (rest == "merged") {
    c.base = BaseKind::kMerged;
    return c;
  }
  for (auto [prefix, mode] : {std::pair{std::string_view("poe"), model::BiasMode::kPoe},
                              std::pair{std::string_view("dfl"), model::BiasMode::kDfl}}) {
    if (rest == prefix) {
      c.bias = mode;
      return c;
    }
    if (rest.starts_with(prefix) && rest.size() > prefix.size() && rest[prefix.size()] == '+') {
      c.bias = mode;
      rest.remove_prefix(prefix.size() + 1);
    }
  }
  if (rest == "ft") {
    c.finetune = continual::RegularizerKind::kNone;
  } else if (rest == "ft_l2") {
    c.finetune = continual::RegularizerKind::kL2;
  } else if (rest == "ft_ewc") {
    c.finetune = continual::RegularizerKind::kEwc;
  } else {
    throw std::invalid_argument("unknown condition '" + std::string(name) + "'");
  }
  return c;
}

const std::vector<std::string>& table_conditions() {
  static const std::vector<std::string> kConditions{"original", "merged", "ft", "ft_l2", "ft_ewc"};
  return kConditions;
}

TrainConfig default_base_train_config() {
  TrainConfig c;
  c.epochs = 20;
  return c;
}

FinetuneConfig default_finetune_config() {
  FinetuneConfig c;
  c.train.learning_rate = 0.03;
  return c;
}

std::vector<std::size_t> default_ablation_sizes() { return {25, 50, 75, 100, 250, 400, 500, 600, 700, 800, 900, 1000}; }

const BaseModelCache::Entry& BaseModelCache::get(BaseKind base, model::BiasMode bias) {
  for (const auto& [key, entry] : entries_) {
    if (key.first == base && key.second == bias) return entry;
  }
  auto entry = base == BaseKind::kMerged
                   ? train_base(config_, corpora_, seed_, bias, data::merge(corpora_.original_train, corpora_.ft_train))
                   : train_base(config_, corpora_, seed_, bias, corpora_.original_train);
  entries_.emplace_back(std::pair{base, bias}, std::move(entry));
  return entries_.back().second;
}

FinetuneConfig condition_finetune_config(const ExperimentConfig& config, const Condition& condition,
                                         std::uint64_t seed) {
  FinetuneConfig fc = config.finetune;
  fc.train.seed = seed;
  fc.bias = model::BiasModelConfig{};
  fc.regularizer.kind = condition.finetune.value_or(continual::RegularizerKind::kNone);
  switch (fc.regularizer.kind) {
    case continual::RegularizerKind::kNone: fc.regularizer.lambda = 0.0; break;
    case continual::RegularizerKind::kL2: fc.regularizer.lambda = config.l2_lambda; break;
    case continual::RegularizerKind::kEwc: fc.regularizer.lambda = config.ewc_lambda; break;
  }
  return fc;
}

std::vector<RunResult> run_conditions(const ExperimentConfig& config, const Corpora& corpora,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::vector<std::string>& conditions, std::size_t jobs) {
  config.validate();
  if (seeds.empty()) throw std::invalid_argument("run_conditions: no seeds");
  std::vector<Condition> parsed;
  for (const auto& name : conditions) parsed.push_back(parse_condition(name));

  std::vector<std::vector<SeedResult>> per_seed(seeds.size());
  util::parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    BaseModelCache cache(config, corpora, seeds[s]);
    for (const auto& c : parsed) per_seed[s].push_back(run_one(config, corpora, cache, c, seeds[s], corpora.ft_train));
  });

  std::vector<RunResult> out;
  for (std::size_t c = 0; c < parsed.size(); ++c) {
    RunResult r;
    r.condition = parsed[c].name;
    r.config_hash = run_hash(config, parsed[c].name);
    for (std::size_t s = 0; s < seeds.size(); ++s) r.seeds.push_back(per_seed[s][c]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AblationRow> ablation_sweep(const ExperimentConfig& config, const Corpora& corpora,
                                        const std::vector<std::size_t>& sizes,
                                        const std::vector<std::string>& conditions,
                                        const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  config.validate();
  if (!std::is_sorted(sizes.begin(), sizes.end())) throw std::invalid_argument("ablation_sweep: sizes must ascend");
  for (auto size : sizes) {
    if (size < 1 || size > corpora.ft_train.size()) {
      throw std::invalid_argument("ablation_sweep: size " + std::to_string(size) + " outside [1, " +
                                  std::to_string(corpora.ft_train.size()) + "]");
    }
  }
  std::vector<Condition> parsed;
  for (const auto& name : conditions) parsed.push_back(parse_condition(name));

  // rows[seed][size][condition]
  std::vector<std::vector<std::vector<SeedResult>>> rows(seeds.size());
  util::parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    BaseModelCache cache(config, corpora, seeds[s]);
    const auto order = util::permutation(corpora.ft_train.size(), util::mix_seed(seeds[s], kAblationStream));
    for (auto size : sizes) {
      const auto subset = corpora.ft_train.subset(std::span(order).first(size));
      auto& by_condition = rows[s].emplace_back();
      for (const auto& c : parsed) by_condition.push_back(run_one(config, corpora, cache, c, seeds[s], subset));
    }
  });

  std::vector<AblationRow> out;
  for (std::size_t z = 0; z < sizes.size(); ++z) {
    for (std::size_t c = 0; c < parsed.size(); ++c) {
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& r = rows[s][z][c];
        out.push_back({sizes[z], parsed[c].name, seeds[s], r.original_acc, r.ft_acc});
      }
    }
  }
  return out;
}

const std::vector<eval::ParetoPoint>& ParetoSweep::at(std::string_view condition) const {
  for (const auto& [name, pts] : points) {
    if (name == condition) return pts;
  }
  throw std::out_of_range("ParetoSweep: no condition '" + std::string(condition) + "'");
}

ParetoSweep pareto_sweep(const ExperimentConfig& config, const Corpora& corpora,
                         const std::vector<std::string>& conditions, const std::vector<double>& learning_rates,
                         const std::vector<double>& lambdas, std::size_t epochs_max, std::uint64_t seed,
                         std::size_t jobs) {
  config.validate();
  if (learning_rates.empty() || epochs_max < 1) throw std::invalid_argument("pareto_sweep: empty grid");
  struct Task {
    std::size_t condition;
    double lr;
    double lambda;
  };
  std::vector<Condition> parsed;
  std::vector<Task> tasks;
  for (const auto& name : conditions) {
    parsed.push_back(parse_condition(name));
    const auto& c = parsed.back();
    if (!c.finetune || c.base != BaseKind::kOriginal || c.bias != model::BiasMode::kNone) {
      throw std::invalid_argument("pareto_sweep: '" + name + "' is not a plain fine-tuning condition");
    }
    const bool regularized = *c.finetune != continual::RegularizerKind::kNone;
    if (regularized && lambdas.empty()) throw std::invalid_argument("pareto_sweep: empty lambda grid");
    for (double lr : learning_rates) {
      if (regularized) {
        for (double l : lambdas) tasks.push_back({parsed.size() - 1, lr, l});
      } else {
        tasks.push_back({parsed.size() - 1, lr, 0.0});
      }
    }
  }

  BaseModelCache cache(config, corpora, seed);
  const auto& base = *cache.get(BaseKind::kOriginal, model::BiasMode::kNone).model;
  std::vector<std::vector<eval::ParetoPoint>> task_points(tasks.size());
  util::parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    const auto& task = tasks[t];
    FinetuneConfig fc = condition_finetune_config(config, parsed[task.condition], seed);
    fc.train.learning_rate = task.lr;
    fc.train.epochs = epochs_max;
    fc.regularizer.lambda = task.lambda;
    auto m = base.clone();
    FinetuneOptions options;
    options.monitors = test_monitors(corpora);
    const auto result = finetune(*m, corpora.ft_train, corpora.original_train, fc, options);
    for (const auto& rec : result.history.epochs) {
      char label[96];
      std::snprintf(label, sizeof label, "lr=%.6g lambda=%.6g epochs=%zu", task.lr, task.lambda, rec.epoch);
      task_points[t].push_back({rec.accuracies.at(std::string(kOriginalTestMonitor)),
                                rec.accuracies.at(std::string(kFtTestMonitor)), label});
    }
  });

  ParetoSweep out;
  for (const auto& c : parsed) out.points.emplace_back(c.name, std::vector<eval::ParetoPoint>{});
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto& dst = out.points[tasks[t].condition].second;
    dst.insert(dst.end(), task_points[t].begin(), task_points[t].end());
  }
  return out;
}

std::vector<LabelShiftSeed> label_shift_experiment(const ExperimentConfig& config, const Corpora& corpora,
                                                   const SweepGrid& grid, const std::vector<std::uint64_t>& seeds,
                                                   std::size_t jobs) {
  config.validate();
  grid.validate();
  if (seeds.empty()) throw std::invalid_argument("label_shift_experiment: no seeds");
  const Condition ft = parse_condition("ft");
  const Condition ewc = parse_condition("ft_ewc");
  std::vector<LabelShiftSeed> out(seeds.size());
  util::parallel_for(seeds.size(), jobs, [&](std::size_t s) {
    const std::uint64_t seed = seeds[s];
    BaseModelCache cache(config, corpora, seed);
    const auto& base = *cache.get(BaseKind::kOriginal, model::BiasMode::kNone).model;
    auto& r = out[s];
    r.seed = seed;

    auto plain = base.clone();
    finetune(*plain, corpora.ft_train, corpora.original_train, condition_finetune_config(config, ft, seed));
    r.ft_original_acc = eval::accuracy(*plain, corpora.original_test);
    r.ft_ft_acc = eval::accuracy(*plain, corpora.ft_test);

    const auto cv = grid_search_cv([&] { return base.clone(); }, corpora.ft_train, corpora.original_train, grid,
                                   condition_finetune_config(config, ewc, seed), seed);
    r.selected = cv.best_row;
    auto regularized = base.clone();
    finetune(*regularized, corpora.ft_train, corpora.original_train, cv.best);
    r.ewc_original_acc = eval::accuracy(*regularized, corpora.original_test);
    r.ewc_ft_acc = eval::accuracy(*regularized, corpora.ft_test);
  });
  return out;
}

ProbeResult claim_only_probe(const ExperimentConfig& config, const Corpora& corpora, std::uint64_t seed) {
  config.validate();
  model::ClaimOnlyClassifier probe(resolved_dims(config, corpora), seed);
  TrainConfig tc = config.base_train;
  tc.seed = seed;
  TrainOptions options;
  options.validation = &corpora.original_dev;
  train(probe, corpora.original_train, tc, options);
  return {eval::accuracy(probe, corpora.original_test), eval::accuracy(probe, corpora.ft_test)};
}

}  // namespace ewcft::train
