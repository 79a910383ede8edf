#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "ewcft/data/jsonl.hpp"
#include "ewcft/eval/report.hpp"
#include "ewcft/model/checkpoint.hpp"
#include "ewcft/train/config_json.hpp"
#include "ewcft/train/trainer.hpp"

namespace ewcft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags that override fields of a TrainConfig.
struct ScheduleFlags {
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> optimizer;
  std::optional<double> clip;
  std::optional<std::size_t> patience;
};

void add_schedule_flags(CLI::App& cmd, ScheduleFlags& f) {
  cmd.add_option("--lr", f.lr, "Learning rate");
  cmd.add_option("--epochs", f.epochs, "Number of epochs");
  cmd.add_option("--batch-size", f.batch_size, "Mini-batch size");
  cmd.add_option("--seed", f.seed, "Seed for batch order (and model init for train)");
  cmd.add_option("--optimizer", f.optimizer, "sgd | adam")->check(CLI::IsMember({"sgd", "adam"}));
  cmd.add_option("--clip", f.clip, "Global gradient-norm cap (0 disables)");
  cmd.add_option("--patience", f.patience, "Early-stopping patience in epochs (needs a validation set)");
}

void apply(const ScheduleFlags& f, train::TrainConfig& c) {
  if (f.lr) c.learning_rate = *f.lr;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.seed) c.seed = *f.seed;
  if (f.optimizer) c.optimizer = train::parse_optimizer_kind(*f.optimizer);
  if (f.clip) c.gradient_norm_clip = *f.clip > 0.0 ? std::optional<double>(*f.clip) : std::nullopt;
  if (f.patience) c.early_stopping_patience = *f.patience;
}

struct BiasFlags {
  std::optional<std::string> mode;
  std::optional<double> beta;
  std::optional<double> gamma;
};

void add_bias_flags(CLI::App& cmd, BiasFlags& f) {
  cmd.add_option("--bias", f.mode, "none | poe | dfl")->check(CLI::IsMember({"none", "poe", "dfl"}));
  cmd.add_option("--beta", f.beta, "Weight of the expert's own cross-entropy");
  cmd.add_option("--gamma", f.gamma, "Focal exponent for dfl");
}

void apply(const BiasFlags& f, model::BiasModelConfig& c) {
  if (f.mode) c.mode = model::parse_bias_mode(*f.mode);
  if (f.beta) c.beta = *f.beta;
  if (f.gamma) c.gamma = *f.gamma;
}

template <typename Config>
Config read_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  try {
    train::read_json_file(path).get_to(c);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
  return c;
}

template <typename F>
void validated(F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void write_history_csv(const train::TrainHistory& history, const fs::path& path) {
  std::vector<std::string> monitors;
  if (!history.epochs.empty()) {
    for (const auto& [name, acc] : history.epochs.front().accuracies) monitors.push_back(name);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,mean_loss,mean_penalty,fisher_recomputed";
  for (const auto& m : monitors) out << ',' << eval::csv_field(m + "_acc");
  out << '\n';
  for (const auto& r : history.epochs) {
    out << r.epoch << ',' << eval::format_number(r.mean_loss) << ',' << eval::format_number(r.mean_penalty) << ','
        << (r.fisher_recomputed ? 1 : 0);
    for (const auto& m : monitors) out << ',' << eval::format_number(r.accuracies.at(m));
    out << '\n';
  }
}

struct Outputs {
  fs::path checkpoint;
  fs::path history;
  std::optional<RunDirectory> run_dir;
};

// Explicit --out / --history paths, else a content-addressed run directory.
Outputs resolve_outputs(std::string_view command, const std::string& out, const std::string& history,
                        const json& identity) {
  Outputs o;
  if (out.empty()) {
    o.run_dir.emplace(open_run_directory(command, identity, std::nullopt));
    o.checkpoint = o.run_dir->path() / "checkpoint.json";
  } else {
    o.checkpoint = out;
    if (o.checkpoint.has_parent_path()) fs::create_directories(o.checkpoint.parent_path());
  }
  if (!history.empty()) {
    o.history = history;
  } else if (o.run_dir) {
    o.history = o.run_dir->path() / "history.csv";
  } else {
    o.history = o.checkpoint;
    o.history.replace_extension(".history.csv");
  }
  return o;
}

std::vector<train::Monitor> parse_monitors(const std::vector<std::string>& specs,
                                           std::vector<std::unique_ptr<data::Dataset>>& storage) {
  std::vector<train::Monitor> monitors;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw UsageError("--monitor expects NAME=PATH, got '" + spec + "'");
    }
    storage.push_back(std::make_unique<data::Dataset>(data::read_jsonl(fs::path(spec.substr(eq + 1)))));
    monitors.push_back({spec.substr(0, eq), storage.back().get()});
  }
  return monitors;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::string dev;
  std::string config;
  std::string model = "pair";
  std::size_t embed_dim = model::ModelDims{}.embed_dim;
  std::size_t hidden_dim = model::ModelDims{}.hidden_dim;
  ScheduleFlags schedule;
  BiasFlags bias;
  std::string out;
  std::string history;
  std::string expert_out;
  std::vector<std::string> monitors;
};

void run_train(const TrainOptions& o) {
  train::TrainConfig config = read_config<train::TrainConfig>(o.config);
  apply(o.schedule, config);
  model::BiasModelConfig bias;
  apply(o.bias, bias);
  validated([&] {
    config.validate();
    bias.validate();
  });
  if (bias.mode != model::BiasMode::kNone && o.model != "pair") throw UsageError("--bias needs --model pair");
  if (config.early_stopping_patience && o.dev.empty()) throw UsageError("--patience needs --dev");

  const data::Dataset train_set = data::read_jsonl(fs::path(o.data));
  std::optional<data::Dataset> dev;
  if (!o.dev.empty()) dev = data::read_jsonl(fs::path(o.dev));
  std::vector<std::unique_ptr<data::Dataset>> storage;

  const model::ModelDims dims{train_set.vocab().size(), o.embed_dim, o.hidden_dim, train_set.num_classes()};
  json identity{{"command", "train"},       {"config", config},
                {"bias", bias},             {"model", o.model},
                {"dims", dims},             {"data", file_hash(o.data)},
                {"dev", o.dev.empty() ? "" : file_hash(o.dev)}};
  for (const auto& m : o.monitors) identity["monitors"].push_back(m);
  const Outputs out = resolve_outputs("train", o.out, o.history, identity);

  auto m = model::make_classifier(o.model, dims, config.seed);
  std::unique_ptr<model::Classifier> expert;
  train::TrainOptions options;
  options.validation = dev ? &*dev : nullptr;
  options.bias = bias;
  options.monitors = parse_monitors(o.monitors, storage);
  if (bias.mode != model::BiasMode::kNone) {
    expert = std::make_unique<model::ClaimOnlyClassifier>(dims, config.seed + 1);
    options.bias_expert = expert.get();
  }
  options.on_epoch = [](const train::EpochRecord& r) {
    std::printf("epoch %zu loss %.6f\n", r.epoch, r.mean_loss);
    std::fflush(stdout);
  };
  const auto history = train::train(*m, train_set, config, options);

  model::save_checkpoint(out.checkpoint, *m, nullptr, nullptr, json{{"stage", "train"}});
  write_history_csv(history, out.history);
  std::printf("checkpoint %s\nhistory %s\n", out.checkpoint.string().c_str(), out.history.string().c_str());
  if (expert) {
    fs::path expert_path = o.expert_out.empty() ? fs::path(out.checkpoint).replace_extension(".expert.json")
                                                : fs::path(o.expert_out);
    model::save_checkpoint(expert_path, *expert, nullptr, nullptr, json{{"stage", "train"}, {"role", "expert"}});
    std::printf("expert %s\n", expert_path.string().c_str());
  }
  if (out.run_dir) out.run_dir->log("train finished: " + std::to_string(history.epochs.size()) + " epochs");
}

// ---------------------------------------------------------------- finetune

struct FinetuneOptions {
  std::string checkpoint;
  std::string ft_train;
  std::string original;
  std::string config;
  ScheduleFlags schedule;
  BiasFlags bias;
  std::string expert;
  std::optional<std::string> regularizer;
  std::optional<double> lambda;
  std::optional<std::size_t> fisher_sample_size;
  bool freeze_fisher = false;
  std::optional<std::size_t> ft_train_size;
  std::vector<std::string> monitors;
  std::string out;
  std::string history;
};

void run_finetune(const FinetuneOptions& o) {
  train::FinetuneConfig config = read_config<train::FinetuneConfig>(o.config);
  apply(o.schedule, config.train);
  apply(o.bias, config.bias);
  if (o.regularizer) config.regularizer.kind = continual::parse_regularizer_kind(*o.regularizer);
  if (o.lambda) config.regularizer.lambda = *o.lambda;
  if (o.fisher_sample_size) config.regularizer.fisher_sample_size = *o.fisher_sample_size;
  if (o.freeze_fisher) config.regularizer.recompute_each_epoch = false;
  if (o.ft_train_size) config.ft_train_size = *o.ft_train_size;
  validated([&] { config.validate(); });
  if (config.train.early_stopping_patience) throw UsageError("finetune runs a fixed number of epochs; drop --patience");
  const bool needs_original = config.regularizer.kind == continual::RegularizerKind::kEwc;
  if (needs_original && o.original.empty()) throw UsageError("--regularizer ewc needs --original for the Fisher sample");
  if (config.bias.mode != model::BiasMode::kNone && o.expert.empty()) throw UsageError("--bias needs --expert");

  auto base = model::load_checkpoint(o.checkpoint);
  const data::Dataset ft_train = data::read_jsonl(fs::path(o.ft_train));
  const data::Dataset original = o.original.empty() ? data::Dataset{} : data::read_jsonl(fs::path(o.original));
  std::vector<std::unique_ptr<data::Dataset>> storage;
  std::unique_ptr<model::Classifier> expert;
  if (!o.expert.empty()) expert = std::move(model::load_checkpoint(o.expert).model);

  json identity{{"command", "finetune"},
                {"config", config},
                {"checkpoint", file_hash(o.checkpoint)},
                {"ft_train", file_hash(o.ft_train)},
                {"original", o.original.empty() ? "" : file_hash(o.original)},
                {"expert", o.expert.empty() ? "" : file_hash(o.expert)}};
  for (const auto& m : o.monitors) identity["monitors"].push_back(m);
  const Outputs out = resolve_outputs("finetune", o.out, o.history, identity);

  train::FinetuneOptions options;
  options.bias_expert = expert.get();
  options.monitors = parse_monitors(o.monitors, storage);
  options.log = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (out.run_dir) out.run_dir->log(line);
  };
  options.on_epoch = [](const train::EpochRecord& r) {
    std::printf("epoch %zu loss %.6f penalty %.6g\n", r.epoch, r.mean_loss, r.mean_penalty);
    std::fflush(stdout);
  };
  const auto result = train::finetune(*base.model, ft_train, original, config, options);

  // Only the parameters go into the checkpoint, so kind=ewc with lambda 0 and
  // kind=none produce identical files.
  model::save_checkpoint(out.checkpoint, *base.model, nullptr, nullptr, json{{"stage", "finetune"}});
  write_history_csv(result.history, out.history);
  std::printf("checkpoint %s\nhistory %s\n", out.checkpoint.string().c_str(), out.history.string().c_str());
}

}  // namespace

void add_train(CLI::App& app) {
  auto o = std::make_shared<TrainOptions>();
  auto* cmd = app.add_subcommand("train", "Train a classifier on a dataset; writes a checkpoint and per-epoch CSV");
  cmd->add_option("--data", o->data, "Training set (JSONL)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--dev", o->dev, "Validation set for early stopping (JSONL)")->check(CLI::ExistingFile);
  cmd->add_option("--config", o->config, "TrainConfig JSON; flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--model", o->model, "pair | claim_only")->check(CLI::IsMember({"pair", "claim_only"}));
  cmd->add_option("--embed-dim", o->embed_dim, "Embedding width")->check(CLI::PositiveNumber);
  cmd->add_option("--hidden-dim", o->hidden_dim, "Hidden layer width")->check(CLI::PositiveNumber);
  add_schedule_flags(*cmd, o->schedule);
  add_bias_flags(*cmd, o->bias);
  cmd->add_option("--monitor", o->monitors, "NAME=PATH dataset scored after every epoch (repeatable)");
  cmd->add_option("--out", o->out, "Checkpoint path (default: run directory under the output root)");
  cmd->add_option("--history", o->history, "Per-epoch CSV path (default: next to the checkpoint)");
  cmd->add_option("--expert-out", o->expert_out, "Checkpoint path of the jointly trained expert");
  cmd->callback([o] { run_train(*o); });
}

void add_finetune(CLI::App& app) {
  auto o = std::make_shared<FinetuneOptions>();
  auto* cmd = app.add_subcommand("finetune", "Fine-tune a checkpoint with an optional L2 or EWC penalty");
  cmd->add_option("--checkpoint", o->checkpoint, "Base checkpoint")->required()->check(CLI::ExistingFile);
  cmd->add_option("--ft-train", o->ft_train, "Fine-tuning set (JSONL)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--original", o->original, "Original-task data for the Fisher sample (JSONL)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--config", o->config, "FinetuneConfig JSON; flags override it")->check(CLI::ExistingFile);
  cmd->add_option("--regularizer", o->regularizer, "none | l2 | ewc")->check(CLI::IsMember({"none", "l2", "ewc"}));
  cmd->add_option("--lambda", o->lambda, "Penalty strength")->check(CLI::NonNegativeNumber);
  cmd->add_option("--fisher-sample-size", o->fisher_sample_size, "Original instances per Fisher estimate");
  cmd->add_flag("--freeze-fisher", o->freeze_fisher, "Estimate the Fisher once instead of before every epoch");
  cmd->add_option("--ft-train-size", o->ft_train_size, "Use only the first N fine-tuning instances");
  add_schedule_flags(*cmd, o->schedule);
  add_bias_flags(*cmd, o->bias);
  cmd->add_option("--expert", o->expert, "Claim-only expert checkpoint for --bias poe|dfl")->check(CLI::ExistingFile);
  cmd->add_option("--monitor", o->monitors, "NAME=PATH dataset scored after every epoch (repeatable)");
  cmd->add_option("--out", o->out, "Checkpoint path (default: run directory under the output root)");
  cmd->add_option("--history", o->history, "Per-epoch CSV path (default: next to the checkpoint)");
  cmd->callback([o] { run_finetune(*o); });
}

}  // namespace ewcft::cli
