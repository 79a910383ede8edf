#include "ewcft/train/config_json.hpp"

#include <fstream>
#include <stdexcept>

#include "ewcft/data/jsonl.hpp"
#include "ewcft/util/hash.hpp"

using nlohmann::json;

namespace {

// Reads j[key] into target when present.
template <typename T>
void read_field(const json& j, const char* key, T& target) {
  if (auto it = j.find(key); it != j.end()) target = it->template get<T>();
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& target) {
  if (auto it = j.find(key); it != j.end()) {
    if (it->is_null()) {
      target.reset();
    } else {
      target = it->template get<T>();
    }
  }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

namespace ewcft::model {

void to_json(json& j, const ModelDims& d) {
  j = json{{"vocab_size", d.vocab_size},
           {"embed_dim", d.embed_dim},
           {"hidden_dim", d.hidden_dim},
           {"num_classes", d.num_classes}};
}

void from_json(const json& j, ModelDims& d) {
  read_field(j, "vocab_size", d.vocab_size);
  read_field(j, "embed_dim", d.embed_dim);
  read_field(j, "hidden_dim", d.hidden_dim);
  read_field(j, "num_classes", d.num_classes);
}

void to_json(json& j, const BiasModelConfig& c) {
  j = json{{"mode", std::string(to_string(c.mode))},
           {"beta", c.beta},
           {"gamma", c.gamma},
           {"use_expert_at_inference", c.use_expert_at_inference}};
}

void from_json(const json& j, BiasModelConfig& c) {
  if (auto it = j.find("mode"); it != j.end()) c.mode = parse_bias_mode(it->get<std::string>());
  read_field(j, "beta", c.beta);
  read_field(j, "gamma", c.gamma);
  read_field(j, "use_expert_at_inference", c.use_expert_at_inference);
}

}  // namespace ewcft::model

namespace ewcft::continual {

void to_json(json& j, const RegularizerConfig& c) {
  j = json{{"kind", std::string(to_string(c.kind))},
           {"lambda", c.lambda},
           {"fisher_sample_size", c.fisher_sample_size},
           {"recompute_each_epoch", c.recompute_each_epoch}};
}

void from_json(const json& j, RegularizerConfig& c) {
  if (auto it = j.find("kind"); it != j.end()) c.kind = parse_regularizer_kind(it->get<std::string>());
  read_field(j, "lambda", c.lambda);
  read_field(j, "fisher_sample_size", c.fisher_sample_size);
  read_field(j, "recompute_each_epoch", c.recompute_each_epoch);
}

}  // namespace ewcft::continual

namespace ewcft::train {

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"seed", c.seed},
           {"optimizer", std::string(to_string(c.optimizer))},
           {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
           {"gradient_norm_clip", optional_json(c.gradient_norm_clip)},
           {"early_stopping_patience", optional_json(c.early_stopping_patience)}};
}

void from_json(const json& j, TrainConfig& c) {
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "seed", c.seed);
  if (auto it = j.find("optimizer"); it != j.end()) c.optimizer = parse_optimizer_kind(it->get<std::string>());
  if (auto it = j.find("adam"); it != j.end()) {
    read_field(*it, "beta1", c.adam.beta1);
    read_field(*it, "beta2", c.adam.beta2);
    read_field(*it, "epsilon", c.adam.epsilon);
  }
  read_optional(j, "gradient_norm_clip", c.gradient_norm_clip);
  read_optional(j, "early_stopping_patience", c.early_stopping_patience);
}

void to_json(json& j, const FinetuneConfig& c) {
  j = json{{"train", c.train}, {"regularizer", c.regularizer}, {"bias", c.bias},
           {"ft_train_size", optional_json(c.ft_train_size)}};
}

void from_json(const json& j, FinetuneConfig& c) {
  if (auto it = j.find("train"); it != j.end()) from_json(*it, c.train);
  if (auto it = j.find("regularizer"); it != j.end()) continual::from_json(*it, c.regularizer);
  if (auto it = j.find("bias"); it != j.end()) model::from_json(*it, c.bias);
  read_optional(j, "ft_train_size", c.ft_train_size);
}

void to_json(json& j, const SweepGrid& g) {
  j = json{{"learning_rates", g.learning_rates},
           {"lambdas", g.lambdas},
           {"epochs_max", g.epochs_max},
           {"k_folds", g.k_folds}};
}

void from_json(const json& j, SweepGrid& g) {
  read_field(j, "learning_rates", g.learning_rates);
  read_field(j, "lambdas", g.lambdas);
  read_field(j, "epochs_max", g.epochs_max);
  read_field(j, "k_folds", g.k_folds);
}

void to_json(json& j, const CorpusConfig& c) {
  j = json{{"generator", c.generator},
           {"original_dev", c.original_dev},
           {"original_test", c.original_test},
           {"ft_kind", std::string(to_string(c.ft_kind))},
           {"ft_train_pairs", c.ft_train_pairs},
           {"ft_test_pairs", c.ft_test_pairs}};
}

void from_json(const json& j, CorpusConfig& c) {
  if (auto it = j.find("generator"); it != j.end()) {
    // Layer over the current generator settings.
    json merged = c.generator;
    merged.update(*it);
    c.generator = merged.get<data::GeneratorConfig>();
  }
  read_field(j, "original_dev", c.original_dev);
  read_field(j, "original_test", c.original_test);
  if (auto it = j.find("ft_kind"); it != j.end()) c.ft_kind = parse_ft_kind(it->get<std::string>());
  read_field(j, "ft_train_pairs", c.ft_train_pairs);
  read_field(j, "ft_test_pairs", c.ft_test_pairs);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"corpus", c.corpus},       {"dims", c.dims},           {"base_train", c.base_train},
           {"finetune", c.finetune},   {"l2_lambda", c.l2_lambda}, {"ewc_lambda", c.ewc_lambda},
           {"poe", c.poe},             {"dfl", c.dfl}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (auto it = j.find("corpus"); it != j.end()) from_json(*it, c.corpus);
  if (auto it = j.find("dims"); it != j.end()) model::from_json(*it, c.dims);
  if (auto it = j.find("base_train"); it != j.end()) from_json(*it, c.base_train);
  if (auto it = j.find("finetune"); it != j.end()) from_json(*it, c.finetune);
  read_field(j, "l2_lambda", c.l2_lambda);
  read_field(j, "ewc_lambda", c.ewc_lambda);
  if (auto it = j.find("poe"); it != j.end()) model::from_json(*it, c.poe);
  if (auto it = j.find("dfl"); it != j.end()) model::from_json(*it, c.dfl);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json_file(const json& value, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw std::runtime_error("error writing " + path.string());
}

std::string config_hash(const json& value) { return util::hash_hex(value.dump()); }

}  // namespace ewcft::train
