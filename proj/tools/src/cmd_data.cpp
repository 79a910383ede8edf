#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "ewcft/data/generators.hpp"
#include "ewcft/data/jsonl.hpp"
#include "ewcft/train/config_json.hpp"

namespace ewcft::cli {

namespace {

struct GenDataOptions {
  std::string kind;
  std::string out;
  std::string config;
  std::uint64_t seed = 1;
  std::optional<std::size_t> n;
  std::optional<double> bias_strength;
  std::optional<double> alt_form_rate;
  std::optional<std::size_t> n_topics;
  std::optional<std::size_t> vocab_size;
};

data::Dataset generate(const GenDataOptions& o, data::GeneratorConfig g) {
  if (o.kind == "original") {
    if (o.n) g.n_instances = *o.n;
    return data::generate_biased_original(g);
  }
  const std::size_t n = o.n.value_or(700);
  if (o.kind == "symmetric") {
    if (n % 2 != 0 || n == 0) throw UsageError("--kind symmetric needs a positive even --n (two instances per claim)");
    data::Dataset base(data::synthetic_vocabulary(g), data::default_label_names(),
                       data::Provenance{"biased_original", g.seed, g});
    return data::generate_symmetric_counterfactual(base, n / 2, o.seed);
  }
  g.n_instances = n;
  return data::generate_single_label_challenge(g);
}

void run(const GenDataOptions& o) {
  data::GeneratorConfig g;
  if (!o.config.empty()) {
    try {
      train::read_json_file(o.config).get_to(g);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(o.config + ": " + e.what());
    }
  }
  g.seed = o.seed;
  if (o.bias_strength) g.bias_strength = *o.bias_strength;
  if (o.alt_form_rate) g.alt_form_rate = *o.alt_form_rate;
  if (o.n_topics) g.n_topics = *o.n_topics;
  if (o.vocab_size) g.vocab_size = *o.vocab_size;
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const data::Dataset d = generate(o, g);
  data::write_jsonl(d, std::filesystem::path(o.out));
  std::printf("wrote %zu instances to %s\n", d.size(), o.out.c_str());
  std::printf("mutual_information_bits=%.6f\n", data::claim_label_mutual_information(d));
}

}  // namespace

void add_gen_data(CLI::App& app) {
  auto o = std::make_shared<GenDataOptions>();
  auto* cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset as JSON Lines and print its claim-label MI");
  cmd->add_option("--kind", o->kind, "original | symmetric | single-label")
      ->required()
      ->check(CLI::IsMember({"original", "symmetric", "single-label"}));
  cmd->add_option("--out", o->out, "Output JSONL path")->required();
  cmd->add_option("--seed", o->seed, "Generator seed");
  cmd->add_option("--n", o->n, "Number of instances (default 20000 original, 700 otherwise)");
  cmd->add_option("--bias-strength", o->bias_strength, "Probability that a claim carries a giveaway cue");
  cmd->add_option("--alt-form-rate", o->alt_form_rate, "Alternate-form rate for symmetric and challenge sets");
  cmd->add_option("--n-topics", o->n_topics, "Number of claim topics");
  cmd->add_option("--vocab-size", o->vocab_size, "Vocabulary size");
  cmd->add_option("--config", o->config, "GeneratorConfig JSON; flags override it")->check(CLI::ExistingFile);
  cmd->callback([o] { run(*o); });
}

}  // namespace ewcft::cli
