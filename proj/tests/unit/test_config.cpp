#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ewcft/train/config_json.hpp"

using namespace ewcft;
using namespace ewcft::train;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("experiment config survives a JSON round trip") {
    ExperimentConfig c;
    c.corpus.generator.bias_strength = 0.77;
    c.corpus.ft_kind = FtKind::kSingleLabel;
    c.finetune.train.early_stopping_patience = 3;
    c.finetune.train.gradient_norm_clip.reset();
    c.finetune.regularizer.kind = continual::RegularizerKind::kEwc;
    c.finetune.ft_train_size = 100;
    c.ewc_lambda = 42.5;
    const json j = c;
    CHECK(j.get<ExperimentConfig>() == c);
    CHECK(json(j.get<ExperimentConfig>()) == j);
  }

  TEST_CASE("readers layer present keys over the current values") {
    TrainConfig t;
    t.epochs = 13;
    from_json(json{{"learning_rate", 0.5}}, t);
    CHECK(t.learning_rate == 0.5);
    CHECK(t.epochs == 13);
    from_json(json{{"gradient_norm_clip", nullptr}}, t);
    CHECK_FALSE(t.gradient_norm_clip.has_value());

    ExperimentConfig c;
    from_json(json::parse(R"({"corpus": {"generator": {"n_topics": 5}}, "finetune": {"regularizer": {"lambda": 3}}})"),
              c);
    CHECK(c.corpus.generator.n_topics == 5);
    CHECK(c.corpus.generator.bias_strength == data::GeneratorConfig{}.bias_strength);
    CHECK(c.finetune.regularizer.lambda == 3.0);
    CHECK(c.finetune.train.learning_rate == default_finetune_config().train.learning_rate);
  }

  TEST_CASE("unknown enum spellings are rejected") {
    TrainConfig t;
    CHECK_THROWS(from_json(json{{"optimizer", "rmsprop"}}, t));
    continual::RegularizerConfig r;
    CHECK_THROWS(continual::from_json(json{{"kind", "l1"}}, r));
    CorpusConfig cc;
    CHECK_THROWS(from_json(json{{"ft_kind", "mixed"}}, cc));
  }

  TEST_CASE("config hash is stable and sensitive") {
    ExperimentConfig a;
    const auto h = config_hash(json(a));
    CHECK(h.size() == 16);
    CHECK(config_hash(json(a)) == h);
    // Key order in the source text does not matter.
    CHECK(config_hash(json::parse(R"({"a": 1, "b": 2})")) == config_hash(json::parse(R"({"b": 2, "a": 1})")));
    a.ewc_lambda += 1e-9;
    CHECK(config_hash(json(a)) != h);
  }

  TEST_CASE("defaults validate and invalid values are rejected") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    c.ewc_lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.poe.mode = model::BiasMode::kDfl;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.corpus.ft_train_pairs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.finetune.ft_train_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("JSON files round trip and report their path on errors") {
    const auto path = std::filesystem::temp_directory_path() / "ewcft_test_config.json";
    const json j = ExperimentConfig{};
    write_json_file(j, path);
    CHECK(read_json_file(path) == j);
    {
      std::ofstream(path) << "{ not json";
    }
    try {
      read_json_file(path);
      FAIL("expected an error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_json_file(path), std::runtime_error);
  }

  TEST_CASE("sweep grid JSON") {
    const SweepGrid g = default_sweep_grid(kL2LambdaScale);
    CHECK(json(g).get<SweepGrid>() == g);
  }
}
