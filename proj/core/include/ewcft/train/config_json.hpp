#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ewcft/continual/state.hpp"
#include "ewcft/model/bias_losses.hpp"
#include "ewcft/model/classifier.hpp"
#include "ewcft/train/config.hpp"
#include "ewcft/train/experiment.hpp"

// JSON forms of the configuration types. Readers fill in only the keys that
// are present and keep the target's current value for the rest, so a file
// can be layered over defaults and later overridden field by field.

namespace ewcft::model {
void to_json(nlohmann::json& j, const ModelDims& dims);
void from_json(const nlohmann::json& j, ModelDims& dims);
void to_json(nlohmann::json& j, const BiasModelConfig& config);
void from_json(const nlohmann::json& j, BiasModelConfig& config);
}  // namespace ewcft::model

namespace ewcft::continual {
void to_json(nlohmann::json& j, const RegularizerConfig& config);
void from_json(const nlohmann::json& j, RegularizerConfig& config);
}  // namespace ewcft::continual

namespace ewcft::train {
void to_json(nlohmann::json& j, const TrainConfig& config);
void from_json(const nlohmann::json& j, TrainConfig& config);
void to_json(nlohmann::json& j, const FinetuneConfig& config);
void from_json(const nlohmann::json& j, FinetuneConfig& config);
void to_json(nlohmann::json& j, const SweepGrid& grid);
void from_json(const nlohmann::json& j, SweepGrid& grid);
void to_json(nlohmann::json& j, const CorpusConfig& config);
void from_json(const nlohmann::json& j, CorpusConfig& config);
void to_json(nlohmann::json& j, const ExperimentConfig& config);
void from_json(const nlohmann::json& j, ExperimentConfig& config);

// Parses a JSON file; throws std::runtime_error naming the path on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& value, const std::filesystem::path& path);

// Stable digest of a JSON value (compact dump, keys sorted), 16 hex digits.
std::string config_hash(const nlohmann::json& value);
}  // namespace ewcft::train
