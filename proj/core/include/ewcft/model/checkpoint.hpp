#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

#include "ewcft/continual/state.hpp"
#include "ewcft/model/classifier.hpp"

namespace ewcft::model {

// Checkpoint files are JSON:
//   {"format": "ewcft-checkpoint", "version": 1,
//    "model": {"kind": "pair", "dims": {...}, "init_seed": 7},
//    "parameters": [{"id": "...", "shape": [r, c], "values": [...]}, ...],
//    "snapshot": {"<id>": [...], ...},                       (optional)
//    "fisher": {"sample_size": n, "source": "...",
//               "values": {"<id>": [...], ...}},             (optional)
//    "metadata": {...}}                                       (optional)
// Doubles are written in shortest round-trip form, so save/load is bit-exact.
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::unique_ptr<Classifier> model;
  std::optional<continual::ParameterSnapshot> snapshot;
  std::optional<continual::FisherDiagonal> fisher;
  nlohmann::json metadata = nlohmann::json::object();
};

// Throws std::invalid_argument if any value is non-finite.
nlohmann::json checkpoint_to_json(const Classifier& model, const continual::ParameterSnapshot* snapshot = nullptr,
                                  const continual::FisherDiagonal* fisher = nullptr,
                                  const nlohmann::json& metadata = nlohmann::json::object());
// Throws std::runtime_error on a wrong format tag, unsupported version or
// inconsistent shapes.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Classifier& model,
                     const continual::ParameterSnapshot* snapshot = nullptr,
                     const continual::FisherDiagonal* fisher = nullptr,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ewcft::model
