#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ewcft/continual/state.hpp"
#include "ewcft/train/experiment.hpp"

namespace CLI {
class App;
}

namespace ewcft::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Bad or inconsistent flags; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Root for run directories: $EWCFT_OUTPUT_ROOT, else ./ewcft-runs.
std::filesystem::path output_root();

// A content-addressed directory holding one command's artifacts. config.json
// records the identity the directory was created for; opening it again with
// a different identity is an error.
class RunDirectory {
 public:
  RunDirectory(std::filesystem::path dir, const nlohmann::json& identity);

  const std::filesystem::path& path() const noexcept { return dir_; }
  const std::string& hash() const noexcept { return hash_; }

  // Reusable artifact runs/<name>.json, or nullopt if absent. Throws
  // std::runtime_error if it was written under a different hash.
  std::optional<nlohmann::json> load_run(const std::string& name, const std::string& run_hash) const;
  void store_run(const std::string& name, const std::string& run_hash, const nlohmann::json& payload) const;

  // Appends a timestamped line to run.log.
  void log(const std::string& line) const;

 private:
  std::filesystem::path dir_;
  std::string hash_;
};

// <explicit_dir> when given, else <output_root>/<command>-<hash of identity>.
RunDirectory open_run_directory(std::string_view command, const nlohmann::json& identity,
                                const std::optional<std::filesystem::path>& explicit_dir);

// Everything an experiment command needs. Manifest files are JSON objects
// with the optional keys
//   "experiment"       ExperimentConfig object
//   "experiment_file"  path to an ExperimentConfig file (relative to the manifest)
//   "seeds", "conditions", "ablation_sizes", "output_dir"
//   "sweep"            {"condition", "learning_rates", "lambdas", "epochs_max", "k_folds"}
//   "datasets"         {"original_train" | "original_dev" | "original_test" |
//                       "ft_train" | "ft_test": JSONL path}
// Datasets that are not listed are generated from the experiment's corpus
// config.
struct Manifest {
  train::ExperimentConfig experiment;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  // Empty means the command's default condition list.
  std::vector<std::string> conditions;
  std::string sweep_condition = "ft_ewc";
  std::vector<double> learning_rates = train::default_learning_rates();
  // Empty means the default ladder for each regularizer kind.
  std::vector<double> lambdas;
  std::size_t epochs_max = 8;
  std::size_t k_folds = 5;
  std::vector<std::size_t> ablation_sizes = train::default_ablation_sizes();
  std::map<std::string, std::filesystem::path> datasets;
  std::optional<std::filesystem::path> output_dir;
};

Manifest load_manifest(const std::filesystem::path& path);

// Flags shared by sweep, ablate, pareto and report. Each overrides the
// manifest value it names.
struct ExperimentFlags {
  std::string manifest;
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> conditions;
  std::string output_dir;
  std::size_t jobs = 1;
};

void add_experiment_flags(CLI::App& cmd, ExperimentFlags& flags);
Manifest resolve_manifest(const ExperimentFlags& flags);

// Lambda grid for a regularizer kind: the manifest's list when given, else
// the scaled default ladder; {0} for unregularized runs.
std::vector<double> lambdas_for(const Manifest& manifest, continual::RegularizerKind kind);

train::Corpora load_corpora(const Manifest& manifest);

// Identity shared by every experiment command: resolved experiment config
// and the content hashes of dataset files.
nlohmann::json experiment_identity(std::string_view command, const Manifest& manifest);

// Hash of the file's bytes.
std::string file_hash(const std::filesystem::path& path);

std::vector<std::string> split_list(std::string_view text, char sep = ',');

}  // namespace ewcft::cli
