#include "common.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "ewcft/data/jsonl.hpp"
#include "ewcft/train/config_json.hpp"
#include "ewcft/util/hash.hpp"

namespace ewcft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string>& dataset_slots() {
  static const std::vector<std::string> slots{"original_train", "original_dev", "original_test", "ft_train",
                                              "ft_test"};
  return slots;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

fs::path output_root() {
  if (const char* root = std::getenv("EWCFT_OUTPUT_ROOT"); root && *root) return root;
  return "ewcft-runs";
}

RunDirectory::RunDirectory(fs::path dir, const json& identity)
    : dir_(std::move(dir)), hash_(train::config_hash(identity)) {
  fs::create_directories(dir_ / "runs");
  const fs::path config = dir_ / "config.json";
  if (fs::exists(config)) {
    const json existing = train::read_json_file(config);
    if (existing.value("config_hash", std::string{}) != hash_) {
      throw std::runtime_error(dir_.string() + " holds artifacts of a different configuration (hash " +
                               existing.value("config_hash", std::string{"?"}) + ", expected " + hash_ + ")");
    }
  } else {
    train::write_json_file(json{{"config_hash", hash_}, {"identity", identity}}, config);
  }
}

std::optional<json> RunDirectory::load_run(const std::string& name, const std::string& run_hash) const {
  const fs::path file = dir_ / "runs" / (name + ".json");
  if (!fs::exists(file)) return std::nullopt;
  json j = train::read_json_file(file);
  if (j.value("config_hash", std::string{}) != run_hash) {
    throw std::runtime_error(file.string() + " was produced by a different configuration; remove it or choose another "
                             "output directory");
  }
  return std::move(j.at("payload"));
}

void RunDirectory::store_run(const std::string& name, const std::string& run_hash, const json& payload) const {
  train::write_json_file(json{{"config_hash", run_hash}, {"payload", payload}}, dir_ / "runs" / (name + ".json"));
}

void RunDirectory::log(const std::string& line) const {
  std::ofstream out(dir_ / "run.log", std::ios::app);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << '\n';
}

RunDirectory open_run_directory(std::string_view command, const json& identity,
                                const std::optional<fs::path>& explicit_dir) {
  if (explicit_dir) return RunDirectory(*explicit_dir, identity);
  return RunDirectory(output_root() / (std::string(command) + "-" + train::config_hash(identity)), identity);
}

Manifest load_manifest(const fs::path& path) {
  const json j = train::read_json_file(path);
  if (!j.is_object()) throw UsageError(path.string() + ": manifest must be a JSON object");
  const fs::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  Manifest m;
  try {
    if (j.contains("experiment_file")) {
      train::read_json_file(resolve(j.at("experiment_file").get<std::string>())).get_to(m.experiment);
    }
    read_if(j, "experiment", m.experiment);
    read_if(j, "seeds", m.seeds);
    read_if(j, "conditions", m.conditions);
    read_if(j, "ablation_sizes", m.ablation_sizes);
    if (j.contains("output_dir")) m.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      read_if(s, "condition", m.sweep_condition);
      read_if(s, "learning_rates", m.learning_rates);
      read_if(s, "lambdas", m.lambdas);
      read_if(s, "epochs_max", m.epochs_max);
      read_if(s, "k_folds", m.k_folds);
    }
    if (j.contains("datasets")) {
      for (const auto& [slot, p] : j.at("datasets").items()) {
        if (std::find(dataset_slots().begin(), dataset_slots().end(), slot) == dataset_slots().end()) {
          throw UsageError(path.string() + ": unknown dataset slot '" + slot + "'");
        }
        m.datasets[slot] = resolve(p.get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  for (const auto& [slot, p] : m.datasets) {
    if (!fs::exists(p)) throw UsageError(path.string() + ": dataset '" + slot + "' not found: " + p.string());
  }
  return m;
}

void add_experiment_flags(CLI::App& cmd, ExperimentFlags& flags) {
  cmd.add_option("--manifest", flags.manifest, "Manifest JSON (config-first; flags override it)")
      ->check(CLI::ExistingFile);
  cmd.add_option("--config", flags.config, "ExperimentConfig JSON layered over the manifest's experiment")
      ->check(CLI::ExistingFile);
  cmd.add_option("--seeds", flags.seeds, "Comma-separated seeds")->delimiter(',');
  cmd.add_option("--conditions", flags.conditions, "Comma-separated condition names")->delimiter(',');
  cmd.add_option("--output-dir", flags.output_dir, "Run directory (default: content-addressed under the output root)");
  cmd.add_option("--jobs", flags.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
}

Manifest resolve_manifest(const ExperimentFlags& flags) {
  Manifest m = flags.manifest.empty() ? Manifest{} : load_manifest(flags.manifest);
  if (!flags.config.empty()) {
    try {
      train::read_json_file(flags.config).get_to(m.experiment);
    } catch (const json::exception& e) {
      throw UsageError(flags.config + ": " + e.what());
    }
  }
  if (!flags.seeds.empty()) m.seeds = flags.seeds;
  if (!flags.conditions.empty()) m.conditions = flags.conditions;
  if (!flags.output_dir.empty()) m.output_dir = fs::path(flags.output_dir);
  if (m.seeds.empty()) throw UsageError("at least one seed is required");
  try {
    m.experiment.validate();
    for (const auto& c : m.conditions) train::parse_condition(c);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return m;
}

std::vector<double> lambdas_for(const Manifest& manifest, continual::RegularizerKind kind) {
  if (kind == continual::RegularizerKind::kNone) return {0.0};
  if (!manifest.lambdas.empty()) return manifest.lambdas;
  return train::default_lambda_grid(kind == continual::RegularizerKind::kEwc ? train::kEwcLambdaScale
                                                                             : train::kL2LambdaScale);
}

train::Corpora load_corpora(const Manifest& manifest) {
  train::Corpora c = train::build_corpora(manifest.experiment.corpus);
  for (const auto& [slot, path] : manifest.datasets) {
    data::Dataset d = data::read_jsonl(path);
    if (slot == "original_train") c.original_train = std::move(d);
    if (slot == "original_dev") c.original_dev = std::move(d);
    if (slot == "original_test") c.original_test = std::move(d);
    if (slot == "ft_train") c.ft_train = std::move(d);
    if (slot == "ft_test") c.ft_test = std::move(d);
  }
  return c;
}

json experiment_identity(std::string_view command, const Manifest& manifest) {
  json datasets = json::object();
  for (const auto& [slot, path] : manifest.datasets) datasets[slot] = file_hash(path);
  return json{{"command", command}, {"experiment", manifest.experiment}, {"datasets", datasets}};
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return util::hash_hex(bytes);
}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace ewcft::cli
