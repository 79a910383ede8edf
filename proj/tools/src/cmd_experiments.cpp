#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "ewcft/eval/metrics.hpp"
#include "ewcft/eval/pareto.hpp"
#include "ewcft/eval/report.hpp"
#include "ewcft/train/config_json.hpp"
#include "ewcft/train/grid_search.hpp"

namespace ewcft::train {

void to_json(nlohmann::json& j, const CvRow& r) {
  j = {{"learning_rate", r.learning_rate},
       {"lambda", r.lambda},
       {"epochs", r.epochs},
       {"mean_accuracy", r.mean_accuracy},
       {"fold_accuracies", r.fold_accuracies}};
}

void from_json(const nlohmann::json& j, CvRow& r) {
  j.at("learning_rate").get_to(r.learning_rate);
  j.at("lambda").get_to(r.lambda);
  j.at("epochs").get_to(r.epochs);
  j.at("mean_accuracy").get_to(r.mean_accuracy);
  j.at("fold_accuracies").get_to(r.fold_accuracies);
}

}  // namespace ewcft::train

namespace ewcft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string seed_run(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

std::string run_hash(const RunDirectory& dir, const std::string& name) {
  return train::config_hash(json{{"run_directory", dir.hash()}, {"run", name}});
}

// Condition names that fine-tune the plain base model.
train::Condition plain_finetune_condition(const std::string& name) {
  train::Condition c;
  try {
    c = train::parse_condition(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!c.finetune || c.base != train::BaseKind::kOriginal || c.bias != model::BiasMode::kNone) {
    throw UsageError("'" + name + "' is not one of ft, ft_l2, ft_ewc");
  }
  return c;
}

std::vector<std::string> conditions_or(const Manifest& m, std::vector<std::string> fallback) {
  return m.conditions.empty() ? fallback : m.conditions;
}

std::size_t index_of(const std::vector<std::string>& names, const std::string& name) {
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

// ---------------------------------------------------------------- sweep

// The best epoch of every (learning rate, lambda) configuration.
std::vector<train::CvRow> per_config_rows(const std::vector<train::CvRow>& table) {
  std::vector<train::CvRow> out;
  for (const auto& row : table) {
    if (!out.empty() && out.back().learning_rate == row.learning_rate && out.back().lambda == row.lambda) {
      if (train::better_cv_row(row, out.back())) out.back() = row;
    } else {
      out.push_back(row);
    }
  }
  return out;
}

void write_config_summary_csv(const std::vector<train::CvRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "learning_rate,lambda,best_epochs,mean_accuracy\n";
  for (const auto& r : rows) {
    out << eval::format_number(r.learning_rate) << ',' << eval::format_number(r.lambda) << ',' << r.epochs << ','
        << eval::format_number(r.mean_accuracy) << '\n';
  }
}

void run_sweep(const ExperimentFlags& flags) {
  const Manifest m = resolve_manifest(flags);
  const auto condition = plain_finetune_condition(m.sweep_condition);
  const train::SweepGrid grid{m.learning_rates, lambdas_for(m, *condition.finetune), m.epochs_max, m.k_folds};
  try {
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  json identity = experiment_identity("sweep", m);
  identity["condition"] = condition.name;
  identity["grid"] = grid;
  const RunDirectory dir = open_run_directory("sweep", identity, m.output_dir);
  dir.log("sweep started");
  const train::Corpora corpora = load_corpora(m);

  for (const auto seed : m.seeds) {
    const std::string name = seed_run(seed);
    const std::string hash = run_hash(dir, name);
    std::vector<train::CvRow> table;
    train::CvRow best;
    if (auto cached = dir.load_run(name, hash)) {
      cached->at("table").get_to(table);
      cached->at("best").get_to(best);
      std::printf("seed %llu: reusing %s\n", static_cast<unsigned long long>(seed), name.c_str());
    } else {
      train::BaseModelCache cache(m.experiment, corpora, seed);
      const auto& base = *cache.get(train::BaseKind::kOriginal, model::BiasMode::kNone).model;
      const auto cv =
          train::grid_search_cv([&] { return base.clone(); }, corpora.ft_train, corpora.original_train, grid,
                                train::condition_finetune_config(m.experiment, condition, seed), seed, flags.jobs);
      table = cv.table;
      best = cv.best_row;
      dir.store_run(name, hash, json{{"table", table}, {"best", best}});
    }
    const auto configs = per_config_rows(table);
    eval::write_cv_table_csv(table, dir.path() / ("cv_table-" + name + ".csv"));
    write_config_summary_csv(configs, dir.path() / ("cv_configs-" + name + ".csv"));
    train::FinetuneConfig chosen = train::condition_finetune_config(m.experiment, condition, seed);
    chosen.train.learning_rate = best.learning_rate;
    chosen.train.epochs = best.epochs;
    chosen.regularizer.lambda = best.lambda;
    train::write_json_file(chosen, dir.path() / ("best-" + name + ".json"));
    std::printf("seed %llu: %zu configurations, %zu CV rows; best lr=%s lambda=%s epochs=%zu accuracy=%s\n",
                static_cast<unsigned long long>(seed), configs.size(), table.size(),
                eval::format_number(best.learning_rate).c_str(), eval::format_number(best.lambda).c_str(),
                best.epochs, eval::format_number(best.mean_accuracy).c_str());
  }
  dir.log("sweep finished");
  std::printf("artifacts %s\n", dir.path().string().c_str());
}

// ---------------------------------------------------------------- ablate

void run_ablate(const ExperimentFlags& flags) {
  Manifest m = resolve_manifest(flags);
  const auto conditions = conditions_or(m, {"ft", "ft_l2", "ft_ewc"});
  auto sizes = m.ablation_sizes;
  if (sizes.empty() || !std::is_sorted(sizes.begin(), sizes.end()) || sizes.front() == 0) {
    throw UsageError("ablation sizes must be positive and ascending");
  }
  // The generated FT-train pool grows to the largest size; smaller pools are
  // prefixes of larger ones, so every size sees the same instances.
  if (!m.datasets.count("ft_train")) {
    auto& pairs = m.experiment.corpus.ft_train_pairs;
    pairs = std::max(pairs, (sizes.back() + 1) / 2);
  }
  json identity = experiment_identity("ablate", m);
  identity["conditions"] = conditions;
  identity["sizes"] = sizes;
  const RunDirectory dir = open_run_directory("ablate", identity, m.output_dir);
  dir.log("ablate started");
  const train::Corpora corpora = load_corpora(m);
  if (sizes.back() > corpora.ft_train.size()) {
    throw UsageError("largest ablation size exceeds the " + std::to_string(corpora.ft_train.size()) +
                     " FT-train instances");
  }

  std::map<std::uint64_t, std::vector<train::AblationRow>> by_seed;
  std::vector<std::uint64_t> missing;
  for (const auto seed : m.seeds) {
    if (auto cached = dir.load_run(seed_run(seed), run_hash(dir, seed_run(seed)))) {
      for (const auto& r : *cached) {
        by_seed[seed].push_back({r.at("size").get<std::size_t>(), r.at("condition").get<std::string>(), seed,
                                 r.at("original_acc").get<double>(), r.at("ft_acc").get<double>()});
      }
    } else {
      missing.push_back(seed);
    }
  }
  if (!missing.empty()) {
    for (auto& row : train::ablation_sweep(m.experiment, corpora, sizes, conditions, missing, flags.jobs)) {
      by_seed[row.seed].push_back(std::move(row));
    }
    for (const auto seed : missing) {
      json rows = json::array();
      for (const auto& r : by_seed[seed]) {
        rows.push_back({{"size", r.size}, {"condition", r.condition}, {"original_acc", r.original_acc},
                        {"ft_acc", r.ft_acc}});
      }
      dir.store_run(seed_run(seed), run_hash(dir, seed_run(seed)), rows);
    }
  }

  std::vector<train::AblationRow> rows;
  for (const auto seed : m.seeds) rows.insert(rows.end(), by_seed[seed].begin(), by_seed[seed].end());
  const auto seed_pos = [&](std::uint64_t s) { return std::find(m.seeds.begin(), m.seeds.end(), s) - m.seeds.begin(); };
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
    if (a.size != b.size) return a.size < b.size;
    const auto ca = index_of(conditions, a.condition), cb = index_of(conditions, b.condition);
    if (ca != cb) return ca < cb;
    return seed_pos(a.seed) < seed_pos(b.seed);
  });
  eval::write_ablation_csv(rows, dir.path() / "ablation.csv", dir.path() / "ablation_curves.csv");

  std::printf("%8s  %-10s %12s %12s\n", "size", "condition", "ft_test", "original");
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    double ft = 0.0, orig = 0.0;
    for (; j < rows.size() && rows[j].size == rows[i].size && rows[j].condition == rows[i].condition; ++j) {
      ft += rows[j].ft_acc;
      orig += rows[j].original_acc;
    }
    const double n = static_cast<double>(j - i);
    std::printf("%8zu  %-10s %12.4f %12.4f\n", rows[i].size, rows[i].condition.c_str(), ft / n, orig / n);
    i = j;
  }
  dir.log("ablate finished");
  std::printf("%zu rows\nartifacts %s\n", rows.size(), dir.path().string().c_str());
}

// ---------------------------------------------------------------- pareto

struct ParetoOptions {
  ExperimentFlags flags;
  std::string points;
  std::string dominant = "ft_ewc";
  std::string dominated = "ft";
};

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

// Points file with at least the columns condition, original_acc, ft_acc.
train::ParetoSweep read_points_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw UsageError(path.string() + ": empty points file");
  const auto header = parse_csv_line(line);
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cc = column("condition"), cx = column("original_acc"), cy = column("ft_acc");
  const auto label_it = std::find(header.begin(), header.end(), "label");
  train::ParetoSweep sweep;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = parse_csv_line(line);
    if (f.size() != header.size()) {
      throw UsageError(path.string() + ": line " + std::to_string(line_no) + " has the wrong number of fields");
    }
    eval::ParetoPoint p;
    try {
      p.x = std::stod(f[cx]);
      p.y = std::stod(f[cy]);
    } catch (const std::exception&) {
      throw UsageError(path.string() + ": line " + std::to_string(line_no) + " has a non-numeric accuracy");
    }
    if (label_it != header.end()) p.label = f[static_cast<std::size_t>(label_it - header.begin())];
    auto it = std::find_if(sweep.points.begin(), sweep.points.end(), [&](const auto& e) { return e.first == f[cc]; });
    if (it == sweep.points.end()) {
      sweep.points.emplace_back(f[cc], std::vector<eval::ParetoPoint>{});
      it = std::prev(sweep.points.end());
    }
    it->second.push_back(std::move(p));
  }
  return sweep;
}

json points_json(const std::vector<eval::ParetoPoint>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back({{"x", p.x}, {"y", p.y}, {"label", p.label}});
  return out;
}

std::vector<eval::ParetoPoint> points_from_json(const json& j) {
  std::vector<eval::ParetoPoint> out;
  for (const auto& p : j) out.push_back({p.at("x").get<double>(), p.at("y").get<double>(), p.at("label")});
  return out;
}

void report_dominance(const train::ParetoSweep& sweep, const ParetoOptions& o) {
  const auto has = [&](const std::string& c) {
    return std::any_of(sweep.points.begin(), sweep.points.end(), [&](const auto& e) { return e.first == c; });
  };
  for (const auto& [condition, points] : sweep.points) {
    std::printf("%-8s %4zu points, %3zu on the frontier\n", condition.c_str(), points.size(),
                eval::pareto_frontier(points).size());
  }
  if (!has(o.dominant) || !has(o.dominated)) {
    throw UsageError("dominance needs points for both '" + o.dominant + "' and '" + o.dominated + "'");
  }
  const bool dominates =
      eval::frontier_dominates(eval::pareto_frontier(sweep.at(o.dominant)), eval::pareto_frontier(sweep.at(o.dominated)));
  std::printf("%s frontier dominates %s frontier: dominance=%s\n", o.dominant.c_str(), o.dominated.c_str(),
              dominates ? "true" : "false");
}

void run_pareto(const ParetoOptions& o) {
  if (!o.points.empty()) {
    report_dominance(read_points_csv(o.points), o);
    return;
  }
  const Manifest m = resolve_manifest(o.flags);
  const auto conditions = conditions_or(m, {"ft", "ft_l2", "ft_ewc"});
  std::vector<train::Condition> parsed;
  for (const auto& c : conditions) parsed.push_back(plain_finetune_condition(c));
  if (m.learning_rates.empty() || m.epochs_max < 1) throw UsageError("pareto needs learning rates and epochs_max >= 1");
  const std::uint64_t seed = m.seeds.front();
  json identity = experiment_identity("pareto", m);
  identity["conditions"] = conditions;
  identity["learning_rates"] = m.learning_rates;
  identity["lambdas"] = m.lambdas;
  identity["epochs_max"] = m.epochs_max;
  identity["seed"] = seed;
  const RunDirectory dir = open_run_directory("pareto", identity, m.output_dir);
  dir.log("pareto started");
  const train::Corpora corpora = load_corpora(m);

  train::ParetoSweep sweep;
  for (const auto& c : parsed) {
    const std::string hash = run_hash(dir, c.name);
    std::vector<eval::ParetoPoint> points;
    if (auto cached = dir.load_run(c.name, hash)) {
      points = points_from_json(*cached);
    } else {
      auto one = train::pareto_sweep(m.experiment, corpora, {c.name}, m.learning_rates,
                                     lambdas_for(m, *c.finetune), m.epochs_max, seed, o.flags.jobs);
      points = std::move(one.points.front().second);
      dir.store_run(c.name, hash, points_json(points));
    }
    sweep.points.emplace_back(c.name, std::move(points));
  }
  eval::write_pareto_csv(sweep, dir.path() / "pareto.csv");
  report_dominance(sweep, o);
  dir.log("pareto finished");
  std::printf("artifacts %s\n", dir.path().string().c_str());
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  ExperimentFlags flags;
  bool welch = false;
};

void run_report(const ReportOptions& o) {
  const Manifest m = resolve_manifest(o.flags);
  const auto conditions = conditions_or(m, train::table_conditions());
  json identity = experiment_identity("report", m);
  identity["conditions"] = conditions;
  const RunDirectory dir = open_run_directory("report", identity, m.output_dir);
  dir.log("report started");
  const train::Corpora corpora = load_corpora(m);

  // per_seed[seed][condition] = (hash, original, ft)
  std::map<std::uint64_t, json> per_seed;
  std::vector<std::uint64_t> missing;
  for (const auto seed : m.seeds) {
    if (auto cached = dir.load_run(seed_run(seed), run_hash(dir, seed_run(seed)))) {
      per_seed[seed] = std::move(*cached);
    } else {
      missing.push_back(seed);
    }
  }
  if (!missing.empty()) {
    const auto results = train::run_conditions(m.experiment, corpora, missing, conditions, o.flags.jobs);
    for (std::size_t s = 0; s < missing.size(); ++s) {
      json runs = json::object();
      for (const auto& r : results) {
        runs[r.condition] = {{"config_hash", r.config_hash},
                             {"original_acc", r.seeds[s].original_acc},
                             {"ft_acc", r.seeds[s].ft_acc}};
      }
      dir.store_run(seed_run(missing[s]), run_hash(dir, seed_run(missing[s])), runs);
      per_seed[missing[s]] = std::move(runs);
    }
  }

  std::vector<train::RunResult> results;
  for (const auto& c : conditions) {
    train::RunResult r;
    r.condition = c;
    for (const auto seed : m.seeds) {
      const json& run = per_seed.at(seed).at(c);
      r.config_hash = run.at("config_hash").get<std::string>();
      train::SeedResult sr;
      sr.seed = seed;
      sr.original_acc = run.at("original_acc").get<double>();
      sr.ft_acc = run.at("ft_acc").get<double>();
      r.seeds.push_back(std::move(sr));
    }
    results.push_back(std::move(r));
  }
  const auto kind = o.welch ? eval::TTestKind::kWelch : eval::TTestKind::kPooled;
  eval::emit_report(results, dir.path(), kind);
  const std::string table = eval::format_table(results, kind);
  std::ofstream(dir.path() / "table.txt") << table;
  std::printf("%s", table.c_str());
  dir.log("report finished");
  std::printf("artifacts %s\n", dir.path().string().c_str());
}

}  // namespace

void add_sweep(CLI::App& app) {
  auto f = std::make_shared<ExperimentFlags>();
  auto* cmd = app.add_subcommand("sweep", "Cross-validated (lr x lambda x epochs) grid search on FT-train");
  add_experiment_flags(*cmd, *f);
  cmd->callback([f] { run_sweep(*f); });
}

void add_ablate(CLI::App& app) {
  auto f = std::make_shared<ExperimentFlags>();
  auto* cmd = app.add_subcommand("ablate", "Accuracy versus FT-train size over nested subsets");
  add_experiment_flags(*cmd, *f);
  cmd->callback([f] { run_ablate(*f); });
}

void add_pareto(CLI::App& app) {
  auto o = std::make_shared<ParetoOptions>();
  auto* cmd = app.add_subcommand("pareto", "Sweep (lr x lambda x epochs) and compare Pareto frontiers");
  add_experiment_flags(*cmd, o->flags);
  cmd->add_option("--points", o->points, "Read points from a CSV (condition, original_acc, ft_acc) instead of training")
      ->check(CLI::ExistingFile);
  cmd->add_option("--dominant", o->dominant, "Condition expected to dominate");
  cmd->add_option("--dominated", o->dominated, "Condition expected to be dominated");
  cmd->callback([o] { run_pareto(*o); });
}

void add_report(CLI::App& app) {
  auto o = std::make_shared<ReportOptions>();
  auto* cmd = app.add_subcommand("report", "Multi-seed condition table with t-test markers; writes CSV and JSON");
  add_experiment_flags(*cmd, o->flags);
  cmd->add_flag("--welch", o->welch, "Use Welch's t-test instead of the pooled-variance test");
  cmd->callback([o] { run_report(*o); });
}

}  // namespace ewcft::cli
