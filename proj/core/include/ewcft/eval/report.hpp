#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ewcft/eval/pareto.hpp"
#include "ewcft/eval/stats.hpp"
#include "ewcft/train/experiment.hpp"
#include "ewcft/train/grid_search.hpp"

namespace ewcft::eval {

// Number formatting used by every CSV: '.' decimal, 12 significant digits.
std::string format_number(double value);
// RFC 4180 field quoting.
std::string csv_field(std::string_view text);

// Markers attached to a condition's mean: improvements at p < 0.05 over FT
// ("*"), FT+L2 ("†") and the untreated model ("#"); on the FT-test block,
// non-significant deteriorations relative to FT ("♦") and FT+L2 ("♥").
struct Markers {
  std::string original;
  std::string ft_test;
};

struct Comparison {
  std::string metric;  // "original" or "ft_test"
  std::string a;
  std::string b;
  TTestResult test;
};

// Pairwise per-seed-accuracy t-tests between every two conditions, for both
// metrics, in condition order.
std::vector<Comparison> compare_conditions(const std::vector<train::RunResult>& results,
                                           TTestKind kind = TTestKind::kPooled);
Markers markers_for(const std::string& condition, const std::vector<train::RunResult>& results,
                    TTestKind kind = TTestKind::kPooled);

nlohmann::json summary_json(const std::vector<train::RunResult>& results, TTestKind kind = TTestKind::kPooled);

// Writes <dir>/results.csv (condition, seed, original_acc, ft_acc,
// config_hash) and <dir>/summary.json. Throws std::invalid_argument on empty
// results and std::runtime_error when the directory cannot be written.
void emit_report(const std::vector<train::RunResult>& results, const std::filesystem::path& dir,
                 TTestKind kind = TTestKind::kPooled);

// Per-run rows (size, condition, seed, ft_test_acc, original_acc) and, in
// `curves_path`, per-(size, condition) means: series "ft_test" drawn solid
// and "original" drawn dashed.
void write_ablation_csv(const std::vector<train::AblationRow>& rows, const std::filesystem::path& path,
                        const std::filesystem::path& curves_path);

void write_cv_table_csv(const std::vector<train::CvRow>& table, const std::filesystem::path& path);

// condition, label, original_acc, ft_acc, on_frontier
void write_pareto_csv(const train::ParetoSweep& sweep, const std::filesystem::path& path);

// Aligned text table of mean ± std per condition with markers.
std::string format_table(const std::vector<train::RunResult>& results, TTestKind kind = TTestKind::kPooled);

}  // namespace ewcft::eval
