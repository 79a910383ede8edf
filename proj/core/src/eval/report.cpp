#include "ewcft/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ewcft/eval/metrics.hpp"

namespace ewcft::eval {

using nlohmann::json;

namespace {

constexpr double kAlpha = 0.05;

std::vector<double> metric_values(const train::RunResult& r, std::string_view metric) {
  std::vector<double> out;
  for (const auto& s : r.seeds) out.push_back(metric == "original" ? s.original_acc : s.ft_acc);
  return out;
}

const train::RunResult* find_result(const std::vector<train::RunResult>& results, std::string_view name) {
  for (const auto& r : results) {
    if (r.condition == name) return &r;
  }
  return nullptr;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("error writing " + path.string());
}

// Markers for one metric of `condition`.
std::string metric_markers(const std::string& condition, const std::vector<train::RunResult>& results,
                           std::string_view metric, TTestKind kind) {
  const auto* self = find_result(results, condition);
  if (self == nullptr || self->seeds.size() < 2) return {};
  const auto mine = metric_values(*self, metric);
  std::string out;
  const std::pair<std::string_view, std::string_view> improvements[] = {{"ft", "*"}, {"ft_l2", "†"}, {"original", "#"}};
  for (auto [reference, marker] : improvements) {
    const auto* ref = find_result(results, reference);
    if (ref == nullptr || ref == self || ref->seeds.size() < 2) continue;
    const auto t = unpaired_t_test(mine, metric_values(*ref, metric), kind);
    if (t.t > 0 && t.p < kAlpha) out += marker;
  }
  if (metric == "ft_test") {
    const std::pair<std::string_view, std::string_view> deteriorations[] = {{"ft", "♦"}, {"ft_l2", "♥"}};
    for (auto [reference, marker] : deteriorations) {
      const auto* ref = find_result(results, reference);
      if (ref == nullptr || ref == self || ref->seeds.size() < 2) continue;
      const auto t = unpaired_t_test(mine, metric_values(*ref, metric), kind);
      if (t.t < 0 && t.p >= kAlpha) out += marker;
    }
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return buf;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<Comparison> compare_conditions(const std::vector<train::RunResult>& results, TTestKind kind) {
  std::vector<Comparison> out;
  for (std::string_view metric : {"original", "ft_test"}) {
    for (std::size_t i = 0; i < results.size(); ++i) {
      for (std::size_t j = i + 1; j < results.size(); ++j) {
        if (results[i].seeds.size() < 2 || results[j].seeds.size() < 2) continue;
        out.push_back({std::string(metric), results[i].condition, results[j].condition,
                       unpaired_t_test(metric_values(results[i], metric), metric_values(results[j], metric), kind)});
      }
    }
  }
  return out;
}

Markers markers_for(const std::string& condition, const std::vector<train::RunResult>& results, TTestKind kind) {
  return {metric_markers(condition, results, "original", kind), metric_markers(condition, results, "ft_test", kind)};
}

json summary_json(const std::vector<train::RunResult>& results, TTestKind kind) {
  json conditions = json::array();
  for (const auto& r : results) {
    const auto markers = markers_for(r.condition, results, kind);
    json entry{{"condition", r.condition}, {"config_hash", r.config_hash}};
    for (std::string_view metric : {"original", "ft_test"}) {
      const auto s = summarize(metric_values(r, metric));
      entry[std::string(metric)] = {{"mean", s.mean},
                                    {"std", s.std},
                                    {"n", s.n},
                                    {"markers", metric == "original" ? markers.original : markers.ft_test}};
    }
    conditions.push_back(std::move(entry));
  }
  json comparisons = json::array();
  for (const auto& c : compare_conditions(results, kind)) {
    comparisons.push_back({{"metric", c.metric},
                           {"a", c.a},
                           {"b", c.b},
                           {"t", std::isfinite(c.test.t) ? json(c.test.t) : json(c.test.t > 0 ? "inf" : "-inf")},
                           {"df", c.test.df},
                           {"p", c.test.p},
                           {"significant", c.test.p < kAlpha}});
  }
  return json{{"test", kind == TTestKind::kPooled ? "student_pooled" : "welch"},
              {"alpha", kAlpha},
              {"conditions", std::move(conditions)},
              {"comparisons", std::move(comparisons)}};
}

void emit_report(const std::vector<train::RunResult>& results, const std::filesystem::path& dir, TTestKind kind) {
  if (results.empty()) throw std::invalid_argument("emit_report: no results");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  const auto csv_path = dir / "results.csv";
  auto csv = open_output(csv_path);
  csv << "condition,seed,original_acc,ft_acc,config_hash\n";
  for (const auto& r : results) {
    for (const auto& s : r.seeds) {
      csv << csv_field(r.condition) << ',' << s.seed << ',' << format_number(s.original_acc) << ','
          << format_number(s.ft_acc) << ',' << csv_field(r.config_hash) << '\n';
    }
  }
  finish(csv, csv_path);

  const auto json_path = dir / "summary.json";
  auto js = open_output(json_path);
  js << summary_json(results, kind).dump(2) << '\n';
  finish(js, json_path);
}

void write_ablation_csv(const std::vector<train::AblationRow>& rows, const std::filesystem::path& path,
                        const std::filesystem::path& curves_path) {
  auto out = open_output(path);
  out << "size,condition,seed,ft_test_acc,original_acc\n";
  std::map<std::pair<std::size_t, std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& r : rows) {
    out << r.size << ',' << csv_field(r.condition) << ',' << r.seed << ',' << format_number(r.ft_acc) << ','
        << format_number(r.original_acc) << '\n';
    const auto key = std::pair{r.size, r.condition};
    if (!groups.contains(key)) order.push_back(key);
    groups[key].first.push_back(r.ft_acc);
    groups[key].second.push_back(r.original_acc);
  }
  finish(out, path);

  auto curves = open_output(curves_path);
  curves << "size,condition,series,line_style,mean,std,n\n";
  for (const auto& key : order) {
    const auto& [ft, orig] = groups[key];
    const auto s_ft = summarize(ft), s_orig = summarize(orig);
    curves << key.first << ',' << csv_field(key.second) << ",ft_test,solid," << format_number(s_ft.mean) << ','
           << format_number(s_ft.std) << ',' << s_ft.n << '\n';
    curves << key.first << ',' << csv_field(key.second) << ",original,dashed," << format_number(s_orig.mean) << ','
           << format_number(s_orig.std) << ',' << s_orig.n << '\n';
  }
  finish(curves, curves_path);
}

void write_cv_table_csv(const std::vector<train::CvRow>& table, const std::filesystem::path& path) {
  auto out = open_output(path);
  const std::size_t k = table.empty() ? 0 : table.front().fold_accuracies.size();
  out << "learning_rate,lambda,epochs,mean_accuracy";
  for (std::size_t f = 1; f <= k; ++f) out << ",fold_" << f;
  out << '\n';
  for (const auto& row : table) {
    out << format_number(row.learning_rate) << ',' << format_number(row.lambda) << ',' << row.epochs << ','
        << format_number(row.mean_accuracy);
    for (double a : row.fold_accuracies) out << ',' << format_number(a);
    out << '\n';
  }
  finish(out, path);
}

void write_pareto_csv(const train::ParetoSweep& sweep, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "condition,label,original_acc,ft_acc,on_frontier\n";
  for (const auto& [condition, points] : sweep.points) {
    const auto frontier = pareto_frontier(points);
    for (const auto& p : points) {
      const bool on = std::find(frontier.begin(), frontier.end(), p) != frontier.end();
      out << csv_field(condition) << ',' << csv_field(p.label) << ',' << format_number(p.x) << ','
          << format_number(p.y) << ',' << (on ? 1 : 0) << '\n';
    }
  }
  finish(out, path);
}

std::string format_table(const std::vector<train::RunResult>& results, TTestKind kind) {
  // Pads to a display width, counting UTF-8 code points rather than bytes.
  const auto pad = [](std::string text, std::size_t width) {
    const auto shown = static_cast<std::size_t>(
        std::count_if(text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
    if (shown < width) text.append(width - shown, ' ');
    return text;
  };
  std::ostringstream out;
  out << pad("condition", 14) << ' ' << pad("original", 24) << ' ' << "ft_test" << '\n';
  for (const auto& r : results) {
    const auto m = markers_for(r.condition, results, kind);
    const auto so = summarize(metric_values(r, "original"));
    const auto sf = summarize(metric_values(r, "ft_test"));
    char a[64], b[64];
    std::snprintf(a, sizeof a, "%6.2f ± %4.2f %s", 100 * so.mean, 100 * so.std, m.original.c_str());
    std::snprintf(b, sizeof b, "%6.2f ± %4.2f %s", 100 * sf.mean, 100 * sf.std, m.ft_test.c_str());
    std::string row = pad(r.condition, 14) + ' ' + pad(a, 24) + ' ' + b;
    while (!row.empty() && row.back() == ' ') row.pop_back();
    out << row << '\n';
  }
  return out.str();
}

}  // namespace ewcft::eval
