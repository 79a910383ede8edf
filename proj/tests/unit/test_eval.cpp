#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "ewcft/eval/metrics.hpp"
#include "ewcft/eval/pareto.hpp"
#include "ewcft/eval/report.hpp"
#include "ewcft/eval/stats.hpp"
#include "helpers.hpp"

using namespace ewcft;
using namespace ewcft::eval;

namespace {

// Composite Simpson integral of t^(a-1) (1-t)^(b-1) over [0, x]; a, b >= 1.
double beta_integral(double a, double b, double x, int n = 20000) {
  const auto f = [&](double t) { return std::pow(t, a - 1) * std::pow(1 - t, b - 1); };
  const double h = x / n;
  double s = f(0) + f(x);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

train::RunResult run(std::string name, std::vector<double> orig, std::vector<double> ft) {
  train::RunResult r;
  r.condition = std::move(name);
  r.config_hash = "h";
  for (std::size_t i = 0; i < orig.size(); ++i) r.seeds.push_back({i + 1, orig[i], ft[i], {}});
  return r;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("pooled t-test matches reference values") {
    const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
    const auto r = unpaired_t_test(a, b);
    CHECK(r.t == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(0.2878641347266908).epsilon(1e-9));
    CHECK(r.df == 4.0);
  }

  TEST_CASE("Welch t-test matches reference values") {
    const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8, 10};
    const auto r = unpaired_t_test(a, b, TTestKind::kWelch);
    CHECK(r.t == doctest::Approx(-2.2514363231593695).epsilon(1e-12));
    CHECK(r.df == doctest::Approx(5.520787746170677).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(0.06913359319239236).epsilon(1e-9));
  }

  TEST_CASE("t-test is antisymmetric in its arguments") {
    const std::vector<double> a{0.7, 0.72, 0.69}, b{0.8, 0.78, 0.83, 0.79};
    for (auto kind : {TTestKind::kPooled, TTestKind::kWelch}) {
      const auto ab = unpaired_t_test(a, b, kind), ba = unpaired_t_test(b, a, kind);
      CHECK(ab.t == doctest::Approx(-ba.t));
      CHECK(ab.p == doctest::Approx(ba.p));
    }
  }

  TEST_CASE("zero-variance samples") {
    const std::vector<double> a{1, 1, 1}, b{1, 1}, c{2, 2};
    for (auto kind : {TTestKind::kPooled, TTestKind::kWelch}) {
      const auto same = unpaired_t_test(a, b, kind);
      CHECK(same.t == 0.0);
      CHECK(same.p == 1.0);
      const auto diff = unpaired_t_test(a, c, kind);
      CHECK(diff.t == -std::numeric_limits<double>::infinity());
      CHECK(diff.p == 0.0);
    }
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(unpaired_t_test(one, a), std::invalid_argument);
  }

  TEST_CASE("incomplete beta reference values") {
    CHECK(regularized_incomplete_beta(2.5, 1.5, 0.3) == doctest::Approx(0.08894372317066562).epsilon(1e-9));
    CHECK(regularized_incomplete_beta(0.5, 0.5, 0.9) == doctest::Approx(0.7951672353008665).epsilon(1e-9));
    CHECK(regularized_incomplete_beta(10, 3, 0.8) == doctest::Approx(0.5583457484800002).epsilon(1e-9));
    CHECK(regularized_incomplete_beta(3, 1, 0.7) == doctest::Approx(0.343).epsilon(1e-10));
    CHECK(regularized_incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2, 3, 1.0) == 1.0);
    CHECK_THROWS_AS(regularized_incomplete_beta(0.0, 1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(regularized_incomplete_beta(1.0, 1.0, 1.5), std::invalid_argument);
  }

  TEST_CASE("incomplete beta agrees with quadrature") {
    for (double a : {1.0, 1.5, 2.0, 3.7, 6.0}) {
      for (double b : {1.0, 2.5, 4.0}) {
        const double total = beta_integral(a, b, 1.0);
        for (double x : {0.05, 0.3, 0.5, 0.77, 0.95}) {
          CAPTURE(a);
          CAPTURE(b);
          CAPTURE(x);
          CHECK(regularized_incomplete_beta(a, b, x) == doctest::Approx(beta_integral(a, b, x) / total).epsilon(1e-7));
        }
      }
    }
  }

  TEST_CASE("incomplete beta properties: uniform case, symmetry, monotonicity") {
    double prev = 0.0;
    for (double x = 0.0; x <= 1.0; x += 0.05) {
      CHECK(regularized_incomplete_beta(1, 1, x) == doctest::Approx(x).epsilon(1e-12));
      CHECK(regularized_incomplete_beta(2.2, 4.1, x) + regularized_incomplete_beta(4.1, 2.2, 1 - x) ==
            doctest::Approx(1.0).epsilon(1e-10));
      const double v = regularized_incomplete_beta(3.0, 2.0, x);
      CHECK(v >= prev - 1e-15);
      prev = v;
    }
  }

  TEST_CASE("two-sided Student t p-values") {
    CHECK(student_t_two_sided_p(2.0, 10) == doctest::Approx(0.07338803477074039).epsilon(1e-9));
    CHECK(student_t_two_sided_p(1.0, 1) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(student_t_two_sided_p(3.5, 4.5) == doctest::Approx(0.02054168996938556).epsilon(1e-9));
    CHECK(student_t_two_sided_p(-2.0, 10) == student_t_two_sided_p(2.0, 10));
    CHECK(student_t_two_sided_p(0.0, 7) == doctest::Approx(1.0));
  }

  TEST_CASE("accuracy and summaries") {
    const std::vector<std::size_t> pred{0, 1, 2, 1}, gold{0, 1, 1, 1};
    CHECK(accuracy(pred, gold) == 0.75);
    const std::vector<double> v{0.5, 0.7};
    const auto s = summarize(v);
    CHECK(s.mean == doctest::Approx(0.6));
    CHECK(s.std == doctest::Approx(std::sqrt(0.02)));
    CHECK(summarize(std::vector<double>{0.3}).std == 0.0);
    CHECK_THROWS_AS(summarize(std::vector<double>{}), std::invalid_argument);

    util::Rng rng(3);
    const model::ModelDims dims{8, 3, 3, 3};
    const auto d = test::random_dataset(rng, 25, dims);
    const model::PairClassifier m(dims, 1);
    const auto p = predict(m, d);
    CHECK(accuracy(m, d) == accuracy(p, test::gold_of(d)));
    CHECK_THROWS_AS(accuracy(m, data::Dataset(test::plain_vocab(8))), std::invalid_argument);
  }

  TEST_CASE("Pareto frontier matches brute force") {
    util::Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<ParetoPoint> pts;
      const std::size_t n = 1 + rng.index(30);
      for (std::size_t i = 0; i < n; ++i) {
        // Coarse values so ties and duplicates occur.
        pts.push_back({static_cast<double>(rng.index(6)), static_cast<double>(rng.index(6)), std::to_string(i)});
      }
      std::vector<ParetoPoint> brute;
      for (const auto& p : pts) {
        bool dominated = false;
        for (const auto& q : pts) dominated = dominated || strictly_dominates(q, p);
        if (!dominated) brute.push_back(p);
      }
      CHECK(pareto_frontier(pts) == brute);
      CHECK(frontier_dominates(pts, pareto_frontier(pts)));
    }
  }

  TEST_CASE("Pareto dominance definitions") {
    const ParetoPoint a{0.9, 0.8, "a"}, b{0.9, 0.7, "b"}, c{0.9, 0.8, "c"};
    CHECK(strictly_dominates(a, b));
    CHECK_FALSE(strictly_dominates(a, c));
    CHECK(pareto_frontier({a, b, c}).size() == 2);
    CHECK(frontier_dominates({a}, {b, c}));
    CHECK_FALSE(frontier_dominates({b}, {a}));
    CHECK(frontier_dominates({a, b}, {}));
    CHECK(pareto_frontier({}).empty());
  }

  TEST_CASE("number formatting and CSV quoting") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(1e-9) == "1e-09");
    CHECK(format_number(0.123456789012345) == "0.123456789012");
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  }

  TEST_CASE("markers follow significance against the reference conditions") {
    const std::vector<train::RunResult> results{
        run("original", {0.90, 0.91, 0.89}, {0.50, 0.52, 0.51}),
        run("ft", {0.70, 0.71, 0.69}, {0.80, 0.81, 0.79}),
        run("ft_l2", {0.80, 0.82, 0.78}, {0.79, 0.82, 0.80}),
        run("ft_ewc", {0.95, 0.96, 0.94}, {0.79, 0.80, 0.80}),
    };
    const auto ewc = markers_for("ft_ewc", results);
    CHECK(ewc.original == "*†#");
    CHECK(ewc.ft_test == "#♦♥");
    const auto ft = markers_for("ft", results);
    CHECK(ft.original.empty());
    CHECK(ft.ft_test == "#♥");
    CHECK(markers_for("missing", results).original.empty());
  }

  TEST_CASE("emit_report writes results.csv and summary.json") {
    const std::vector<train::RunResult> results{run("ft", {0.7, 0.72}, {0.8, 0.81}),
                                                run("ft_ewc", {0.9, 0.92}, {0.79, 0.8})};
    const auto dir = std::filesystem::temp_directory_path() / "ewcft_test_report";
    std::filesystem::remove_all(dir);
    emit_report(results, dir);
    const auto csv = read_file(dir / "results.csv");
    CHECK(csv.rfind("condition,seed,original_acc,ft_acc,config_hash\nft,1,0.7,0.8,h\n", 0) == 0);
    const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
    CHECK(summary.at("conditions").size() == 2);
    CHECK(summary.at("comparisons").size() == 2);
    CHECK(summary.at("conditions")[1].at("original").at("mean") == doctest::Approx(0.91));
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(emit_report({}, dir), std::invalid_argument);
  }

  TEST_CASE("ablation CSVs: ft_test solid, original dashed") {
    const std::vector<train::AblationRow> rows{{10, "ft", 1, 0.9, 0.6}, {10, "ft", 2, 0.8, 0.8}};
    const auto dir = std::filesystem::temp_directory_path() / "ewcft_test_ablation";
    std::filesystem::create_directories(dir);
    write_ablation_csv(rows, dir / "a.csv", dir / "c.csv");
    CHECK(read_file(dir / "a.csv") == "size,condition,seed,ft_test_acc,original_acc\n10,ft,1,0.6,0.9\n10,ft,2,0.8,0.8\n");
    const auto curves = read_file(dir / "c.csv");
    CHECK(curves.find("10,ft,ft_test,solid,0.7,") != std::string::npos);
    CHECK(curves.find("10,ft,original,dashed,0.85,") != std::string::npos);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("text table aligns columns") {
    const std::vector<train::RunResult> results{run("ft", {0.7, 0.72}, {0.8, 0.81}),
                                                run("ft_ewc", {0.9, 0.92}, {0.79, 0.8})};
    const auto table = format_table(results);
    CHECK(table.rfind("condition", 0) == 0);
    CHECK(table.find("ft_ewc          91.00 ± 1.41") != std::string::npos);
  }
}
