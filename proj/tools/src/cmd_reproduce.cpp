#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "common.hpp"
#include "ewcft/autodiff/finite_diff.hpp"
#include "ewcft/continual/regularizer.hpp"
#include "ewcft/data/generators.hpp"
#include "ewcft/eval/metrics.hpp"
#include "ewcft/eval/pareto.hpp"
#include "ewcft/eval/report.hpp"
#include "ewcft/eval/stats.hpp"
#include "ewcft/train/config_json.hpp"
#include "ewcft/util/rng.hpp"

namespace ewcft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Context {
  train::ExperimentConfig config;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t jobs = 1;
  fs::path dir;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

model::ModelDims tiny_dims() { return {7, 3, 4, 3}; }

std::vector<data::Instance> random_instances(util::Rng& rng, std::size_t n, const model::ModelDims& dims) {
  std::vector<data::Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    data::Instance inst{"r" + std::to_string(i), {}, {}, rng.index(dims.num_classes)};
    for (std::size_t k = 1 + rng.index(3); k > 0; --k) inst.claim.push_back(static_cast<data::TokenId>(rng.index(dims.vocab_size)));
    for (std::size_t k = 1 + rng.index(4); k > 0; --k) inst.evidence.push_back(static_cast<data::TokenId>(rng.index(dims.vocab_size)));
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<std::size_t> labels_of(const std::vector<data::Instance>& batch) {
  std::vector<std::size_t> out;
  for (const auto& inst : batch) out.push_back(inst.label);
  return out;
}

// Mean NLL of `m` on `batch`, with parameter `replace` (if any) set to `value`.
double batch_loss(const model::Classifier& m, const std::vector<data::Instance>& batch, std::size_t replace,
                  const autodiff::Tensor* value) {
  autodiff::Graph g;
  std::vector<autodiff::Var> vars;
  const auto& params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars.push_back(g.parameter(params[i].id, i == replace && value ? *value : params[i].value));
  }
  std::vector<const data::Instance*> ptrs;
  for (const auto& inst : batch) ptrs.push_back(&inst);
  const auto gold = labels_of(batch);
  return g.value(g.nll(m.forward(g, vars, ptrs), gold)).item();
}

Verdict gradient_check(const Context&) {
  double worst = 0.0;
  util::Rng rng(101);
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    model::PairClassifier m(tiny_dims(), 1000 + trial);
    const auto batch = random_instances(rng, 4, tiny_dims());
    autodiff::Graph g;
    const auto vars = m.bind(g);
    std::vector<const data::Instance*> ptrs;
    for (const auto& inst : batch) ptrs.push_back(&inst);
    const auto gold = labels_of(batch);
    const auto grads = g.backward(g.nll(m.forward(g, vars, ptrs), gold));
    for (std::size_t p = 0; p < m.parameters().size(); ++p) {
      const auto& param = m.parameters()[p];
      const auto numeric = autodiff::finite_diff_gradient(
          [&](const autodiff::Tensor& t) { return batch_loss(m, batch, p, &t); }, param.value);
      worst = std::max(worst, autodiff::max_relative_error(grads.at(param.id).data(), numeric.data()));
    }
  }
  return {worst <= 1e-6, "max relative error " + fmt("%.3g", worst) + " over 100 models (limit 1e-6)"};
}

Verdict fisher_check(const Context&) {
  util::Rng rng(202);
  const auto dims = tiny_dims();
  model::PairClassifier m(dims, 17);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < dims.vocab_size; ++i) tokens.push_back("t" + std::to_string(i));
  data::Dataset d{data::Vocabulary(tokens)};
  for (auto& inst : random_instances(rng, 10, dims)) d.add(std::move(inst));
  const std::size_t n = 10;
  const std::uint64_t seed = 5;
  const auto fisher = continual::estimate_fisher_diagonal(m, d, n, seed);
  std::map<std::string, std::vector<double>> brute;
  for (const auto i : continual::fisher_sample_indices(d.size(), n, seed)) {
    autodiff::Graph g;
    const auto vars = m.bind(g);
    const data::Instance* one[] = {&d[i]};
    const std::size_t gold[] = {d[i].label};
    const auto grads = g.backward(g.nll(m.forward(g, vars, one), gold));
    for (const auto& [id, t] : grads) {
      auto& acc = brute[id];
      acc.resize(t.size());
      for (std::size_t k = 0; k < t.size(); ++k) acc[k] += t.data()[k] * t.data()[k] / static_cast<double>(n);
    }
  }
  double worst = 0.0;
  for (const auto& [id, values] : brute) {
    const auto& est = fisher.at(id);
    for (std::size_t k = 0; k < values.size(); ++k) worst = std::max(worst, std::abs(est[k] - values[k]));
  }
  return {worst <= 1e-12, "max abs difference " + fmt("%.3g", worst) + " (limit 1e-12)"};
}

Verdict reduction_check(const Context& ctx) {
  util::Rng rng(303);
  bool identical = true;
  for (int trial = 0; trial < 50; ++trial) {
    continual::ParameterArrays theta, anchor;
    theta["w"] = {};
    anchor["w"] = {};
    for (std::size_t k = 0; k < 20; ++k) {
      theta["w"].push_back(rng.normal());
      anchor["w"].push_back(rng.normal());
    }
    const continual::ParameterSnapshot snap(anchor);
    const double lambda = rng.uniform(0.0, 10.0);
    const double ewc = continual::elastic_penalty(theta, snap, continual::unit_fisher(snap), lambda);
    identical = identical && ewc == continual::l2_penalty(theta, snap, lambda);
  }

  train::ExperimentConfig small = ctx.config;
  small.corpus.generator.n_instances = 600;
  small.corpus.ft_train_pairs = 60;
  small.base_train.epochs = 2;
  const auto corpora = train::build_corpora(small.corpus);
  train::BaseModelCache cache(small, corpora, 1);
  const auto& base = *cache.get(train::BaseKind::kOriginal, model::BiasMode::kNone).model;
  const auto trajectory = [&](continual::RegularizerKind kind) {
    auto m = base.clone();
    auto fc = small.finetune;
    fc.train.epochs = 3;
    fc.regularizer.kind = kind;
    fc.regularizer.lambda = 0.0;
    fc.regularizer.fisher_sample_size = 50;
    std::vector<std::string> sums;
    train::FinetuneOptions options;
    options.on_epoch = [&](const train::EpochRecord&) {
      sums.push_back(continual::checksum(continual::parameter_arrays(*m)));
    };
    train::finetune(*m, corpora.ft_train, corpora.original_train, fc, options);
    return sums;
  };
  const bool same = trajectory(continual::RegularizerKind::kEwc) == trajectory(continual::RegularizerKind::kNone);
  return {identical && same, std::string("EWC(F=1) == L2 bitwise: ") + (identical ? "yes" : "no") +
                                 "; lambda=0 trajectory == unregularized: " + (same ? "yes" : "no")};
}

Verdict penalty_value_check(const Context&) {
  continual::ParameterArrays theta{{"w", {1.0, 2.0}}}, anchor{{"w", {0.0, 0.0}}};
  const continual::FisherDiagonal fisher(continual::ParameterArrays{{"w", {1.0, 0.5}}}, 1, "fixed");
  const double v = continual::elastic_penalty(theta, continual::ParameterSnapshot(anchor), fisher, 2.0);
  return {v == 3.0, "penalty " + fmt("%.17g", v) + " (expected 3.0 exactly)"};
}

Verdict forgetting_check(const Context& ctx) {
  const auto corpora = train::build_corpora(ctx.config.corpus);
  const auto results =
      train::run_conditions(ctx.config, corpora, ctx.seeds, {"original", "ft", "ft_l2", "ft_ewc"}, ctx.jobs);
  eval::emit_report(results, ctx.dir / "forgetting");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;
  for (const auto& r : results) {
    for (const auto& s : r.seeds) {
      acc[r.condition].first.push_back(s.original_acc);
      acc[r.condition].second.push_back(s.ft_acc);
    }
  }
  const auto& ft = acc.at("ft");
  const auto& l2 = acc.at("ft_l2");
  const auto& ewc = acc.at("ft_ewc");
  const auto& orig = acc.at("original");
  const auto p_orig = eval::unpaired_t_test(ewc.first, ft.first);
  const auto p_ft = eval::unpaired_t_test(ewc.second, ft.second);
  const bool ok = mean(ewc.first) > mean(ft.first) && p_orig.p < 0.05 && mean(ewc.first) > mean(l2.first) &&
                  mean(ewc.second) >= mean(ft.second) - 0.03 && (mean(ewc.second) >= mean(ft.second) || p_ft.p > 0.05) &&
                  mean(orig.second) <= mean(ft.second) - 0.10;
  return {ok, "original: ewc " + fmt("%.4f", mean(ewc.first)) + " ft " + fmt("%.4f", mean(ft.first)) + " l2 " +
                  fmt("%.4f", mean(l2.first)) + " (p " + fmt("%.2g", p_orig.p) + "); ft-test: ewc " +
                  fmt("%.4f", mean(ewc.second)) + " ft " + fmt("%.4f", mean(ft.second)) + " (p " +
                  fmt("%.2g", p_ft.p) + ") untreated " + fmt("%.4f", mean(orig.second))};
}

Verdict pareto_check(const Context& ctx) {
  const auto corpora = train::build_corpora(ctx.config.corpus);
  const auto lrs = train::default_learning_rates();
  const std::uint64_t seed = ctx.seeds.front();
  train::ParetoSweep sweep;
  for (const auto& [name, lambdas] :
       std::vector<std::pair<std::string, std::vector<double>>>{{"ft", {0.0}},
                                                                {"ft_ewc", train::default_lambda_grid(train::kEwcLambdaScale)}}) {
    auto one = train::pareto_sweep(ctx.config, corpora, {name}, lrs, lambdas, 8, seed, ctx.jobs);
    sweep.points.push_back(std::move(one.points.front()));
  }
  eval::write_pareto_csv(sweep, ctx.dir / "pareto.csv");
  const auto fe = eval::pareto_frontier(sweep.at("ft_ewc"));
  const auto ff = eval::pareto_frontier(sweep.at("ft"));
  const bool dom = eval::frontier_dominates(fe, ff);
  return {dom, std::string("dominance=") + (dom ? "true" : "false") + " (" + std::to_string(fe.size()) + " ewc / " +
                   std::to_string(ff.size()) + " ft frontier points)"};
}

Verdict label_shift_check(const Context& ctx) {
  train::ExperimentConfig config = ctx.config;
  config.corpus.ft_kind = train::FtKind::kSingleLabel;
  const auto corpora = train::build_corpora(config.corpus);
  const train::SweepGrid grid{{config.finetune.train.learning_rate},
                              train::default_lambda_grid(train::kEwcLambdaScale),
                              config.finetune.train.epochs,
                              5};
  const auto runs = train::label_shift_experiment(config, corpora, grid, ctx.seeds, ctx.jobs);
  std::vector<double> ft, ewc;
  json rows = json::array();
  for (const auto& r : runs) {
    ft.push_back(r.ft_original_acc);
    ewc.push_back(r.ewc_original_acc);
    rows.push_back({{"seed", r.seed}, {"ft_original_acc", r.ft_original_acc}, {"ewc_original_acc", r.ewc_original_acc},
                    {"lambda", r.selected.lambda}, {"learning_rate", r.selected.learning_rate},
                    {"epochs", r.selected.epochs}});
  }
  train::write_json_file(rows, ctx.dir / "label_shift.json");
  const double chance = 1.0 / 3.0;
  const bool ok = mean(ft) < chance + 0.10 && mean(ewc) >= mean(ft) + 0.15;
  return {ok, "original accuracy after single-label fine-tuning: ft " + fmt("%.4f", mean(ft)) + ", ewc at CV " +
                  fmt("%.4f", mean(ewc))};
}

Verdict probe_check(const Context& ctx) {
  const auto corpora = train::build_corpora(ctx.config.corpus);
  const auto probe = train::claim_only_probe(ctx.config, corpora, ctx.seeds.front());
  return {probe.original_test_acc >= 0.55 && probe.ft_test_acc <= 0.55,
          "claim-only accuracy: biased original test " + fmt("%.4f", probe.original_test_acc) + ", symmetric FT-test " +
              fmt("%.4f", probe.ft_test_acc)};
}

Verdict statistics_check(const Context&) {
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4};
  const auto t = eval::unpaired_t_test(a, b);
  util::Rng rng(909);
  std::vector<eval::ParetoPoint> points;
  for (int i = 0; i < 1000; ++i) points.push_back({rng.uniform(), rng.uniform(), std::to_string(i)});
  std::vector<eval::ParetoPoint> brute;
  for (const auto& p : points) {
    if (std::none_of(points.begin(), points.end(), [&](const auto& q) { return eval::strictly_dominates(q, p); })) {
      brute.push_back(p);
    }
  }
  const bool frontier = eval::pareto_frontier(points) == brute;
  const bool ok = std::abs(t.t - -1.224745) <= 1e-6 && std::abs(t.p - 0.2878) <= 1e-3 && frontier;
  return {ok, "t " + fmt("%.7f", t.t) + " p " + fmt("%.5f", t.p) + "; frontier matches brute force: " +
                  (frontier ? "yes" : "no")};
}

Verdict generator_check(const Context& ctx) {
  const auto& g = ctx.config.corpus.generator;
  const auto original = data::generate_biased_original(g);
  data::GeneratorConfig challenge_config = g;
  challenge_config.n_instances = 700;
  const auto symmetric = data::generate_symmetric_counterfactual(original, 350, 7);
  const bool deterministic = original == data::generate_biased_original(g) &&
                             symmetric == data::generate_symmetric_counterfactual(original, 350, 7) &&
                             data::generate_single_label_challenge(challenge_config) ==
                                 data::generate_single_label_challenge(challenge_config);
  const double mi_sym = data::claim_label_mutual_information(symmetric);
  const double mi_orig = data::claim_label_mutual_information(original);
  return {mi_sym <= 0.01 && mi_orig >= 0.3 && deterministic,
          "MI symmetric " + fmt("%.5f", mi_sym) + " bits, biased " + fmt("%.4f", mi_orig) +
              " bits; deterministic: " + (deterministic ? "yes" : "no")};
}

Verdict ablation_check(const Context& ctx) {
  const auto corpora = train::build_corpora(ctx.config.corpus);
  const std::vector<std::size_t> sizes{25, 50, 75, 100, 250, 400, 500, 600, 700};
  const std::vector<std::string> conditions{"ft", "ft_l2", "ft_ewc"};
  const auto rows = train::ablation_sweep(ctx.config, corpora, sizes, conditions, ctx.seeds, ctx.jobs);
  eval::write_ablation_csv(rows, ctx.dir / "ablation.csv", ctx.dir / "ablation_curves.csv");
  std::map<std::pair<std::string, std::size_t>, std::pair<double, double>> means;
  const double n = static_cast<double>(ctx.seeds.size());
  for (const auto& r : rows) {
    means[{r.condition, r.size}].first += r.original_acc / n;
    means[{r.condition, r.size}].second += r.ft_acc / n;
  }
  double worst_drop = 0.0, worst_gap = 1.0;
  for (const auto& c : conditions) {
    double best = 0.0;
    for (auto size : sizes) {
      const double ft = means[{c, size}].second;
      worst_drop = std::max(worst_drop, best - ft);
      best = std::max(best, ft);
    }
  }
  for (auto size : sizes) {
    worst_gap = std::min(worst_gap, means[{"ft_ewc", size}].first - means[{"ft", size}].first);
  }
  return {worst_drop <= 0.02 && worst_gap >= 0.0, "largest FT-test drop below an earlier size " +
                                                      fmt("%.4f", worst_drop) + "; smallest ewc-ft original gap " +
                                                      fmt("%.4f", worst_gap)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Verdict(const Context&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_check},
      {2, "Fisher oracle", fisher_check},
      {3, "reduction identities", reduction_check},
      {4, "penalty unit value", penalty_value_check},
      {5, "forgetting-mitigation ordering", forgetting_check},
      {6, "Pareto dominance", pareto_check},
      {7, "label-shift forgetting", label_shift_check},
      {8, "bias probe", probe_check},
      {9, "statistics oracle", statistics_check},
      {10, "data generators", generator_check},
      {11, "ablation curves", ablation_check},
  };
  return all;
}

struct ReproduceOptions {
  std::string output_dir;
  std::string config;
  std::size_t jobs = 1;
  std::vector<int> only;
};

void run_reproduce(const ReproduceOptions& o) {
  Context ctx;
  ctx.jobs = o.jobs;
  if (!o.config.empty()) {
    try {
      train::read_json_file(o.config).get_to(ctx.config);
    } catch (const json::exception& e) {
      throw UsageError(o.config + ": " + e.what());
    }
  }
  for (int id : o.only) {
    if (id < 1 || id > static_cast<int>(criteria().size())) throw UsageError("--only: no check " + std::to_string(id));
  }
  const json identity{{"command", "reproduce"}, {"experiment", ctx.config}, {"seeds", ctx.seeds}};
  const RunDirectory dir = open_run_directory(
      "reproduce", identity, o.output_dir.empty() ? std::nullopt : std::optional<fs::path>(o.output_dir));
  ctx.dir = dir.path();
  const std::set<int> only(o.only.begin(), o.only.end());

  json verdicts = json::array();
  std::size_t failed = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    const Verdict v = c.run(ctx);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str(), seconds);
    std::fflush(stdout);
    dir.log(std::string(v.pass ? "PASS " : "FAIL ") + c.name + ": " + v.detail);
    verdicts.push_back({{"id", c.id}, {"name", c.name}, {"pass", v.pass}, {"detail", v.detail}});
    if (!v.pass) ++failed;
  }
  train::write_json_file(verdicts, dir.path() / "verdicts.json");
  std::printf("artifacts %s\n", dir.path().string().c_str());
  if (failed) throw std::runtime_error(std::to_string(failed) + " check(s) failed");
}

}  // namespace

void add_reproduce(CLI::App& app) {
  auto o = std::make_shared<ReproduceOptions>();
  auto* cmd = app.add_subcommand("reproduce-paper-analogs",
                                 "Run every acceptance check end to end and write the experiment artifacts");
  cmd->add_option("--output-dir", o->output_dir, "Run directory (default: content-addressed under the output root)");
  cmd->add_option("--config", o->config, "ExperimentConfig JSON layered over the defaults")->check(CLI::ExistingFile);
  cmd->add_option("--jobs", o->jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
  cmd->add_option("--only", o->only, "Comma-separated check numbers (1-11)")->delimiter(',');
  cmd->callback([o] { run_reproduce(*o); });
}

}  // namespace ewcft::cli
