#include <cmath>
#include <set>

#include "doctest.h"
#include "ewcft/continual/regularizer.hpp"
#include "ewcft/eval/metrics.hpp"
#include "ewcft/train/experiment.hpp"
#include "ewcft/train/grid_search.hpp"
#include "ewcft/train/optimizer.hpp"
#include "ewcft/train/trainer.hpp"
#include "helpers.hpp"

using namespace ewcft;
using namespace ewcft::train;
using continual::RegularizerKind;

namespace {

const model::ModelDims kDims{10, 3, 4, 3};

struct Fixture {
  util::Rng rng{31};
  data::Dataset original = test::random_dataset(rng, 40, kDims);
  data::Dataset ft = test::random_dataset(rng, 24, kDims);
};

FinetuneConfig ft_config(RegularizerKind kind, double lambda, std::size_t epochs = 3) {
  FinetuneConfig c;
  c.train.learning_rate = 0.05;
  c.train.epochs = epochs;
  c.train.batch_size = 8;
  c.regularizer.kind = kind;
  c.regularizer.lambda = lambda;
  c.regularizer.fisher_sample_size = 16;
  return c;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.corpus.generator.n_instances = 300;
  c.corpus.original_dev = 60;
  c.corpus.original_test = 60;
  c.corpus.ft_train_pairs = 20;
  c.corpus.ft_test_pairs = 20;
  c.dims.embed_dim = 4;
  c.dims.hidden_dim = 6;
  c.base_train.epochs = 3;
  c.finetune.train.epochs = 2;
  c.finetune.regularizer.fisher_sample_size = 50;
  return c;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("SGD step") {
    const std::string key = "w";
    autodiff::Tensor w = autodiff::Tensor::vector({1.0, -2.0});
    const autodiff::Tensor g = autodiff::Tensor::vector({0.5, 4.0});
    const ParamSlot slot{&key, &w, &g};
    Sgd(0.1).step(std::span(&slot, 1));
    CHECK(w[0] == doctest::Approx(0.95));
    CHECK(w[1] == doctest::Approx(-2.4));
  }

  TEST_CASE("Adam steps by lr times the sign on the first update") {
    const std::string key = "w";
    autodiff::Tensor w = autodiff::Tensor::vector({1.0, -2.0});
    const autodiff::Tensor g = autodiff::Tensor::vector({0.5, -4.0});
    const ParamSlot slot{&key, &w, &g};
    Adam adam(0.01, AdamParams{});
    adam.step(std::span(&slot, 1));
    CHECK(w[0] == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(-1.99).epsilon(1e-6));
    // Second step with the same gradient: m̂ = g, v̂ = g², so again lr·sign(g).
    adam.step(std::span(&slot, 1));
    CHECK(w[0] == doctest::Approx(0.98).epsilon(1e-6));
  }

  TEST_CASE("gradient clipping rescales to the cap") {
    autodiff::Tensor a = autodiff::Tensor::vector({3.0}), b = autodiff::Tensor::vector({4.0});
    autodiff::Tensor* grads[] = {&a, &b};
    CHECK(clip_gradient_norm(grads, 1.0) == doctest::Approx(5.0));
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(b[0] == doctest::Approx(0.8));
    CHECK(clip_gradient_norm(grads, 10.0) == doctest::Approx(1.0));
    CHECK(a[0] == doctest::Approx(0.6));
  }

  TEST_CASE("zero learning rate leaves parameters untouched") {
    Fixture f;
    for (auto opt : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
      model::PairClassifier m(kDims, 1);
      const auto before = continual::snapshot(m);
      auto cfg = ft_config(RegularizerKind::kEwc, 5.0);
      cfg.train.learning_rate = 0.0;
      cfg.train.optimizer = opt;
      finetune(m, f.ft, f.original, cfg);
      CHECK(continual::snapshot(m) == before);
    }
  }

  TEST_CASE("training is reproducible from the config") {
    Fixture f;
    model::PairClassifier a(kDims, 1), b(kDims, 1);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 7;
    const auto ha = train::train(a, f.original, cfg);
    const auto hb = train::train(b, f.original, cfg);
    CHECK(continual::snapshot(a) == continual::snapshot(b));
    CHECK(ha.epochs.size() == 2);
    CHECK(ha.epochs[1].mean_loss == hb.epochs[1].mean_loss);
  }

  TEST_CASE("training lowers the loss on a learnable task") {
    util::Rng rng(1);
    data::Dataset d(test::plain_vocab(kDims.vocab_size));
    for (std::size_t i = 0; i < 120; ++i) {
      const std::size_t label = rng.index(3);
      d.add({"x" + std::to_string(i), {static_cast<data::TokenId>(label)}, {static_cast<data::TokenId>(5 + rng.index(5))}, label});
    }
    model::PairClassifier m(kDims, 1);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    const auto h = train::train(m, d, cfg);
    CHECK(h.epochs.back().mean_loss < h.epochs.front().mean_loss);
    CHECK(eval::accuracy(m, d) == 1.0);
  }

  TEST_CASE("lambda zero makes every regularizer identical to plain fine-tuning") {
    Fixture f;
    const model::PairClassifier base(kDims, 4);
    model::PairClassifier none(base), l2(base), ewc(base);
    finetune(none, f.ft, f.original, ft_config(RegularizerKind::kNone, 0.0));
    finetune(l2, f.ft, f.original, ft_config(RegularizerKind::kL2, 0.0));
    finetune(ewc, f.ft, f.original, ft_config(RegularizerKind::kEwc, 0.0));
    CHECK(continual::snapshot(l2) == continual::snapshot(none));
    CHECK(continual::snapshot(ewc) == continual::snapshot(none));
  }

  TEST_CASE("a positive lambda keeps parameters closer to the anchor") {
    Fixture f;
    const model::PairClassifier base(kDims, 4);
    const auto anchor = continual::snapshot(base);
    model::PairClassifier none(base), l2(base);
    finetune(none, f.ft, f.original, ft_config(RegularizerKind::kNone, 0.0, 6));
    finetune(l2, f.ft, f.original, ft_config(RegularizerKind::kL2, 50.0, 6));
    const double d_none = continual::l2_penalty(continual::parameter_arrays(none), anchor, 1.0);
    const double d_l2 = continual::l2_penalty(continual::parameter_arrays(l2), anchor, 1.0);
    CHECK(d_l2 < d_none);
  }

  TEST_CASE("anchor stays fixed and Fisher is re-estimated every epoch") {
    Fixture f;
    model::PairClassifier m(kDims, 2);
    const auto before = continual::snapshot(m);
    std::vector<std::string> lines;
    FinetuneOptions opts;
    opts.log = [&](const std::string& s) { lines.push_back(s); };
    const auto r = finetune(m, f.ft, f.original, ft_config(RegularizerKind::kEwc, 3.0, 4), opts);
    CHECK(r.anchor == before);
    CHECK(r.anchor_checksum_before == r.anchor_checksum_after);
    CHECK(r.fisher_estimates == 4);
    CHECK(lines.size() == 4);
    for (const auto& e : r.history.epochs) CHECK(e.fisher_recomputed);
    REQUIRE(r.last_fisher);
    CHECK(*r.last_fisher == continual::estimate_fisher_diagonal(
                                 [&] {
                                   // Parameters before epoch 4 are not kept; recompute from a replay.
                                   model::PairClassifier replay(kDims, 2);
                                   auto cfg = ft_config(RegularizerKind::kEwc, 3.0, 3);
                                   finetune(replay, f.ft, f.original, cfg);
                                   return replay;
                                 }(),
                                 f.original, 16, fisher_seed(1, 4)));
  }

  TEST_CASE("frozen Fisher is estimated once") {
    Fixture f;
    model::PairClassifier m(kDims, 2);
    auto cfg = ft_config(RegularizerKind::kEwc, 3.0, 4);
    cfg.regularizer.recompute_each_epoch = false;
    const auto r = finetune(m, f.ft, f.original, cfg);
    CHECK(r.fisher_estimates == 1);
    CHECK(r.history.epochs[0].fisher_recomputed);
    CHECK_FALSE(r.history.epochs[1].fisher_recomputed);
  }

  TEST_CASE("non-finite loss raises DivergenceError") {
    Fixture f;
    model::PairClassifier m(kDims, 2);
    m.parameters()[4].value[0] = std::nan("");
    try {
      finetune(m, f.ft, f.original, ft_config(RegularizerKind::kNone, 0.0));
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() == 1);
      CHECK(e.batch() == 1);
    }
  }

  TEST_CASE("exploding updates raise DivergenceError") {
    Fixture f;
    model::PairClassifier m(kDims, 2);
    auto cfg = ft_config(RegularizerKind::kNone, 0.0, 20);
    cfg.train.optimizer = OptimizerKind::kSgd;
    cfg.train.learning_rate = 1e300;
    cfg.train.gradient_norm_clip.reset();
    CHECK_THROWS_AS(finetune(m, f.ft, f.original, cfg), DivergenceError);
  }

  TEST_CASE("early stopping restores the best epoch") {
    Fixture f;
    model::PairClassifier m(kDims, 3);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 8;
    cfg.early_stopping_patience = 2;
    TrainOptions opts;
    opts.validation = &f.ft;
    const auto h = train::train(m, f.original, cfg, opts);
    REQUIRE(h.best_epoch);
    double best = -1.0;
    for (const auto& e : h.epochs) best = std::max(best, e.accuracies.at(std::string(kValidationMonitor)));
    CHECK(h.epochs[*h.best_epoch - 1].accuracies.at(std::string(kValidationMonitor)) == best);
    CHECK(eval::accuracy(m, f.ft) == best);
    if (h.stopped_early) CHECK(h.epochs.size() == *h.best_epoch + 2);
    cfg.early_stopping_patience = 1;
    CHECK_THROWS_AS(train::train(m, f.original, cfg), std::invalid_argument);
  }

  TEST_CASE("config validation") {
    TrainConfig t;
    t.learning_rate = -1.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = TrainConfig{};
    t.epochs = 0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = TrainConfig{};
    t.learning_rate = 0.0;
    CHECK_NOTHROW(t.validate());
    Fixture f;
    model::PairClassifier m(kDims, 1);
    CHECK_THROWS_AS(finetune(m, f.ft, data::Dataset(test::plain_vocab(10)), ft_config(RegularizerKind::kEwc, 1.0)),
                    std::invalid_argument);
    FinetuneConfig bias = ft_config(RegularizerKind::kNone, 0.0);
    bias.bias = {model::BiasMode::kPoe, 0.3, 0.0, false};
    CHECK_THROWS_AS(finetune(m, f.ft, f.original, bias), std::invalid_argument);
  }

  TEST_CASE("CV selection tie-break: smaller lambda, then smaller lr, then fewer epochs") {
    const CvRow base{0.1, 1.0, 4, 0.8, {}};
    CvRow higher = base;
    higher.mean_accuracy = 0.81;
    CHECK(better_cv_row(higher, base));
    CvRow small_lambda = base;
    small_lambda.lambda = 0.5;
    small_lambda.learning_rate = 0.3;
    small_lambda.epochs = 8;
    CHECK(better_cv_row(small_lambda, base));
    CvRow small_lr = base;
    small_lr.learning_rate = 0.01;
    small_lr.epochs = 8;
    CHECK(better_cv_row(small_lr, base));
    CvRow fewer = base;
    fewer.epochs = 2;
    CHECK(better_cv_row(fewer, base));
    CHECK_FALSE(better_cv_row(base, base));
  }

  TEST_CASE("grid search enumerates the grid and picks the best row") {
    Fixture f;
    const model::PairClassifier base(kDims, 5);
    const ModelFactory factory = [&] { return base.clone(); };
    SweepGrid grid{{0.0, 0.05}, {0.0, 2.0}, 3, 3};
    const auto cv = grid_search_cv(factory, f.ft, f.original, grid, ft_config(RegularizerKind::kL2, 0.0), 9);
    REQUIRE(cv.table.size() == 2 * 2 * 3);
    std::size_t i = 0;
    for (double lr : grid.learning_rates) {
      for (double l : grid.lambdas) {
        for (std::size_t e = 1; e <= 3; ++e, ++i) {
          CHECK(cv.table[i].learning_rate == lr);
          CHECK(cv.table[i].lambda == l);
          CHECK(cv.table[i].epochs == e);
          CHECK(cv.table[i].fold_accuracies.size() == 3);
        }
      }
    }
    for (const auto& row : cv.table) CHECK_FALSE(better_cv_row(row, cv.best_row));
    CHECK(cv.best.train.learning_rate == cv.best_row.learning_rate);
    CHECK(cv.best.regularizer.lambda == cv.best_row.lambda);
    CHECK(cv.best.train.epochs == cv.best_row.epochs);
    // With lr = 0 every epoch and lambda scores the same; the tie goes to
    // lambda 0 and epoch 1.
    const auto& r0 = cv.table[0];
    for (std::size_t k = 0; k < 6; ++k) CHECK(cv.table[k].mean_accuracy == r0.mean_accuracy);
  }

  TEST_CASE("single-configuration grid") {
    Fixture f;
    const model::PairClassifier base(kDims, 5);
    const SweepGrid grid{{0.05}, {1.0}, 1, 2};
    const auto cv = grid_search_cv([&] { return base.clone(); }, f.ft, f.original, grid,
                                   ft_config(RegularizerKind::kEwc, 0.0), 1);
    REQUIRE(cv.table.size() == 1);
    CHECK(cv.best.regularizer.lambda == 1.0);
    CHECK(cv.best.regularizer.kind == RegularizerKind::kEwc);
  }

  TEST_CASE("grid search results do not depend on the job count") {
    Fixture f;
    const model::PairClassifier base(kDims, 5);
    const SweepGrid grid{{0.05}, {0.0, 1.0}, 2, 2};
    const auto a = grid_search_cv([&] { return base.clone(); }, f.ft, f.original, grid,
                                  ft_config(RegularizerKind::kL2, 0.0), 1, 1);
    const auto b = grid_search_cv([&] { return base.clone(); }, f.ft, f.original, grid,
                                  ft_config(RegularizerKind::kL2, 0.0), 1, 3);
    for (std::size_t i = 0; i < a.table.size(); ++i) CHECK(a.table[i].mean_accuracy == b.table[i].mean_accuracy);
  }

  TEST_CASE("sweep grid defaults") {
    const auto ladder = default_lambda_grid(1.0);
    CHECK(ladder.size() == 10);
    CHECK(ladder.front() == 1e6);
    CHECK(ladder.back() == 1e8);
    const auto g = default_sweep_grid(kEwcLambdaScale);
    CHECK(g.learning_rates.size() * g.lambdas.size() == 30);
    CHECK(g.epochs_max == 8);
    CHECK(g.k_folds == 5);
    SweepGrid bad = g;
    bad.k_folds = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("condition names") {
    const auto c = parse_condition("dfl+ft_ewc");
    CHECK(c.bias == model::BiasMode::kDfl);
    CHECK(c.finetune == RegularizerKind::kEwc);
    CHECK(parse_condition("merged").base == BaseKind::kMerged);
    CHECK_FALSE(parse_condition("original").finetune.has_value());
    CHECK_THROWS_AS(parse_condition("ft_l3"), std::invalid_argument);
    for (const auto& name : table_conditions()) CHECK_NOTHROW(parse_condition(name));
  }

  TEST_CASE("run_conditions and ablation_sweep on a small experiment") {
    const auto cfg = tiny_experiment();
    const auto corpora = build_corpora(cfg.corpus);
    CHECK(corpora.ft_train.size() == 40);
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto runs = run_conditions(cfg, corpora, seeds, {"original", "ft", "ft_ewc"});
    REQUIRE(runs.size() == 3);
    for (const auto& r : runs) {
      REQUIRE(r.seeds.size() == 2);
      CHECK(r.seeds[0].seed == 1);
    }
    CHECK(runs[0].seeds[0].history.empty());
    CHECK(runs[1].seeds[0].history.size() == cfg.finetune.train.epochs);
    const auto parallel = run_conditions(cfg, corpora, seeds, {"original", "ft", "ft_ewc"}, 2);
    for (std::size_t c = 0; c < runs.size(); ++c) {
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        CHECK(parallel[c].seeds[s].original_acc == runs[c].seeds[s].original_acc);
        CHECK(parallel[c].seeds[s].ft_acc == runs[c].seeds[s].ft_acc);
      }
    }

    const std::vector<std::size_t> sizes{5, 20, 40};
    const auto rows = ablation_sweep(cfg, corpora, sizes, {"original", "ft"}, seeds);
    REQUIRE(rows.size() == 3 * 2 * 2);
    CHECK(rows[0].size == 5);
    CHECK(rows[0].condition == "original");
    CHECK(rows[1].seed == 2);
    // The untreated model does not depend on the subset size.
    for (const auto& r : rows) {
      if (r.condition == "original") {
        CHECK(r.original_acc == runs[0].seeds[r.seed - 1].original_acc);
      }
    }
    CHECK_THROWS_AS(ablation_sweep(cfg, corpora, {20, 5}, {"ft"}, seeds), std::invalid_argument);
    CHECK_THROWS_AS(ablation_sweep(cfg, corpora, {41}, {"ft"}, seeds), std::invalid_argument);
  }
}
