#include <benchmark/benchmark.h>

#include <vector>

#include "ewcft/continual/regularizer.hpp"
#include "ewcft/data/generators.hpp"
#include "ewcft/model/classifier.hpp"
#include "ewcft/train/experiment.hpp"
#include "ewcft/train/trainer.hpp"

namespace {

using namespace ewcft;

const train::Corpora& corpora() {
  static const train::Corpora c = [] {
    train::CorpusConfig config;
    config.generator.n_instances = 4000;
    return train::build_corpora(config);
  }();
  return c;
}

model::ModelDims dims() {
  model::ModelDims d;
  d.vocab_size = corpora().original_train.vocab().size();
  return d;
}

std::vector<const data::Instance*> batch_of(const data::Dataset& d, std::size_t n) {
  std::vector<const data::Instance*> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(&d[i]);
  return out;
}

void BM_ForwardBackward(benchmark::State& state) {
  const model::PairClassifier m(dims(), 1);
  const auto batch = batch_of(corpora().original_train, static_cast<std::size_t>(state.range(0)));
  std::vector<std::size_t> gold;
  for (const auto* inst : batch) gold.push_back(inst->label);
  for (auto _ : state) {
    autodiff::Graph g;
    const auto vars = m.bind(g);
    auto grads = g.backward(g.nll(m.forward(g, vars, batch), gold));
    benchmark::DoNotOptimize(grads);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(64)->Arg(512);

void BM_FisherDiagonal(benchmark::State& state) {
  const model::PairClassifier m(dims(), 1);
  for (auto _ : state) {
    auto f = continual::estimate_fisher_diagonal(m, corpora().original_train,
                                                 static_cast<std::size_t>(state.range(0)), 7);
    benchmark::DoNotOptimize(f);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FisherDiagonal)->Arg(100)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_ElasticPenaltyGraph(benchmark::State& state) {
  const model::PairClassifier m(dims(), 1);
  const auto anchor = continual::snapshot(m);
  const auto fisher = continual::unit_fisher(anchor);
  for (auto _ : state) {
    autodiff::Graph g;
    const auto vars = m.bind(g);
    auto grads = g.backward(continual::elastic_penalty(g, vars, anchor, fisher, 10.0));
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_ElasticPenaltyGraph);

void BM_FinetuneEpoch(benchmark::State& state) {
  const auto kind = static_cast<continual::RegularizerKind>(state.range(0));
  const model::PairClassifier base(dims(), 1);
  train::FinetuneConfig config;
  config.train.epochs = 1;
  config.regularizer.kind = kind;
  config.regularizer.lambda = kind == continual::RegularizerKind::kNone ? 0.0 : 1.0;
  for (auto _ : state) {
    model::PairClassifier m = base;
    auto r = train::finetune(m, corpora().ft_train, corpora().original_train, config);
    benchmark::DoNotOptimize(r);
  }
  state.SetLabel(std::string(continual::to_string(kind)));
}
BENCHMARK(BM_FinetuneEpoch)
    ->Arg(static_cast<int>(continual::RegularizerKind::kNone))
    ->Arg(static_cast<int>(continual::RegularizerKind::kL2))
    ->Arg(static_cast<int>(continual::RegularizerKind::kEwc))
    ->Unit(benchmark::kMillisecond);

void BM_GenerateOriginal(benchmark::State& state) {
  data::GeneratorConfig g;
  g.n_instances = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto d = data::generate_biased_original(g);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateOriginal)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
