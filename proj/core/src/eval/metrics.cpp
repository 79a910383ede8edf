#include "ewcft/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ewcft::eval {

namespace {

constexpr std::size_t kEvalBatch = 512;

template <typename Fn>
void for_each_batch(const data::Dataset& dataset, Fn&& fn) {
  std::vector<const data::Instance*> batch;
  for (std::size_t start = 0; start < dataset.size(); start += kEvalBatch) {
    batch.clear();
    for (std::size_t i = start; i < std::min(dataset.size(), start + kEvalBatch); ++i) batch.push_back(&dataset[i]);
    fn(model::Batch(batch));
  }
}

void require_non_empty(const data::Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("accuracy: empty dataset");
}

std::vector<std::size_t> gold_labels(const data::Dataset& dataset) {
  std::vector<std::size_t> gold;
  gold.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) gold.push_back(inst.label);
  return gold;
}

}  // namespace

std::vector<std::size_t> predict(const model::Classifier& model, const data::Dataset& dataset) {
  std::vector<std::size_t> out;
  out.reserve(dataset.size());
  for_each_batch(dataset, [&](model::Batch batch) {
    for (const auto& row : model.log_probs(batch)) out.push_back(model::argmax(row));
  });
  return out;
}

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> gold) {
  if (predictions.size() != gold.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (gold.empty()) throw std::invalid_argument("accuracy: empty sample");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predictions[i] == gold[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double accuracy(const model::Classifier& model, const data::Dataset& dataset) {
  require_non_empty(dataset);
  return accuracy(predict(model, dataset), gold_labels(dataset));
}

double accuracy(const model::Classifier& model, const model::Classifier* expert, const data::Dataset& dataset,
                const model::BiasModelConfig& config) {
  if (!config.use_expert_at_inference || config.mode == model::BiasMode::kNone) return accuracy(model, dataset);
  if (expert == nullptr) throw std::invalid_argument("accuracy: expert required at inference but not given");
  require_non_empty(dataset);
  std::vector<std::size_t> predictions;
  predictions.reserve(dataset.size());
  for_each_batch(dataset, [&](model::Batch batch) {
    const auto pair = model.log_probs(batch);
    const auto claim = expert->log_probs(batch);
    for (std::size_t r = 0; r < pair.size(); ++r) predictions.push_back(model::argmax(model::poe_combine(pair[r], claim[r])));
  });
  return accuracy(predictions, gold_labels(dataset));
}

AccuracyStats summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty sample");
  AccuracyStats s;
  s.n = values.size();
  s.values.assign(values.begin(), values.end());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

}  // namespace ewcft::eval
