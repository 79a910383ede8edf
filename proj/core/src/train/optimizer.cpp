#include "ewcft/train/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace ewcft::train {

void Sgd::step(std::span<const ParamSlot> slots) {
  for (const auto& s : slots) {
    auto w = s.value->values();
    const auto g = s.grad->values();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * g[i];
  }
}

void Adam::step(std::span<const ParamSlot> slots) {
  ++t_;
  const double c1 = 1.0 - std::pow(params_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(params_.beta2, static_cast<double>(t_));
  for (const auto& s : slots) {
    auto it = state_.find(*s.key);
    if (it == state_.end()) {
      it = state_.emplace(*s.key, Moments{std::vector<double>(s.value->size(), 0.0),
                                          std::vector<double>(s.value->size(), 0.0)})
               .first;
    }
    auto& [m, v] = it->second;
    auto w = s.value->values();
    const auto g = s.grad->values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = params_.beta1 * m[i] + (1.0 - params_.beta1) * g[i];
      v[i] = params_.beta2 * v[i] + (1.0 - params_.beta2) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + params_.epsilon);
    }
  }
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config) {
  switch (config.optimizer) {
    case OptimizerKind::kSgd: return std::make_unique<Sgd>(config.learning_rate);
    case OptimizerKind::kAdam: return std::make_unique<Adam>(config.learning_rate, config.adam);
  }
  throw std::invalid_argument("make_optimizer: unknown optimizer");
}

double clip_gradient_norm(std::span<autodiff::Tensor* const> grads, double max_norm) {
  double ss = 0.0;
  for (const auto* g : grads) {
    for (double x : g->values()) ss += x * x;
  }
  const double norm = std::sqrt(ss);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto* g : grads) {
      for (double& x : g->values()) x *= factor;
    }
  }
  return norm;
}

}  // namespace ewcft::train
