#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ewcft/autodiff/tensor.hpp"
#include "ewcft/train/config.hpp"

namespace ewcft::train {

// One trainable tensor and its gradient for a single update.
struct ParamSlot {
  const std::string* key;
  autodiff::Tensor* value;
  const autodiff::Tensor* grad;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<const ParamSlot> slots) = 0;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double learning_rate) : lr_(learning_rate) {}
  void step(std::span<const ParamSlot> slots) override;

 private:
  double lr_;
};

// Adam with bias-corrected moments. State is keyed by ParamSlot::key.
class Adam final : public Optimizer {
 public:
  Adam(double learning_rate, AdamParams params) : lr_(learning_rate), params_(params) {}
  void step(std::span<const ParamSlot> slots) override;

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };
  double lr_;
  AdamParams params_;
  std::map<std::string, Moments, std::less<>> state_;
  long long t_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& config);

// Scales every gradient by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the norm before scaling.
double clip_gradient_norm(std::span<autodiff::Tensor* const> grads, double max_norm);

}  // namespace ewcft::train
