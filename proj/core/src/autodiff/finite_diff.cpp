#include "ewcft/autodiff/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ewcft::autodiff {

Tensor finite_diff_gradient(const ScalarFunction& f, const Tensor& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be positive");
  Tensor probe(theta.shape(), theta.data());
  Tensor grad(theta.shape());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double up = f(probe);
    probe[i] = original - h;
    const double down = f(probe);
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("finite_diff_gradient: non-finite evaluation at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error", Shape{a.size()}, Shape{b.size()});
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  }
  return worst;
}

}  // namespace ewcft::autodiff
