#pragma once

#include <functional>

#include "ewcft/autodiff/tensor.hpp"

namespace ewcft::autodiff {

using ScalarFunction = std::function<double(const Tensor&)>;

// Central-difference gradient (f(θ + h·e_i) − f(θ − h·e_i)) / 2h for every
// coordinate of θ. Throws std::domain_error if any evaluation is non-finite
// and std::invalid_argument if h is not positive.
Tensor finite_diff_gradient(const ScalarFunction& f, const Tensor& theta, double h = 1e-5);

// max_i |a_i − b_i| / max(1, |b_i|).
double max_relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace ewcft::autodiff
