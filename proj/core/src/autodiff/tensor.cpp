#include "ewcft/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ewcft::autodiff {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : std::invalid_argument(op + ": shape mismatch " + to_string(lhs) + " vs " + to_string(rhs)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("tensor", shape_, Shape{values_.size()});
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() <= 1) return 1;
  throw std::logic_error("Tensor::rows: rank > 2 " + to_string(shape_));
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  if (shape_.empty()) return 1;
  throw std::logic_error("Tensor::cols: rank > 2 " + to_string(shape_));
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw std::logic_error("Tensor::item: tensor has " + std::to_string(values_.size()) + " elements");
  }
  return values_.front();
}

std::vector<double>& Tensor::zero_grad() {
  if (grad_ && grad_->size() == values_.size()) {
    std::fill(grad_->begin(), grad_->end(), 0.0);
  } else {
    grad_.emplace(values_.size(), 0.0);
  }
  return *grad_;
}

bool Tensor::all_finite() const noexcept {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(values_.begin(), values_.end(), finite)) return false;
  return !grad_ || std::all_of(grad_->begin(), grad_->end(), finite);
}

}  // namespace ewcft::autodiff
