#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ewcft::continual {

// Flat parameter values keyed by parameter id.
using ParameterArrays = std::map<std::string, std::vector<double>, std::less<>>;

// Frozen copy of a model's parameters (the anchor θ* of the penalty).
// Immutable after construction and safe to share across threads.
class ParameterSnapshot {
 public:
  ParameterSnapshot() = default;
  explicit ParameterSnapshot(ParameterArrays values) : values_(std::move(values)) {}

  const ParameterArrays& values() const noexcept { return values_; }
  // Throws std::out_of_range for an unknown id.
  const std::vector<double>& at(std::string_view id) const;
  bool contains(std::string_view id) const { return values_.find(id) != values_.end(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t element_count() const noexcept;

  friend bool operator==(const ParameterSnapshot&, const ParameterSnapshot&) = default;

 private:
  ParameterArrays values_;
};

// Per-parameter diagonal Fisher estimate. Every value is >= 0.
class FisherDiagonal {
 public:
  FisherDiagonal() = default;
  // Throws std::invalid_argument on a negative or non-finite value.
  FisherDiagonal(ParameterArrays values, std::size_t sample_size, std::string source);

  const ParameterArrays& values() const noexcept { return values_; }
  const std::vector<double>& at(std::string_view id) const;
  bool contains(std::string_view id) const { return values_.find(id) != values_.end(); }
  std::size_t sample_size() const noexcept { return sample_size_; }
  const std::string& source() const noexcept { return source_; }

  friend bool operator==(const FisherDiagonal&, const FisherDiagonal&) = default;

 private:
  ParameterArrays values_;
  std::size_t sample_size_ = 0;
  std::string source_;
};

enum class RegularizerKind { kNone, kL2, kEwc };

std::string_view to_string(RegularizerKind kind);
// Accepts "none", "l2" and "ewc".
RegularizerKind parse_regularizer_kind(std::string_view text);

struct RegularizerConfig {
  RegularizerKind kind = RegularizerKind::kNone;
  double lambda = 0.0;
  std::size_t fisher_sample_size = 2000;
  // When false the Fisher estimated before the first epoch is reused.
  bool recompute_each_epoch = true;

  void validate() const;

  friend bool operator==(const RegularizerConfig&, const RegularizerConfig&) = default;
};

// Throws std::invalid_argument on differing ids and autodiff::ShapeError on
// differing lengths.
void check_compatible(const ParameterArrays& a, const ParameterArrays& b, std::string_view what);

}  // namespace ewcft::continual
