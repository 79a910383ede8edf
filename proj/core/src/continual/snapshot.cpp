#include <cmath>
#include <stdexcept>

#include "ewcft/autodiff/tensor.hpp"
#include "ewcft/continual/regularizer.hpp"
#include "ewcft/continual/state.hpp"
#include "ewcft/util/hash.hpp"

namespace ewcft::continual {

namespace {

const std::vector<double>& lookup(const ParameterArrays& values, std::string_view id, std::string_view what) {
  auto it = values.find(id);
  if (it == values.end()) throw std::out_of_range(std::string(what) + ": no parameter '" + std::string(id) + "'");
  return it->second;
}

}  // namespace

const std::vector<double>& ParameterSnapshot::at(std::string_view id) const {
  return lookup(values_, id, "ParameterSnapshot");
}

std::size_t ParameterSnapshot::element_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [id, v] : values_) n += v.size();
  return n;
}

FisherDiagonal::FisherDiagonal(ParameterArrays values, std::size_t sample_size, std::string source)
    : values_(std::move(values)), sample_size_(sample_size), source_(std::move(source)) {
  for (const auto& [id, v] : values_) {
    for (double x : v) {
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument("FisherDiagonal: value for '" + id + "' is negative or non-finite");
      }
    }
  }
}

const std::vector<double>& FisherDiagonal::at(std::string_view id) const {
  return lookup(values_, id, "FisherDiagonal");
}

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::kNone: return "none";
    case RegularizerKind::kL2: return "l2";
    case RegularizerKind::kEwc: return "ewc";
  }
  return "unknown";
}

RegularizerKind parse_regularizer_kind(std::string_view text) {
  if (text == "none") return RegularizerKind::kNone;
  if (text == "l2") return RegularizerKind::kL2;
  if (text == "ewc") return RegularizerKind::kEwc;
  throw std::invalid_argument("unknown regularizer '" + std::string(text) + "'");
}

void RegularizerConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("RegularizerConfig: lambda must be >= 0");
  if (kind == RegularizerKind::kEwc && fisher_sample_size < 1) {
    throw std::invalid_argument("RegularizerConfig: fisher_sample_size must be >= 1 for ewc");
  }
}

void check_compatible(const ParameterArrays& a, const ParameterArrays& b, std::string_view what) {
  if (a.size() != b.size()) {
    throw autodiff::ShapeError(std::string(what) + ": parameter count", {a.size()}, {b.size()});
  }
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw std::invalid_argument(std::string(what) + ": parameter '" + ia->first + "' vs '" + ib->first + "'");
    }
    if (ia->second.size() != ib->second.size()) {
      throw autodiff::ShapeError(std::string(what) + ":" + ia->first, {ia->second.size()}, {ib->second.size()});
    }
  }
}

ParameterArrays parameter_arrays(const model::Classifier& model) {
  ParameterArrays out;
  for (const auto& p : model.parameters()) out.emplace(p.id, p.value.data());
  return out;
}

std::string checksum(const ParameterArrays& values) {
  std::string bytes;
  for (const auto& [id, v] : values) {
    bytes += id;
    bytes.push_back('\0');
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  return util::hash_hex(bytes);
}

ParameterSnapshot snapshot(const model::Classifier& model) { return ParameterSnapshot(parameter_arrays(model)); }

FisherDiagonal unit_fisher(const ParameterSnapshot& anchor) {
  ParameterArrays ones;
  for (const auto& [id, v] : anchor.values()) ones.emplace(id, std::vector<double>(v.size(), 1.0));
  return FisherDiagonal(std::move(ones), 0, "unit");
}

}  // namespace ewcft::continual
