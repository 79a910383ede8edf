#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "ewcft/data/dataset.hpp"

namespace ewcft::data {

// Malformed dataset file; line() is 1-based (0 when not tied to a line).
class DataFormatError : public std::runtime_error {
 public:
  DataFormatError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Dataset files are JSON Lines. The first line is a header object
//   {"num_classes": 3, "labels": ["SUPPORTS", "REFUTES", "NEI"],
//    "vocab": [...], "provenance": {...}}
// where "vocab" and "provenance" are optional. Each further line is
//   {"id": "...", "claim": ["tok", ...], "evidence": ["tok", ...], "label": "SUPPORTS"}
// Without a "vocab" entry the vocabulary is rebuilt in first-appearance order.
Dataset read_jsonl(std::istream& in);
Dataset read_jsonl(const std::filesystem::path& path);
void write_jsonl(const Dataset& dataset, std::ostream& out);
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const GeneratorConfig& config);
void from_json(const nlohmann::json& j, GeneratorConfig& config);
void to_json(nlohmann::json& j, const Provenance& provenance);
void from_json(const nlohmann::json& j, Provenance& provenance);

}  // namespace ewcft::data
