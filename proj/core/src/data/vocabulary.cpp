#include "ewcft/data/dataset.hpp"

namespace ewcft::data {

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  tokens_.reserve(tokens.size());
  for (auto& t : tokens) {
    if (index_.count(t)) throw std::invalid_argument("Vocabulary: duplicate token '" + t + "'");
    index_.emplace(t, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(t));
  }
}

TokenId Vocabulary::add(std::string_view token) {
  if (auto found = find(token)) return *found;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.emplace_back(token);
  index_.emplace(tokens_.back(), id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  throw std::out_of_range("Vocabulary: unknown token '" + std::string(token) + "'");
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw std::out_of_range("Vocabulary: id " + std::to_string(id) + " outside size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

}  // namespace ewcft::data
