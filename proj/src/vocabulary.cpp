#include "sentiment/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>

namespace sentiment {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t min_count) {
  if (texts.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts)
    for (auto& tok : tokenize(text)) ++counts[std::move(tok)];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n < min_count) continue;
    if (tok == kPadToken || tok == kUnkToken || tok == kClsToken) continue;
    kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary v;
  v.tokens_ = {std::string(kPadToken), std::string(kUnkToken), std::string(kClsToken)};
  for (auto& [tok, n] : kept) v.tokens_.push_back(tok);
  v.index();
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3 || tokens[0] != kPadToken || tokens[1] != kUnkToken || tokens[2] != kClsToken)
    throw std::invalid_argument("vocabulary must start with [PAD], [UNK], [CLS]");
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index();
  if (v.ids_.size() != v.tokens_.size()) throw std::invalid_argument("vocabulary contains duplicate tokens");
  return v;
}

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<TokenId>(i));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<TokenId> encode_text(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  std::vector<TokenId> ids;
  ids.reserve(max_len);
  ids.push_back(Vocabulary::kCls);
  for (const auto& tok : tokenize(text)) {
    if (ids.size() == max_len) break;
    const TokenId id = vocab.id(tok);
    // Literal "[PAD]" etc. in user text must not act as control tokens.
    ids.push_back(id <= Vocabulary::kCls ? Vocabulary::kUnk : id);
  }
  ids.resize(max_len, Vocabulary::kPad);
  return ids;
}

}  // namespace sentiment
