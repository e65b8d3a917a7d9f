#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sentiment {

using TokenId = std::int32_t;

/// Whitespace-tokenized vocabulary with reserved ids PAD=0, UNK=1, CLS=2.
///
/// Text is expected to be case-folded already; tokens are taken verbatim.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr std::string_view kPadToken = "[PAD]";
  static constexpr std::string_view kUnkToken = "[UNK]";
  static constexpr std::string_view kClsToken = "[CLS]";

  /// Keeps tokens seen at least `min_count` times. Ids after the reserved
  /// ones follow descending frequency, ties broken by byte-wise token order.
  static Vocabulary build(std::span<const std::string> texts, std::size_t min_count = 1);

  /// Rebuilds from an id-ordered token list whose first three entries are the
  /// reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  Vocabulary() = default;
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

std::vector<std::string> tokenize(std::string_view text);

/// [CLS] followed by token ids, truncated or PAD-filled to exactly max_len.
std::vector<TokenId> encode_text(std::string_view text, const Vocabulary& vocab, std::size_t max_len);

}  // namespace sentiment
