#include "sentiment/record.hpp"

#include <algorithm>
#include <cctype>

namespace sentiment {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(SentimentLabel label) {
  return label == SentimentLabel::Positive ? "positive" : "negative";
}

std::string_view to_string(RecordFlag flag) {
  return flag == RecordFlag::Unclear ? "unclear" : "translated";
}

std::optional<SentimentLabel> parse_label(std::string_view text) {
  if (iequals(text, "positive")) return SentimentLabel::Positive;
  if (iequals(text, "negative")) return SentimentLabel::Negative;
  return std::nullopt;
}

std::optional<RecordFlag> parse_flag(std::string_view text) {
  if (iequals(text, "unclear")) return RecordFlag::Unclear;
  if (iequals(text, "translated")) return RecordFlag::Translated;
  return std::nullopt;
}

}  // namespace sentiment
