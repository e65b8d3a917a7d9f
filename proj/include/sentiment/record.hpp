#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sentiment {

// Index order matters: the classifier head emits logits as [negative, positive].
enum class SentimentLabel { Negative = 0, Positive = 1 };

enum class RecordFlag { Unclear, Translated };

struct SurveyRecord {
  std::string id;
  std::string text;
  std::string language;
  std::optional<SentimentLabel> label;
  std::string source;
  std::set<RecordFlag> flags;

  bool has_flag(RecordFlag f) const { return flags.count(f) != 0; }

  friend bool operator==(const SurveyRecord&, const SurveyRecord&) = default;
};

std::string_view to_string(SentimentLabel label);
std::string_view to_string(RecordFlag flag);

/// Accepts "positive"/"negative" in any letter case.
std::optional<SentimentLabel> parse_label(std::string_view text);
std::optional<RecordFlag> parse_flag(std::string_view text);

inline SentimentLabel other(SentimentLabel label) {
  return label == SentimentLabel::Positive ? SentimentLabel::Negative
                                           : SentimentLabel::Positive;
}

}  // namespace sentiment
