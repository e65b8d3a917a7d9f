#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentiment/record.hpp"

namespace sentiment {

using Timestamp = std::chrono::sys_seconds;

struct Judgment {
  std::string record_id;
  std::string annotator_id;
  SentimentLabel label = SentimentLabel::Negative;
  Timestamp timestamp{};

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

enum class Verdict { Negative, Positive, Unresolved };

std::string_view to_string(Verdict v);

struct AdjudicatedLabel {
  std::string record_id;
  Verdict verdict = Verdict::Unresolved;
  std::size_t votes_positive = 0;
  std::size_t votes_negative = 0;

  std::size_t total_votes() const { return votes_positive + votes_negative; }
  std::optional<SentimentLabel> label() const;

  friend bool operator==(const AdjudicatedLabel&, const AdjudicatedLabel&) = default;
};

/// Strict majority over the latest judgment of each annotator; ties are
/// Unresolved. Throws if `judgments` is empty.
AdjudicatedLabel adjudicate_votes(const std::string& record_id, std::span<const Judgment> judgments);

std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(const std::string& text);

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownAnnotatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AnnotatorPolicy { AutoRegister, RejectUnknown };

struct CommitteeOptions {
  /// Append-only judgment journal; replayed on construction when present.
  std::optional<std::filesystem::path> journal;
  AnnotatorPolicy policy = AnnotatorPolicy::AutoRegister;
  std::set<std::string> annotators;
};

/// Collects expert judgments over a fixed corpus and derives adjudicated
/// labels from them. Submissions serialize on a writer lock; readers share a
/// lock, so no read observes a half-applied replacement.
class CommitteeService {
 public:
  explicit CommitteeService(std::vector<SurveyRecord> corpus, CommitteeOptions options = {});

  /// Stores `j`, replacing any earlier judgment by the same annotator on the
  /// same record. A default timestamp is replaced by the current time.
  Judgment submit(Judgment j);

  /// Throws NotFoundError for an unknown record or one without judgments.
  AdjudicatedLabel adjudicate(const std::string& record_id) const;

  /// Resolved records with at least `min_votes` votes, label set to the verdict.
  std::vector<SurveyRecord> export_labeled(std::size_t min_votes) const;

  /// Records, in corpus order, that `annotator_id` has not judged yet.
  std::vector<SurveyRecord> pending_for(const std::string& annotator_id) const;

  std::vector<SurveyRecord> records() const;
  std::vector<Judgment> judgments_for(const std::string& record_id) const;
  std::size_t judgment_count() const;

 private:
  void apply(const Judgment& j);
  void check_annotator(const std::string& annotator_id);

  mutable std::shared_mutex mutex_;
  std::vector<SurveyRecord> corpus_;
  std::map<std::string, std::size_t> index_;
  // record id -> annotator id -> current judgment
  std::map<std::string, std::map<std::string, Judgment>> judgments_;
  CommitteeOptions options_;
  std::optional<std::ofstream> journal_;
};

std::string judgment_to_json(const Judgment& j);
Judgment judgment_from_json(const std::string& line);
std::string adjudication_to_json(const AdjudicatedLabel& a);

}  // namespace sentiment
