#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentiment/record.hpp"

namespace sentiment {

enum class InputFormat { Csv, Jsonl };
enum class CaseFold { Upper, Lower, None };

InputFormat parse_input_format(std::string_view name);
CaseFold parse_case_fold(std::string_view name);

/// Raised for unreadable or malformed corpus files. `line()` is 1-based and 0
/// when the failure is not tied to a particular line.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<SurveyRecord> ingest(const std::filesystem::path& path, InputFormat format);
std::vector<SurveyRecord> read_jsonl(std::istream& in);
std::vector<SurveyRecord> read_csv(std::istream& in);

void write_jsonl(std::ostream& out, std::span<const SurveyRecord> records);
void write_csv(std::ostream& out, std::span<const SurveyRecord> records);
void write_corpus(const std::filesystem::path& path, std::span<const SurveyRecord> records,
                  InputFormat format);

/// One JSONL line (without trailing newline) in the corpus record schema.
std::string record_to_json_line(const SurveyRecord& record);

/// Drops blank and Unclear-flagged records and case-folds the survivors.
/// Folding touches ASCII letters only; other code points pass through.
std::vector<SurveyRecord> clean(std::span<const SurveyRecord> records, CaseFold fold);

std::string fold_case(std::string_view text, CaseFold fold);
bool is_blank(std::string_view text);

struct SplitPlan {
  enum class Kind { Fractional, Balanced };

  Kind kind = Kind::Fractional;
  /// Fractional: share of the corpus used for training. Balanced: share of
  /// the equalized pool used for training.
  double train_fraction = 0.8;
  std::size_t per_class_count = 0;
  std::uint64_t seed = 0;

  static SplitPlan fractional(double train_fraction, std::uint64_t seed);
  static SplitPlan balanced(std::size_t per_class_count, std::uint64_t seed,
                            double inner_train_fraction = 0.8);

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct Split {
  std::vector<SurveyRecord> train;
  std::vector<SurveyRecord> test;
};

/// Deterministic partition of labeled records.
///
/// Fractional plans shuffle the whole corpus and take the first
/// round(train_fraction * N) records for training. Balanced plans shuffle
/// each class separately, keep the first per_class_count of each, shuffle the
/// combined pool and split it by train_fraction. All shuffles are Fisher-Yates
/// over Rng streams derived from plan.seed.
Split split(std::span<const SurveyRecord> records, const SplitPlan& plan);

void validate(const SplitPlan& plan);

}  // namespace sentiment
