#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "sentiment/record.hpp"

namespace sentiment {

/// Binary confusion counts relative to a reference class: tp counts items
/// whose truth and prediction are both the reference class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  SentimentLabel reference = SentimentLabel::Negative;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  /// The same predictions seen from the other class: (tn, fn, fp, tp).
  ConfusionMatrix swapped() const { return {tn, fn, fp, tp, other(reference)}; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const SentimentLabel> predictions, std::span<const SentimentLabel> truths,
                          SentimentLabel reference);

/// Metric value; std::nullopt stands for Undefined (zero denominator).
using Metric = std::optional<double>;

struct ClassMetrics {
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

/// accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// f1 = 2PR/(P+R). A zero denominator yields Undefined; f1 is Undefined
/// whenever precision or recall is.
ClassMetrics class_metrics(const ConfusionMatrix& cm);

/// Per-metric arithmetic mean; Undefined if either side is.
ClassMetrics macro_average(const ClassMetrics& negative, const ClassMetrics& positive);

struct MetricsReport {
  int approach = 0;
  ClassMetrics negative;
  ClassMetrics positive;
  ClassMetrics macro;
  ConfusionMatrix reference_negative;
  ConfusionMatrix reference_positive;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Confusion matrices for both reference classes, per-class metrics and the
/// macro average.
MetricsReport build_report(int approach, std::span<const SentimentLabel> predictions,
                           std::span<const SentimentLabel> truths);
MetricsReport build_report(int approach, const ConfusionMatrix& reference_negative);

enum class ReportFormat { Json, Markdown };

ReportFormat parse_report_format(std::string_view name);

/// JSON follows the report schema; Markdown renders rows
/// "| Approach | Accuracy | Precision | Recall | F1 score |" for the negative,
/// positive and macro views, values rounded half away from zero to three
/// decimals and Undefined shown as "n/a".
std::string render_report(const MetricsReport& report, ReportFormat format);
MetricsReport parse_report_json(const std::string& text);

/// Half away from zero to three decimals, or "n/a".
std::string format_metric(const Metric& value);

}  // namespace sentiment
