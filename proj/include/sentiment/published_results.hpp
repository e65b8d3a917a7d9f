#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentiment/eval.hpp"

namespace sentiment {

/// A metrics row as printed: accuracy, precision, recall, F1.
struct PrintedRow {
  double accuracy, precision, recall, f1;
};

/// One of the three published experiments: its confusion counts (rows = true
/// class, columns = predicted class) and the metric rows printed for it.
struct PublishedApproach {
  int approach;
  std::string_view name;
  std::uint64_t pos_as_pos, pos_as_neg;
  std::uint64_t neg_as_pos, neg_as_neg;
  PrintedRow negative_reference;
  PrintedRow positive_reference;
  PrintedRow average;
  /// Allowed |recomputed - printed| for the per-class rows.
  double tolerance;

  ConfusionMatrix reference_negative() const { return {neg_as_neg, pos_as_neg, neg_as_pos, pos_as_pos}; }
};

std::span<const PublishedApproach> published_approaches();

/// Allowed |mean(printed per-class rows) - printed average row|.
inline constexpr double kAverageTolerance = 0.001;

struct CellCheck {
  int approach;
  std::string table;   // "negative", "positive" or "average"
  std::string metric;  // "accuracy", "precision", "recall", "f1"
  double computed;
  double printed;
  double tolerance;

  double delta() const { return computed - printed; }
  bool pass() const;
};

struct TableReproduction {
  std::vector<MetricsReport> reports;
  /// 12 negative-reference cells, 12 positive-reference cells, 12 average cells.
  std::vector<CellCheck> cells;

  bool all_pass() const;
};

/// Recomputes every per-class metric from the embedded confusion counts and
/// checks the printed averages against the printed per-class rows.
TableReproduction reproduce_tables();

/// Three Markdown tables (negative reference, positive reference, average),
/// each with a delta column against the printed values, followed by notes on
/// cells outside tolerance.
std::string render_reproduction(const TableReproduction& result);

}  // namespace sentiment
