#include "sentiment/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sentiment {

using nlohmann::json;

ConfusionMatrix confusion(std::span<const SentimentLabel> predictions, std::span<const SentimentLabel> truths,
                          SentimentLabel reference) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(truths.size()) + " truths");
  if (truths.empty()) throw std::invalid_argument("confusion: no predictions");
  ConfusionMatrix cm;
  cm.reference = reference;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool truth_ref = truths[i] == reference;
    const bool pred_ref = predictions[i] == reference;
    if (truth_ref && pred_ref) ++cm.tp;
    else if (!truth_ref && pred_ref) ++cm.fp;
    else if (truth_ref) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

Metric mean(const Metric& a, const Metric& b) {
  if (!a || !b) return std::nullopt;
  return (*a + *b) / 2.0;
}

}  // namespace

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.recall = ratio(cm.tp, cm.tp + cm.fn);
  if (m.precision && m.recall) {
    const double sum = *m.precision + *m.recall;
    m.f1 = sum > 0.0 ? 2.0 * *m.precision * *m.recall / sum : 0.0;
  }
  return m;
}

ClassMetrics macro_average(const ClassMetrics& negative, const ClassMetrics& positive) {
  return {mean(negative.accuracy, positive.accuracy), mean(negative.precision, positive.precision),
          mean(negative.recall, positive.recall), mean(negative.f1, positive.f1)};
}

MetricsReport build_report(int approach, const ConfusionMatrix& reference_negative) {
  if (reference_negative.reference != SentimentLabel::Negative)
    return build_report(approach, reference_negative.swapped());
  MetricsReport r;
  r.approach = approach;
  r.reference_negative = reference_negative;
  r.reference_positive = reference_negative.swapped();
  r.negative = class_metrics(r.reference_negative);
  r.positive = class_metrics(r.reference_positive);
  r.macro = macro_average(r.negative, r.positive);
  return r;
}

MetricsReport build_report(int approach, std::span<const SentimentLabel> predictions,
                           std::span<const SentimentLabel> truths) {
  return build_report(approach, confusion(predictions, truths, SentimentLabel::Negative));
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "md" || name == "markdown") return ReportFormat::Markdown;
  throw std::invalid_argument("unknown report format '" + std::string(name) + "'");
}

std::string format_metric(const Metric& value) {
  if (!value) return "n/a";
  const double rounded = std::round(*value * 1000.0) / 1000.0;  // std::round is half away from zero
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", rounded);
  return buf;
}

namespace {

json metric_json(const Metric& m) { return m ? json(*m) : json(nullptr); }

json metrics_json(const ClassMetrics& m) {
  return json{{"accuracy", metric_json(m.accuracy)},
              {"precision", metric_json(m.precision)},
              {"recall", metric_json(m.recall)},
              {"f1", metric_json(m.f1)}};
}

json confusion_json(const ConfusionMatrix& cm) {
  return json{{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

Metric metric_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

ClassMetrics metrics_from(const json& j) {
  return {metric_from(j.at("accuracy")), metric_from(j.at("precision")), metric_from(j.at("recall")),
          metric_from(j.at("f1"))};
}

ConfusionMatrix confusion_from(const json& j, SentimentLabel reference) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>(),
          j.at("tn").get<std::uint64_t>(), reference};
}

std::string markdown_row(const std::string& label, const ClassMetrics& m) {
  return "| " + label + " | " + format_metric(m.accuracy) + " | " + format_metric(m.precision) + " | " +
         format_metric(m.recall) + " | " + format_metric(m.f1) + " |\n";
}

}  // namespace

std::string render_report(const MetricsReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    const json j{{"approach", report.approach},
                 {"negative", metrics_json(report.negative)},
                 {"positive", metrics_json(report.positive)},
                 {"macro", metrics_json(report.macro)},
                 {"confusion",
                  {{"reference_negative", confusion_json(report.reference_negative)},
                   {"reference_positive", confusion_json(report.reference_positive)}}}};
    return j.dump(2) + "\n";
  }
  const std::string a = std::to_string(report.approach);
  std::string out = "| Approach | Accuracy | Precision | Recall | F1 score |\n";
  out += "|---|---|---|---|---|\n";
  out += markdown_row(a + " (negative reference)", report.negative);
  out += markdown_row(a + " (positive reference)", report.positive);
  out += markdown_row(a + " (macro average)", report.macro);
  return out;
}

MetricsReport parse_report_json(const std::string& text) {
  const json j = json::parse(text);
  MetricsReport r;
  r.approach = j.at("approach").get<int>();
  r.negative = metrics_from(j.at("negative"));
  r.positive = metrics_from(j.at("positive"));
  r.macro = metrics_from(j.at("macro"));
  r.reference_negative = confusion_from(j.at("confusion").at("reference_negative"), SentimentLabel::Negative);
  r.reference_positive = confusion_from(j.at("confusion").at("reference_positive"), SentimentLabel::Positive);
  return r;
}

}  // namespace sentiment
