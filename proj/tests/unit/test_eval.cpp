#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "sentiment/eval.hpp"
#include "sentiment/published_results.hpp"
#include "sentiment/random.hpp"

using namespace sentiment;

namespace {

constexpr auto P = SentimentLabel::Positive;
constexpr auto N = SentimentLabel::Negative;

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<SentimentLabel> preds = {N, N, P}, truths = {N, N, P};
  const auto cm = confusion(preds, truths, N);
  CHECK(cm.tp == 2);
  CHECK(cm.tn == 1);
  CHECK(cm.fp == 0);
  CHECK(cm.fn == 0);

  const std::vector<SentimentLabel> all_n = {N, N, N, N}, all_p = {P, P, P, P};
  const auto constant = confusion(all_n, all_p, N);
  CHECK(constant.tp == 0);
  CHECK(constant.fp == 4);
  CHECK_THROWS_AS(confusion(all_n, truths, N), std::invalid_argument);
  CHECK_THROWS_AS(confusion(std::vector<SentimentLabel>{}, std::vector<SentimentLabel>{}, N), std::invalid_argument);
}

TEST_CASE("confusion agrees with a brute-force recount on random lists") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SentimentLabel> preds, truths;
    for (int i = 0; i < 20; ++i) {
      preds.push_back(rng.uniform_below(2) ? P : N);
      truths.push_back(rng.uniform_below(2) ? P : N);
    }
    for (auto ref : {N, P}) {
      ConfusionMatrix want;
      want.reference = ref;
      for (int i = 0; i < 20; ++i) {
        const bool pr = preds[i] == ref, tr = truths[i] == ref;
        (pr && tr ? want.tp : pr ? want.fp : tr ? want.fn : want.tn)++;
      }
      CHECK(confusion(preds, truths, ref) == want);
    }
    CHECK(confusion(preds, truths, P) == confusion(preds, truths, N).swapped());
  }
}

TEST_CASE("class metrics on the published confusion matrices") {
  const auto first = class_metrics({187, 56, 17, 69, N});
  CHECK(format_metric(first.accuracy) == "0.778");
  CHECK(format_metric(first.precision) == "0.770");
  CHECK(format_metric(first.recall) == "0.917");
  CHECK(format_metric(first.f1) == "0.837");
  CHECK(std::abs(*first.precision - 0.769) <= 0.01);

  const auto third = class_metrics({90, 20, 8, 40, N});
  CHECK(format_metric(third.accuracy) == "0.823");
  CHECK(format_metric(third.precision) == "0.818");
  CHECK(format_metric(third.recall) == "0.918");
  CHECK(format_metric(third.f1) == "0.865");
}

TEST_CASE("undefined metrics") {
  const auto m = class_metrics({0, 0, 5, 5, N});
  CHECK_FALSE(m.precision.has_value());
  CHECK(*m.recall == 0.0);
  CHECK(*m.accuracy == 0.5);
  CHECK_FALSE(m.f1.has_value());
  CHECK(format_metric(m.precision) == "n/a");

  const auto zero = class_metrics({0, 3, 4, 1, N});
  CHECK(*zero.precision == 0.0);
  CHECK(*zero.recall == 0.0);
  CHECK(*zero.f1 == 0.0);
}

TEST_CASE("metrics agree with the recount oracle and obey the f1 bounds") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    ConfusionMatrix cm{rng.uniform_below(30), rng.uniform_below(30), rng.uniform_below(30), rng.uniform_below(30) + 1, N};
    std::vector<std::pair<int, int>> pairs;
    for (std::uint64_t i = 0; i < cm.tp; ++i) pairs.emplace_back(0, 0);
    for (std::uint64_t i = 0; i < cm.fp; ++i) pairs.emplace_back(0, 1);
    for (std::uint64_t i = 0; i < cm.fn; ++i) pairs.emplace_back(1, 0);
    for (std::uint64_t i = 0; i < cm.tn; ++i) pairs.emplace_back(1, 1);
    const auto got = class_metrics(cm);
    const auto want = testing::recount_metrics(pairs, 0);
    REQUIRE(got.precision.has_value() == want.precision.has_value());
    REQUIRE(got.f1.has_value() == want.f1.has_value());
    CHECK(std::abs(*got.accuracy - *want.accuracy) <= 1e-12);
    if (got.f1 && got.precision && got.recall) {
      CHECK(std::abs(*got.f1 - *want.f1) <= 1e-12);
      CHECK(*got.f1 >= std::min(*got.precision, *got.recall) - 1e-15);
      CHECK(*got.f1 <= std::max(*got.precision, *got.recall) + 1e-15);
    }
    CHECK(class_metrics(cm.swapped()).accuracy == got.accuracy);
  }
}

TEST_CASE("macro average") {
  const ClassMetrics neg{0.777, 0.769, 0.915, 0.835}, pos{0.777, 0.799, 0.548, 0.658};
  const auto m = macro_average(neg, pos);
  CHECK(std::abs(*m.precision - 0.784) <= 0.001);
  CHECK(std::abs(*m.recall - 0.7315) <= 1e-12);
  CHECK(std::abs(*m.f1 - 0.7465) <= 1e-12);
  CHECK(macro_average(pos, neg) == m);
  CHECK(macro_average(neg, neg) == neg);

  const ClassMetrics second_neg{0.822, 0.823, 0.905, 0.860}, second_pos{0.822, 0.818, 0.655, 0.749};
  const auto m2 = macro_average(second_neg, second_pos);
  CHECK(std::abs(*m2.precision - 0.820) <= 0.001);
  CHECK(std::abs(*m2.recall - 0.780) <= 0.001);
  CHECK(std::abs(*m2.f1 - 0.8045) <= 0.001);

  ClassMetrics undefined = neg;
  undefined.precision.reset();
  CHECK_FALSE(macro_average(undefined, pos).precision.has_value());
}

TEST_CASE("constant predictor on a balanced test set") {
  std::vector<SentimentLabel> preds(10, N), truths;
  for (int i = 0; i < 10; ++i) truths.push_back(i % 2 ? P : N);
  const auto r = build_report(1, preds, truths);
  CHECK(*r.negative.accuracy == 0.5);
  CHECK(*r.negative.recall == 1.0);
  CHECK(*r.positive.recall == 0.0);
  CHECK_FALSE(r.positive.precision.has_value());
  CHECK(r.reference_positive == r.reference_negative.swapped());
}

TEST_CASE("rounding is half away from zero") {
  CHECK(format_metric(0.0625) == "0.063");
  CHECK(format_metric(0.3125) == "0.313");
  CHECK(format_metric(1.0) == "1.000");
  CHECK(format_metric(0.0) == "0.000");
}

TEST_CASE("markdown layout") {
  MetricsReport r;
  r.approach = 3;
  r.macro = {0.824, 0.824, 0.798, 0.804};
  r.negative = {0.823, 0.818, 0.918, 0.865};
  r.positive = {0.823, 0.833, std::nullopt, std::nullopt};
  const auto md = render_report(r, ReportFormat::Markdown);
  CHECK(md.find("| Approach | Accuracy | Precision | Recall | F1 score |") == 0);
  CHECK(md.find("0.824 | 0.824 | 0.798 | 0.804 |") != std::string::npos);
  CHECK(md.find("| 0.823 | 0.833 | n/a | n/a |") != std::string::npos);
}

TEST_CASE("JSON report schema and round trip") {
  const auto r = build_report(2, ConfusionMatrix{186, 41, 18, 84, N});
  const auto text = render_report(r, ReportFormat::Json);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["approach"] == 2);
  CHECK(j["confusion"]["reference_negative"]["tp"] == 186);
  CHECK(j["confusion"]["reference_positive"]["tp"] == 84);
  for (const char* key : {"negative", "positive", "macro"})
    for (const char* metric : {"accuracy", "precision", "recall", "f1"}) CHECK(j[key].contains(metric));
  CHECK(parse_report_json(text) == r);

  const auto degenerate = build_report(1, ConfusionMatrix{0, 0, 5, 5, N});
  CHECK(parse_report_json(render_report(degenerate, ReportFormat::Json)) == degenerate);
  CHECK(parse_report_format("markdown") == ReportFormat::Markdown);
  CHECK_THROWS(parse_report_format("html"));
}

TEST_CASE("published tables: every cell is checked against the printed values") {
  const auto result = reproduce_tables();
  CHECK(result.reports.size() == 3);
  CHECK(result.cells.size() == 36);
  std::size_t failing = 0;
  for (const auto& c : result.cells) {
    if (c.pass()) continue;
    ++failing;
    // The only cell outside tolerance: 40/60 recomputes to 0.667, printed 0.678.
    CHECK(c.approach == 3);
    CHECK(c.table == "positive");
    CHECK(c.metric == "recall");
    CHECK(c.computed == doctest::Approx(40.0 / 60.0));
  }
  CHECK(failing == 1);
  const auto text = render_reproduction(result);
  CHECK(text.find("0.824 | 0.825 | 0.798 | 0.804") != std::string::npos);
  CHECK(text.find("0.655") != std::string::npos);
}
