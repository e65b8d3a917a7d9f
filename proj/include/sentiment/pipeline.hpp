#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "sentiment/corpus.hpp"
#include "sentiment/encoder.hpp"
#include "sentiment/eval.hpp"
#include "sentiment/train.hpp"
#include "sentiment/vocabulary.hpp"

namespace sentiment {

/// Command-line style overrides on top of an approach's TrainConfig.
struct TrainOverrides {
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> warmup_steps;
  std::optional<double> learning_rate;
  std::optional<double> weight_decay;
  std::optional<std::set<ParamGroup>> freeze_mask;
  std::size_t workers = 1;

  void apply_to(TrainConfig& config) const;
};

/// Encodes labeled records; throws naming the first unlabeled record.
std::vector<Example> make_examples(std::span<const SurveyRecord> records, const Vocabulary& vocab,
                                   std::size_t max_len);

/// Throws std::invalid_argument naming the first record without a label.
void require_labels(std::span<const SurveyRecord> records);

std::vector<std::string> texts_of(std::span<const SurveyRecord> records);

struct ApproachRun {
  MetricsReport report;
  TrainResult training;
  Vocabulary vocab;
  Split split;
};

/// Split per approach_config(approach, seed), build the vocabulary from the
/// training texts, train from a seeded initialization, predict the test set
/// in eval_batch_size chunks and report both reference classes.
/// `model.vocab_size` is ignored and set from the vocabulary.
ApproachRun run_approach(std::span<const SurveyRecord> corpus, int approach, std::uint64_t seed,
                         EncoderConfig model = {}, const TrainOverrides& overrides = {});

}  // namespace sentiment
