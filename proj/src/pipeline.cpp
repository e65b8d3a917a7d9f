#include "sentiment/pipeline.hpp"

#include <algorithm>

namespace sentiment {

void TrainOverrides::apply_to(TrainConfig& config) const {
  if (epochs) config.num_train_epochs = *epochs;
  if (batch_size) config.train_batch_size = *batch_size;
  if (warmup_steps) config.warmup_steps = *warmup_steps;
  if (learning_rate) config.learning_rate = *learning_rate;
  if (weight_decay) config.weight_decay = *weight_decay;
  if (freeze_mask) config.freeze_mask = *freeze_mask;
  config.workers = workers;
}

void require_labels(std::span<const SurveyRecord> records) {
  for (const auto& r : records)
    if (!r.label) throw std::invalid_argument("record '" + r.id + "' has no label");
}

std::vector<std::string> texts_of(std::span<const SurveyRecord> records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

std::vector<Example> make_examples(std::span<const SurveyRecord> records, const Vocabulary& vocab,
                                   std::size_t max_len) {
  require_labels(records);
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({encode_text(r.text, vocab, max_len), *r.label});
  return out;
}

ApproachRun run_approach(std::span<const SurveyRecord> corpus, int approach, std::uint64_t seed,
                         EncoderConfig model, const TrainOverrides& overrides) {
  require_labels(corpus);
  ApproachSetup setup = approach_config(approach, seed);
  overrides.apply_to(setup.train);

  ApproachRun run{.report = {}, .training = {}, .vocab = Vocabulary::from_tokens({"[PAD]", "[UNK]", "[CLS]"}),
                  .split = split(corpus, setup.plan)};
  if (run.split.train.empty() || run.split.test.empty())
    throw std::invalid_argument("approach " + std::to_string(approach) + " split left an empty train or test set");

  const auto train_texts = texts_of(run.split.train);
  run.vocab = Vocabulary::build(train_texts, 1);
  model.vocab_size = run.vocab.size();

  const auto train_examples = make_examples(run.split.train, run.vocab, model.max_len);
  run.training = train(train_examples, setup.train, model);

  std::vector<SentimentLabel> predictions, truths;
  const auto test_examples = make_examples(run.split.test, run.vocab, model.max_len);
  for (std::size_t start = 0; start < test_examples.size(); start += setup.train.eval_batch_size) {
    const auto end = std::min(test_examples.size(), start + setup.train.eval_batch_size);
    std::vector<std::vector<TokenId>> inputs;
    for (std::size_t i = start; i < end; ++i) {
      inputs.push_back(test_examples[i].tokens);
      truths.push_back(test_examples[i].label);
    }
    const auto chunk = predict(inputs, run.training.params);
    predictions.insert(predictions.end(), chunk.begin(), chunk.end());
  }
  run.report = build_report(approach, predictions, truths);
  return run;
}

}  // namespace sentiment
