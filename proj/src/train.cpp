#include "sentiment/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sentiment/random.hpp"

namespace sentiment {

namespace {

constexpr std::uint64_t kShuffleSeedStream = 12;

bool decays(ParamGroup group, const Matrix& m) { return group != ParamGroup::LayerNorm && m.rows() > 1; }

}  // namespace

void TrainConfig::validate() const {
  if (num_train_epochs < 1) throw std::invalid_argument("num_train_epochs must be at least 1");
  if (train_batch_size < 1 || eval_batch_size < 1) throw std::invalid_argument("batch sizes must be at least 1");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be nonnegative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
}

std::set<ParamGroup> TrainConfig::attention_only_mask() {
  std::set<ParamGroup> mask(all_param_groups().begin(), all_param_groups().end());
  mask.erase(ParamGroup::Attention);
  return mask;
}

double lr_at(std::size_t step, double base_lr, std::size_t warmup_steps) {
  if (step >= warmup_steps) return base_lr;
  return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
}

void adamw_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::size_t step, double lr, double weight_decay,
                  const AdamWOptions& o) {
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * grad[i];
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= lr * (m_hat / (std::sqrt(v_hat) + o.epsilon) + weight_decay * param[i]);
  }
}

AdamW::AdamW(const EncoderConfig& config, AdamWOptions options)
    : options_(options), m_(EncoderParams::zeros(config)), v_(EncoderParams::zeros(config)) {}

void AdamW::step(EncoderParams& params, const EncoderParams& grads, double lr, double weight_decay,
                 const std::set<ParamGroup>& frozen) {
  ++steps_;
  std::vector<const Matrix*> g;
  std::vector<Matrix*> m, v;
  grads.for_each([&](const std::string&, ParamGroup, const Matrix& t) { g.push_back(&t); });
  m_.for_each([&](const std::string&, ParamGroup, Matrix& t) { m.push_back(&t); });
  v_.for_each([&](const std::string&, ParamGroup, Matrix& t) { v.push_back(&t); });
  std::size_t i = 0;
  params.for_each([&](const std::string&, ParamGroup group, Matrix& p) {
    const std::size_t k = i++;
    if (frozen.count(group)) return;
    const auto n = static_cast<std::size_t>(p.size());
    adamw_update({p.data(), n}, {g[k]->data(), n}, {m[k]->data(), n}, {v[k]->data(), n}, steps_, lr,
                 decays(group, p) ? weight_decay : 0.0, options_);
  });
}

TrainResult train(std::span<const Example> train_set, const TrainConfig& config, EncoderParams init,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");

  TrainResult result;
  result.params = std::move(init);
  AdamW optimizer(result.params.config);
  Rng rng(derive_seed(config.seed, kShuffleSeedStream));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  std::size_t step = 0;
  double lr = 0.0;

  for (std::size_t epoch = 1; epoch <= config.num_train_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.train_batch_size) {
      const std::size_t end = std::min(order.size(), start + config.train_batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

      LossAndGrad lg;
      try {
        lg = loss_and_grad(batch, result.params, config.workers);
      } catch (const NumericalError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(lg.loss))
        throw TrainingError("epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                            ": non-finite loss");
      lr = lr_at(step, config.learning_rate, config.warmup_steps);
      optimizer.step(result.params, lg.grads, lr, config.weight_decay, config.freeze_mask);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      ++step;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()), lr};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, result.params);
  }
  result.steps = step;
  return result;
}

TrainResult train(std::span<const Example> train_set, const TrainConfig& config, const EncoderConfig& model,
                  const EpochCallback& on_epoch) {
  return train(train_set, config, EncoderParams::initialize(model, derive_seed(config.seed, kInitSeedStream)),
               on_epoch);
}

double accuracy(std::span<const Example> examples, const EncoderParams& params) {
  if (examples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : examples)
    correct += predict_label(forward(ex.tokens, params).logits) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

ApproachSetup approach_config(int approach, std::uint64_t seed) {
  ApproachSetup s;
  s.train.train_batch_size = 16;
  s.train.eval_batch_size = 64;
  s.train.warmup_steps = 500;
  s.train.weight_decay = 0.01;
  s.train.seed = seed;
  switch (approach) {
    case 1:
      s.train.num_train_epochs = 7;
      s.plan = SplitPlan::fractional(0.8, seed);
      break;
    case 2:
      s.train.num_train_epochs = 9;
      s.plan = SplitPlan::balanced(350, seed);
      break;
    case 3:
      s.train.num_train_epochs = 5;
      s.plan = SplitPlan::fractional(0.9, seed);
      break;
    default:
      throw std::invalid_argument("approach must be 1, 2 or 3");
  }
  return s;
}

}  // namespace sentiment
