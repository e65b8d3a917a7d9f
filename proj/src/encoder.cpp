#include "sentiment/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <thread>

#include "sentiment/random.hpp"

namespace sentiment {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStddev = 0.02;

constexpr ParamGroup kAllGroups[] = {ParamGroup::TokenEmbedding, ParamGroup::PositionEmbedding,
                                     ParamGroup::Attention,      ParamGroup::FeedForward,
                                     ParamGroup::LayerNorm,      ParamGroup::Classifier};

bool all_finite(const Matrix& m) { return m.allFinite(); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

// Row-wise softmax of `scores` over unmasked columns; masked columns get 0.
Matrix masked_softmax(const Matrix& scores, std::span<const bool> key_mask) {
  const auto rows = scores.rows();
  const auto cols = scores.cols();
  Matrix p = Matrix::Zero(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    double max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < cols; ++j)
      if (key_mask.empty() || !key_mask[j]) max = std::max(max, scores(i, j));
    if (!std::isfinite(max)) throw std::invalid_argument("attention row has no unmasked keys");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!key_mask.empty() && key_mask[j]) continue;
      p(i, j) = std::exp(scores(i, j) - max);
      sum += p(i, j);
    }
    p.row(i) /= sum;
  }
  return p;
}

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache* cache) {
  const auto n = static_cast<double>(x.cols());
  Matrix xhat(x.rows(), x.cols());
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / n;
    const auto centered = (x.row(i).array() - mean).eval();
    const double var = centered.square().sum() / n;
    inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = centered * inv_std(i);
  }
  Matrix y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

// Returns dL/dx and accumulates dL/dgain, dL/dbias.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias) {
  dgain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const auto n = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gain.row(0));
    const Eigen::RowVectorXd xhat = cache.xhat.row(i);
    const double mean_dxhat = dxhat.sum() / n;
    const double mean_dxhat_xhat = dxhat.dot(xhat) / n;
    dx.row(i) = cache.inv_std(i) * (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

struct LayerCache {
  Matrix input;
  Matrix q, k, v;
  std::vector<Matrix> probs;
  Matrix context;
  LayerNormCache ln1;
  Matrix h1;
  Matrix z1;
  Matrix g;
  LayerNormCache ln2;
  Matrix out;
};

struct ExampleCache {
  std::vector<LayerCache> layers;
  Logits logits{};
};

void check_tokens(std::span<const TokenId> tokens, const EncoderConfig& config) {
  if (tokens.size() != config.max_len)
    throw std::invalid_argument("expected " + std::to_string(config.max_len) + " tokens, got " +
                                std::to_string(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= config.vocab_size)
      throw std::out_of_range("token id " + std::to_string(tokens[i]) + " at position " + std::to_string(i) +
                              " outside vocabulary of size " + std::to_string(config.vocab_size));
}

Matrix embed(std::span<const TokenId> tokens, const EncoderParams& params) {
  const auto len = static_cast<Eigen::Index>(tokens.size());
  Matrix x(len, params.token_embedding.cols());
  for (Eigen::Index i = 0; i < len; ++i)
    x.row(i) = params.token_embedding.row(tokens[i]) + params.position_embedding.row(i);
  return x;
}

// Forward through one layer, filling `c` (which also receives the input).
Matrix layer_forward(Matrix x, const LayerParams& p, std::size_t n_heads, std::span<const bool> mask,
                     LayerCache& c) {
  const auto dk = static_cast<Eigen::Index>(x.cols() / static_cast<Eigen::Index>(n_heads));
  c.input = std::move(x);
  c.q.noalias() = c.input * p.w_q;
  c.k.noalias() = c.input * p.w_k;
  c.v.noalias() = c.input * p.w_v;
  c.context.resize(c.input.rows(), c.input.cols());
  c.probs.clear();
  for (std::size_t h = 0; h < n_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dk;
    auto res = attention(c.q.middleCols(off, dk), c.k.middleCols(off, dk), c.v.middleCols(off, dk), mask);
    c.context.middleCols(off, dk) = res.output;
    c.probs.push_back(std::move(res.weights));
  }
  Matrix s1 = c.input;
  s1.noalias() += c.context * p.w_o;
  c.h1 = layer_norm(s1, p.ln1_gain, p.ln1_bias, &c.ln1);
  c.z1.noalias() = c.h1 * p.ffn_w1;
  c.z1.rowwise() += p.ffn_b1.row(0);
  c.g = c.z1.unaryExpr(&gelu);
  Matrix s2 = c.h1;
  s2.noalias() += c.g * p.ffn_w2;
  s2.rowwise() += p.ffn_b2.row(0);
  c.out = layer_norm(s2, p.ln2_gain, p.ln2_bias, &c.ln2);
  return c.out;
}

// Backward through one layer; accumulates into `gp` and returns dL/d(input).
Matrix layer_backward(const Matrix& dout, const LayerParams& p, const LayerCache& c, std::size_t n_heads,
                      LayerParams& gp) {
  Matrix ds2 = layer_norm_backward(dout, c.ln2, p.ln2_gain, gp.ln2_gain, gp.ln2_bias);

  gp.ffn_w2.noalias() += c.g.transpose() * ds2;
  gp.ffn_b2.row(0) += ds2.colwise().sum();
  Matrix dz = ds2 * p.ffn_w2.transpose();
  dz.array() *= c.z1.unaryExpr(&gelu_grad).array();
  gp.ffn_w1.noalias() += c.h1.transpose() * dz;
  gp.ffn_b1.row(0) += dz.colwise().sum();
  Matrix dh1 = ds2;
  dh1.noalias() += dz * p.ffn_w1.transpose();

  Matrix ds1 = layer_norm_backward(dh1, c.ln1, p.ln1_gain, gp.ln1_gain, gp.ln1_bias);

  gp.w_o.noalias() += c.context.transpose() * ds1;
  const Matrix dcontext = ds1 * p.w_o.transpose();

  const auto dk = static_cast<Eigen::Index>(c.input.cols() / static_cast<Eigen::Index>(n_heads));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix dq(c.q.rows(), c.q.cols()), dkey(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (std::size_t h = 0; h < n_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dk;
    const Matrix& prob = c.probs[h];
    const auto d_out = dcontext.middleCols(off, dk);
    const Matrix dprob = d_out * c.v.middleCols(off, dk).transpose();
    dv.middleCols(off, dk) = prob.transpose() * d_out;
    // softmax Jacobian, row by row
    const Eigen::VectorXd row_dot = (dprob.array() * prob.array()).rowwise().sum();
    Matrix dscore = (prob.array() * (dprob.array().colwise() - row_dot.array())).matrix() * scale;
    dq.middleCols(off, dk) = dscore * c.k.middleCols(off, dk);
    dkey.middleCols(off, dk) = dscore.transpose() * c.q.middleCols(off, dk);
  }
  gp.w_q.noalias() += c.input.transpose() * dq;
  gp.w_k.noalias() += c.input.transpose() * dkey;
  gp.w_v.noalias() += c.input.transpose() * dv;

  Matrix dx = ds1;
  dx.noalias() += dq * p.w_q.transpose();
  dx.noalias() += dkey * p.w_k.transpose();
  dx.noalias() += dv * p.w_v.transpose();
  return dx;
}

Logits classify(const Matrix& final_hidden, const EncoderParams& params) {
  const Eigen::RowVectorXd z = final_hidden.row(0) * params.classifier_w + params.classifier_b.row(0);
  return {z(0), z(1)};
}

Logits forward_cached(std::span<const TokenId> tokens, const EncoderParams& params, ExampleCache& cache) {
  const auto& cfg = params.config;
  check_tokens(tokens, cfg);
  auto mask = std::make_unique<bool[]>(tokens.size());
  bool any_pad = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    mask[i] = tokens[i] == Vocabulary::kPad;
    any_pad |= mask[i];
  }
  const std::span<const bool> key_mask = any_pad ? std::span<const bool>(mask.get(), tokens.size())
                                                 : std::span<const bool>();

  cache.layers.resize(cfg.n_layers);
  Matrix x = embed(tokens, params);
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    x = layer_forward(std::move(x), params.layers[l], cfg.n_heads, key_mask, cache.layers[l]);
  cache.logits = classify(x, params);
  return cache.logits;
}

// Cross-entropy of one example; accumulates `weight * dL/dparams` into grads.
double backward_example(std::span<const TokenId> tokens, SentimentLabel label, const EncoderParams& params,
                        double weight, EncoderParams& grads, ExampleCache& cache, std::size_t index) {
  const Logits logits = forward_cached(tokens, params, cache);
  const auto probs = softmax(logits);
  const auto y = static_cast<std::size_t>(label);
  const double max = std::max(logits[0], logits[1]);
  const double lse = max + std::log(std::exp(logits[0] - max) + std::exp(logits[1] - max));
  const double loss = lse - logits[y];
  if (!std::isfinite(loss))
    throw NumericalError("non-finite loss at batch element " + std::to_string(index));

  Eigen::RowVector2d dlogits(probs[0], probs[1]);
  dlogits(static_cast<Eigen::Index>(y)) -= 1.0;
  dlogits *= weight;

  const auto& cfg = params.config;
  const Matrix& final_hidden = cache.layers.back().out;
  grads.classifier_w.noalias() += final_hidden.row(0).transpose() * dlogits;
  grads.classifier_b.row(0) += dlogits;

  Matrix dx = Matrix::Zero(final_hidden.rows(), final_hidden.cols());
  dx.row(0) = dlogits * params.classifier_w.transpose();
  for (std::size_t l = cfg.n_layers; l-- > 0;)
    dx = layer_backward(dx, params.layers[l], cache.layers[l], cfg.n_heads, grads.layers[l]);

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    grads.token_embedding.row(tokens[i]) += dx.row(row);
    grads.position_embedding.row(row) += dx.row(row);
  }
  return loss;
}

void add_into(EncoderParams& total, const EncoderParams& part) {
  std::vector<const Matrix*> src;
  part.for_each([&](const std::string&, ParamGroup, const Matrix& m) { src.push_back(&m); });
  std::size_t i = 0;
  total.for_each([&](const std::string&, ParamGroup, Matrix& m) { m += *src[i++]; });
}

}  // namespace

// ---------------------------------------------------------------------------

void EncoderConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kCls))
    throw std::invalid_argument("vocab_size must include the reserved tokens");
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0 || max_len == 0)
    throw std::invalid_argument("encoder dimensions must be positive");
  if (d_model % n_heads != 0)
    throw std::invalid_argument("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                                std::to_string(n_heads) + ")");
}

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::TokenEmbedding: return "token_embedding";
    case ParamGroup::PositionEmbedding: return "position_embedding";
    case ParamGroup::Attention: return "attention";
    case ParamGroup::FeedForward: return "ffn";
    case ParamGroup::LayerNorm: return "layer_norm";
    case ParamGroup::Classifier: break;
  }
  return "classifier";
}

ParamGroup parse_param_group(std::string_view name) {
  for (auto g : kAllGroups)
    if (to_string(g) == name) return g;
  throw std::invalid_argument("unknown parameter group '" + std::string(name) + "'");
}

std::span<const ParamGroup> all_param_groups() { return kAllGroups; }

EncoderParams EncoderParams::zeros(const EncoderConfig& config) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto ff = static_cast<Eigen::Index>(config.d_ff);
  EncoderParams p;
  p.config = config;
  p.token_embedding = Matrix::Zero(static_cast<Eigen::Index>(config.vocab_size), d);
  p.position_embedding = Matrix::Zero(static_cast<Eigen::Index>(config.max_len), d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.w_q = l.w_k = l.w_v = l.w_o = Matrix::Zero(d, d);
    l.ln1_gain = l.ln1_bias = l.ln2_gain = l.ln2_bias = Matrix::Zero(1, d);
    l.ffn_w1 = Matrix::Zero(d, ff);
    l.ffn_b1 = Matrix::Zero(1, ff);
    l.ffn_w2 = Matrix::Zero(ff, d);
    l.ffn_b2 = Matrix::Zero(1, d);
  }
  p.classifier_w = Matrix::Zero(d, 2);
  p.classifier_b = Matrix::Zero(1, 2);
  return p;
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config, std::uint64_t seed) {
  EncoderParams p = zeros(config);
  Rng rng(seed);
  p.for_each([&](const std::string& name, ParamGroup group, Matrix& m) {
    if (group == ParamGroup::LayerNorm) {
      if (name.ends_with("_gain")) m.setOnes();
      return;
    }
    if (m.rows() == 1) return;  // biases
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(kInitStddev);
  });
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, ParamGroup, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

void EncoderParams::set_zero() {
  for_each([](const std::string&, ParamGroup, Matrix& m) { m.setZero(); });
}

// ---------------------------------------------------------------------------

AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v, std::span<const bool> key_mask) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || q.cols() == 0)
    throw std::invalid_argument("attention: shape mismatch");
  if (!key_mask.empty() && key_mask.size() != static_cast<std::size_t>(k.rows()))
    throw std::invalid_argument("attention: mask length differs from key count");
  if (!all_finite(q) || !all_finite(k) || !all_finite(v))
    throw NumericalError("attention: non-finite input");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Matrix scores = (q * k.transpose()) * scale;
  AttentionResult r;
  r.weights = masked_softmax(scores, key_mask);
  r.output.noalias() = r.weights * v;
  return r;
}

Matrix multi_head(const Matrix& x, const LayerParams& layer, std::size_t n_heads, std::span<const bool> key_mask,
                  std::vector<Matrix>* head_weights) {
  const auto d = x.cols();
  if (n_heads == 0 || d % static_cast<Eigen::Index>(n_heads) != 0)
    throw std::invalid_argument("multi_head: d_model must be divisible by n_heads");
  for (const Matrix* w : {&layer.w_q, &layer.w_k, &layer.w_v, &layer.w_o})
    if (w->rows() != d || w->cols() != d) throw std::invalid_argument("multi_head: projection shape mismatch");
  const auto dk = d / static_cast<Eigen::Index>(n_heads);
  const Matrix q = x * layer.w_q;
  const Matrix k = x * layer.w_k;
  const Matrix v = x * layer.w_v;
  Matrix context(x.rows(), d);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dk;
    auto res = attention(q.middleCols(off, dk), k.middleCols(off, dk), v.middleCols(off, dk), key_mask);
    context.middleCols(off, dk) = res.output;
    if (head_weights) head_weights->push_back(std::move(res.weights));
  }
  return context * layer.w_o;
}

ForwardResult forward(std::span<const TokenId> tokens, const EncoderParams& params) {
  ExampleCache cache;
  ForwardResult r;
  r.logits = forward_cached(tokens, params, cache);
  r.activations.embeddings = cache.layers.empty() ? Matrix() : cache.layers.front().input;
  for (auto& layer : cache.layers) {
    r.activations.layer_outputs.push_back(std::move(layer.out));
    r.activations.head_weights.push_back(std::move(layer.probs));
  }
  if (!std::isfinite(r.logits[0]) || !std::isfinite(r.logits[1])) throw NumericalError("non-finite logits");
  return r;
}

std::array<double, 2> softmax(const Logits& logits) {
  const double max = std::max(logits[0], logits[1]);
  const double a = std::exp(logits[0] - max);
  const double b = std::exp(logits[1] - max);
  return {a / (a + b), b / (a + b)};
}

SentimentLabel predict_label(const Logits& logits) {
  return logits[1] > logits[0] ? SentimentLabel::Positive : SentimentLabel::Negative;
}

LossAndGrad loss_and_grad(std::span<const Example> batch, const EncoderParams& params, std::size_t workers) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const double weight = 1.0 / static_cast<double>(batch.size());
  workers = std::clamp<std::size_t>(workers, 1, batch.size());

  LossAndGrad out;
  out.grads = EncoderParams::zeros(params.config);

  // Every example's gradient is formed in a zeroed scratch and then added to
  // the total in batch order, whatever the worker count.
  std::vector<EncoderParams> scratch(workers, out.grads);
  std::vector<ExampleCache> caches(workers);
  std::vector<double> losses(workers, 0.0);
  std::vector<std::exception_ptr> errors(workers);

  for (std::size_t start = 0; start < batch.size(); start += workers) {
    const std::size_t n = std::min(workers, batch.size() - start);
    auto run = [&](std::size_t w) {
      try {
        scratch[w].set_zero();
        const auto& ex = batch[start + w];
        losses[w] = backward_example(ex.tokens, ex.label, params, weight, scratch[w], caches[w], start + w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (n == 1) {
      run(0);
    } else {
      std::vector<std::jthread> threads;
      for (std::size_t w = 1; w < n; ++w) threads.emplace_back(run, w);
      run(0);
    }
    for (std::size_t w = 0; w < n; ++w) {
      if (errors[w]) std::rethrow_exception(errors[w]);
      out.loss += losses[w];
      add_into(out.grads, scratch[w]);
    }
  }
  out.loss *= weight;
  out.grads.for_each([](const std::string& name, ParamGroup, const Matrix& m) {
    if (!m.allFinite()) throw NumericalError("non-finite gradient in " + name);
  });
  return out;
}

double batch_loss(std::span<const Example> batch, const EncoderParams& params) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  ExampleCache cache;
  for (const auto& ex : batch) {
    const Logits z = forward_cached(ex.tokens, params, cache);
    const double max = std::max(z[0], z[1]);
    const double lse = max + std::log(std::exp(z[0] - max) + std::exp(z[1] - max));
    total += lse - z[static_cast<std::size_t>(ex.label)];
  }
  return total / static_cast<double>(batch.size());
}

std::vector<SentimentLabel> predict(std::span<const std::vector<TokenId>> inputs, const EncoderParams& params) {
  std::vector<SentimentLabel> out;
  out.reserve(inputs.size());
  ExampleCache cache;
  for (const auto& tokens : inputs) out.push_back(predict_label(forward_cached(tokens, params, cache)));
  return out;
}

}  // namespace sentiment
