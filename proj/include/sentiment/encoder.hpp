#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sentiment/record.hpp"
#include "sentiment/vocabulary.hpp"

namespace sentiment {

/// Row-major so that tensors serialize in row-major order without copying.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EncoderConfig {
  static constexpr std::size_t n_classes = 2;

  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 128;
  std::size_t max_len = 64;

  std::size_t d_k() const { return d_model / n_heads; }
  /// Throws std::invalid_argument on zero sizes or d_model % n_heads != 0.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Coarse parameter groups used by freeze masks.
enum class ParamGroup { TokenEmbedding, PositionEmbedding, Attention, FeedForward, LayerNorm, Classifier };

std::string_view to_string(ParamGroup g);
ParamGroup parse_param_group(std::string_view name);
std::span<const ParamGroup> all_param_groups();

struct LayerParams {
  Matrix w_q, w_k, w_v, w_o;  // d_model x d_model
  Matrix ln1_gain, ln1_bias;  // 1 x d_model
  Matrix ffn_w1, ffn_b1;      // d_model x d_ff, 1 x d_ff
  Matrix ffn_w2, ffn_b2;      // d_ff x d_model, 1 x d_model
  Matrix ln2_gain, ln2_bias;  // 1 x d_model
};

struct EncoderParams {
  EncoderConfig config;
  Matrix token_embedding;     // vocab_size x d_model
  Matrix position_embedding;  // max_len x d_model
  std::vector<LayerParams> layers;
  Matrix classifier_w;  // d_model x 2
  Matrix classifier_b;  // 1 x 2

  /// All tensors zero, including layer-norm gains. Used for gradients.
  static EncoderParams zeros(const EncoderConfig& config);

  /// Weights ~ truncated normal(0, 0.02) cut at two standard deviations,
  /// biases zero, layer-norm gains one.
  static EncoderParams initialize(const EncoderConfig& config, std::uint64_t seed);

  /// Visits every tensor in the fixed serialization order: token embedding,
  /// position embedding, then per layer w_q, w_k, w_v, w_o, ln1 gain/bias,
  /// ffn w1/b1/w2/b2, ln2 gain/bias, and finally the classifier weight/bias.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  void set_zero();

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f("token_embedding", ParamGroup::TokenEmbedding, self.token_embedding);
    f("position_embedding", ParamGroup::PositionEmbedding, self.position_embedding);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& layer = self.layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      f(p + "w_q", ParamGroup::Attention, layer.w_q);
      f(p + "w_k", ParamGroup::Attention, layer.w_k);
      f(p + "w_v", ParamGroup::Attention, layer.w_v);
      f(p + "w_o", ParamGroup::Attention, layer.w_o);
      f(p + "ln1_gain", ParamGroup::LayerNorm, layer.ln1_gain);
      f(p + "ln1_bias", ParamGroup::LayerNorm, layer.ln1_bias);
      f(p + "ffn_w1", ParamGroup::FeedForward, layer.ffn_w1);
      f(p + "ffn_b1", ParamGroup::FeedForward, layer.ffn_b1);
      f(p + "ffn_w2", ParamGroup::FeedForward, layer.ffn_w2);
      f(p + "ffn_b2", ParamGroup::FeedForward, layer.ffn_b2);
      f(p + "ln2_gain", ParamGroup::LayerNorm, layer.ln2_gain);
      f(p + "ln2_bias", ParamGroup::LayerNorm, layer.ln2_bias);
    }
    f("classifier_w", ParamGroup::Classifier, self.classifier_w);
    f("classifier_b", ParamGroup::Classifier, self.classifier_b);
  }
};

/// Raised when a computation meets or produces NaN/Inf.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AttentionResult {
  Matrix output;   // L x d_v
  Matrix weights;  // L x L, rows sum to one
};

/// softmax(Q K^T / sqrt(d_k)) V, row-wise. Keys whose `key_mask` entry is true
/// receive weight exactly zero and the remaining weights are renormalized.
/// An empty mask means no masking.
AttentionResult attention(const Matrix& q, const Matrix& k, const Matrix& v,
                          std::span<const bool> key_mask = {});

/// Multi-head self-attention of one layer: project X by w_q/w_k/w_v, attend
/// independently on each d_k-wide column block, concatenate and project by
/// w_o. Per-head weight matrices are appended to `head_weights` when given.
Matrix multi_head(const Matrix& x, const LayerParams& layer, std::size_t n_heads,
                  std::span<const bool> key_mask = {}, std::vector<Matrix>* head_weights = nullptr);

struct Activations {
  Matrix embeddings;                               // L x d_model
  std::vector<Matrix> layer_outputs;               // per layer, L x d_model
  std::vector<std::vector<Matrix>> head_weights;   // [layer][head], L x L
};

using Logits = std::array<double, EncoderConfig::n_classes>;

struct ForwardResult {
  Logits logits{};
  Activations activations;
};

/// Full encoder pass. `tokens` must have length config.max_len; PAD keys are
/// masked out of every attention layer and the CLS row feeds the head.
ForwardResult forward(std::span<const TokenId> tokens, const EncoderParams& params);

std::array<double, 2> softmax(const Logits& logits);
/// argmax; an exact tie resolves to Negative.
SentimentLabel predict_label(const Logits& logits);

struct Example {
  std::vector<TokenId> tokens;
  SentimentLabel label = SentimentLabel::Negative;
};

struct LossAndGrad {
  double loss = 0.0;
  EncoderParams grads;
};

/// Mean softmax cross-entropy over the batch and its exact gradient with
/// respect to every parameter. Per-example gradients are reduced in batch
/// order, so the result does not depend on `workers`.
LossAndGrad loss_and_grad(std::span<const Example> batch, const EncoderParams& params,
                          std::size_t workers = 1);

/// Mean cross-entropy only (forward passes, no gradient).
double batch_loss(std::span<const Example> batch, const EncoderParams& params);

std::vector<SentimentLabel> predict(std::span<const std::vector<TokenId>> inputs, const EncoderParams& params);

}  // namespace sentiment
