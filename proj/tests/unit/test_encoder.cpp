#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sentiment/encoder.hpp"
#include "sentiment/random.hpp"

using namespace sentiment;

namespace {

EncoderConfig tiny() {
  EncoderConfig c;
  c.vocab_size = 12;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 16;
  c.max_len = 6;
  return c;
}

EncoderParams noisy(const EncoderConfig& cfg, std::uint64_t seed) {
  EncoderParams p = EncoderParams::zeros(cfg);
  Rng rng(seed);
  p.for_each([&](const std::string& name, ParamGroup, Matrix& m) {
    const double base = name.ends_with("_gain") ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = base + 0.3 * rng.normal();
  });
  return p;
}

}  // namespace

TEST_CASE("vocabulary orders by frequency then lexicographically and reserves specials") {
  const std::vector<std::string> texts = {"b a c", "a b", "a", "[CLS] z"};
  const auto v = Vocabulary::build(texts);
  CHECK(v.token(0) == "[PAD]");
  CHECK(v.token(1) == "[UNK]");
  CHECK(v.token(2) == "[CLS]");
  CHECK(v.token(3) == "a");
  CHECK(v.token(4) == "b");
  CHECK(v.token(5) == "c");
  CHECK(v.token(6) == "z");
  CHECK(v.size() == 7);
  CHECK(v.id("never seen") == Vocabulary::kUnk);
  CHECK(Vocabulary::build(texts, 2).size() == 5);
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK_THROWS(Vocabulary::build(std::vector<std::string>{}));
  CHECK_THROWS(Vocabulary::from_tokens({"a", "b", "c"}));
}

TEST_CASE("encode_text prepends CLS, pads, truncates and neutralizes literal specials") {
  const auto v = Vocabulary::build(std::vector<std::string>{"good course"});
  const auto ids = encode_text("good  course", v, 5);
  CHECK(ids == std::vector<TokenId>{Vocabulary::kCls, v.id("good"), v.id("course"), 0, 0});
  CHECK(encode_text("good course good course", v, 3).size() == 3);
  CHECK(encode_text("[PAD] [CLS]", v, 3) == std::vector<TokenId>{Vocabulary::kCls, Vocabulary::kUnk, Vocabulary::kUnk});
  CHECK_THROWS(encode_text("x", v, 0));
  CHECK(tokenize(" a\tb\nc ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("vocabulary examples: frequency order and min_count") {
  const std::vector<std::string> corpus = {"good good bad"};
  const auto v = Vocabulary::build(corpus);
  CHECK(v.size() == 5);
  CHECK(v.id("good") < v.id("bad"));
  const auto strict = Vocabulary::build(corpus, 2);
  CHECK(strict.id("bad") == Vocabulary::kUnk);
  CHECK(Vocabulary::build(corpus) == v);
  CHECK(encode_text("good", v, 4) == std::vector<TokenId>{Vocabulary::kCls, v.id("good"), 0, 0});
  CHECK(encode_text("good unseen", v, 4)[2] == Vocabulary::kUnk);
}

TEST_CASE("config validation") {
  auto c = tiny();
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("divisible"), std::invalid_argument);
  c = tiny();
  c.vocab_size = 2;
  CHECK_THROWS(c.validate());
}

TEST_CASE("initialization is seeded, truncated and leaves biases at zero") {
  const auto a = EncoderParams::initialize(tiny(), 1);
  const auto b = EncoderParams::initialize(tiny(), 1);
  const auto c = EncoderParams::initialize(tiny(), 2);
  CHECK(a.token_embedding == b.token_embedding);
  CHECK(a.token_embedding != c.token_embedding);
  CHECK(a.token_embedding.cwiseAbs().maxCoeff() <= 0.04);
  CHECK(a.layers[0].ln1_gain.isOnes());
  CHECK(a.layers[0].ffn_b1.isZero());
  CHECK(a.classifier_b.isZero());
  // 12*8 + 6*8 + 2*(4*64 + 2*8 + 8*16 + 16 + 16*8 + 8 + 2*8) + 8*2 + 2
  CHECK(a.parameter_count() == 96 + 48 + 2 * 568 + 18);
}

TEST_CASE("attention matches the brute-force oracle, with and without masking") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index l = 4, dk = 3;
    Matrix q(l, dk), k(l, dk), v(l, 2);
    for (Matrix* m : {&q, &k, &v})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    const bool mask_arr[] = {false, true, false, true};
    const auto r = attention(q, k, v, mask_arr);
    const auto o = testing::naive_attention(testing::to_grid(q), testing::to_grid(k), testing::to_grid(v),
                                            {false, true, false, true});
    for (Eigen::Index i = 0; i < l; ++i) {
      CHECK(r.weights(i, 1) == 0.0);
      CHECK(r.weights(i, 3) == 0.0);
      CHECK(r.weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(r.output(i, j) - o.output[i][j]) < 1e-12);
    }
  }
}

TEST_CASE("scaling Q and K by c scales the scores by c squared") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index dk = 1 + static_cast<Eigen::Index>(rng.uniform_below(6));
    Matrix q(3, dk), k(4, dk), v(4, 2);
    for (Matrix* m : {&q, &k, &v})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    const double c = 0.25 + 2.0 * rng.uniform01();
    const auto scaled = attention(c * q, c * k, v);
    const Matrix scores = (q * k.transpose()) * (c * c / std::sqrt(static_cast<double>(dk)));
    for (Eigen::Index i = 0; i < 3; ++i) {
      double denom = 0.0;
      for (Eigen::Index j = 0; j < 4; ++j) denom += std::exp(scores(i, j));
      for (Eigen::Index j = 0; j < 4; ++j) {
        CHECK(std::abs(scaled.weights(i, j) - std::exp(scores(i, j)) / denom) < 1e-12);
        CHECK(scaled.weights(i, j) >= 0.0);
        CHECK(scaled.weights(i, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("attention worked examples") {
  Matrix one(1, 3);
  one << 0.3, -1.0, 2.0;
  const Matrix v1 = Matrix::Constant(1, 2, 7.0);
  const auto single = attention(one, one, v1);
  CHECK(single.weights(0, 0) == 1.0);
  CHECK(single.output == v1);

  const Matrix eye = Matrix::Identity(2, 2);
  const auto r = attention(eye, eye, eye);
  CHECK(r.weights(0, 0) == doctest::Approx(0.6698).epsilon(1e-4));
  CHECK(r.weights(0, 1) == doctest::Approx(0.3302).epsilon(1e-4));
  const double e = std::exp(1.0 / std::sqrt(2.0));
  CHECK(std::abs(r.output(0, 0) - e / (e + 1.0)) < 1e-15);
  CHECK(std::abs(r.output(0, 1) - 1.0 / (e + 1.0)) < 1e-15);

  Matrix q(3, 2), k(3, 2), v(3, 2);
  q << 1, 2, -3, 0.5, 0, 4;
  k << 0.7, -0.2, 0.7, -0.2, 0.7, -0.2;
  v << 1, 2, 3, 4, 5, 9;
  const auto uniform = attention(q, k, v);
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(uniform.weights(i, j) == doctest::Approx(1.0 / 3.0));
    CHECK(uniform.output(i, 0) == doctest::Approx(3.0));
    CHECK(uniform.output(i, 1) == doctest::Approx(5.0));
  }
}

TEST_CASE("attention rejects bad input") {
  Matrix q = Matrix::Ones(2, 3), k = Matrix::Ones(2, 3), v = Matrix::Ones(2, 3);
  const bool all_masked[] = {true, true};
  CHECK_THROWS_AS(attention(q, k, v, all_masked), std::invalid_argument);
  const bool short_mask[] = {false};
  CHECK_THROWS_AS(attention(q, k, v, short_mask), std::invalid_argument);
  CHECK_THROWS_AS(attention(q, Matrix::Ones(2, 4), v), std::invalid_argument);
  q(0, 0) = std::nan("");
  CHECK_THROWS_AS(attention(q, k, v), NumericalError);
}

TEST_CASE("large scores stay finite") {
  Matrix q = Matrix::Constant(2, 2, 300.0), k = Matrix::Constant(2, 2, 300.0), v = Matrix::Ones(2, 2);
  const auto r = attention(q, k, v);
  CHECK(r.output.allFinite());
  CHECK(r.weights(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("multi-head equals per-head attention on column blocks") {
  const auto p = noisy(tiny(), 3);
  Rng rng(4);
  Matrix x(5, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  std::vector<Matrix> weights;
  const Matrix out = multi_head(x, p.layers[0], 2, {}, &weights);
  REQUIRE(weights.size() == 2);
  const Matrix q = x * p.layers[0].w_q, k = x * p.layers[0].w_k, v = x * p.layers[0].w_v;
  Matrix context(5, 8);
  for (int h = 0; h < 2; ++h)
    context.middleCols(4 * h, 4) = attention(q.middleCols(4 * h, 4), k.middleCols(4 * h, 4), v.middleCols(4 * h, 4)).output;
  CHECK((out - context * p.layers[0].w_o).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multi-head degenerate cases") {
  Rng rng(23);
  Matrix x(4, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const auto p = noisy(tiny(), 6);
  const auto& layer = p.layers[0];

  const Matrix single = multi_head(x, layer, 1);
  const auto full = attention(x * layer.w_q, x * layer.w_k, x * layer.w_v);
  CHECK((single - full.output * layer.w_o).cwiseAbs().maxCoeff() < 1e-12);

  // Two heads whose projections are identical 4-wide blocks; W_o = I.
  Matrix xs(4, 8);
  xs.leftCols(4) = x.leftCols(4);
  xs.rightCols(4) = x.leftCols(4);
  LayerParams blocks = layer;
  const Matrix w = layer.w_q.topLeftCorner(4, 4);
  blocks.w_q = blocks.w_k = blocks.w_v = Matrix::Zero(8, 8);
  blocks.w_q.topLeftCorner(4, 4) = w;
  blocks.w_q.topRightCorner(4, 4) = w;
  blocks.w_k = blocks.w_q;
  blocks.w_v = blocks.w_q;
  blocks.w_o = Matrix::Identity(8, 8);
  const Matrix two = multi_head(xs, blocks, 2);
  const auto one_head = attention(xs.leftCols(4) * w, xs.leftCols(4) * w, xs.leftCols(4) * w);
  CHECK((two.leftCols(4) - one_head.output).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((two.rightCols(4) - one_head.output).cwiseAbs().maxCoeff() < 1e-12);

  CHECK(multi_head(Matrix::Zero(4, 8), layer, 2).isZero());
  CHECK_THROWS_AS(multi_head(x, layer, 3), std::invalid_argument);
  CHECK_THROWS_AS(multi_head(Matrix::Zero(4, 6), layer, 2), std::invalid_argument);
}

TEST_CASE("loss identities") {
  auto p = EncoderParams::initialize(tiny(), 2);
  p.classifier_w.setZero();
  p.classifier_b.setZero();
  const std::vector<Example> batch = {{{2, 3, 4, 0, 0, 0}, SentimentLabel::Positive},
                                      {{2, 5, 0, 0, 0, 0}, SentimentLabel::Negative}};
  CHECK(loss_and_grad(batch, p).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const auto q = noisy(tiny(), 9);
  std::vector<Example> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto a = loss_and_grad(batch, q), b = loss_and_grad(doubled, q);
  CHECK(std::abs(a.loss - b.loss) < 1e-14);
  std::vector<Matrix> ga, gb;
  a.grads.for_each([&](const std::string&, ParamGroup, const Matrix& m) { ga.push_back(m); });
  b.grads.for_each([&](const std::string&, ParamGroup, const Matrix& m) { gb.push_back(m); });
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK((ga[i] - gb[i]).cwiseAbs().maxCoeff() < 1e-14);

  const auto fwd = forward(batch[0].tokens, q);
  const auto s = softmax(fwd.logits);
  CHECK(s[0] + s[1] == doctest::Approx(1.0));
  CHECK(std::isfinite(fwd.logits[0]));
  CHECK(forward(batch[0].tokens, q).logits == fwd.logits);
  CHECK_THROWS_AS(loss_and_grad(std::vector<Example>{}, q), std::invalid_argument);
}

TEST_CASE("forward validates token sequences") {
  const auto p = EncoderParams::initialize(tiny(), 1);
  CHECK_THROWS_AS(forward(std::vector<TokenId>{2, 3}, p), std::invalid_argument);
  CHECK_THROWS_AS(forward(std::vector<TokenId>{2, 3, 4, 5, 99, 0}, p), std::out_of_range);
  const auto r = forward(std::vector<TokenId>{2, 3, 4, 0, 0, 0}, p);
  CHECK(r.activations.layer_outputs.size() == 2);
  CHECK(r.activations.head_weights[1].size() == 2);
  CHECK(r.activations.embeddings.rows() == 6);
}

TEST_CASE("padding positions do not influence the logits") {
  auto p = noisy(tiny(), 5);
  const std::vector<TokenId> tokens = {2, 7, 4, 0, 0, 0};
  const auto before = forward(tokens, p).logits;
  p.token_embedding.row(Vocabulary::kPad).setConstant(9.0);
  p.position_embedding.row(4).setConstant(-3.0);
  const auto after = forward(tokens, p).logits;
  CHECK(std::abs(before[0] - after[0]) < 1e-12);
  CHECK(std::abs(before[1] - after[1]) < 1e-12);
  for (const auto& layer : forward(tokens, p).activations.head_weights)
    for (const auto& w : layer) CHECK(w.rightCols(3).isZero());
}

TEST_CASE("prediction ties go to Negative") {
  CHECK(predict_label({0.5, 0.5}) == SentimentLabel::Negative);
  CHECK(predict_label({0.5, 0.5000001}) == SentimentLabel::Positive);
  const auto s = softmax({1000.0, 0.0});
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(s[1]));
}

TEST_CASE("gradients match finite differences on the tiny model") {
  const auto cfg = tiny();
  const auto p = noisy(cfg, 17);
  Rng rng(18);
  std::vector<Example> batch;
  for (int b = 0; b < 3; ++b) {
    Example ex;
    ex.tokens = {2, static_cast<TokenId>(3 + rng.uniform_below(9)), static_cast<TokenId>(3 + rng.uniform_below(9)),
                 b == 0 ? 0 : 5, 0, 0};
    ex.label = b % 2 ? SentimentLabel::Positive : SentimentLabel::Negative;
    batch.push_back(ex);
  }
  const auto r = testing::check_gradients(batch, p, 1e-4, 1e-4, 1e-12);
  INFO("worst " << r.worst_relative << " at " << r.worst_tensor);
  CHECK(r.failures == 0);
  CHECK(std::abs(loss_and_grad(batch, p).loss - batch_loss(batch, p)) < 1e-12);
}

TEST_CASE("worker count does not change loss or gradients") {
  const auto cfg = tiny();
  const auto p = noisy(cfg, 21);
  std::vector<Example> batch;
  for (int b = 0; b < 7; ++b)
    batch.push_back({{2, static_cast<TokenId>(3 + b % 9), 4, 5, 0, 0}, b % 3 ? SentimentLabel::Positive : SentimentLabel::Negative});
  const auto one = loss_and_grad(batch, p, 1);
  const auto three = loss_and_grad(batch, p, 3);
  CHECK(one.loss == three.loss);
  std::vector<Matrix> a, b;
  one.grads.for_each([&](const std::string&, ParamGroup, const Matrix& m) { a.push_back(m); });
  three.grads.for_each([&](const std::string&, ParamGroup, const Matrix& m) { b.push_back(m); });
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("non-finite parameters surface as NumericalError") {
  auto p = EncoderParams::initialize(tiny(), 1);
  p.classifier_w(0, 0) = std::numeric_limits<double>::infinity();
  const std::vector<Example> batch = {{{2, 3, 4, 0, 0, 0}, SentimentLabel::Positive}};
  CHECK_THROWS_AS(loss_and_grad(batch, p), NumericalError);
  p = EncoderParams::initialize(tiny(), 1);
  p.token_embedding(3, 0) = std::nan("");
  CHECK_THROWS_AS(forward(batch[0].tokens, p), NumericalError);
}
