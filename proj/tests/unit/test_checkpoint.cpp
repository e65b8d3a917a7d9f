#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "sentiment/checkpoint.hpp"
#include "temp_dir.hpp"

using namespace sentiment;
using sentiment::testing::TempDir;

namespace {

EncoderConfig cfg(std::size_t vocab) {
  EncoderConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 2;
  c.d_ff = 16;
  c.max_len = 6;
  return c;
}

}  // namespace

TEST_CASE("checkpoint round-trips parameters and vocabulary bit for bit") {
  TempDir dir;
  const auto vocab = Vocabulary::build(std::vector<std::string>{"a b c d"});
  const auto params = EncoderParams::initialize(cfg(vocab.size()), 5);
  const auto path = dir / "model.bin";
  save_checkpoint(path, params, vocab);

  const auto size = std::filesystem::file_size(path);
  CHECK(size == 8 + 4 + 7 * 4 + params.parameter_count() * 8);

  const auto loaded = load_checkpoint(path);
  CHECK(loaded.vocab == vocab);
  CHECK(loaded.params.config == params.config);
  std::vector<Matrix> a, b;
  params.for_each([&](const std::string&, ParamGroup, const Matrix& m) { a.push_back(m); });
  loaded.params.for_each([&](const std::string&, ParamGroup, const Matrix& m) { b.push_back(m); });
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  const auto sidecar = nlohmann::json::parse(sentiment::testing::read_file(sidecar_path(path)));
  CHECK(sidecar["config"]["d_model"] == 8);
  CHECK(sidecar["tensors"][0]["name"] == "token_embedding");
  CHECK(sidecar["vocab"].size() == vocab.size());
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir;
  const auto vocab = Vocabulary::build(std::vector<std::string>{"x y"});
  const auto params = EncoderParams::initialize(cfg(vocab.size()), 1);
  const auto path = dir / "m.bin";
  save_checkpoint(path, params, vocab);
  const std::string good = sentiment::testing::read_file(path);

  sentiment::testing::write_file(path, "NOTMAGIC" + good.substr(8));
  CHECK_THROWS_WITH(load_checkpoint(path), doctest::Contains("not an encoder checkpoint"));

  sentiment::testing::write_file(path, good.substr(0, good.size() - 3));
  CHECK_THROWS_WITH(load_checkpoint(path), doctest::Contains("truncated"));

  sentiment::testing::write_file(path, good + "x");
  CHECK_THROWS_WITH(load_checkpoint(path), doctest::Contains("trailing"));

  sentiment::testing::write_file(path, good);
  std::filesystem::remove(sidecar_path(path));
  CHECK_THROWS_WITH(load_checkpoint(path), doctest::Contains("sidecar"));

  CHECK_THROWS(load_checkpoint(dir / "absent.bin"));
  CHECK_THROWS_AS(save_checkpoint(path, params, Vocabulary::build(std::vector<std::string>{"only"})),
                  std::invalid_argument);
}
