#include <doctest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sentiment/translate.hpp"
#include "temp_dir.hpp"

using namespace sentiment;
using sentiment::testing::TempDir;

namespace {

SurveyRecord rec(std::string id, std::string text, std::string lang = "") {
  SurveyRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.language = std::move(lang);
  return r;
}

/// Uppercases its inputs, records every call and fails on request.
class RecordingBackend : public TranslationBackend {
 public:
  std::vector<std::string> translate_batch(std::span<const std::string> texts, const std::string& from,
                                           const std::string& to) override {
    std::lock_guard lock(mutex);
    ++calls;
    languages.push_back(from + ">" + to);
    batch_sizes.push_back(texts.size());
    std::vector<std::string> out;
    for (const auto& t : texts) {
      if (t == fail_on) throw std::runtime_error("backend refused '" + t + "'");
      std::string u = t;
      for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      out.push_back(u);
    }
    return out;
  }
  std::atomic<int> calls{0};
  std::vector<std::string> languages;
  std::vector<std::size_t> batch_sizes;
  std::string fail_on;
  std::mutex mutex;
};

}  // namespace

TEST_CASE("identity backend marks records translated without changing text") {
  IdentityBackend backend;
  TranslationCache cache;
  const auto out = translate_corpus(std::vector{rec("a", "سلام")}, backend, cache);
  REQUIRE(out.size() == 1);
  CHECK(out[0].text == "سلام");
  CHECK(out[0].language == "en");
  CHECK(out[0].has_flag(RecordFlag::Translated));
}

TEST_CASE("dictionary backend prefers whole-text entries then word lookups") {
  DictionaryBackend backend({{"کلاس خوب بود", "the class was good"}, {"خوب", "good"}, {"بد", "bad"}});
  const std::vector<std::string> in = {"کلاس خوب بود", "خوب بد نه"};
  const auto out = backend.translate_batch(in, "fa", "en");
  CHECK(out[0] == "the class was good");
  CHECK(out[1] == "good bad نه");
}

TEST_CASE("dictionary file must be a JSON object of strings") {
  TempDir dir;
  sentiment::testing::write_file(dir / "ok.json", R"({"a":"b"})");
  sentiment::testing::write_file(dir / "bad.json", R"(["a"])");
  const std::vector<std::string> in = {"a"};
  CHECK(DictionaryBackend::from_file(dir / "ok.json").translate_batch(in, "fa", "en")[0] == "b");
  CHECK_THROWS(DictionaryBackend::from_file(dir / "bad.json"));
  CHECK_THROWS(DictionaryBackend::from_file(dir / "missing.json"));
}

TEST_CASE("duplicate texts are translated once and batches respect batch_size") {
  RecordingBackend backend;
  TranslationCache cache;
  TranslateOptions opt;
  opt.batch_size = 2;
  std::vector<SurveyRecord> in = {rec("1", "a"), rec("2", "b"), rec("3", "a"), rec("4", "c"), rec("5", "d")};
  const auto out = translate_corpus(in, backend, cache, opt);
  CHECK(backend.calls == 2);
  CHECK(backend.batch_sizes == std::vector<std::size_t>{2, 2});
  CHECK(out[2].text == "A");
  CHECK(out[4].text == "D");
  CHECK(cache.size() == 4);
}

TEST_CASE("per-record language overrides the default source language") {
  RecordingBackend backend;
  TranslationCache cache;
  translate_corpus(std::vector{rec("1", "x", "ar"), rec("2", "y")}, backend, cache);
  CHECK(backend.languages == std::vector<std::string>{"ar>en", "fa>en"});
}

TEST_CASE("already translated records pass through untouched") {
  RecordingBackend backend;
  TranslationCache cache;
  SurveyRecord done = rec("1", "already english", "en");
  done.flags.insert(RecordFlag::Translated);
  const auto out = translate_corpus(std::vector{done}, backend, cache);
  CHECK(backend.calls == 0);
  CHECK(out[0] == done);
}

TEST_CASE("cache hits skip the backend and survive reopening") {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    RecordingBackend backend;
    TranslationCache cache(path);
    translate_corpus(std::vector{rec("1", "hello"), rec("2", "world")}, backend, cache);
    CHECK(backend.calls == 1);
  }
  RecordingBackend backend;
  TranslationCache reopened(path);
  CHECK(reopened.size() == 2);
  CHECK(reopened.get("hello", "fa", "en") == "HELLO");
  const auto out = translate_corpus(std::vector{rec("1", "hello"), rec("2", "world")}, backend, reopened);
  CHECK(backend.calls == 0);
  CHECK(out[1].text == "WORLD");
}

TEST_CASE("a failed batch names its records and keeps earlier results cached") {
  RecordingBackend backend;
  backend.fail_on = "bad";
  TranslationCache cache;
  TranslateOptions opt;
  opt.batch_size = 1;
  try {
    translate_corpus(std::vector{rec("r1", "fine"), rec("r2", "bad"), rec("r3", "bad"), rec("r4", "later")}, backend,
                     cache, opt);
    FAIL("expected TranslationError");
  } catch (const TranslationError& e) {
    CHECK(e.failed_ids() == std::vector<std::string>{"r2", "r3"});
  }
  CHECK(cache.get("fine", "fa", "en") == "FINE");
}

TEST_CASE("parallel batches give the same result as sequential ones") {
  std::vector<SurveyRecord> in;
  for (int i = 0; i < 50; ++i) in.push_back(rec("r" + std::to_string(i), "text" + std::to_string(i % 37)));
  RecordingBackend seq_backend, par_backend;
  TranslationCache seq_cache, par_cache;
  TranslateOptions seq, par;
  seq.batch_size = par.batch_size = 4;
  par.parallelism = 4;
  CHECK(translate_corpus(in, seq_backend, seq_cache, seq) == translate_corpus(in, par_backend, par_cache, par));
}

TEST_CASE("empty text and duplicate ids are rejected") {
  IdentityBackend backend;
  TranslationCache cache;
  CHECK_THROWS_AS(translate_corpus(std::vector{rec("a", "")}, backend, cache), std::invalid_argument);
  CHECK_THROWS_AS(translate_corpus(std::vector{rec("a", "x"), rec("a", "y")}, backend, cache), std::invalid_argument);
}

TEST_CASE("HTTP backend speaks the v2 translate REST shape") {
  httplib::Server mock;
  std::string seen_key, seen_source, seen_target, seen_format;
  mock.Post("/language/translate/v2", [&](const httplib::Request& req, httplib::Response& res) {
    seen_key = req.get_param_value("key");
    const auto body = nlohmann::json::parse(req.body);
    seen_source = body["source"];
    seen_target = body["target"];
    seen_format = body["format"];
    nlohmann::json translations = nlohmann::json::array();
    for (const auto& q : body["q"]) translations.push_back({{"translatedText", "EN:" + q.get<std::string>()}});
    res.set_content(nlohmann::json{{"data", {{"translations", translations}}}}.dump(), "application/json");
  });
  mock.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = mock.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { mock.listen_after_bind(); });
  mock.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  HttpBackend backend(base + "/language/translate/v2", "secret key");
  const std::vector<std::string> texts = {"سلام", "خوب"};
  const auto out = backend.translate_batch(texts, "fa", "en");
  CHECK(out == std::vector<std::string>{"EN:سلام", "EN:خوب"});
  CHECK(seen_key == "secret key");
  CHECK(seen_source == "fa");
  CHECK(seen_target == "en");
  CHECK(seen_format == "text");

  HttpBackend broken(base + "/broken", "");
  CHECK_THROWS_WITH(broken.translate_batch(texts, "fa", "en"), doctest::Contains("503"));
  CHECK_THROWS_AS(HttpBackend("not a url", ""), std::invalid_argument);

  mock.stop();
  server.join();
}

TEST_CASE("dictionary mock translates a single Persian word") {
  DictionaryBackend backend(std::map<std::string, std::string>{{"خوب", "good"}});
  TranslationCache cache;
  const auto out = translate_corpus(std::vector{rec("r1", "خوب")}, backend, cache);
  CHECK(out[0].text == "good");
  CHECK(out[0].language == "en");
}

TEST_CASE("empty corpus makes no backend calls; a shared cache makes the second run free") {
  RecordingBackend backend;
  TranslationCache cache;
  CHECK(translate_corpus(std::vector<SurveyRecord>{}, backend, cache).empty());
  CHECK(backend.calls == 0);

  std::vector<SurveyRecord> in;
  for (int i = 0; i < 23; ++i) in.push_back(rec("r" + std::to_string(i), "t" + std::to_string(i)));
  TranslateOptions opt;
  opt.batch_size = 5;
  const auto first = translate_corpus(in, backend, cache, opt);
  CHECK(backend.calls <= (23 + 4) / 5);
  const int after_first = backend.calls;
  const auto second = translate_corpus(in, backend, cache, opt);
  CHECK(backend.calls == after_first);
  CHECK(first == second);
  REQUIRE(first.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(first[i].id == in[i].id);
}
