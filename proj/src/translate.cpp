#include "sentiment/translate.hpp"

#include <algorithm>
#include <set>
#include <future>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

namespace sentiment {

using nlohmann::json;

std::vector<std::string> IdentityBackend::translate_batch(std::span<const std::string> texts,
                                                          const std::string&, const std::string&) {
  return {texts.begin(), texts.end()};
}

DictionaryBackend DictionaryBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dictionary " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(path.string() + ": dictionary must be a JSON object");
  std::map<std::string, std::string> entries;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string())
      throw std::runtime_error(path.string() + ": value for '" + it.key() + "' must be a string");
    entries.emplace(it.key(), it.value().get<std::string>());
  }
  return DictionaryBackend(std::move(entries));
}

std::vector<std::string> DictionaryBackend::translate_batch(std::span<const std::string> texts,
                                                            const std::string&, const std::string&) {
  std::vector<std::string> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    if (auto it = entries_.find(text); it != entries_.end()) {
      out.push_back(it->second);
      continue;
    }
    std::istringstream words(text);
    std::string word, translated;
    while (words >> word) {
      if (!translated.empty()) translated.push_back(' ');
      auto it = entries_.find(word);
      translated += it != entries_.end() ? it->second : word;
    }
    out.push_back(std::move(translated));
  }
  return out;
}

HttpBackend::HttpBackend(std::string endpoint, std::string api_key) : api_key_(std::move(api_key)) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("translation endpoint must be an absolute http(s) URL: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  scheme_host_port_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

std::vector<std::string> HttpBackend::translate_batch(std::span<const std::string> texts,
                                                      const std::string& source_lang,
                                                      const std::string& target_lang) {
  httplib::Client client(scheme_host_port_);
  if (!client.is_valid())
    throw std::runtime_error("unsupported translation endpoint " + scheme_host_port_);
  client.set_read_timeout(60, 0);

  json body{{"q", json(std::vector<std::string>(texts.begin(), texts.end()))},
            {"source", source_lang},
            {"target", target_lang},
            {"format", "text"}};
  std::string path = path_;
  if (!api_key_.empty())
    path += (path.find('?') == std::string::npos ? "?key=" : "&key=") + httplib::detail::encode_url(api_key_);

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("translation request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw std::runtime_error("translation service returned HTTP " + std::to_string(res->status));

  const json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("data") || !reply["data"].contains("translations"))
    throw std::runtime_error("translation service returned an unexpected body");
  std::vector<std::string> out;
  for (const auto& t : reply["data"]["translations"]) out.push_back(t.at("translatedText").get<std::string>());
  return out;
}

// ---------------------------------------------------------------------------

TranslationCache::TranslationCache(const std::filesystem::path& path) {
  if (std::ifstream in(path); in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": invalid cache entry");
      entries_[Key{j.at("src").get<std::string>(), j.at("from").get<std::string>(),
                   j.at("to").get<std::string>()}] = j.at("out").get<std::string>();
    }
  }
  journal_.emplace(path, std::ios::app | std::ios::binary);
  if (!*journal_) throw std::runtime_error("cannot open translation cache " + path.string());
}

std::optional<std::string> TranslationCache::get(const std::string& src, const std::string& from,
                                                 const std::string& to) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(Key{src, from, to});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TranslationCache::put(const std::string& src, const std::string& from, const std::string& to,
                           const std::string& out) {
  std::lock_guard lock(mutex_);
  entries_[Key{src, from, to}] = out;
  if (journal_) {
    *journal_ << json{{"src", src}, {"from", from}, {"to", to}, {"out", out}}.dump() << '\n';
    journal_->flush();
  }
}

std::size_t TranslationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------

namespace {

struct Batch {
  std::string from;
  std::vector<std::string> texts;
};

}  // namespace

std::vector<SurveyRecord> translate_corpus(std::span<const SurveyRecord> records,
                                           TranslationBackend& backend, TranslationCache& cache,
                                           const TranslateOptions& options) {
  if (options.batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  const std::size_t parallelism = std::max<std::size_t>(options.parallelism, 1);
  const std::string& to = options.target_lang;
  auto source_of = [&](const SurveyRecord& r) -> const std::string& {
    return r.language.empty() ? options.source_lang : r.language;
  };

  {
    std::set<std::string> ids;
    for (const auto& r : records)
      if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate record id '" + r.id + "'");
  }

  // Unique misses per source language, in first-seen order.
  std::map<std::string, std::vector<std::string>> misses;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : records) {
    if (r.has_flag(RecordFlag::Translated)) continue;
    if (r.text.empty()) throw std::invalid_argument("record '" + r.id + "' has empty text");
    const auto& from = source_of(r);
    if (cache.get(r.text, from, to)) continue;
    if (seen.emplace(from, r.text).second) misses[from].push_back(r.text);
  }

  std::vector<Batch> batches;
  for (auto& [from, texts] : misses) {
    for (std::size_t i = 0; i < texts.size(); i += options.batch_size) {
      const auto end = std::min(texts.size(), i + options.batch_size);
      batches.push_back({from, {texts.begin() + i, texts.begin() + end}});
    }
  }

  auto run_batch = [&](const Batch& b) {
    auto out = backend.translate_batch(b.texts, b.from, to);
    if (out.size() != b.texts.size())
      throw std::runtime_error("backend returned " + std::to_string(out.size()) + " translations for " +
                               std::to_string(b.texts.size()) + " inputs");
    for (std::size_t i = 0; i < out.size(); ++i) cache.put(b.texts[i], b.from, to, out[i]);
  };

  auto fail = [&](const Batch& b, const std::string& why) {
    std::set<std::string> texts(b.texts.begin(), b.texts.end());
    std::vector<std::string> ids;
    for (const auto& r : records)
      if (!r.has_flag(RecordFlag::Translated) && source_of(r) == b.from && texts.count(r.text))
        ids.push_back(r.id);
    throw TranslationError("translation batch failed: " + why, std::move(ids));
  };

  for (std::size_t start = 0; start < batches.size(); start += parallelism) {
    const auto end = std::min(batches.size(), start + parallelism);
    std::vector<std::future<void>> inflight;
    for (std::size_t i = start; i < end; ++i) {
      if (parallelism == 1) {
        try {
          run_batch(batches[i]);
        } catch (const std::exception& e) {
          fail(batches[i], e.what());
        }
      } else {
        inflight.push_back(std::async(std::launch::async, run_batch, std::cref(batches[i])));
      }
    }
    std::optional<std::pair<std::size_t, std::string>> first_error;
    for (std::size_t k = 0; k < inflight.size(); ++k) {
      try {
        inflight[k].get();
      } catch (const std::exception& e) {
        if (!first_error) first_error.emplace(start + k, e.what());
      }
    }
    if (first_error) fail(batches[first_error->first], first_error->second);
  }

  std::vector<SurveyRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    SurveyRecord t = r;
    if (!r.has_flag(RecordFlag::Translated)) {
      t.text = *cache.get(r.text, source_of(r), to);
      t.language = to;
      t.flags.insert(RecordFlag::Translated);
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace sentiment
