#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sentiment/record.hpp"

namespace sentiment {

/// A batch translator. Implementations return exactly one output per input,
/// in input order, and may throw on failure.
class TranslationBackend {
 public:
  virtual ~TranslationBackend() = default;
  virtual std::vector<std::string> translate_batch(std::span<const std::string> texts,
                                                   const std::string& source_lang,
                                                   const std::string& target_lang) = 0;
};

class IdentityBackend : public TranslationBackend {
 public:
  std::vector<std::string> translate_batch(std::span<const std::string> texts,
                                           const std::string& source_lang,
                                           const std::string& target_lang) override;
};

/// Lookup-table translator for tests and offline runs. A whole-text entry
/// wins; otherwise each whitespace-separated word is looked up and unknown
/// words pass through unchanged.
class DictionaryBackend : public TranslationBackend {
 public:
  explicit DictionaryBackend(std::map<std::string, std::string> entries)
      : entries_(std::move(entries)) {}

  /// Reads a JSON object of {"source": "target"} pairs.
  static DictionaryBackend from_file(const std::filesystem::path& path);

  std::vector<std::string> translate_batch(std::span<const std::string> texts,
                                           const std::string& source_lang,
                                           const std::string& target_lang) override;

 private:
  std::map<std::string, std::string> entries_;
};

/// Speaks the Google Cloud Translation v2 REST shape:
/// POST <endpoint>?key=<api_key> with {"q": [...], "source", "target", "format": "text"}
/// and reads data.translations[i].translatedText.
class HttpBackend : public TranslationBackend {
 public:
  HttpBackend(std::string endpoint, std::string api_key);

  std::vector<std::string> translate_batch(std::span<const std::string> texts,
                                           const std::string& source_lang,
                                           const std::string& target_lang) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
};

/// Persistent translation memory keyed by (exact source text, source language,
/// target language). Backed by an append-only JSONL file of
/// {"src", "from", "to", "out"}; later lines override earlier ones on load.
/// All members are safe to call from several threads.
class TranslationCache {
 public:
  /// In-memory only.
  TranslationCache() = default;
  /// Loads `path` if it exists; new entries are appended and flushed immediately.
  explicit TranslationCache(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& src, const std::string& from,
                                 const std::string& to) const;
  void put(const std::string& src, const std::string& from, const std::string& to,
           const std::string& out);
  std::size_t size() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  mutable std::mutex mutex_;
  std::map<Key, std::string> entries_;
  std::optional<std::ofstream> journal_;
};

struct TranslateOptions {
  /// Used for records whose language tag is empty.
  std::string source_lang = "fa";
  std::string target_lang = "en";
  std::size_t batch_size = 64;
  /// Maximum number of batches in flight at once.
  std::size_t parallelism = 1;
};

/// Raised when a backend batch fails; carries the ids of every record whose
/// text was part of that batch. Batches that finished earlier stay cached.
class TranslationError : public std::runtime_error {
 public:
  TranslationError(const std::string& what, std::vector<std::string> ids)
      : std::runtime_error(what), ids_(std::move(ids)) {}
  const std::vector<std::string>& failed_ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

/// Replaces each record's text with its translation, sets the language tag to
/// the target and adds the Translated flag. Records already flagged Translated
/// pass through untouched. Only cache misses reach the backend, deduplicated
/// and chunked into batches of at most batch_size per language pair.
std::vector<SurveyRecord> translate_corpus(std::span<const SurveyRecord> records,
                                           TranslationBackend& backend, TranslationCache& cache,
                                           const TranslateOptions& options = {});

}  // namespace sentiment
