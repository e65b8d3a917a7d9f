#include "sentiment/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sentiment/random.hpp"

namespace sentiment {

using nlohmann::json;

InputFormat parse_input_format(std::string_view name) {
  if (name == "csv") return InputFormat::Csv;
  if (name == "jsonl") return InputFormat::Jsonl;
  throw CorpusError("unknown corpus format '" + std::string(name) + "' (expected csv or jsonl)");
}

CaseFold parse_case_fold(std::string_view name) {
  if (name == "upper") return CaseFold::Upper;
  if (name == "lower") return CaseFold::Lower;
  if (name == "none") return CaseFold::None;
  throw std::invalid_argument("unknown case fold '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSONL

namespace {

SurveyRecord record_from_json(const json& j, std::size_t line) {
  auto fail = [line](const std::string& msg) {
    throw CorpusError("line " + std::to_string(line) + ": " + msg, line);
  };
  if (!j.is_object()) fail("expected a JSON object");

  auto string_field = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) fail(std::string("missing \"") + key + "\"");
      return {};
    }
    if (!it->is_string()) fail(std::string("\"") + key + "\" must be a string");
    return it->get<std::string>();
  };

  SurveyRecord r;
  r.id = string_field("id", true);
  r.text = string_field("text", false);
  r.language = string_field("language", false);
  r.source = string_field("source", false);

  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) fail("\"label\" must be a string or null");
    auto label = parse_label(it->get<std::string>());
    if (!label) fail("label must be \"positive\" or \"negative\"");
    r.label = label;
  }
  if (auto it = j.find("flags"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) fail("\"flags\" must be an array");
    for (const auto& f : *it) {
      if (!f.is_string()) fail("flag entries must be strings");
      auto flag = parse_flag(f.get<std::string>());
      if (!flag) fail("unknown flag \"" + f.get<std::string>() + "\"");
      r.flags.insert(*flag);
    }
  }
  return r;
}

json record_to_json(const SurveyRecord& r) {
  json flags = json::array();
  for (auto f : r.flags) flags.push_back(std::string(to_string(f)));
  return json{{"id", r.id},
              {"text", r.text},
              {"language", r.language},
              {"label", r.label ? json(std::string(to_string(*r.label))) : json(nullptr)},
              {"source", r.source},
              {"flags", flags}};
}

}  // namespace

std::string record_to_json_line(const SurveyRecord& record) {
  return record_to_json(record).dump();
}

std::vector<SurveyRecord> read_jsonl(std::istream& in) {
  std::vector<SurveyRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what(), line_no);
    }
    records.push_back(record_from_json(j, line_no));
  }
  return records;
}

void write_jsonl(std::ostream& out, std::span<const SurveyRecord> records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180)

namespace {

constexpr const char* kCsvColumns[] = {"id", "text", "language", "label", "source", "flags"};

// Reads one logical row, which may span physical lines inside quotes.
// Returns false at end of input. `line_no` tracks the starting physical line.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no,
                  std::size_t& next_line) {
  fields.clear();
  int c = in.peek();
  if (c == std::char_traits<char>::eof()) return false;
  line_no = next_line;

  std::string field;
  bool quoted = false;
  bool after_quote = false;
  for (;;) {
    c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw CorpusError("line " + std::to_string(line_no) + ": unterminated quoted field", line_no);
      fields.push_back(std::move(field));
      ++next_line;
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++next_line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (ch == '\r' && in.peek() == '\n') {
      continue;
    } else if (ch == '\n') {
      fields.push_back(std::move(field));
      ++next_line;
      return true;
    } else if (ch == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else if (after_quote) {
      throw CorpusError("line " + std::to_string(line_no) + ": unexpected character after closing quote", line_no);
    } else {
      field.push_back(ch);
    }
  }
}

std::string csv_escape(std::string_view s) {
  const bool needs_quotes = s.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<SurveyRecord> read_csv(std::istream& in) {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  std::size_t next_line = 1;
  if (!read_csv_row(in, fields, line_no, next_line)) throw CorpusError("empty CSV: missing header", 1);

  std::vector<int> column(std::size(kCsvColumns), -1);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string name = fields[i];
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
    for (std::size_t k = 0; k < std::size(kCsvColumns); ++k)
      if (name == kCsvColumns[k]) column[k] = static_cast<int>(i);
  }
  if (column[0] < 0 || column[1] < 0) throw CorpusError("line 1: CSV header must contain id and text columns", 1);
  const std::size_t width = fields.size();

  std::vector<SurveyRecord> records;
  while (read_csv_row(in, fields, line_no, next_line)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + msg, line_no);
    };
    if (fields.size() != width)
      fail("expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    auto get = [&](std::size_t k) -> std::string { return column[k] < 0 ? std::string() : fields[column[k]]; };

    SurveyRecord r;
    r.id = get(0);
    if (r.id.empty()) fail("empty id");
    r.text = get(1);
    r.language = get(2);
    if (auto label_text = get(3); !label_text.empty()) {
      auto label = parse_label(label_text);
      if (!label) fail("label must be positive, negative or empty");
      r.label = label;
    }
    r.source = get(4);
    std::stringstream flags(get(5));
    std::string token;
    while (std::getline(flags, token, ';')) {
      if (token.empty()) continue;
      auto flag = parse_flag(token);
      if (!flag) fail("unknown flag '" + token + "'");
      r.flags.insert(*flag);
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_csv(std::ostream& out, std::span<const SurveyRecord> records) {
  out << "id,text,language,label,source,flags\r\n";
  for (const auto& r : records) {
    std::string flags;
    for (auto f : r.flags) {
      if (!flags.empty()) flags.push_back(';');
      flags += to_string(f);
    }
    out << csv_escape(r.id) << ',' << csv_escape(r.text) << ',' << csv_escape(r.language) << ','
        << (r.label ? to_string(*r.label) : "") << ',' << csv_escape(r.source) << ','
        << csv_escape(flags) << "\r\n";
  }
}

std::vector<SurveyRecord> ingest(const std::filesystem::path& path, InputFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  try {
    return format == InputFormat::Csv ? read_csv(in) : read_jsonl(in);
  } catch (const CorpusError& e) {
    throw CorpusError(path.string() + ": " + e.what(), e.line());
  }
}

void write_corpus(const std::filesystem::path& path, std::span<const SurveyRecord> records,
                  InputFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError("cannot write " + path.string());
  if (format == InputFormat::Csv) write_csv(out, records);
  else write_jsonl(out, records);
  if (!out) throw CorpusError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Cleaning

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string fold_case(std::string_view text, CaseFold fold) {
  std::string out(text);
  if (fold == CaseFold::None) return out;
  for (char& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80) continue;
    c = static_cast<char>(fold == CaseFold::Upper ? std::toupper(u) : std::tolower(u));
  }
  return out;
}

std::vector<SurveyRecord> clean(std::span<const SurveyRecord> records, CaseFold fold) {
  std::vector<SurveyRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (is_blank(r.text) || r.has_flag(RecordFlag::Unclear)) continue;
    SurveyRecord copy = r;
    copy.text = fold_case(r.text, fold);
    out.push_back(std::move(copy));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

SplitPlan SplitPlan::fractional(double train_fraction, std::uint64_t seed) {
  SplitPlan p;
  p.kind = Kind::Fractional;
  p.train_fraction = train_fraction;
  p.seed = seed;
  return p;
}

SplitPlan SplitPlan::balanced(std::size_t per_class_count, std::uint64_t seed,
                              double inner_train_fraction) {
  SplitPlan p;
  p.kind = Kind::Balanced;
  p.per_class_count = per_class_count;
  p.train_fraction = inner_train_fraction;
  p.seed = seed;
  return p;
}

void validate(const SplitPlan& plan) {
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie strictly between 0 and 1");
  if (plan.kind == SplitPlan::Kind::Balanced && plan.per_class_count == 0)
    throw std::invalid_argument("balanced split needs a positive per_class_count");
}

namespace {

constexpr std::uint64_t kCorpusShuffleStream = 1;
constexpr std::uint64_t kNegativePoolStream = 2;
constexpr std::uint64_t kPositivePoolStream = 3;

std::size_t train_size(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

Split take(std::span<const SurveyRecord> records, std::span<const std::size_t> order,
           std::size_t n_train) {
  Split s;
  s.train.reserve(n_train);
  s.test.reserve(order.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_train ? s.train : s.test).push_back(records[order[i]]);
  return s;
}

}  // namespace

Split split(std::span<const SurveyRecord> records, const SplitPlan& plan) {
  validate(plan);
  for (const auto& r : records)
    if (!r.label) throw std::invalid_argument("record '" + r.id + "' has no label; split needs labeled records");

  if (plan.kind == SplitPlan::Kind::Fractional) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(plan.seed, kCorpusShuffleStream));
    rng.shuffle(std::span(order));
    return take(records, order, train_size(records.size(), plan.train_fraction));
  }

  std::vector<std::size_t> negatives, positives;
  for (std::size_t i = 0; i < records.size(); ++i)
    (*records[i].label == SentimentLabel::Positive ? positives : negatives).push_back(i);

  if (negatives.size() < plan.per_class_count || positives.size() < plan.per_class_count) {
    throw std::invalid_argument(
        "balanced split needs " + std::to_string(plan.per_class_count) +
        " records per class but the corpus has " + std::to_string(negatives.size()) +
        " negative and " + std::to_string(positives.size()) + " positive");
  }

  Rng neg_rng(derive_seed(plan.seed, kNegativePoolStream));
  Rng pos_rng(derive_seed(plan.seed, kPositivePoolStream));
  neg_rng.shuffle(std::span(negatives));
  pos_rng.shuffle(std::span(positives));

  std::vector<std::size_t> pool(negatives.begin(), negatives.begin() + plan.per_class_count);
  pool.insert(pool.end(), positives.begin(), positives.begin() + plan.per_class_count);
  Rng rng(derive_seed(plan.seed, kCorpusShuffleStream));
  rng.shuffle(std::span(pool));
  return take(records, pool, train_size(pool.size(), plan.train_fraction));
}

}  // namespace sentiment
