#include "sentiment/annotate.hpp"

#include <cstdio>
#include <ctime>
#include <iomanip>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace sentiment {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Negative: return "negative";
    case Verdict::Positive: return "positive";
    case Verdict::Unresolved: break;
  }
  return "unresolved";
}

std::optional<SentimentLabel> AdjudicatedLabel::label() const {
  if (verdict == Verdict::Positive) return SentimentLabel::Positive;
  if (verdict == Verdict::Negative) return SentimentLabel::Negative;
  return std::nullopt;
}

AdjudicatedLabel adjudicate_votes(const std::string& record_id, std::span<const Judgment> judgments) {
  if (judgments.empty()) throw NotFoundError("no judgments for record '" + record_id + "'");
  // Keep the latest judgment per annotator; equal timestamps resolve to the
  // later element so that replay order wins.
  std::map<std::string, const Judgment*> latest;
  for (const auto& j : judgments) {
    if (j.record_id != record_id) continue;
    auto [it, inserted] = latest.emplace(j.annotator_id, &j);
    if (!inserted && j.timestamp >= it->second->timestamp) it->second = &j;
  }
  if (latest.empty()) throw NotFoundError("no judgments for record '" + record_id + "'");

  AdjudicatedLabel a;
  a.record_id = record_id;
  for (const auto& [annotator, j] : latest)
    (j->label == SentimentLabel::Positive ? a.votes_positive : a.votes_negative)++;
  if (a.votes_positive > a.votes_negative) a.verdict = Verdict::Positive;
  else if (a.votes_negative > a.votes_positive) a.verdict = Verdict::Negative;
  else a.verdict = Verdict::Unresolved;
  return a;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

Timestamp parse_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::tm tm{};
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  if (in.fail()) throw std::invalid_argument("bad timestamp '" + text + "'");
  using namespace std::chrono;
  const auto day = year{tm.tm_year + 1900} / month{static_cast<unsigned>(tm.tm_mon + 1)} /
                   std::chrono::day{static_cast<unsigned>(tm.tm_mday)};
  if (!day.ok()) throw std::invalid_argument("bad timestamp '" + text + "'");
  return sys_days{day} + hours{tm.tm_hour} + minutes{tm.tm_min} + seconds{tm.tm_sec};
}

std::string judgment_to_json(const Judgment& j) {
  return json{{"record_id", j.record_id},
              {"annotator_id", j.annotator_id},
              {"label", std::string(to_string(j.label))},
              {"timestamp", format_timestamp(j.timestamp)}}
      .dump();
}

Judgment judgment_from_json(const std::string& line) {
  const json j = json::parse(line);
  Judgment out;
  out.record_id = j.at("record_id").get<std::string>();
  out.annotator_id = j.at("annotator_id").get<std::string>();
  auto label = parse_label(j.at("label").get<std::string>());
  if (!label) throw std::invalid_argument("judgment label must be positive or negative");
  out.label = *label;
  if (auto it = j.find("timestamp"); it != j.end() && it->is_string())
    out.timestamp = parse_timestamp(it->get<std::string>());
  return out;
}

std::string adjudication_to_json(const AdjudicatedLabel& a) {
  return json{{"record_id", a.record_id},
              {"label", std::string(to_string(a.verdict))},
              {"votes_positive", a.votes_positive},
              {"votes_negative", a.votes_negative}}
      .dump();
}

// ---------------------------------------------------------------------------

CommitteeService::CommitteeService(std::vector<SurveyRecord> corpus, CommitteeOptions options)
    : corpus_(std::move(corpus)), options_(std::move(options)) {
  for (std::size_t i = 0; i < corpus_.size(); ++i)
    if (!index_.emplace(corpus_[i].id, i).second)
      throw std::invalid_argument("duplicate record id '" + corpus_[i].id + "'");

  if (!options_.journal) return;
  if (std::ifstream in(*options_.journal); in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Judgment j;
      try {
        j = judgment_from_json(line);
      } catch (const std::exception& e) {
        throw std::runtime_error(options_.journal->string() + ": line " + std::to_string(line_no) + ": " +
                                 e.what());
      }
      if (!index_.count(j.record_id))
        throw NotFoundError(options_.journal->string() + ": line " + std::to_string(line_no) +
                            ": unknown record '" + j.record_id + "'");
      options_.annotators.insert(j.annotator_id);
      apply(j);
    }
  }
  journal_.emplace(*options_.journal, std::ios::app | std::ios::binary);
  if (!*journal_) throw std::runtime_error("cannot open journal " + options_.journal->string());
}

void CommitteeService::apply(const Judgment& j) { judgments_[j.record_id][j.annotator_id] = j; }

void CommitteeService::check_annotator(const std::string& annotator_id) {
  if (annotator_id.empty()) throw std::invalid_argument("annotator_id must not be empty");
  if (options_.annotators.count(annotator_id)) return;
  if (options_.policy == AnnotatorPolicy::RejectUnknown)
    throw UnknownAnnotatorError("unknown annotator '" + annotator_id + "'");
  options_.annotators.insert(annotator_id);
}

Judgment CommitteeService::submit(Judgment j) {
  if (j.timestamp == Timestamp{})
    j.timestamp = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  std::unique_lock lock(mutex_);
  if (!index_.count(j.record_id)) throw NotFoundError("unknown record '" + j.record_id + "'");
  check_annotator(j.annotator_id);
  if (journal_) {
    *journal_ << judgment_to_json(j) << '\n';
    journal_->flush();
  }
  apply(j);
  return j;
}

AdjudicatedLabel CommitteeService::adjudicate(const std::string& record_id) const {
  std::shared_lock lock(mutex_);
  if (!index_.count(record_id)) throw NotFoundError("unknown record '" + record_id + "'");
  auto it = judgments_.find(record_id);
  std::vector<Judgment> current;
  if (it != judgments_.end())
    for (const auto& [annotator, j] : it->second) current.push_back(j);
  return adjudicate_votes(record_id, current);
}

std::vector<SurveyRecord> CommitteeService::export_labeled(std::size_t min_votes) const {
  std::shared_lock lock(mutex_);
  std::vector<SurveyRecord> out;
  for (const auto& r : corpus_) {
    auto it = judgments_.find(r.id);
    if (it == judgments_.end() || it->second.empty()) continue;
    std::vector<Judgment> current;
    for (const auto& [annotator, j] : it->second) current.push_back(j);
    const auto a = adjudicate_votes(r.id, current);
    if (!a.label() || a.total_votes() < min_votes) continue;
    SurveyRecord labeled = r;
    labeled.label = a.label();
    out.push_back(std::move(labeled));
  }
  return out;
}

std::vector<SurveyRecord> CommitteeService::pending_for(const std::string& annotator_id) const {
  std::shared_lock lock(mutex_);
  std::vector<SurveyRecord> out;
  for (const auto& r : corpus_) {
    auto it = judgments_.find(r.id);
    if (it != judgments_.end() && it->second.count(annotator_id)) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<SurveyRecord> CommitteeService::records() const {
  std::shared_lock lock(mutex_);
  return corpus_;
}

std::vector<Judgment> CommitteeService::judgments_for(const std::string& record_id) const {
  std::shared_lock lock(mutex_);
  std::vector<Judgment> out;
  if (auto it = judgments_.find(record_id); it != judgments_.end())
    for (const auto& [annotator, j] : it->second) out.push_back(j);
  return out;
}

std::size_t CommitteeService::judgment_count() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [id, per_annotator] : judgments_) n += per_annotator.size();
  return n;
}

}  // namespace sentiment
