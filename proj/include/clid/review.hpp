#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/corpus.hpp"
#include "clid/detectors.hpp"
#include "clid/evaluation.hpp"
#include "clid/facts.hpp"

namespace clid {

enum class ItemStatus { pending, accepted, rejected };

inline const char* to_string(ItemStatus s) {
  switch (s) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::accepted: return "accepted";
    case ItemStatus::rejected: return "rejected";
  }
  return "pending";
}

inline std::optional<ItemStatus> parse_item_status(std::string_view s) {
  if (s == "pending") return ItemStatus::pending;
  if (s == "accepted") return ItemStatus::accepted;
  if (s == "rejected") return ItemStatus::rejected;
  return std::nullopt;
}

/// [start, end) in Unicode scalar values of the submitted page text.
struct Highlight {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const Highlight&) const = default;
};

enum class Decision { accept, reject };

inline const char* to_string(Decision d) { return d == Decision::accept ? "accept" : "reject"; }

inline std::optional<Decision> parse_decision(std::string_view s) {
  if (s == "accept") return Decision::accept;
  if (s == "reject") return Decision::reject;
  return std::nullopt;
}

struct HumanVerdict {
  std::string item_id;
  Decision decision = Decision::accept;
  std::optional<std::string> note;
  std::string reviewer_id;
  std::string timestamp;
  bool operator==(const HumanVerdict&) const = default;
};

struct ReviewItem {
  std::string item_id;
  std::string job_id;
  std::string page_title;
  AtomicFact fact;
  DetectionResult result;
  TwoSidedReport report;
  std::optional<Highlight> highlight;
  /// Sentence of the page the highlight covers.
  std::string anchor_text;
  ItemStatus status = ItemStatus::pending;
  std::vector<HumanVerdict> verdicts;
  bool operator==(const ReviewItem&) const = default;
};

inline nlohmann::json to_json(const HumanVerdict& v) {
  return {{"item_id", v.item_id},
          {"decision", to_string(v.decision)},
          {"note", v.note ? nlohmann::json(*v.note) : nlohmann::json(nullptr)},
          {"reviewer_id", v.reviewer_id},
          {"timestamp", v.timestamp}};
}

inline HumanVerdict verdict_from_json(const nlohmann::json& j) {
  HumanVerdict v;
  v.item_id = j.at("item_id").get<std::string>();
  const auto d = parse_decision(j.at("decision").get<std::string>());
  if (!d) throw Error(ErrorCode::invalid_argument, "review", "decision must be accept or reject");
  v.decision = *d;
  if (j.contains("note") && !j["note"].is_null()) v.note = j["note"].get<std::string>();
  v.reviewer_id = j.value("reviewer_id", std::string());
  v.timestamp = j.value("timestamp", std::string());
  return v;
}

inline nlohmann::json to_json(const ReviewItem& item) {
  nlohmann::json j;
  j["item_id"] = item.item_id;
  j["job_id"] = item.job_id;
  j["page_title"] = item.page_title;
  j["fact"] = to_json(item.fact);
  j["result"] = to_json(item.result);
  j["report"] = to_json(item.report);
  j["highlight"] = item.highlight ? nlohmann::json{{"start", item.highlight->start}, {"end", item.highlight->end}}
                                  : nlohmann::json(nullptr);
  j["anchor_text"] = item.anchor_text;
  j["status"] = to_string(item.status);
  auto verdicts = nlohmann::json::array();
  for (const auto& v : item.verdicts) verdicts.push_back(to_json(v));
  j["verdicts"] = verdicts;
  return j;
}

inline ReviewItem item_from_json(const nlohmann::json& j) {
  ReviewItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.job_id = j.value("job_id", std::string());
  item.page_title = j.value("page_title", std::string());
  item.fact = fact_from_json(j.at("fact"));
  item.result = result_from_json(j.at("result"));
  item.report = report_from_json(j.at("report"));
  if (j.contains("highlight") && !j["highlight"].is_null())
    item.highlight = Highlight{j["highlight"].at("start").get<std::size_t>(), j["highlight"].at("end").get<std::size_t>()};
  item.anchor_text = j.value("anchor_text", std::string());
  const auto st = parse_item_status(j.value("status", std::string("pending")));
  if (!st) throw Error(ErrorCode::corruption, "review", "bad item status for " + item.item_id);
  item.status = *st;
  for (const auto& v : j.value("verdicts", nlohmann::json::array())) item.verdicts.push_back(verdict_from_json(v));
  return item;
}

/// Compact queue entry: what a list view needs.
inline nlohmann::json queue_entry_json(const ReviewItem& item) {
  return {{"item_id", item.item_id},
          {"claim_text", item.fact.claim_text},
          {"score", item.result.score},
          {"status", to_string(item.status)},
          {"page_title", item.page_title},
          {"highlight", item.highlight ? nlohmann::json{{"start", item.highlight->start}, {"end", item.highlight->end}}
                                       : nlohmann::json(nullptr)}};
}

// --- highlight localization -------------------------------------------------------

/// Sentence of `block_text` sharing the most content tokens with the claim
/// (earliest on ties).
inline std::string anchor_sentence(std::string_view claim, std::string_view block_text) {
  const auto claim_tokens = content_tokens(claim);
  std::set<std::string> want(claim_tokens.begin(), claim_tokens.end());
  std::string best;
  std::size_t best_overlap = 0;
  for (const auto& s : split_sentences(block_text)) {
    std::set<std::string> have;
    for (auto& t : content_tokens(s)) have.insert(std::move(t));
    std::size_t overlap = 0;
    for (const auto& t : want) overlap += have.count(t);
    if (best.empty() || overlap > best_overlap) {
      best = s;
      best_overlap = overlap;
    }
  }
  return best;
}

/// Character span of `needle` in `page`: exact byte search first, then a
/// whitespace-collapsed search mapped back to original offsets.
inline std::optional<Highlight> locate_span(std::string_view page, std::string_view needle) {
  if (trim(needle).empty()) return std::nullopt;
  if (auto pos = page.find(needle); pos != std::string::npos)
    return Highlight{utf8_offset(page, pos), utf8_offset(page, pos + needle.size())};
  // Collapsed copy of the page with a byte map back into the original.
  std::string collapsed;
  std::vector<std::size_t> origin;
  bool pending_space = false;
  for (std::size_t i = 0; i < page.size(); ++i) {
    if (is_space(page[i])) {
      pending_space = !collapsed.empty();
      continue;
    }
    if (pending_space) {
      collapsed.push_back(' ');
      origin.push_back(i);
      pending_space = false;
    }
    collapsed.push_back(page[i]);
    origin.push_back(i);
  }
  const auto target = collapse_whitespace(needle);
  const auto pos = collapsed.find(target);
  if (pos == std::string::npos) return std::nullopt;
  const auto begin = origin[pos];
  const auto end = origin[pos + target.size() - 1] + 1;
  return Highlight{utf8_offset(page, begin), utf8_offset(page, end)};
}

// --- store ---------------------------------------------------------------------------

/// Durable item/verdict store: an append-only JSONL event log plus a
/// compacted snapshot. Replaying snapshot + log rebuilds the state; a
/// single writer holds the exclusive lock while appending.
class ReviewStore {
 public:
  struct Options {
    /// Empty means memory-only.
    std::string directory;
    /// Compact after this many log appends (0 disables).
    std::size_t compaction_interval = 1000;
  };

  ReviewStore() = default;
  explicit ReviewStore(Options options) : options_(std::move(options)) {
    if (!options_.directory.empty()) {
      std::filesystem::create_directories(options_.directory);
      load();
    }
  }

  std::string log_path() const { return options_.directory + "/events.jsonl"; }
  std::string snapshot_path() const { return options_.directory + "/snapshot.json"; }

  void add_item(ReviewItem item) {
    std::unique_lock lock(mu_);
    if (items_.count(item.item_id)) throw Error(ErrorCode::conflict, "review", "item " + item.item_id + " exists");
    append_event({{"type", "item"}, {"item", to_json(item)}});
    items_.emplace(item.item_id, std::move(item));
    maybe_compact();
  }

  /// Records a terminal verdict. Only pending items accept one; anything
  /// else is a conflict.
  ReviewItem submit_verdict(const HumanVerdict& verdict) {
    require(!verdict.reviewer_id.empty(), "review", "reviewer_id is required");
    std::unique_lock lock(mu_);
    auto it = items_.find(verdict.item_id);
    if (it == items_.end()) throw Error(ErrorCode::not_found, "review", "unknown item " + verdict.item_id);
    check_verdict(it->second, verdict);
    append_event({{"type", "verdict"}, {"verdict", to_json(verdict)}});
    apply_verdict(it->second, verdict);
    auto out = it->second;
    maybe_compact();
    return out;
  }

  std::optional<ReviewItem> get(std::string_view item_id) const {
    std::shared_lock lock(mu_);
    auto it = items_.find(std::string(item_id));
    if (it == items_.end()) return std::nullopt;
    return it->second;
  }

  /// Items with score >= min_score (and matching status, if given), by
  /// score descending then item_id.
  std::vector<ReviewItem> queue(double min_score = 0.0, std::optional<ItemStatus> status = std::nullopt) const {
    std::shared_lock lock(mu_);
    std::vector<ReviewItem> out;
    for (const auto& [_, item] : items_)
      if (item.result.score >= min_score && (!status || item.status == *status)) out.push_back(item);
    std::sort(out.begin(), out.end(), [](const ReviewItem& a, const ReviewItem& b) {
      if (a.result.score != b.result.score) return a.result.score > b.result.score;
      return a.item_id < b.item_id;
    });
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return items_.size();
  }

  /// Accepted items become inconsistent records with the detector's
  /// evidence; rejected items become consistent records. Accepted items
  /// without evidence cannot form a valid record and are skipped.
  std::vector<LabeledFact> export_dataset() const {
    std::shared_lock lock(mu_);
    std::vector<LabeledFact> out;
    for (const auto& [_, item] : items_) {
      if (item.status == ItemStatus::pending) continue;
      LabeledFact lf;
      lf.fact = item.fact;
      lf.gold_label = item.status == ItemStatus::accepted ? Label::inconsistent : Label::consistent;
      for (const auto& e : item.result.evidence) {
        if (lf.evidence_block_ids.size() == kMaxReviewedPassages) break;
        lf.evidence_block_ids.push_back(e.block_id);
      }
      if (lf.gold_label == Label::inconsistent && lf.evidence_block_ids.empty()) continue;
      lf.split = assign_split(lf.fact.fact_id);
      out.push_back(std::move(lf));
    }
    return out;
  }

  /// Rewrites the snapshot from current state and truncates the log.
  void compact() {
    std::unique_lock lock(mu_);
    compact_locked();
  }

  /// Rebuilds state from an event stream on an empty store (no writes).
  static std::map<std::string, ReviewItem> replay(std::istream& events) {
    std::map<std::string, ReviewItem> items;
    apply_events(items, events);
    return items;
  }

  std::map<std::string, ReviewItem> items() const {
    std::shared_lock lock(mu_);
    return items_;
  }

 private:
  static void check_verdict(const ReviewItem& item, const HumanVerdict& v) {
    for (const auto& prior : item.verdicts)
      if (prior.reviewer_id == v.reviewer_id)
        throw Error(ErrorCode::conflict, "review", "reviewer " + v.reviewer_id + " already judged " + item.item_id);
    if (item.status != ItemStatus::pending)
      throw Error(ErrorCode::conflict, "review",
                  "item " + item.item_id + " is already " + to_string(item.status));
  }

  static void apply_verdict(ReviewItem& item, const HumanVerdict& v) {
    item.verdicts.push_back(v);
    item.status = v.decision == Decision::accept ? ItemStatus::accepted : ItemStatus::rejected;
  }

  void append_event(const nlohmann::json& event) {
    if (options_.directory.empty()) return;
    {
      std::ofstream out(log_path(), std::ios::app | std::ios::binary);
      if (!out) throw Error(ErrorCode::io, "review", "cannot append to " + log_path());
      out << event.dump() << '\n';
      out.flush();
      if (!out) throw Error(ErrorCode::io, "review", "write to " + log_path() + " failed");
    }
    ++appends_;
  }

  /// Runs after the in-memory state already reflects the appended event.
  void maybe_compact() {
    if (options_.compaction_interval && appends_ >= options_.compaction_interval) compact_locked();
  }

  void compact_locked() {
    if (options_.directory.empty()) return;
    const auto tmp = snapshot_path() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error(ErrorCode::io, "review", "cannot write " + tmp);
      auto arr = nlohmann::json::array();
      for (const auto& [_, item] : items_) arr.push_back(to_json(item));
      out << nlohmann::json{{"items", arr}}.dump() << '\n';
    }
    std::filesystem::rename(tmp, snapshot_path());
    std::ofstream(log_path(), std::ios::trunc | std::ios::binary);
    appends_ = 0;
  }

  static void apply_events(std::map<std::string, ReviewItem>& items, std::istream& events) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(events, line)) {
      ++n;
      if (trim(line).empty()) continue;
      try {
        const auto ev = nlohmann::json::parse(line);
        const auto type = ev.at("type").get<std::string>();
        if (type == "item") {
          auto item = item_from_json(ev.at("item"));
          items[item.item_id] = std::move(item);
        } else if (type == "verdict") {
          const auto v = verdict_from_json(ev.at("verdict"));
          auto it = items.find(v.item_id);
          if (it == items.end())
            throw Error(ErrorCode::corruption, "review", "verdict for unknown item " + v.item_id + " in log");
          apply_verdict(it->second, v);
        } else {
          throw Error(ErrorCode::corruption, "review", "unknown event type " + type);
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corruption, "review", "bad log line " + std::to_string(n) + ": " + e.what());
      }
    }
  }

  /// Snapshot first, then the log written since the last compaction.
  void load() {
    if (std::ifstream snap(snapshot_path()); snap) {
      try {
        const auto j = nlohmann::json::parse(snap);
        for (const auto& it : j.at("items")) {
          auto item = item_from_json(it);
          items_[item.item_id] = std::move(item);
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::corruption, "review", std::string("bad snapshot: ") + e.what());
      }
    }
    if (std::ifstream log(log_path()); log) apply_events(items_, log);
  }

  Options options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ReviewItem> items_;
  std::size_t appends_ = 0;
};

// --- analysis jobs ---------------------------------------------------------------------

enum class JobStatus { queued, running, completed, failed };

inline const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::completed: return "completed";
    case JobStatus::failed: return "failed";
  }
  return "queued";
}

struct JobError {
  std::string code;
  std::string stage;
  std::string message;
};

struct AnalysisRequest {
  std::string title;
  std::string text;
  SystemKind system = SystemKind::agent;
  double score_floor = 0.5;
};

struct Job {
  std::string job_id;
  AnalysisRequest request;
  JobStatus status = JobStatus::queued;
  std::vector<std::string> item_ids;
  std::size_t facts_total = 0;
  std::size_t facts_done = 0;
  std::optional<JobError> error;
};

inline nlohmann::json to_json(const Job& job) {
  nlohmann::json j;
  j["job_id"] = job.job_id;
  j["status"] = to_string(job.status);
  j["title"] = job.request.title;
  j["system"] = to_string(job.request.system);
  j["score_floor"] = job.request.score_floor;
  j["item_ids"] = job.item_ids;
  j["facts_total"] = job.facts_total;
  j["facts_done"] = job.facts_done;
  j["error"] = job.error ? nlohmann::json{{"code", job.error->code}, {"stage", job.error->stage},
                                          {"message", job.error->message}}
                         : nlohmann::json(nullptr);
  return j;
}

inline std::string iso_timestamp_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Page analysis plus the review queue. Jobs run on a bounded worker pool;
/// the corpus, index and model gateway are shared read-only.
class ReviewService {
 public:
  struct Options {
    std::size_t workers = 2;
    DetectorConfig detector;
    std::function<std::string()> clock = iso_timestamp_now;
  };

  ReviewService(DetectionContext ctx, ReviewStore& store) : ReviewService(ctx, store, Options{}) {}
  ReviewService(DetectionContext ctx, ReviewStore& store, Options options)
      : ctx_(ctx), store_(store), options_(std::move(options)) {
    for (std::size_t i = 0; i < std::max<std::size_t>(1, options_.workers); ++i)
      workers_.emplace_back([this] { work(); });
  }

  ~ReviewService() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  ReviewStore& store() { return store_; }

  /// Queues a page. Resubmitting identical input returns the existing job
  /// unless that job failed.
  std::string analyze_page(const AnalysisRequest& req) {
    require(!trim(req.text).empty(), "analyze", "page text must be non-empty");
    require(!trim(req.title).empty(), "analyze", "page title must be non-empty");
    require(req.score_floor >= 0.0 && req.score_floor <= 1.0, "analyze", "score_floor must lie in [0,1]");
    const auto floor = nlohmann::json(req.score_floor).dump();
    const auto id = "j" + hex64(hash_fields({req.title, req.text, to_string(req.system), floor}));
    std::lock_guard lock(mu_);
    auto it = jobs_.find(id);
    if (it != jobs_.end() && it->second.status != JobStatus::failed) return id;
    Job job;
    job.job_id = id;
    job.request = req;
    jobs_[id] = std::move(job);
    pending_.push_back(id);
    cv_.notify_one();
    return id;
  }

  std::optional<Job> job(std::string_view id) const {
    std::lock_guard lock(mu_);
    auto it = jobs_.find(std::string(id));
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
  }

  /// Blocks until the job leaves queued/running or the timeout passes.
  std::optional<Job> wait(std::string_view id, std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    std::unique_lock lock(mu_);
    done_cv_.wait_for(lock, timeout, [&] {
      auto it = jobs_.find(std::string(id));
      return it == jobs_.end() || it->second.status == JobStatus::completed || it->second.status == JobStatus::failed;
    });
    auto it = jobs_.find(std::string(id));
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
  }

  ReviewItem submit_verdict(HumanVerdict v) {
    if (v.timestamp.empty()) v.timestamp = options_.clock();
    return store_.submit_verdict(v);
  }

 private:
  void work() {
    for (;;) {
      std::string id;
      AnalysisRequest req;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
        if (stopping_) return;
        id = pending_.front();
        pending_.pop_front();
        jobs_[id].status = JobStatus::running;
        req = jobs_[id].request;
      }
      try {
        run_job(id, req);
        finish(id, JobStatus::completed, std::nullopt);
      } catch (const Error& e) {
        finish(id, JobStatus::failed, JobError{to_string(e.code()), e.stage(), e.what()});
      } catch (const std::exception& e) {
        finish(id, JobStatus::failed, JobError{"internal", "analyze", e.what()});
      }
    }
  }

  void finish(const std::string& id, JobStatus status, std::optional<JobError> error) {
    {
      std::lock_guard lock(mu_);
      jobs_[id].status = status;
      jobs_[id].error = std::move(error);
    }
    done_cv_.notify_all();
  }

  /// Paragraphs (blank-line separated) become blocks of the page.
  static std::vector<Block> page_blocks(const AnalysisRequest& req) {
    std::vector<Block> out;
    std::string para;
    auto flush = [&] {
      auto t = trim(para);
      para.clear();
      if (t.empty()) return;
      Block b;
      b.doc_title = req.title;
      b.text = std::move(t);
      b.block_id = make_block_id(req.title, {}, out.size());
      b.char_count = utf8_length(b.text);
      out.push_back(std::move(b));
    };
    for (const auto& line : split_lines(req.text)) {
      if (trim(line).empty()) flush();
      else para += line + "\n";
    }
    flush();
    return out;
  }

  void run_job(const std::string& id, const AnalysisRequest& req) {
    std::vector<std::pair<AtomicFact, std::string>> facts;  // fact, block text
    for (const auto& block : page_blocks(req))
      for (auto& f : extract_facts(block, ctx_.llm)) facts.emplace_back(std::move(f), block.text);
    {
      std::lock_guard lock(mu_);
      jobs_[id].facts_total = facts.size();
    }
    for (const auto& [fact, block_text] : facts) {
      auto result = run_detector(req.system, fact, ctx_, options_.detector);
      if (result.score >= req.score_floor) {
        ReviewItem item;
        item.item_id = "i" + hex64(hash_fields({id, fact.fact_id}));
        item.job_id = id;
        item.page_title = req.title;
        item.fact = fact;
        item.report = generate_report(fact, result, ctx_);
        item.result = std::move(result);
        item.anchor_text = anchor_sentence(fact.claim_text, block_text);
        item.highlight = locate_span(req.text, item.anchor_text);
        if (!store_.get(item.item_id)) store_.add_item(item);
        std::lock_guard lock(mu_);
        jobs_[id].item_ids.push_back(item.item_id);
      }
      std::lock_guard lock(mu_);
      ++jobs_[id].facts_done;
    }
  }

  DetectionContext ctx_;
  ReviewStore& store_;
  Options options_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> pending_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace clid
