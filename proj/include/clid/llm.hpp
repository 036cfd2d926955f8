#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"

namespace clid {

// --- templates ---------------------------------------------------------------

struct FewShotExample {
  std::string input_text;
  std::string output_text;
};

/// A prompt asset. Placeholders in `input_slot` are written `{{ name }}` and
/// must all appear in `placeholders`.
struct PromptTemplate {
  std::string name;
  std::string version = "1";
  std::string instruction;
  std::vector<FewShotExample> few_shot;
  std::string input_slot;
  std::vector<std::string> placeholders;
  /// False for prompts this project authored (rerank, reports, NLI, ...).
  bool published_verbatim = false;
};

namespace detail {

struct PlaceholderRef {
  std::size_t begin;
  std::size_t end;
  std::string name;
};

inline std::vector<PlaceholderRef> scan_placeholders(std::string_view text) {
  std::vector<PlaceholderRef> refs;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    const auto close = text.find("}}", pos + 2);
    if (close == std::string_view::npos) break;
    refs.push_back({pos, close + 2, trim(text.substr(pos + 2, close - pos - 2))});
    pos = close + 2;
  }
  return refs;
}

}  // namespace detail

/// Throws if input_slot references an undeclared placeholder.
inline void validate_template(const PromptTemplate& tpl) {
  for (const auto& ref : detail::scan_placeholders(tpl.input_slot)) {
    if (std::find(tpl.placeholders.begin(), tpl.placeholders.end(), ref.name) == tpl.placeholders.end())
      throw Error(ErrorCode::missing_placeholder, "template",
                  "template '" + tpl.name + "' uses undeclared placeholder '" + ref.name + "'");
  }
}

/// Instruction, then each few-shot pair between "# input" / "# output"
/// markers, then the filled input slot under a final "# input" marker.
/// Pure: equal inputs give byte-equal output. Variables the template never
/// uses are reported through `warnings` when given.
inline std::string render_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& variables,
                                 std::vector<std::string>* warnings = nullptr) {
  validate_template(tpl);
  const auto refs = detail::scan_placeholders(tpl.input_slot);
  std::set<std::string> used;
  std::string filled;
  std::size_t last = 0;
  for (const auto& ref : refs) {
    auto it = variables.find(ref.name);
    if (it == variables.end())
      throw Error(ErrorCode::missing_placeholder, "template",
                  "template '" + tpl.name + "' is missing variable '" + ref.name + "'");
    filled.append(tpl.input_slot, last, ref.begin - last);
    filled += it->second;
    used.insert(ref.name);
    last = ref.end;
  }
  filled.append(tpl.input_slot, last, std::string::npos);
  if (warnings) {
    for (const auto& [k, _] : variables)
      if (!used.count(k)) warnings->push_back("unused variable '" + k + "' for template '" + tpl.name + "'");
  }

  std::string out = "# instruction\n" + tpl.instruction;
  for (const auto& ex : tpl.few_shot) {
    out += "\n\n# input\n" + ex.input_text;
    out += "\n\n# output\n" + ex.output_text;
  }
  out += "\n\n# input\n" + filled;
  return out;
}

// --- tagged output -----------------------------------------------------------

/// Trimmed content of the first well-formed <tag>...</tag> region.
inline std::string extract_tagged(std::string_view response, std::string_view tag) {
  require(!tag.empty() && tag.find_first_of("<>/ ") == std::string_view::npos, "parse",
          "tag must be a bare tag name");
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const auto b = response.find(open);
  if (b == std::string_view::npos)
    throw ParseError("parse", "response has no <" + std::string(tag) + "> region", std::string(response));
  const auto start = b + open.size();
  const auto e = response.find(close, start);
  if (e == std::string_view::npos)
    throw ParseError("parse", "unclosed <" + std::string(tag) + "> region", std::string(response));
  return trim(response.substr(start, e - start));
}

enum class ScoreMode { strict, lenient };

struct ParsedScore {
  double value = 0.0;
  std::optional<std::string> warning;
};

/// Parses an inconsistency score. Strict mode rejects non-numeric and
/// out-of-range values; lenient mode clamps into [0,1] and records why.
inline ParsedScore parse_score(std::string_view text, ScoreMode mode) {
  const auto s = trim(text);
  double v = 0.0;
  std::size_t used = 0;
  bool numeric = false;
  try {
    v = std::stod(s, &used);
    numeric = used == s.size() && std::isfinite(v);
  } catch (const std::exception&) {
    numeric = false;
  }
  if (!numeric) {
    if (mode == ScoreMode::strict) throw ParseError("parse", "score is not a number: '" + s + "'", std::string(text));
    return {0.0, "non-numeric score '" + s + "' replaced with 0"};
  }
  if (v < 0.0 || v > 1.0) {
    if (mode == ScoreMode::strict) throw ParseError("parse", "score out of [0,1]: " + s, std::string(text));
    return {std::clamp(v, 0.0, 1.0), "score " + s + " clamped into [0,1]"};
  }
  return {v, std::nullopt};
}

// --- providers ---------------------------------------------------------------

struct DecodingConfig {
  double temperature = 0.0;
  int max_tokens = 2048;
  int max_attempts = 3;
};

/// What a provider sees: the rendered prompt plus the template name and the
/// variables it was rendered from (scripted/oracle providers key on those).
struct LlmRequest {
  std::string template_name;
  std::map<std::string, std::string> variables;
  std::string prompt;
  DecodingConfig decoding;
};

/// Provider call failed in a way worth retrying (network, 5xx, timeout).
class RetriableFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string id() const = 0;
  /// Returns the raw completion text. Throws RetriableFailure for transient
  /// transport problems and clid::Error for anything final.
  virtual std::string generate(const LlmRequest& request) = 0;
};

/// Digest of the variables a prompt was rendered from; stable under
/// cosmetic template edits.
inline std::string variables_digest(const std::map<std::string, std::string>& variables) {
  std::vector<std::string_view> fields;
  for (const auto& [k, v] : variables) {
    fields.push_back(k);
    fields.push_back(v);
  }
  return hex64(hash_fields(fields));
}

inline std::string transcript_key(std::string_view template_name, const std::map<std::string, std::string>& variables) {
  return std::string(template_name) + ":" + variables_digest(variables);
}

inline std::string strict_transcript_key(std::string_view template_name, std::string_view prompt) {
  return std::string(template_name) + ":prompt:" + hex64(fnv1a64(prompt));
}

struct LlmExchange {
  std::string template_name;
  std::string key;
  std::string rendered_prompt;
  std::string response_text;
  std::string provider_id;
  std::int64_t latency_ms = 0;
};

inline nlohmann::json to_json(const LlmExchange& e) {
  return {{"template_name", e.template_name}, {"key", e.key},          {"rendered_prompt", e.rendered_prompt},
          {"response_text", e.response_text}, {"provider_id", e.provider_id}, {"latency_ms", e.latency_ms}};
}

inline LlmExchange exchange_from_json(const nlohmann::json& j) {
  LlmExchange e;
  e.template_name = j.at("template_name").get<std::string>();
  e.key = j.value("key", std::string());
  e.rendered_prompt = j.at("rendered_prompt").get<std::string>();
  e.response_text = j.at("response_text").get<std::string>();
  e.provider_id = j.value("provider_id", std::string());
  e.latency_ms = j.value("latency_ms", std::int64_t{0});
  return e;
}

/// Append-only exchange log; appends are serialized. When a sink stream is
/// attached every exchange is also written as one JSON line.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(std::ostream* sink) : sink_(sink) {}

  void append(LlmExchange exchange) {
    std::lock_guard lock(mu_);
    if (sink_) {
      *sink_ << to_json(exchange).dump() << '\n';
      sink_->flush();
    }
    entries_.push_back(std::move(exchange));
  }

  std::vector<LlmExchange> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::ostream* sink_ = nullptr;
  std::vector<LlmExchange> entries_;
};

inline std::vector<LlmExchange> read_run_log(std::istream& in) {
  std::vector<LlmExchange> out;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) out.push_back(exchange_from_json(nlohmann::json::parse(line)));
  return out;
}

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Replays canned responses; never performs I/O.
///
/// Lookup order: keyed entry (template name + variable digest, or the
/// exact-prompt key in strict mode), then the per-template FIFO queue.
/// Anything else is an unmatched-prompt error naming the nearest key.
class ScriptedProvider : public LlmProvider {
 public:
  enum class Mode { keyed, strict_prompt };

  explicit ScriptedProvider(Mode mode = Mode::keyed, std::string id = "scripted")
      : mode_(mode), id_(std::move(id)) {}

  std::string id() const override { return id_; }

  void add(std::string key, std::string response) {
    std::lock_guard lock(mu_);
    entries_[std::move(key)] = std::move(response);
  }

  /// Keyed entry for the given template and variables.
  void add_for(std::string_view template_name, const std::map<std::string, std::string>& variables,
               std::string response) {
    add(transcript_key(template_name, variables), std::move(response));
  }

  /// Queued response, consumed in order by calls to `template_name` that
  /// have no keyed entry.
  void enqueue(const std::string& template_name, std::string response) {
    std::lock_guard lock(mu_);
    queues_[template_name].push_back(std::move(response));
  }

  /// Loads line-delimited {key, response} records.
  void load_transcript(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        add(j.at("key").get<std::string>(), j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, "transcript", "bad transcript record at line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  /// Builds a provider that reproduces a recorded run.
  static std::unique_ptr<ScriptedProvider> from_run_log(const std::vector<LlmExchange>& log, Mode mode = Mode::keyed) {
    auto p = std::make_unique<ScriptedProvider>(mode, "replay");
    for (const auto& e : log)
      p->add(mode == Mode::keyed ? e.key : strict_transcript_key(e.template_name, e.rendered_prompt), e.response_text);
    return p;
  }

  std::string key_for(const LlmRequest& r) const {
    return mode_ == Mode::keyed ? transcript_key(r.template_name, r.variables)
                                : strict_transcript_key(r.template_name, r.prompt);
  }

  std::string generate(const LlmRequest& request) override {
    const auto key = key_for(request);
    std::lock_guard lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    if (auto q = queues_.find(request.template_name); q != queues_.end() && !q->second.empty()) {
      auto response = std::move(q->second.front());
      q->second.pop_front();
      return response;
    }
    std::string nearest;
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& [k, _] : entries_) {
      // Same-template keys first, then plain edit distance.
      const bool same = k.rfind(request.template_name + ":", 0) == 0;
      const auto d = edit_distance(k, key) + (same ? 0 : 1'000'000);
      if (d < best) {
        best = d;
        nearest = k;
      }
    }
    throw Error(ErrorCode::unmatched_prompt, "llm",
                "no scripted response for key " + key + (nearest.empty() ? " (transcript empty)" : "; nearest: " + nearest));
  }

 private:
  Mode mode_;
  std::string id_;
  std::mutex mu_;
  std::map<std::string, std::string> entries_;
  std::map<std::string, std::deque<std::string>> queues_;
};

/// Provider backed by a callable; handy for adversarial test doubles.
class FunctionProvider : public LlmProvider {
 public:
  using Fn = std::function<std::string(const LlmRequest&)>;
  FunctionProvider(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::string generate(const LlmRequest& request) override { return fn_(request); }

 private:
  std::string id_;
  Fn fn_;
};

// --- gateway -----------------------------------------------------------------

/// Renders, calls, retries and logs. Holds a counting cap on in-flight calls
/// so one provider can be shared by worker threads.
class LlmGateway {
 public:
  struct Options {
    DecodingConfig decoding;
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds retry_backoff{200};
  };

  LlmGateway(LlmProvider& provider, RunLog& log) : LlmGateway(provider, log, Options{}) {}
  LlmGateway(LlmProvider& provider, RunLog& log, Options options)
      : provider_(provider), log_(log), options_(options) {}

  LlmProvider& provider() { return provider_; }
  RunLog& log() { return log_; }
  const Options& options() const { return options_; }

  /// Renders `tpl` with `variables` and completes it.
  std::string call(const PromptTemplate& tpl, const std::map<std::string, std::string>& variables) {
    LlmRequest request;
    request.template_name = tpl.name;
    request.variables = variables;
    request.prompt = render_prompt(tpl, variables);
    request.decoding = options_.decoding;
    return complete(request);
  }

  /// Sends an already-rendered request. Transport failures are retried up
  /// to decoding.max_attempts; an empty completion is an error.
  std::string complete(const LlmRequest& request) {
    require(!request.prompt.empty(), "llm", "prompt must be non-empty");
    Slot slot(*this);
    const int attempts = std::max(1, request.decoding.max_attempts);
    std::string last_failure;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      const auto t0 = std::chrono::steady_clock::now();
      std::string text;
      try {
        text = provider_.generate(request);
      } catch (const RetriableFailure& e) {
        last_failure = e.what();
        if (attempt < attempts) std::this_thread::sleep_for(options_.retry_backoff * attempt);
        continue;
      }
      const auto t1 = std::chrono::steady_clock::now();
      LlmExchange ex;
      ex.template_name = request.template_name;
      ex.key = transcript_key(request.template_name, request.variables);
      ex.rendered_prompt = request.prompt;
      ex.response_text = text;
      ex.provider_id = provider_.id();
      ex.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
      log_.append(std::move(ex));
      if (trim(text).empty())
        throw Error(ErrorCode::empty_response, "llm", "provider " + provider_.id() + " returned an empty response");
      return text;
    }
    throw TransportError("transport failed after " + std::to_string(attempts) + " attempts: " + last_failure, attempts);
  }

 private:
  class Slot {
   public:
    explicit Slot(LlmGateway& g) : g_(g) {
      std::unique_lock lock(g_.cap_mu_);
      g_.cap_cv_.wait(lock, [&] { return g_.in_flight_ < std::max<std::size_t>(1, g_.options_.max_in_flight); });
      ++g_.in_flight_;
    }
    ~Slot() {
      {
        std::lock_guard lock(g_.cap_mu_);
        --g_.in_flight_;
      }
      g_.cap_cv_.notify_one();
    }

   private:
    LlmGateway& g_;
  };

  LlmProvider& provider_;
  RunLog& log_;
  Options options_;
  std::mutex cap_mu_;
  std::condition_variable cap_cv_;
  std::size_t in_flight_ = 0;
};

}  // namespace clid
