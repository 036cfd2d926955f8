#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/corpus.hpp"
#include "clid/embedding.hpp"
#include "clid/facts.hpp"
#include "clid/llm.hpp"
#include "clid/prompts.hpp"

namespace clid {

// --- domain types ------------------------------------------------------------

enum class NliLabel { supports, refutes, not_enough_info };

inline const char* to_string(NliLabel l) {
  switch (l) {
    case NliLabel::supports: return "SUPPORTS";
    case NliLabel::refutes: return "REFUTES";
    case NliLabel::not_enough_info: return "NOT_ENOUGH_INFO";
  }
  return "NOT_ENOUGH_INFO";
}

inline std::optional<NliLabel> parse_nli_label(std::string_view s) {
  auto v = to_lower_ascii(trim(s));
  std::replace(v.begin(), v.end(), ' ', '_');
  if (v == "supports") return NliLabel::supports;
  if (v == "refutes") return NliLabel::refutes;
  if (v == "not_enough_info" || v == "nei") return NliLabel::not_enough_info;
  return std::nullopt;
}

enum class ActionKind { explain, clarify_entity, search, report_inconsistency };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::explain: return "explain";
    case ActionKind::clarify_entity: return "clarify_entity";
    case ActionKind::search: return "search";
    case ActionKind::report_inconsistency: return "report_inconsistency";
  }
  return "search";
}

/// Name the controller prompt uses for the action.
inline const char* controller_name(ActionKind k) {
  return k == ActionKind::search ? "search_wikipedia_outside_claim_article" : to_string(k);
}

struct AgentAction {
  ActionKind kind = ActionKind::search;
  std::string argument;
  bool operator==(const AgentAction&) const = default;
};

struct AgentStep {
  std::string thought;
  AgentAction action;
  std::string observation;
  /// Blocks shown in the observation (search and clarify steps).
  std::vector<std::string> observed_block_ids;
  bool operator==(const AgentStep&) const = default;
};

struct AgentTrace {
  std::vector<AgentStep> steps;
  int budget = 10;
  bool operator==(const AgentTrace&) const = default;
};

enum class SystemKind { agent, retrieve_verify, nli_pipeline };

inline const char* to_string(SystemKind s) {
  switch (s) {
    case SystemKind::agent: return "agent";
    case SystemKind::retrieve_verify: return "retrieve_verify";
    case SystemKind::nli_pipeline: return "nli_pipeline";
  }
  return "agent";
}

/// Accepts the record names and the CLI short forms (agent|rv|nli).
inline std::optional<SystemKind> parse_system(std::string_view s) {
  if (s == "agent") return SystemKind::agent;
  if (s == "retrieve_verify" || s == "rv") return SystemKind::retrieve_verify;
  if (s == "nli_pipeline" || s == "nli") return SystemKind::nli_pipeline;
  return std::nullopt;
}

namespace flags {
inline constexpr const char* kNoEvidence = "no_evidence";
inline constexpr const char* kRerankDegraded = "rerank_degraded";
}  // namespace flags

struct DetectionResult {
  std::string fact_id;
  SystemKind system = SystemKind::agent;
  double score = 0.0;
  std::vector<EvidenceItem> evidence;
  std::vector<std::string> clarifications;
  std::optional<AgentTrace> trace;
  std::optional<int> refute_count;
  /// Passages the run looked at, duplicates included; audits the
  /// evidence-budget parity between systems.
  std::size_t evidence_examined = 0;
  std::vector<std::string> flags;
  std::vector<std::string> warnings;

  bool has_flag(std::string_view f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }
  bool operator==(const DetectionResult&) const = default;
};

struct TwoSidedReport {
  std::optional<std::string> pro_inconsistent;
  std::optional<std::string> pro_consistent;
  std::optional<AgentTrace> trace;
  std::vector<std::string> unavailable;
  bool operator==(const TwoSidedReport&) const = default;
};

// --- serialization -----------------------------------------------------------

inline nlohmann::json to_json(const AgentTrace& t) {
  auto steps = nlohmann::json::array();
  for (const auto& s : t.steps)
    steps.push_back({{"thought", s.thought},
                     {"action", {{"kind", to_string(s.action.kind)}, {"argument", s.action.argument}}},
                     {"observation", s.observation},
                     {"observed_block_ids", s.observed_block_ids}});
  return {{"budget", t.budget}, {"steps", steps}};
}

inline AgentTrace trace_from_json(const nlohmann::json& j) {
  AgentTrace t;
  t.budget = j.at("budget").get<int>();
  for (const auto& s : j.at("steps")) {
    AgentStep step;
    step.thought = s.at("thought").get<std::string>();
    const auto kind = s.at("action").at("kind").get<std::string>();
    if (kind == "explain") step.action.kind = ActionKind::explain;
    else if (kind == "clarify_entity") step.action.kind = ActionKind::clarify_entity;
    else if (kind == "search") step.action.kind = ActionKind::search;
    else if (kind == "report_inconsistency") step.action.kind = ActionKind::report_inconsistency;
    else throw Error(ErrorCode::parse, "results", "unknown action kind " + kind);
    step.action.argument = s.at("action").at("argument").get<std::string>();
    step.observation = s.at("observation").get<std::string>();
    step.observed_block_ids = s.value("observed_block_ids", std::vector<std::string>{});
    t.steps.push_back(std::move(step));
  }
  return t;
}

inline nlohmann::json to_json(const DetectionResult& r) {
  nlohmann::json j;
  j["fact_id"] = r.fact_id;
  j["system"] = to_string(r.system);
  j["score"] = r.score;
  auto ev = nlohmann::json::array();
  for (const auto& e : r.evidence) ev.push_back(to_json(e));
  j["evidence"] = ev;
  j["clarifications"] = r.clarifications;
  j["trace"] = r.trace ? to_json(*r.trace) : nlohmann::json(nullptr);
  j["refute_count"] = r.refute_count ? nlohmann::json(*r.refute_count) : nlohmann::json(nullptr);
  j["evidence_examined"] = r.evidence_examined;
  j["flags"] = r.flags;
  j["warnings"] = r.warnings;
  return j;
}

inline DetectionResult result_from_json(const nlohmann::json& j) {
  DetectionResult r;
  r.fact_id = j.at("fact_id").get<std::string>();
  const auto sys = parse_system(j.at("system").get<std::string>());
  if (!sys) throw Error(ErrorCode::parse, "results", "unknown system " + j.at("system").dump());
  r.system = *sys;
  r.score = j.at("score").get<double>();
  if (!(r.score >= 0.0 && r.score <= 1.0))
    throw Error(ErrorCode::parse, "results", "score out of [0,1] for " + r.fact_id);
  for (const auto& e : j.at("evidence")) r.evidence.push_back(evidence_from_json(e));
  r.clarifications = j.value("clarifications", std::vector<std::string>{});
  if (j.contains("trace") && !j["trace"].is_null()) r.trace = trace_from_json(j["trace"]);
  if (j.contains("refute_count") && !j["refute_count"].is_null()) r.refute_count = j["refute_count"].get<int>();
  r.evidence_examined = j.value("evidence_examined", std::size_t{0});
  r.flags = j.value("flags", std::vector<std::string>{});
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

inline nlohmann::json to_json(const TwoSidedReport& r) {
  nlohmann::json j;
  j["pro_inconsistent"] = r.pro_inconsistent ? nlohmann::json(*r.pro_inconsistent) : nlohmann::json(nullptr);
  j["pro_consistent"] = r.pro_consistent ? nlohmann::json(*r.pro_consistent) : nlohmann::json(nullptr);
  j["trace"] = r.trace ? to_json(*r.trace) : nlohmann::json(nullptr);
  j["unavailable"] = r.unavailable;
  return j;
}

inline TwoSidedReport report_from_json(const nlohmann::json& j) {
  TwoSidedReport r;
  if (!j.at("pro_inconsistent").is_null()) r.pro_inconsistent = j["pro_inconsistent"].get<std::string>();
  if (!j.at("pro_consistent").is_null()) r.pro_consistent = j["pro_consistent"].get<std::string>();
  if (j.contains("trace") && !j["trace"].is_null()) r.trace = trace_from_json(j["trace"]);
  r.unavailable = j.value("unavailable", std::vector<std::string>{});
  return r;
}

// --- configuration -----------------------------------------------------------

struct DetectorConfig {
  int budget = 10;
  std::size_t k_search = 15;
  std::size_t k_baseline = 20;
  std::size_t k_clarify = 10;
  bool rerank = true;
  int count_threshold = 1;
  ScoreMode score_mode = ScoreMode::strict;
  /// Clarify drops retrieved passages at or below this similarity.
  double clarify_min_similarity = 0.0;
};

/// Read-only corpus state plus the model gateway a detector run needs.
struct DetectionContext {
  const CorpusSnapshot& snapshot;
  const VectorIndex& index;
  Embedder& embedder;
  LlmGateway& llm;
};

namespace detail {

inline std::map<std::string, std::string> claim_variables(const AtomicFact& fact) {
  return {{"full_title", fact.context_title}, {"content", fact.context_text}, {"claim_text", fact.claim_text}};
}

inline std::string format_clarifications(const std::vector<std::string>& clarifications) {
  std::string out;
  for (std::size_t i = 0; i < clarifications.size(); ++i) {
    if (i) out += "\n\n";
    out += "[" + std::to_string(i + 1) + "] " + clarifications[i];
  }
  return out;
}

/// Retrieval for one query, optionally reranked; records degradation.
inline std::vector<EvidenceItem> retrieve(const AtomicFact& fact, std::string_view query, std::size_t k,
                                          bool use_rerank, const DetectionContext& ctx, DetectionResult& result) {
  std::vector<EvidenceItem> items;
  try {
    items = ctx.index.search(query, k, ctx.embedder, source_doc_title(fact, &ctx.snapshot));
  } catch (const Error& e) {
    throw e.with_stage("retrieval");
  }
  if (use_rerank && !items.empty()) {
    RerankResult rr;
    try {
      rr = rerank(query, items, ctx.snapshot, ctx.llm);
    } catch (const Error& e) {
      throw e.with_stage("rerank");
    }
    if (rr.degraded) {
      if (!result.has_flag(flags::kRerankDegraded)) result.flags.push_back(flags::kRerankDegraded);
      result.warnings.push_back("rerank degraded: " + rr.note);
    }
    items = std::move(rr.items);
  }
  return items;
}

}  // namespace detail

// --- verification ------------------------------------------------------------

/// Single verifier call over all evidence (in list order) and
/// clarifications; returns the parsed inconsistency score.
inline double verify(const AtomicFact& fact, const std::vector<EvidenceItem>& evidence,
                     const std::vector<std::string>& clarifications, const DetectionContext& ctx,
                     ScoreMode mode = ScoreMode::strict, std::vector<std::string>* warnings = nullptr) {
  require(!evidence.empty(), "verify", "verification needs at least one evidence item");
  require(!fact.context_text.empty(), "verify", "fact " + fact.fact_id + " has no context");
  auto vars = detail::claim_variables(fact);
  vars["clarifications"] = detail::format_clarifications(clarifications);
  vars["documents"] = format_documents(ctx.snapshot, evidence);
  try {
    const auto response = ctx.llm.call(prompts::verifier_template(), vars);
    auto parsed = parse_score(extract_tagged(response, "inconsistency_score"), mode);
    if (parsed.warning && warnings) warnings->push_back(*parsed.warning);
    return parsed.value;
  } catch (const ParseError& e) {
    throw Error(ErrorCode::verification, "verify", "fact " + fact.fact_id + ": " + e.what());
  } catch (const Error& e) {
    throw e.with_stage("verify");
  }
}

/// Retrieve k passages outside the source article, optionally rerank, then
/// one verification call. Zero evidence scores 0.0 with a no_evidence flag.
inline DetectionResult run_retrieve_and_verify(const AtomicFact& fact, const DetectionContext& ctx,
                                               std::size_t k = 20, bool use_rerank = true,
                                               ScoreMode mode = ScoreMode::strict) {
  DetectionResult result;
  result.fact_id = fact.fact_id;
  result.system = SystemKind::retrieve_verify;
  result.evidence = detail::retrieve(fact, fact.claim_text, k, use_rerank, ctx, result);
  result.evidence_examined = result.evidence.size();
  if (result.evidence.empty()) {
    result.score = 0.0;
    result.flags.push_back(flags::kNoEvidence);
    return result;
  }
  result.score = verify(fact, result.evidence, {}, ctx, mode, &result.warnings);
  return result;
}

inline NliLabel nli_classify(const AtomicFact& fact, std::string_view passage_text, LlmGateway& llm) {
  require(!trim(passage_text).empty(), "nli", "passage must be non-empty");
  auto vars = detail::claim_variables(fact);
  vars["passage"] = std::string(passage_text);
  const auto response = llm.call(prompts::nli_template(), vars);
  std::optional<NliLabel> label;
  try {
    label = parse_nli_label(extract_tagged(response, "label"));
  } catch (const ParseError&) {
  }
  if (!label) throw Error(ErrorCode::classification, "nli", "unparseable NLI label for " + fact.fact_id);
  return *label;
}

/// Classifies each retrieved passage independently. refute_count counts
/// REFUTES; score = refute_count / k so a count threshold maps onto a score
/// sweep. Per-passage failures are recorded and skipped.
inline DetectionResult run_nli_pipeline(const AtomicFact& fact, const DetectionContext& ctx, std::size_t k = 20,
                                        int count_threshold = 1) {
  require(count_threshold >= 1, "nli", "count_threshold must be at least 1");
  require(k >= 1, "nli", "k must be at least 1");
  DetectionResult result;
  result.fact_id = fact.fact_id;
  result.system = SystemKind::nli_pipeline;
  result.evidence = detail::retrieve(fact, fact.claim_text, k, false, ctx, result);
  result.evidence_examined = result.evidence.size();
  int refutes = 0;
  std::size_t failures = 0;
  for (const auto& item : result.evidence) {
    try {
      if (nli_classify(fact, ctx.snapshot.at(item.block_id).text, ctx.llm) == NliLabel::refutes) ++refutes;
    } catch (const Error& e) {
      ++failures;
      result.warnings.push_back("nli failed for " + item.block_id + ": " + e.what());
    }
  }
  if (!result.evidence.empty() && failures == result.evidence.size())
    throw Error(ErrorCode::pipeline, "nli", "every passage failed classification for " + fact.fact_id);
  if (result.evidence.empty()) result.flags.push_back(flags::kNoEvidence);
  result.refute_count = refutes;
  result.score = static_cast<double>(refutes) / static_cast<double>(k);
  return result;
}

inline bool nli_decision(int refute_count, int count_threshold) { return refute_count >= count_threshold; }

// --- agent tools -------------------------------------------------------------

inline std::string tool_explain(std::string_view topic, const AtomicFact& fact, LlmGateway& llm) {
  require(!trim(topic).empty(), "explain", "topic must be non-empty");
  const auto response = llm.call(prompts::explain_template(), {{"topic", trim(topic)},
                                                               {"full_title", fact.context_title},
                                                               {"content", fact.context_text}});
  auto text = trim(response);
  if (text.empty()) throw Error(ErrorCode::tool, "explain", "explain returned nothing");
  return text;
}

struct ClarifyOutcome {
  std::string report;
  std::vector<std::string> block_ids;
};

inline constexpr const char* kNoEvidenceNote = "No search results were found for this entity in the corpus.";

/// Retrieves k passages for the entity (no article exclusion) and asks for
/// a disambiguation report. Passages at or below `min_similarity` are
/// dropped; if none remain the report is written from context alone and
/// prefixed with a no-evidence note.
inline ClarifyOutcome tool_clarify_detailed(std::string_view entity_description, const AtomicFact& fact,
                                            const DetectionContext& ctx, std::size_t k = 10,
                                            double min_similarity = 0.0) {
  require(!trim(entity_description).empty(), "clarify", "entity description must be non-empty");
  auto items = ctx.index.search(entity_description, k, ctx.embedder);
  std::erase_if(items, [&](const EvidenceItem& e) { return e.similarity <= min_similarity; });
  ClarifyOutcome out;
  for (const auto& e : items) out.block_ids.push_back(e.block_id);
  const auto results = items.empty() ? std::string(kNoEvidenceNote) : format_documents(ctx.snapshot, items);
  const auto response = ctx.llm.call(prompts::clarify_template(), {{"entity_name", trim(entity_description)},
                                                                   {"full_title", fact.context_title},
                                                                   {"content", fact.context_text},
                                                                   {"search_results", results}});
  out.report = trim(response);
  if (out.report.empty()) throw Error(ErrorCode::tool, "clarify", "clarify returned nothing");
  if (items.empty()) out.report = std::string(kNoEvidenceNote) + "\n" + out.report;
  return out;
}

inline std::string tool_clarify(std::string_view entity_description, const AtomicFact& fact,
                                const DetectionContext& ctx, std::size_t k = 10) {
  return tool_clarify_detailed(entity_description, fact, ctx, k).report;
}

// --- agent -------------------------------------------------------------------

struct ParsedControllerOutput {
  std::string thought;
  AgentAction action;
};

/// First line of the form `name(argument)` with a known action name.
/// Leading "Action:" labels, backticks and quotes around the argument are
/// tolerated; `key=value` argument syntax is unwrapped.
inline std::optional<ParsedControllerOutput> parse_controller_output(std::string_view response) {
  std::vector<std::string> thought_lines;
  for (auto line : split_lines(response)) {
    auto l = trim(line);
    if (l.rfind("Action:", 0) == 0) l = trim(std::string_view(l).substr(7));
    while (!l.empty() && l.front() == '`') l.erase(l.begin());
    while (!l.empty() && l.back() == '`') l.pop_back();
    const auto open = l.find('(');
    if (open != std::string::npos && !l.empty() && l.back() == ')') {
      const auto name = trim(std::string_view(l).substr(0, open));
      std::optional<ActionKind> kind;
      if (name == "explain") kind = ActionKind::explain;
      else if (name == "clarify_entity") kind = ActionKind::clarify_entity;
      else if (name == "search_wikipedia_outside_claim_article" || name == "search") kind = ActionKind::search;
      else if (name == "report_inconsistency") kind = ActionKind::report_inconsistency;
      if (kind) {
        auto arg = trim(std::string_view(l).substr(open + 1, l.size() - open - 2));
        if (auto eq = arg.find('='); eq != std::string::npos) {
          const auto key = trim(std::string_view(arg).substr(0, eq));
          if (!key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
              }))
            arg = trim(std::string_view(arg).substr(eq + 1));
        }
        if (arg.size() >= 2 && (arg.front() == '"' || arg.front() == '\'') && arg.back() == arg.front())
          arg = arg.substr(1, arg.size() - 2);
        auto thought = trim(join(thought_lines, "\n"));
        if (thought.rfind("Thought:", 0) == 0) thought = trim(std::string_view(thought).substr(8));
        return ParsedControllerOutput{std::move(thought), AgentAction{*kind, std::move(arg)}};
      }
    }
    thought_lines.push_back(std::string(line));
  }
  return std::nullopt;
}

/// ReAct loop: thought -> action -> observation, driven by the controller
/// prompt, for at most `budget` steps or until report_inconsistency. A
/// final verifier call over all accumulated evidence and clarifications
/// produces the score; the report itself never sets it.
inline DetectionResult run_agent(const AtomicFact& fact, const DetectionContext& ctx,
                                 const DetectorConfig& config = {}) {
  require(config.budget >= 1, "agent", "budget must be at least 1");
  DetectionResult result;
  result.fact_id = fact.fact_id;
  result.system = SystemKind::agent;
  AgentTrace trace;
  trace.budget = config.budget;
  const auto source_title = source_doc_title(fact, &ctx.snapshot);
  std::set<std::string> seen;
  std::string history;

  for (int step_no = 0; step_no < config.budget; ++step_no) {
    auto vars = detail::claim_variables(fact);
    vars["action_history"] = history.empty() ? std::string() : "Actions you have taken so far:\n\n" + history;
    vars["format_reminder"] = "";
    std::optional<ParsedControllerOutput> parsed;
    try {
      parsed = parse_controller_output(ctx.llm.call(prompts::controller_template(), vars));
      if (!parsed) {
        vars["format_reminder"] = prompts::kControllerFormatReminder;
        parsed = parse_controller_output(ctx.llm.call(prompts::controller_template(), vars));
      }
    } catch (const Error& e) {
      throw e.with_stage("controller");
    }
    if (!parsed)
      throw Error(ErrorCode::agent, "controller",
                  "controller produced no recognizable action after a format reminder (fact " + fact.fact_id + ")");

    AgentStep step;
    step.thought = parsed->thought;
    step.action = parsed->action;
    try {
      switch (step.action.kind) {
        case ActionKind::search: {
          auto items = detail::retrieve(fact, step.action.argument, config.k_search, config.rerank, ctx, result);
          result.evidence_examined += items.size();
          step.observation = items.empty() ? "No results." : format_documents(ctx.snapshot, items);
          for (const auto& item : items) {
            step.observed_block_ids.push_back(item.block_id);
            if (seen.insert(item.block_id).second) {
              auto e = item;
              e.rank = static_cast<int>(result.evidence.size() + 1);
              e.rerank_rank.reset();
              result.evidence.push_back(std::move(e));
            }
          }
          break;
        }
        case ActionKind::explain:
          step.observation = tool_explain(step.action.argument, fact, ctx.llm);
          result.clarifications.push_back(step.observation);
          break;
        case ActionKind::clarify_entity: {
          auto c = tool_clarify_detailed(step.action.argument, fact, ctx, config.k_clarify,
                                         config.clarify_min_similarity);
          step.observation = c.report;
          step.observed_block_ids = std::move(c.block_ids);
          result.clarifications.push_back(step.observation);
          break;
        }
        case ActionKind::report_inconsistency:
          step.observation = "Inconsistency reported; handing off to verification.";
          break;
      }
    } catch (const Error& e) {
      step.observation = std::string("tool failed: ") + e.what();
    }
    history += "Thought: " + step.thought + "\nAction: " + controller_name(step.action.kind) + "(\"" +
               step.action.argument + "\")\nObservation: " + step.observation + "\n\n";
    const bool reported = step.action.kind == ActionKind::report_inconsistency;
    trace.steps.push_back(std::move(step));
    if (reported) break;
  }

  // Search observations must never reach into the claim's own article.
  for (const auto& s : trace.steps)
    if (s.action.kind == ActionKind::search)
      for (const auto& id : s.observed_block_ids)
        if (ctx.snapshot.at(id).doc_title == source_title)
          throw Error(ErrorCode::agent, "agent", "search observation leaked source-article block " + id);

  result.trace = std::move(trace);
  if (result.evidence.empty()) {
    result.score = 0.0;
    result.flags.push_back(flags::kNoEvidence);
    return result;
  }
  result.score = verify(fact, result.evidence, result.clarifications, ctx, config.score_mode, &result.warnings);
  return result;
}

inline DetectionResult run_detector(SystemKind system, const AtomicFact& fact, const DetectionContext& ctx,
                                    const DetectorConfig& config) {
  switch (system) {
    case SystemKind::agent: return run_agent(fact, ctx, config);
    case SystemKind::retrieve_verify:
      return run_retrieve_and_verify(fact, ctx, config.k_baseline, config.rerank, config.score_mode);
    case SystemKind::nli_pipeline: return run_nli_pipeline(fact, ctx, config.k_baseline, config.count_threshold);
  }
  throw Error(ErrorCode::invalid_argument, "detect", "unknown system");
}

// --- dataset-construction helpers --------------------------------------------

/// Permissive candidate filter: one retrieval plus one binary decision.
/// True keeps the fact as an inconsistency candidate; facts with no
/// retrieved evidence are dropped.
inline bool weak_filter(const AtomicFact& fact, const DetectionContext& ctx, std::size_t k = 20) {
  DetectionResult scratch;
  const auto items = detail::retrieve(fact, fact.claim_text, k, false, ctx, scratch);
  if (items.empty()) return false;
  auto vars = detail::claim_variables(fact);
  vars["documents"] = format_documents(ctx.snapshot, items);
  const auto response = ctx.llm.call(prompts::weak_filter_template(), vars);
  std::optional<bool> keep;
  try {
    keep = parse_yes_no(extract_tagged(response, "decision"));
  } catch (const ParseError&) {
  }
  if (!keep) throw Error(ErrorCode::verification, "weak_filter", "unparseable weak-filter decision for " + fact.fact_id);
  return *keep;
}

/// Two provider calls arguing each side, packaged with the agent trace.
/// A failed side is reported unavailable; the other side is kept.
inline TwoSidedReport generate_report(const AtomicFact& fact, const DetectionResult& result,
                                      const DetectionContext& ctx) {
  TwoSidedReport report;
  report.trace = result.trace;
  auto vars = detail::claim_variables(fact);
  vars["clarifications"] = detail::format_clarifications(result.clarifications);
  vars["documents"] = format_documents(ctx.snapshot, result.evidence);
  auto side = [&](const PromptTemplate& tpl, std::optional<std::string>& slot, const char* label) {
    try {
      const auto response = ctx.llm.call(tpl, vars);
      try {
        slot = extract_tagged(response, "argument");
      } catch (const ParseError&) {
        slot = trim(response);
      }
    } catch (const Error& e) {
      report.unavailable.push_back(std::string(label) + ": " + e.what());
    }
  };
  side(prompts::report_inconsistent_template(), report.pro_inconsistent, "pro_inconsistent");
  side(prompts::report_consistent_template(), report.pro_consistent, "pro_consistent");
  return report;
}

}  // namespace clid
