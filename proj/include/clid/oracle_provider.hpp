#pragma once

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "clid/common.hpp"
#include "clid/llm.hpp"
#include "clid/synthetic.hpp"

namespace clid {

/// Claim -> known refuting statements, both compared modulo whitespace.
class OracleRegistry {
 public:
  void add(std::string_view claim, std::string_view refuting_text) {
    entries_[collapse_whitespace(claim)].insert(collapse_whitespace(refuting_text));
  }

  void add_cases(const std::vector<InjectedCase>& cases) {
    for (const auto& c : cases) add(c.original.claim_text, c.mutated_block.text);
  }

  bool refutes(std::string_view claim, std::string_view passage) const {
    auto it = entries_.find(collapse_whitespace(claim));
    return it != entries_.end() && it->second.count(collapse_whitespace(passage)) > 0;
  }

  /// True iff some refuting statement for `claim` occurs inside `haystack`.
  bool mentioned_in(std::string_view claim, std::string_view haystack) const {
    auto it = entries_.find(collapse_whitespace(claim));
    if (it == entries_.end()) return false;
    const auto hay = collapse_whitespace(haystack);
    for (const auto& r : it->second)
      if (hay.find(r) != std::string::npos) return true;
    return false;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::set<std::string>> entries_;
};

/// Ground-truth stand-in for a model, answering every template from the
/// registry of injected contradictions.
///
/// nli: SUPPORTS when the passage equals the claim, REFUTES when it is a
/// registered mutation of the claim, otherwise NOT_ENOUGH_INFO.
/// verifier / weak_filter: positive iff a registered mutation appears in
/// the documents. controller: search the claim once, report if the
/// observation showed a mutation, otherwise search once more by content
/// words and then stop. Extraction splits sentences; faithfulness checks
/// containment; rerank keeps the order.
class ExactOracleProvider : public LlmProvider {
 public:
  explicit ExactOracleProvider(OracleRegistry registry, std::string id = "exact-oracle")
      : registry_(std::move(registry)), id_(std::move(id)) {}

  std::string id() const override { return id_; }

  const OracleRegistry& registry() const { return registry_; }

  std::string generate(const LlmRequest& req) override {
    const auto& name = req.template_name;
    if (name == "nli") {
      const auto& claim = var(req, "claim_text");
      const auto& passage = var(req, "passage");
      const char* label = "NOT_ENOUGH_INFO";
      if (collapse_whitespace(passage) == collapse_whitespace(claim)) label = "SUPPORTS";
      else if (registry_.refutes(claim, passage)) label = "REFUTES";
      return std::string("<label>") + label + "</label>";
    }
    if (name == "verifier") {
      const bool hit = registry_.mentioned_in(var(req, "claim_text"), var(req, "documents"));
      return std::string("The documents were compared with the claim.\n<inconsistency_score>") +
             (hit ? "1.0" : "0.0") + "</inconsistency_score>";
    }
    if (name == "weak_filter") {
      const bool hit = registry_.mentioned_in(var(req, "claim_text"), var(req, "documents"));
      return std::string("<decision>") + (hit ? "yes" : "no") + "</decision>";
    }
    if (name == "controller") return controller(req);
    if (name == "fact_extraction") {
      std::string out = "<facts>\n";
      for (const auto& s : split_sentences(var(req, "text"))) out += s + "\n";
      return out + "</facts>";
    }
    if (name == "faithfulness") {
      const bool ok =
          collapse_whitespace(var(req, "content")).find(collapse_whitespace(var(req, "claim_text"))) != std::string::npos;
      return std::string("<faithful>") + (ok ? "yes" : "no") + "</faithful>";
    }
    if (name == "rerank") {
      const auto& passages = var(req, "passages");
      std::size_t n = 0;
      while (passages.find("[" + std::to_string(n + 1) + "] Title: ") != std::string::npos) ++n;
      std::string ranking;
      for (std::size_t i = 1; i <= n; ++i) ranking += (i > 1 ? ", " : "") + std::to_string(i);
      return "<ranking>" + ranking + "</ranking>";
    }
    if (name == "explain") return "No specialized terminology needs explaining in \"" + var(req, "topic") + "\".";
    if (name == "clarify")
      return "No similarly named entities were identified for \"" + var(req, "entity_name") + "\".";
    if (name == "report_inconsistent" || name == "report_consistent") {
      const bool hit = registry_.mentioned_in(var(req, "claim_text"), var(req, "documents"));
      const bool pro = name == "report_inconsistent";
      std::string text = hit == pro ? "The evidence supports this side: a registered contradicting statement is "
                                      + std::string(hit ? "present." : "absent.")
                                    : "The evidence does not favour this side.";
      return "<argument>" + text + "</argument>";
    }
    throw Error(ErrorCode::unmatched_prompt, "llm", "exact oracle has no answer for template '" + name + "'");
  }

 private:
  static const std::string& var(const LlmRequest& req, const char* key) {
    auto it = req.variables.find(key);
    if (it == req.variables.end())
      throw Error(ErrorCode::missing_placeholder, "llm",
                  "oracle needs variable '" + std::string(key) + "' for " + req.template_name);
    return it->second;
  }

  std::string controller(const LlmRequest& req) const {
    const auto& claim = var(req, "claim_text");
    const auto& history = var(req, "action_history");
    std::size_t actions = 0;
    for (std::size_t pos = history.find("\nAction: "); pos != std::string::npos; pos = history.find("\nAction: ", pos + 1))
      ++actions;
    if (registry_.mentioned_in(claim, history))
      return "Thought: A retrieved passage contradicts the claim.\nreport_inconsistency(\"contradicting passage found\")";
    if (actions == 0)
      return "Thought: Look for passages about the claim outside its article.\n"
             "search_wikipedia_outside_claim_article(\"" + claim + "\")";
    if (actions == 1)
      return "Thought: Try the key terms alone.\nsearch_wikipedia_outside_claim_article(\"" +
             join(content_tokens(claim), " ") + "\")";
    return "Thought: Nothing contradicts the claim; hand off to verification.\n"
           "report_inconsistency(\"no contradiction found\")";
  }

  OracleRegistry registry_;
  std::string id_;
};

}  // namespace clid
