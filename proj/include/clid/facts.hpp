#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/corpus.hpp"
#include "clid/llm.hpp"
#include "clid/prompts.hpp"

namespace clid {

struct AtomicFact {
  std::string fact_id;
  std::string claim_text;
  std::string source_block_id;
  std::string context_title;  // source block's full title (doc > sections)
  std::string context_text;   // source block's text
  std::optional<bool> faithful;

  bool operator==(const AtomicFact&) const = default;
};

inline nlohmann::json to_json(const AtomicFact& f) {
  nlohmann::json j{{"fact_id", f.fact_id},
                   {"claim_text", f.claim_text},
                   {"source_block_id", f.source_block_id},
                   {"context_title", f.context_title},
                   {"context_text", f.context_text}};
  j["faithful"] = f.faithful ? nlohmann::json(*f.faithful) : nlohmann::json(nullptr);
  return j;
}

inline AtomicFact fact_from_json(const nlohmann::json& j) {
  AtomicFact f;
  f.fact_id = j.at("fact_id").get<std::string>();
  f.claim_text = j.at("claim_text").get<std::string>();
  f.source_block_id = j.at("source_block_id").get<std::string>();
  f.context_title = j.at("context_title").get<std::string>();
  f.context_text = j.at("context_text").get<std::string>();
  if (j.contains("faithful") && !j["faithful"].is_null()) f.faithful = j["faithful"].get<bool>();
  return f;
}

inline std::string make_fact_id(std::string_view source_block_id, std::size_t ordinal) {
  const auto ord = std::to_string(ordinal);
  return "f" + hex64(hash_fields({source_block_id, ord}));
}

/// Document title of the fact's source article: the snapshot's record when
/// the block is known, otherwise the leading segment of context_title.
inline std::string source_doc_title(const AtomicFact& fact, const CorpusSnapshot* snapshot = nullptr) {
  if (snapshot)
    if (const auto* b = snapshot->find(fact.source_block_id)) return b->doc_title;
  const auto cut = fact.context_title.find(" > ");
  return cut == std::string::npos ? fact.context_title : fact.context_title.substr(0, cut);
}

/// Strips a leading list marker ("- ", "* ", "• ") that models tend to add.
inline std::string strip_bullet(std::string line) {
  for (std::string_view marker : {"- ", "* ", "• "}) {
    if (line.rfind(marker, 0) == 0) return trim(std::string_view(line).substr(marker.size()));
  }
  return line;
}

struct ExtractionOutcome {
  std::vector<AtomicFact> facts;
  std::vector<std::string> warnings;
};

/// One fact per non-empty line of the response's <facts> region, in order.
inline ExtractionOutcome extract_facts_with_warnings(const Block& block, LlmGateway& llm) {
  require(!block.text.empty(), "extraction", "block " + block.block_id + " has empty text");
  const auto response =
      llm.call(prompts::fact_extraction_template(), {{"full_title", block.full_title()}, {"text", block.text}});
  std::string region;
  try {
    region = extract_tagged(response, "facts");
  } catch (const ParseError& e) {
    throw Error(ErrorCode::extraction, "extraction", "block " + block.block_id + ": " + e.what());
  }
  ExtractionOutcome out;
  std::size_t ordinal = 0;
  for (const auto& raw : split_lines(region)) {
    auto line = strip_bullet(trim(raw));
    if (line.empty()) continue;
    AtomicFact f;
    f.fact_id = make_fact_id(block.block_id, ordinal++);
    f.claim_text = std::move(line);
    f.source_block_id = block.block_id;
    f.context_title = block.full_title();
    f.context_text = block.text;
    out.facts.push_back(std::move(f));
  }
  if (out.facts.empty()) out.warnings.push_back("block " + block.block_id + " produced zero facts");
  return out;
}

inline std::vector<AtomicFact> extract_facts(const Block& block, LlmGateway& llm) {
  return extract_facts_with_warnings(block, llm).facts;
}

/// Model-free extraction: one fact per sentence of the block. Ids match
/// what extract_facts assigns to the same ordinal.
inline std::vector<AtomicFact> facts_from_sentences(const Block& block) {
  std::vector<AtomicFact> out;
  std::size_t ordinal = 0;
  for (auto& s : split_sentences(block.text)) {
    AtomicFact f;
    f.fact_id = make_fact_id(block.block_id, ordinal++);
    f.claim_text = std::move(s);
    f.source_block_id = block.block_id;
    f.context_title = block.full_title();
    f.context_text = block.text;
    out.push_back(std::move(f));
  }
  return out;
}

inline std::optional<bool> parse_yes_no(std::string_view s) {
  const auto v = to_lower_ascii(trim(s));
  if (v == "yes" || v == "true") return true;
  if (v == "no" || v == "false") return false;
  return std::nullopt;
}

/// Automated proxy for the human faithfulness screen: asks the provider
/// whether the claim is entailed by its own block and records the answer.
inline bool faithfulness_check(AtomicFact& fact, LlmGateway& llm) {
  require(!trim(fact.context_text).empty(), "faithfulness", "fact " + fact.fact_id + " has no context text");
  const auto response = llm.call(prompts::faithfulness_template(), {{"full_title", fact.context_title},
                                                                    {"content", fact.context_text},
                                                                    {"claim_text", fact.claim_text}});
  std::optional<bool> verdict;
  try {
    verdict = parse_yes_no(extract_tagged(response, "faithful"));
  } catch (const ParseError&) {
  }
  if (!verdict) throw ParseError("faithfulness", "unparseable faithfulness judgment for " + fact.fact_id, response);
  fact.faithful = *verdict;
  return *verdict;
}

/// Facts explicitly judged unfaithful are dropped; unchecked facts pass.
inline std::vector<AtomicFact> drop_unfaithful(std::vector<AtomicFact> facts) {
  std::erase_if(facts, [](const AtomicFact& f) { return f.faithful.has_value() && !*f.faithful; });
  return facts;
}

inline void write_facts(const std::vector<AtomicFact>& facts, std::ostream& out) {
  for (const auto& f : facts) out << to_json(f).dump() << '\n';
}

inline std::vector<AtomicFact> read_facts(std::istream& in) {
  std::vector<AtomicFact> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(fact_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "facts", "bad fact record at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace clid
