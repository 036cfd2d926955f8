#pragma once

// Deterministic fixture corpus shared by the unit tests and the acceptance
// runner. Every document is a fictional town with a unique name, so claims
// are distinct and retrieval has a strong lexical anchor.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "clid/corpus.hpp"
#include "clid/detectors.hpp"
#include "clid/embedding.hpp"
#include "clid/facts.hpp"
#include "clid/llm.hpp"

namespace clid::fixtures {

inline std::string town_name(std::size_t i) {
  static const char* const kHead[] = {"Ald", "Bram", "Cor", "Dun", "Elm", "Fen", "Gar", "Hol",
                                      "Ivr", "Kel", "Lor", "Mar", "Nor", "Ost", "Pem", "Quen"};
  static const char* const kTail[] = {"bury", "wick", "stead", "mere", "ford", "holt", "thorpe", "combe"};
  const std::size_t h = std::size(kHead), t = std::size(kTail);
  std::string name = std::string(kHead[i % h]) + kTail[(i / h) % t];
  if (i >= h * t) name += std::to_string(i / (h * t) + 1);
  return name;
}

/// `n_docs` towns with three blocks each (History, Geography, Landmarks).
/// Sentences are built so every mutation operator finds material:
/// integers, months, before/after, compass directions, copulas, names.
inline CorpusSnapshot fixture_snapshot(std::size_t n_docs = 60, std::uint64_t seed = 7) {
  static const char* const kMonths[] = {"January", "March", "May", "July", "September", "November"};
  static const char* const kDirs[] = {"north", "east", "south", "west"};
  static const char* const kRivers[] = {"Marren", "Tolle", "Ashby", "Wenlow", "Corrin", "Peldon"};
  static const char* const kFounders[] = {"Edwin Carrow", "Matilda Voss", "Roderic Hale", "Agnes Pell", "Osric Dunne"};
  static const char* const kCategories[] = {"Technology", "History", "Mathematics"};
  std::mt19937_64 rng(seed);
  CorpusSnapshot snap("2024-01-01");
  for (std::size_t d = 0; d < n_docs; ++d) {
    const auto name = town_name(d);
    auto pick = [&](const auto& arr) { return std::string(arr[uniform_below(rng, std::size(arr))]); };
    const auto year = 1700 + uniform_below(rng, 250);
    const auto pop = 1000 + uniform_below(rng, 9000);
    const auto mills = 2 + uniform_below(rng, 9);
    const auto river = pick(kRivers);
    const auto category = std::string(kCategories[d % 3]);

    std::vector<std::pair<std::string, std::string>> sections{
        {"History", name + " was founded in " + std::to_string(year) + " by " + pick(kFounders) + ". The " + name +
                        " charter was signed in " + pick(kMonths) + " " + std::to_string(year + 3) +
                        ". The " + name + " market opened before the " + name + " railway station."},
        {"Geography", name + " is a market town on the " + pick(kDirs) + " bank of the " + river + " river. " +
                          "The population of " + name + " was " + std::to_string(pop) + " at the last census. " +
                          "The " + name + " moor lies " + pick(kDirs) + " of the town centre."},
        {"Landmarks", "The " + name + " abbey is a ruined priory founded by the Order of " + pick(kRivers) + ". " +
                          name + " once had " + std::to_string(mills) + " working watermills. " + "The " + name +
                          " fair is held every " + pick(kMonths) + " beside the " + river + " ford."}};
    for (const auto& [section, text] : sections) {
      Block b;
      b.doc_title = name;
      b.section_path = {section};
      b.text = text;
      b.char_count = utf8_length(text);
      b.category = category;
      b.block_id = make_block_id(b.doc_title, b.section_path, 0);
      snap.add(std::move(b));
    }
  }
  return snap;
}

inline std::vector<AtomicFact> sentence_facts(const CorpusSnapshot& snap) {
  std::vector<AtomicFact> out;
  for (const auto& b : snap.blocks())
    for (auto& f : facts_from_sentences(b)) out.push_back(std::move(f));
  return out;
}

/// Owns everything a DetectionContext points at.
struct Harness {
  CorpusSnapshot snapshot;
  std::unique_ptr<Embedder> embedder;
  VectorIndex index;
  std::unique_ptr<LlmProvider> provider;
  RunLog log;
  std::unique_ptr<LlmGateway> llm;

  Harness(CorpusSnapshot snap, std::unique_ptr<LlmProvider> p, std::size_t dim = 512)
      : snapshot(std::move(snap)),
        embedder(std::make_unique<HashingEmbedder>(dim)),
        index(VectorIndex::build(snapshot, *embedder)),
        provider(std::move(p)) {
    LlmGateway::Options o;
    o.retry_backoff = std::chrono::milliseconds(0);
    llm = std::make_unique<LlmGateway>(*provider, log, o);
  }

  DetectionContext ctx() { return DetectionContext{snapshot, index, *embedder, *llm}; }
};

}  // namespace clid::fixtures
