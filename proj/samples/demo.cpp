// Small end-to-end run: build a toy corpus of lighthouses, inject labeled
// contradictions, score every fact with the three detectors against an
// oracle model, and print the metrics table.
//
//   ./build/samples/clid_demo [n_injected] [seed]

#include <cstdlib>
#include <iostream>
#include <random>

#include "clid/detectors.hpp"
#include "clid/evaluation.hpp"
#include "clid/oracle_provider.hpp"
#include "clid/synthetic.hpp"

using namespace clid;

namespace {

CorpusSnapshot lighthouse_corpus(std::size_t n, std::uint64_t seed) {
  static const char* const kCoasts[] = {"north", "east", "south", "west"};
  static const char* const kMonths[] = {"February", "April", "June", "August", "October", "December"};
  static const char* const kKeepers[] = {"Ada Rusk", "Tobias Fenn", "Mira Holt", "Silas Bray"};
  static const char* const kSyllables[] = {"Kar", "Vel", "Tor", "Ams", "Rin", "Bel", "Sor", "Lun", "Pra", "Quo"};
  std::mt19937_64 rng(seed);
  auto pick = [&](const auto& arr) { return std::string(arr[uniform_below(rng, std::size(arr))]); };

  CorpusSnapshot snap("2024-06-01");
  for (std::size_t i = 0; i < n; ++i) {
    const auto name = std::string(kSyllables[i % 10]) + std::string(kSyllables[(i / 10 + 3) % 10]) + "ness";
    const auto built = 1780 + uniform_below(rng, 120);
    const auto height = 15 + uniform_below(rng, 40);
    const std::vector<std::pair<std::string, std::string>> sections{
        {"History", "The " + name + " lighthouse was built in " + std::to_string(built) + " by " + pick(kKeepers) +
                        ". Its lamp was first lit in " + pick(kMonths) + " " + std::to_string(built + 2) +
                        ". The " + name + " fog bell was installed before the " + name + " radio beacon."},
        {"Structure", "The " + name + " tower stands " + std::to_string(height) + " metres tall on the " +
                          pick(kCoasts) + " coast. The " + name + " lighthouse is a stone tower painted white. " +
                          "The " + name + " keeper's cottage lies " + pick(kCoasts) + " of the tower."}};
    for (const auto& [section, text] : sections) {
      Block b;
      b.doc_title = name + " Lighthouse";
      b.section_path = {section};
      b.text = text;
      b.char_count = utf8_length(text);
      b.category = "Technology";
      b.block_id = make_block_id(b.doc_title, b.section_path, 0);
      snap.add(std::move(b));
    }
  }
  return snap;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 20;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;
  try {
    const auto corpus = lighthouse_corpus(40, seed);
    std::vector<AtomicFact> facts;
    for (const auto& b : corpus.blocks())
      for (auto& f : facts_from_sentences(b)) facts.push_back(std::move(f));

    const auto bench = build_benchmark(corpus, facts, n, n, seed);
    std::cout << "corpus: " << corpus.size() << " blocks, " << facts.size() << " candidate facts\n"
              << "benchmark: " << bench.cases.size() << " injected, " << bench.dataset.size() - bench.cases.size()
              << " clean\n\n";

    OracleRegistry registry;
    registry.add_cases(bench.cases);
    ExactOracleProvider provider(std::move(registry));
    RunLog log;
    LlmGateway llm(provider, log);
    HashingEmbedder embedder(512);
    const auto index = VectorIndex::build(bench.snapshot, embedder);
    DetectionContext ctx{bench.snapshot, index, embedder, llm};

    const DetectorConfig config;
    std::vector<MetricsReport> reports;
    for (auto system : {SystemKind::agent, SystemKind::retrieve_verify, SystemKind::nli_pipeline}) {
      std::vector<DetectionResult> results;
      for (const auto& lf : bench.dataset) results.push_back(run_detector(system, lf.fact, ctx, config));
      reports.push_back(evaluate(bench.dataset, results));
    }
    std::cout << format_metrics_table(reports);
  } catch (const Error& e) {
    std::cerr << "error [" << e.stage() << "] " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
