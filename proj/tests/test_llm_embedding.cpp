#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "clid/embedding.hpp"
#include "clid/llm.hpp"
#include "clid/prompts.hpp"
#include "support/fixtures.hpp"

using namespace clid;

namespace {

PromptTemplate tiny_template() {
  PromptTemplate t;
  t.name = "tiny";
  t.instruction = "Answer briefly.";
  t.few_shot = {{"Claim: a", "<x>1</x>"}};
  t.input_slot = "Claim: {{ claim }}\nContext: {{context}}";
  t.placeholders = {"claim", "context"};
  return t;
}

LlmGateway::Options fast() {
  LlmGateway::Options o;
  o.retry_backoff = std::chrono::milliseconds(0);
  return o;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

// --- prompts -----------------------------------------------------------------------------

TEST(Prompt, RendersSectionsInOrder) {
  const auto out = render_prompt(tiny_template(), {{"claim", "X"}, {"context", "Y"}});
  EXPECT_EQ(out, "# instruction\nAnswer briefly.\n\n# input\nClaim: a\n\n# output\n<x>1</x>\n\n# input\nClaim: X\nContext: Y");
  EXPECT_EQ(out, render_prompt(tiny_template(), {{"claim", "X"}, {"context", "Y"}}));
}

TEST(Prompt, MissingAndUndeclaredPlaceholders) {
  try {
    render_prompt(tiny_template(), {{"claim", "X"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_placeholder);
    EXPECT_NE(std::string(e.what()).find("context"), std::string::npos);
  }
  auto bad = tiny_template();
  bad.placeholders = {"claim"};
  EXPECT_THROW(validate_template(bad), Error);
}

TEST(Prompt, UnusedVariablesAreReported) {
  std::vector<std::string> warnings;
  render_prompt(tiny_template(), {{"claim", "X"}, {"context", "Y"}, {"extra", "Z"}}, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("extra"), std::string::npos);
}

TEST(Prompt, ShippedTemplatesAreValidAndNamed) {
  std::set<std::string> names;
  for (const auto* t : prompts::all_templates()) {
    EXPECT_NO_THROW(validate_template(*t)) << t->name;
    EXPECT_FALSE(t->instruction.empty()) << t->name;
    names.insert(t->name);
  }
  for (const char* n : {"fact_extraction", "explain", "clarify", "verifier", "controller", "nli", "faithfulness",
                        "weak_filter", "rerank", "report_inconsistent", "report_consistent"})
    EXPECT_TRUE(names.count(n)) << n;
  EXPECT_TRUE(prompts::controller_template().published_verbatim);
  EXPECT_FALSE(prompts::rerank_template().published_verbatim);
}

TEST(Prompt, ControllerNamesEveryTool) {
  const auto& t = prompts::controller_template();
  for (const char* tool : {"explain", "clarify_entity", "search_wikipedia_outside_claim_article", "report_inconsistency"})
    EXPECT_NE(t.instruction.find(tool), std::string::npos) << tool;
}

TEST(Tagged, ExtractsFirstRegion) {
  EXPECT_EQ(extract_tagged("noise <score> 0.7 </score> <score>0.1</score>", "score"), "0.7");
  EXPECT_THROW(extract_tagged("none", "score"), ParseError);
  EXPECT_THROW(extract_tagged("<score>0.5", "score"), ParseError);
  EXPECT_THROW(extract_tagged("<a>b</a>", "a b"), Error);
}

TEST(Score, StrictAndLenient) {
  EXPECT_DOUBLE_EQ(parse_score(" 0.25 ", ScoreMode::strict).value, 0.25);
  EXPECT_DOUBLE_EQ(parse_score("1", ScoreMode::strict).value, 1.0);
  EXPECT_THROW(parse_score("high", ScoreMode::strict), ParseError);
  EXPECT_THROW(parse_score("1.2", ScoreMode::strict), ParseError);
  EXPECT_THROW(parse_score("0.5x", ScoreMode::strict), ParseError);
  EXPECT_THROW(parse_score("nan", ScoreMode::strict), ParseError);
  const auto clamped = parse_score("1.2", ScoreMode::lenient);
  EXPECT_DOUBLE_EQ(clamped.value, 1.0);
  EXPECT_TRUE(clamped.warning.has_value());
  const auto zeroed = parse_score("unsure", ScoreMode::lenient);
  EXPECT_DOUBLE_EQ(zeroed.value, 0.0);
  EXPECT_TRUE(zeroed.warning.has_value());
}

// --- providers and gateway ------------------------------------------------------------------

TEST(Scripted, KeyedLookupIgnoresTemplateWording) {
  ScriptedProvider p;
  p.add_for("tiny", {{"claim", "X"}, {"context", "Y"}}, "<x>yes</x>");
  RunLog log;
  LlmGateway llm(p, log, fast());
  EXPECT_EQ(llm.call(tiny_template(), {{"claim", "X"}, {"context", "Y"}}), "<x>yes</x>");
  auto reworded = tiny_template();
  reworded.instruction = "Different words.";
  EXPECT_EQ(llm.call(reworded, {{"claim", "X"}, {"context", "Y"}}), "<x>yes</x>");
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log.entries()[0].key, transcript_key("tiny", {{"claim", "X"}, {"context", "Y"}}));
}

TEST(Scripted, UnmatchedPromptNamesNearestKey) {
  ScriptedProvider p;
  p.add_for("tiny", {{"claim", "X"}, {"context", "Y"}}, "r");
  RunLog log;
  LlmGateway llm(p, log, fast());
  try {
    llm.call(tiny_template(), {{"claim", "Z"}, {"context", "Y"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unmatched_prompt);
    EXPECT_NE(std::string(e.what()).find("nearest: tiny:"), std::string::npos);
  }
}

TEST(Scripted, StrictModeKeysOnRenderedPrompt) {
  ScriptedProvider p(ScriptedProvider::Mode::strict_prompt);
  const auto prompt = render_prompt(tiny_template(), {{"claim", "X"}, {"context", "Y"}});
  p.add(strict_transcript_key("tiny", prompt), "ok");
  RunLog log;
  LlmGateway llm(p, log, fast());
  EXPECT_EQ(llm.call(tiny_template(), {{"claim", "X"}, {"context", "Y"}}), "ok");
  auto reworded = tiny_template();
  reworded.instruction = "Different words.";
  EXPECT_THROW(llm.call(reworded, {{"claim", "X"}, {"context", "Y"}}), Error);
}

TEST(Scripted, QueuesServeInOrderAfterKeys) {
  ScriptedProvider p;
  p.enqueue("tiny", "first");
  p.enqueue("tiny", "second");
  RunLog log;
  LlmGateway llm(p, log, fast());
  EXPECT_EQ(llm.call(tiny_template(), {{"claim", "a"}, {"context", "b"}}), "first");
  EXPECT_EQ(llm.call(tiny_template(), {{"claim", "a"}, {"context", "b"}}), "second");
  EXPECT_THROW(llm.call(tiny_template(), {{"claim", "a"}, {"context", "b"}}), Error);
}

TEST(Scripted, TranscriptLoadingAndReplay) {
  std::stringstream in;
  in << nlohmann::json{{"key", transcript_key("tiny", {{"claim", "X"}, {"context", "Y"}})}, {"response", "R"}}.dump()
     << "\n\n";
  ScriptedProvider p;
  p.load_transcript(in);
  RunLog log;
  LlmGateway llm(p, log, fast());
  EXPECT_EQ(llm.call(tiny_template(), {{"claim", "X"}, {"context", "Y"}}), "R");

  auto replay = ScriptedProvider::from_run_log(log.entries());
  RunLog log2;
  LlmGateway llm2(*replay, log2, fast());
  EXPECT_EQ(llm2.call(tiny_template(), {{"claim", "X"}, {"context", "Y"}}), "R");

  std::stringstream bad("{\"key\": 1}\n");
  EXPECT_THROW(p.load_transcript(bad), Error);
}

TEST(Gateway, RetriesTransientFailuresThenSucceeds) {
  int calls = 0;
  FunctionProvider p("flaky", [&](const LlmRequest&) -> std::string {
    if (++calls < 3) throw RetriableFailure("503");
    return "fine";
  });
  RunLog log;
  LlmGateway llm(p, log, fast());
  EXPECT_EQ(llm.call(tiny_template(), {{"claim", "a"}, {"context", "b"}}), "fine");
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(log.size(), 1u);
}

TEST(Gateway, GivesUpWithTransportError) {
  FunctionProvider p("down", [](const LlmRequest&) -> std::string { throw RetriableFailure("refused"); });
  RunLog log;
  LlmGateway llm(p, log, fast());
  try {
    llm.call(tiny_template(), {{"claim", "a"}, {"context", "b"}});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.code(), ErrorCode::transport);
  }
  EXPECT_EQ(log.size(), 0u);
}

TEST(Gateway, EmptyResponseIsLoggedAndRejected) {
  FunctionProvider p("blank", [](const LlmRequest&) { return std::string("  \n"); });
  RunLog log;
  LlmGateway llm(p, log, fast());
  try {
    llm.call(tiny_template(), {{"claim", "a"}, {"context", "b"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_response);
  }
  EXPECT_EQ(log.size(), 1u);
}

TEST(Gateway, InFlightCapIsRespected) {
  std::atomic<int> now{0}, peak{0};
  FunctionProvider p("slow", [&](const LlmRequest&) {
    const int v = ++now;
    int prev = peak.load();
    while (v > prev && !peak.compare_exchange_weak(prev, v)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --now;
    return std::string("ok");
  });
  RunLog log;
  auto o = fast();
  o.max_in_flight = 2;
  LlmGateway llm(p, log, o);
  std::vector<std::thread> ts;
  for (int i = 0; i < 6; ++i)
    ts.emplace_back([&, i] { llm.call(tiny_template(), {{"claim", std::to_string(i)}, {"context", "c"}}); });
  for (auto& t : ts) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(log.size(), 6u);
}

TEST(RunLogFile, SinkWritesOneLinePerExchange) {
  std::stringstream sink;
  RunLog log(&sink);
  ScriptedProvider p;
  p.enqueue("tiny", "a");
  p.enqueue("tiny", "b");
  LlmGateway llm(p, log, fast());
  llm.call(tiny_template(), {{"claim", "1"}, {"context", "c"}});
  llm.call(tiny_template(), {{"claim", "2"}, {"context", "c"}});
  const auto back = read_run_log(sink);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].response_text, "b");
  EXPECT_EQ(back[0].provider_id, "scripted");
}

TEST(EditDistance, Levenshtein) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("same", "same"), 0u);
}

// --- embedding and index ------------------------------------------------------------------

TEST(HashingEmbedder, DeterministicUnitNorm) {
  HashingEmbedder e(64);
  const auto a = e.embed("The mill on the river");
  EXPECT_EQ(a, e.embed("the MILL on the river!"));
  double n = 0;
  for (float v : a) n += static_cast<double>(v) * v;
  EXPECT_NEAR(n, 1.0, 1e-6);
  const auto z = e.embed("... !!!");
  EXPECT_TRUE(std::all_of(z.begin(), z.end(), [](float v) { return v == 0.0f; }));
  EXPECT_THROW(HashingEmbedder(0), Error);
}

TEST(HashingEmbedder, SharedWordsRaiseSimilarity) {
  HashingEmbedder e(512);
  const auto q = e.embed("Aldbury market town river");
  EXPECT_GT(cosine(q, e.embed("Aldbury is a market town on a river")), cosine(q, e.embed("A comet passed the glacier")));
}

TEST(Index, SearchMatchesBruteForceOracle) {
  const auto snap = fixtures::fixture_snapshot(15, 2);
  HashingEmbedder e(256);
  const auto index = VectorIndex::build(snap, e);
  ASSERT_EQ(index.size(), snap.size());
  const std::string query = "Fenbury population census";
  const auto q = e.embed(query);
  std::vector<std::pair<double, std::string>> oracle;
  for (const auto& b : snap.blocks()) oracle.emplace_back(cosine(q, e.embed(b.text)), b.block_id);
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  const auto got = index.search(query, 10, e);
  ASSERT_EQ(got.size(), 10u);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i].similarity, oracle[i].first, 1e-6);
    EXPECT_EQ(got[i].rank, static_cast<int>(i + 1));
    EXPECT_EQ(got[i].block_id, oracle[i].second);
  }
}

TEST(Index, TiesBreakByBlockId) {
  CorpusSnapshot snap("2024-01-01");
  for (const char* id : {"b3", "b1", "b2"}) {
    Block b;
    b.block_id = id;
    b.doc_title = std::string("Doc ") + id;
    b.text = "identical text here";
    snap.add(b);
  }
  HashingEmbedder e(32);
  const auto index = VectorIndex::build(snap, e);
  const auto got = index.search("identical text", 3, e);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].block_id, "b1");
  EXPECT_EQ(got[1].block_id, "b2");
  EXPECT_EQ(got[2].block_id, "b3");
}

TEST(Index, ExclusionRemovesWholeDocument) {
  const auto snap = fixtures::fixture_snapshot(10, 2);
  HashingEmbedder e(256);
  const auto index = VectorIndex::build(snap, e);
  const auto title = fixtures::town_name(3);
  const auto got = index.search(title + " abbey", snap.size(), e, title);
  EXPECT_EQ(got.size(), snap.size() - 3);
  for (const auto& item : got) EXPECT_NE(snap.at(item.block_id).doc_title, title);
  const auto with = index.search(title + " abbey", 1, e);
  EXPECT_EQ(snap.at(with[0].block_id).doc_title, title);
}

TEST(Index, RejectsBadQueries) {
  const auto snap = fixtures::fixture_snapshot(2, 2);
  HashingEmbedder e(64);
  const auto index = VectorIndex::build(snap, e);
  EXPECT_THROW(index.search("x", 0, e), Error);
  EXPECT_THROW(index.search("   ", 3, e), Error);
  try {
    index.search("?!", 3, e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::zero_vector);
  }
  HashingEmbedder other(32);
  try {
    index.search("mill", 3, other);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::dimension_mismatch);
  }
}

TEST(Index, BuildRejectsMixedDimensions) {
  const auto snap = fixtures::fixture_snapshot(2, 2);
  int n = 0;
  FunctionEmbedder e("odd", [&](std::string_view) { return std::vector<float>(++n == 3 ? 4 : 8, 1.0f); });
  EXPECT_THROW(VectorIndex::build(snap, e), Error);
}

TEST(Index, SaveLoadRoundTrip) {
  const auto snap = fixtures::fixture_snapshot(6, 2);
  HashingEmbedder e(128);
  const auto index = VectorIndex::build(snap, e);
  const auto path = (std::filesystem::temp_directory_path() / "clid-index-test.bin").string();
  index.save(path);
  const auto loaded = VectorIndex::load(path, snap);
  EXPECT_EQ(loaded, index);
  EXPECT_EQ(loaded.search("Aldbury mill", 5, e), index.search("Aldbury mill", 5, e));
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "garbage";
  }
  EXPECT_THROW(VectorIndex::load(path, snap), Error);
  std::filesystem::remove(path);
}

TEST(Documents, FormatIsNumberedWithTitles) {
  const auto snap = fixtures::fixture_snapshot(1, 2);
  const std::vector<EvidenceItem> items{{snap.blocks()[1].block_id, 0.5, 1, {}}, {snap.blocks()[0].block_id, 0.4, 2, {}}};
  const auto out = format_documents(snap, items);
  EXPECT_EQ(out, "[1] Title: " + snap.blocks()[1].full_title() + "\n" + snap.blocks()[1].text + "\n\n[2] Title: " +
                     snap.blocks()[0].full_title() + "\n" + snap.blocks()[0].text);
}

// --- rerank -------------------------------------------------------------------------------

TEST(Rerank, PermutationParsing) {
  EXPECT_EQ(parse_permutation("3, 1, 2", 3), (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_EQ(parse_permutation("[2] > [1]", 2), (std::vector<std::size_t>{1, 0}));
  EXPECT_FALSE(parse_permutation("1, 1, 2", 3));
  EXPECT_FALSE(parse_permutation("1, 2", 3));
  EXPECT_FALSE(parse_permutation("1, 4, 2", 3));
  EXPECT_FALSE(parse_permutation("first", 1));
}

TEST(Rerank, AppliesProviderOrderAndFallsBack) {
  const auto snap = fixtures::fixture_snapshot(1, 2);
  std::vector<EvidenceItem> items;
  for (std::size_t i = 0; i < 3; ++i) items.push_back({snap.blocks()[i].block_id, 0.9 - 0.1 * i, static_cast<int>(i + 1), {}});
  ScriptedProvider p;
  p.enqueue("rerank", "<ranking>2, 3, 1</ranking>");
  p.enqueue("rerank", "<ranking>2, 2, 1</ranking>");
  p.enqueue("rerank", "no tags at all");
  RunLog log;
  LlmGateway llm(p, log, fast());
  const auto good = rerank("q", items, snap, llm);
  EXPECT_FALSE(good.degraded);
  EXPECT_EQ(good.items[0].block_id, items[1].block_id);
  EXPECT_EQ(good.items[0].rank, 2);
  EXPECT_EQ(good.items[0].rerank_rank, 1);
  for (int round = 0; round < 2; ++round) {
    const auto bad = rerank("q", items, snap, llm);
    EXPECT_TRUE(bad.degraded);
    EXPECT_FALSE(bad.note.empty());
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(bad.items[i].block_id, items[i].block_id);
  }
}
