#include <gtest/gtest.h>

#include <sstream>

#include "clid/detectors.hpp"
#include "clid/facts.hpp"
#include "support/fixtures.hpp"
#include "support/router.hpp"

using namespace clid;
using fixtures::Harness;
using fixtures::RouterProvider;

namespace {

struct Rig {
  RouterProvider* router;
  std::unique_ptr<Harness> h;
};

Rig make_rig(std::size_t docs = 8) {
  auto p = std::make_unique<RouterProvider>();
  auto* raw = p.get();
  return {raw, std::make_unique<Harness>(fixtures::fixture_snapshot(docs, 4), std::move(p))};
}

AtomicFact first_fact(const CorpusSnapshot& snap, std::size_t block = 0) {
  return facts_from_sentences(snap.blocks()[block]).front();
}

std::string reverse_ranking(const LlmRequest& r) {
  std::size_t n = 0;
  while (r.variables.at("passages").find("[" + std::to_string(n + 1) + "] Title: ") != std::string::npos) ++n;
  std::string out = "<ranking>";
  for (std::size_t i = n; i >= 1; --i) out += std::to_string(i) + (i > 1 ? ", " : "");
  return out + "</ranking>";
}

}  // namespace

// --- fact extraction -----------------------------------------------------------------------

TEST(Extraction, OneFactPerLineWithStableIds) {
  auto rig = make_rig(1);
  rig.router->reply("fact_extraction", "Sure.\n<facts>\n- First fact.\n\n* Second fact.\n</facts>");
  const auto& block = rig.h->snapshot.blocks()[0];
  const auto facts = extract_facts(block, *rig.h->llm);
  ASSERT_EQ(facts.size(), 2u);
  EXPECT_EQ(facts[0].claim_text, "First fact.");
  EXPECT_EQ(facts[1].claim_text, "Second fact.");
  EXPECT_EQ(facts[0].fact_id, make_fact_id(block.block_id, 0));
  EXPECT_EQ(facts[1].fact_id, make_fact_id(block.block_id, 1));
  EXPECT_EQ(facts[0].context_title, block.full_title());
  EXPECT_EQ(facts[0].context_text, block.text);
  EXPECT_EQ(facts_from_sentences(block)[1].fact_id, facts[1].fact_id);
  const auto req = rig.router->requests("fact_extraction").front();
  EXPECT_EQ(req.variables.at("full_title"), block.full_title());
}

TEST(Extraction, MissingRegionAndEmptyRegion) {
  auto rig = make_rig(1);
  rig.router->reply("fact_extraction", "no tags");
  try {
    extract_facts(rig.h->snapshot.blocks()[0], *rig.h->llm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::extraction);
    EXPECT_EQ(e.stage(), "extraction");
  }
  rig.router->reply("fact_extraction", "<facts>\n\n</facts>");
  const auto out = extract_facts_with_warnings(rig.h->snapshot.blocks()[0], *rig.h->llm);
  EXPECT_TRUE(out.facts.empty());
  ASSERT_EQ(out.warnings.size(), 1u);
}

TEST(Extraction, FaithfulnessScreen) {
  auto rig = make_rig(1);
  auto facts = facts_from_sentences(rig.h->snapshot.blocks()[0]);
  rig.router->on("faithfulness", [](const LlmRequest& r) {
    return std::string("<faithful>") + (r.variables.at("claim_text").find("charter") != std::string::npos ? "no" : "yes") +
           "</faithful>";
  });
  for (auto& f : facts) faithfulness_check(f, *rig.h->llm);
  const auto kept = drop_unfaithful(facts);
  EXPECT_EQ(kept.size(), facts.size() - 1);
  for (const auto& f : kept) EXPECT_EQ(f.faithful, true);

  rig.router->reply("faithfulness", "<faithful>perhaps</faithful>");
  EXPECT_THROW(faithfulness_check(facts[0], *rig.h->llm), ParseError);
  AtomicFact unchecked = facts[0];
  unchecked.faithful.reset();
  EXPECT_EQ(drop_unfaithful({unchecked}).size(), 1u);
}

TEST(Extraction, FactsRoundTrip) {
  auto facts = facts_from_sentences(fixtures::fixture_snapshot(1, 1).blocks()[0]);
  facts[0].faithful = false;
  std::stringstream io;
  write_facts(facts, io);
  EXPECT_EQ(read_facts(io), facts);
  std::stringstream bad("{\"fact_id\": \"x\"}\n");
  EXPECT_THROW(read_facts(bad), Error);
}

TEST(Extraction, SourceTitleFallsBackToContextTitle) {
  AtomicFact f;
  f.source_block_id = "unknown";
  f.context_title = "Doc > Section > Sub";
  EXPECT_EQ(source_doc_title(f), "Doc");
  const auto snap = fixtures::fixture_snapshot(1, 1);
  const auto real = first_fact(snap);
  EXPECT_EQ(source_doc_title(real, &snap), snap.blocks()[0].doc_title);
}

// --- retrieve and verify -------------------------------------------------------------------

TEST(RetrieveVerify, ExcludesSourceRerankAndScore) {
  auto rig = make_rig();
  rig.router->on("rerank", reverse_ranking);
  rig.router->reply("verifier", "Reasoning.\n<inconsistency_score>0.8</inconsistency_score>");
  const auto fact = first_fact(rig.h->snapshot);
  const auto r = run_retrieve_and_verify(fact, rig.h->ctx(), 5, true);
  EXPECT_EQ(r.system, SystemKind::retrieve_verify);
  EXPECT_DOUBLE_EQ(r.score, 0.8);
  ASSERT_EQ(r.evidence.size(), 5u);
  EXPECT_EQ(r.evidence_examined, 5u);
  for (const auto& e : r.evidence) EXPECT_NE(rig.h->snapshot.at(e.block_id).doc_title, fixtures::town_name(0));
  // Reversed: the best similarity hit is now last.
  EXPECT_EQ(r.evidence.front().rank, 5);
  EXPECT_EQ(r.evidence.front().rerank_rank, 1);
  const auto vreq = rig.router->requests("verifier").front();
  EXPECT_EQ(vreq.variables.at("documents"), format_documents(rig.h->snapshot, r.evidence));
  EXPECT_EQ(vreq.variables.at("claim_text"), fact.claim_text);
  EXPECT_TRUE(r.flags.empty());
}

TEST(RetrieveVerify, NoRerankMeansNoRerankCall) {
  auto rig = make_rig();
  rig.router->reply("verifier", "<inconsistency_score>0.1</inconsistency_score>");
  run_retrieve_and_verify(first_fact(rig.h->snapshot), rig.h->ctx(), 3, false);
  EXPECT_TRUE(rig.router->requests("rerank").empty());
}

TEST(RetrieveVerify, DegradedRerankIsFlagged) {
  auto rig = make_rig();
  rig.router->reply("rerank", "<ranking>1, 1</ranking>");
  rig.router->reply("verifier", "<inconsistency_score>0.3</inconsistency_score>");
  const auto r = run_retrieve_and_verify(first_fact(rig.h->snapshot), rig.h->ctx(), 4, true);
  EXPECT_TRUE(r.has_flag(flags::kRerankDegraded));
  EXPECT_FALSE(r.warnings.empty());
  for (std::size_t i = 0; i < r.evidence.size(); ++i) EXPECT_EQ(r.evidence[i].rank, static_cast<int>(i + 1));
}

TEST(RetrieveVerify, UnparseableScoreIsVerificationError) {
  auto rig = make_rig();
  rig.router->reply("verifier", "<inconsistency_score>very likely</inconsistency_score>");
  try {
    run_retrieve_and_verify(first_fact(rig.h->snapshot), rig.h->ctx(), 3, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::verification);
    EXPECT_EQ(e.stage(), "verify");
  }
  rig.router->reply("verifier", "<inconsistency_score>7</inconsistency_score>");
  const auto lenient = run_retrieve_and_verify(first_fact(rig.h->snapshot), rig.h->ctx(), 3, false, ScoreMode::lenient);
  EXPECT_DOUBLE_EQ(lenient.score, 1.0);
  EXPECT_FALSE(lenient.warnings.empty());
}

TEST(RetrieveVerify, ProviderErrorsCarryStage) {
  auto rig = make_rig();
  rig.router->reply("rerank", "<ranking>1</ranking>");
  try {
    run_retrieve_and_verify(first_fact(rig.h->snapshot), rig.h->ctx(), 3, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "verify");
    EXPECT_EQ(e.code(), ErrorCode::unmatched_prompt);
  }
}

TEST(RetrieveVerify, SingleDocumentCorpusHasNoEvidence) {
  auto rig = make_rig(1);
  const auto r = run_retrieve_and_verify(first_fact(rig.h->snapshot), rig.h->ctx());
  EXPECT_DOUBLE_EQ(r.score, 0.0);
  EXPECT_TRUE(r.has_flag(flags::kNoEvidence));
  EXPECT_TRUE(rig.router->requests().empty());
}

TEST(Verify, RequiresEvidenceAndContext) {
  auto rig = make_rig(2);
  auto fact = first_fact(rig.h->snapshot);
  EXPECT_THROW(verify(fact, {}, {}, rig.h->ctx()), Error);
  fact.context_text.clear();
  EXPECT_THROW(verify(fact, {{rig.h->snapshot.blocks()[3].block_id, 0.5, 1, {}}}, {}, rig.h->ctx()), Error);
}

TEST(Verify, ClarificationsAreNumbered) {
  auto rig = make_rig(2);
  rig.router->reply("verifier", "<inconsistency_score>0</inconsistency_score>");
  verify(first_fact(rig.h->snapshot), {{rig.h->snapshot.blocks()[3].block_id, 0.5, 1, {}}}, {"one", "two"}, rig.h->ctx());
  EXPECT_EQ(rig.router->requests("verifier").front().variables.at("clarifications"), "[1] one\n\n[2] two");
}

// --- NLI pipeline ------------------------------------------------------------------------

TEST(Nli, LabelParsing) {
  EXPECT_EQ(parse_nli_label("REFUTES"), NliLabel::refutes);
  EXPECT_EQ(parse_nli_label(" supports "), NliLabel::supports);
  EXPECT_EQ(parse_nli_label("NOT ENOUGH INFO"), NliLabel::not_enough_info);
  EXPECT_FALSE(parse_nli_label("maybe"));
}

TEST(Nli, CountsRefutesAndScoresOverK) {
  auto rig = make_rig();
  const auto target = fixtures::town_name(2);
  rig.router->on("nli", [&](const LlmRequest& r) {
    return std::string("<label>") +
           (r.variables.at("passage").find(target) != std::string::npos ? "REFUTES" : "NOT_ENOUGH_INFO") + "</label>";
  });
  const auto fact = first_fact(rig.h->snapshot);
  // 21 blocks lie outside the source article, so k = 21 sees all of them.
  const auto r = run_nli_pipeline(fact, rig.h->ctx(), 21, 2);
  ASSERT_TRUE(r.refute_count.has_value());
  EXPECT_EQ(*r.refute_count, 3);  // three blocks per town
  EXPECT_DOUBLE_EQ(r.score, 3.0 / 21.0);
  EXPECT_EQ(r.evidence.size(), 21u);
  EXPECT_TRUE(rig.router->requests("rerank").empty());
  EXPECT_EQ(rig.router->requests("nli").size(), 21u);
  EXPECT_TRUE(nli_decision(3, 2));
  EXPECT_TRUE(nli_decision(3, 3));
  EXPECT_FALSE(nli_decision(3, 4));
}

TEST(Nli, PartialFailuresAreWarningsTotalFailureIsError) {
  auto rig = make_rig();
  int n = 0;
  rig.router->on("nli", [&](const LlmRequest&) { return ++n % 2 ? "<label>REFUTES</label>" : "<label>?</label>"; });
  const auto r = run_nli_pipeline(first_fact(rig.h->snapshot), rig.h->ctx(), 6, 1);
  EXPECT_EQ(*r.refute_count, 3);
  EXPECT_EQ(r.warnings.size(), 3u);
  rig.router->reply("nli", "garbage");
  try {
    run_nli_pipeline(first_fact(rig.h->snapshot), rig.h->ctx(), 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::pipeline);
  }
  EXPECT_THROW(run_nli_pipeline(first_fact(rig.h->snapshot), rig.h->ctx(), 4, 0), Error);
}

// --- dispatch, weak filter, reports ----------------------------------------------------------

TEST(Dispatch, UsesConfiguredSizes) {
  auto rig = make_rig();
  rig.router->on("rerank", reverse_ranking);
  rig.router->reply("verifier", "<inconsistency_score>0.5</inconsistency_score>");
  rig.router->reply("nli", "<label>SUPPORTS</label>");
  DetectorConfig cfg;
  cfg.k_baseline = 7;
  const auto fact = first_fact(rig.h->snapshot);
  EXPECT_EQ(run_detector(SystemKind::retrieve_verify, fact, rig.h->ctx(), cfg).evidence.size(), 7u);
  const auto nli = run_detector(SystemKind::nli_pipeline, fact, rig.h->ctx(), cfg);
  EXPECT_EQ(nli.evidence.size(), 7u);
  EXPECT_EQ(nli.refute_count, 0);
}

TEST(WeakFilter, DecisionParsing) {
  auto rig = make_rig();
  const auto fact = first_fact(rig.h->snapshot);
  rig.router->reply("weak_filter", "<decision>yes</decision>");
  EXPECT_TRUE(weak_filter(fact, rig.h->ctx()));
  rig.router->reply("weak_filter", "<decision>No</decision>");
  EXPECT_FALSE(weak_filter(fact, rig.h->ctx()));
  rig.router->reply("weak_filter", "<decision>unsure</decision>");
  EXPECT_THROW(weak_filter(fact, rig.h->ctx()), Error);
  auto lonely = make_rig(1);
  EXPECT_FALSE(weak_filter(first_fact(lonely.h->snapshot), lonely.h->ctx()));
}

TEST(Reports, BothSidesAndPartialFailure) {
  auto rig = make_rig();
  rig.router->reply("report_inconsistent", "<argument>It conflicts.</argument>");
  rig.router->reply("report_consistent", "Untagged but useful.");
  const auto fact = first_fact(rig.h->snapshot);
  DetectionResult result;
  result.fact_id = fact.fact_id;
  result.evidence = {{rig.h->snapshot.blocks()[5].block_id, 0.4, 1, {}}};
  auto rep = generate_report(fact, result, rig.h->ctx());
  EXPECT_EQ(rep.pro_inconsistent, "It conflicts.");
  EXPECT_EQ(rep.pro_consistent, "Untagged but useful.");
  EXPECT_TRUE(rep.unavailable.empty());

  rig.router->on("report_consistent", [](const LlmRequest&) -> std::string { throw RetriableFailure("down"); });
  rep = generate_report(fact, result, rig.h->ctx());
  EXPECT_TRUE(rep.pro_inconsistent.has_value());
  EXPECT_FALSE(rep.pro_consistent.has_value());
  ASSERT_EQ(rep.unavailable.size(), 1u);
  EXPECT_EQ(rep.unavailable[0].rfind("pro_consistent", 0), 0u);
}

// --- records --------------------------------------------------------------------------------

TEST(Records, DetectionResultRoundTrip) {
  DetectionResult r;
  r.fact_id = "f1";
  r.system = SystemKind::agent;
  r.score = 0.25;
  r.evidence = {{"b1", 0.5, 1, 2}};
  r.clarifications = {"c"};
  AgentTrace t;
  t.budget = 10;
  t.steps.push_back({"think", {ActionKind::search, "q"}, "obs", {"b1"}});
  r.trace = t;
  r.refute_count = 2;
  r.evidence_examined = 4;
  r.flags = {flags::kRerankDegraded};
  r.warnings = {"w"};
  EXPECT_EQ(result_from_json(to_json(r)), r);
  auto j = to_json(r);
  j["score"] = 1.5;
  EXPECT_THROW(result_from_json(j), Error);

  TwoSidedReport rep;
  rep.pro_inconsistent = "a";
  rep.unavailable = {"pro_consistent: x"};
  rep.trace = t;
  EXPECT_EQ(report_from_json(to_json(rep)), rep);
}

TEST(Records, SystemNames) {
  EXPECT_EQ(parse_system("rv"), SystemKind::retrieve_verify);
  EXPECT_EQ(parse_system("nli_pipeline"), SystemKind::nli_pipeline);
  EXPECT_FALSE(parse_system("oracle"));
  for (auto s : {SystemKind::agent, SystemKind::retrieve_verify, SystemKind::nli_pipeline})
    EXPECT_EQ(parse_system(to_string(s)), s);
}
