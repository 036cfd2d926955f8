#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "clid/common.hpp"
#include "clid/corpus.hpp"
#include "support/fixtures.hpp"

using namespace clid;

namespace {

std::string record(const std::string& title, const std::string& text, std::vector<std::string> sections = {"Intro"},
                   std::optional<std::string> category = std::nullopt) {
  nlohmann::json j{{"doc_title", title}, {"section_path", sections}, {"text", text}};
  if (category) j["category"] = *category;
  return j.dump();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("clid-test-" + name + "-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Hashing, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Hashing, FieldBoundariesMatter) {
  EXPECT_NE(hash_fields({"ab", "c"}), hash_fields({"a", "bc"}));
  EXPECT_EQ(hash_fields({"x", "y"}), hash_fields({"x", "y"}));
}

TEST(Text, Utf8LengthCountsScalarValues) {
  EXPECT_EQ(utf8_length("abc"), 3u);
  EXPECT_EQ(utf8_length("caf\xc3\xa9"), 4u);
  EXPECT_EQ(utf8_length("\xe2\x82\xac\xf0\x9f\x98\x80"), 2u);
  EXPECT_THROW(utf8_length("\xc3"), Error);
  EXPECT_THROW(utf8_length("\xff"), Error);
  EXPECT_EQ(utf8_offset("caf\xc3\xa9!", 5), 4u);
}

TEST(Text, WhitespaceAndTokens) {
  EXPECT_EQ(collapse_whitespace("  a \n\t b  "), "a b");
  EXPECT_EQ(trim("\t x \n"), "x");
  EXPECT_EQ(word_tokens("The Town's 1871 Mill."), (std::vector<std::string>{"the", "town", "s", "1871", "mill"}));
  EXPECT_EQ(content_tokens("The mill of the town is old"), (std::vector<std::string>{"mill", "town", "old"}));
  EXPECT_EQ(split_lines("a\r\nb\n"), (std::vector<std::string>{"a", "b", ""}));
}

TEST(Text, SentenceSplitter) {
  const auto s = split_sentences("It opened in 1871. The mill closed, e.g. later. 3 sites remain! Done");
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0], "It opened in 1871.");
  EXPECT_EQ(s[1], "The mill closed, e.g. later.");
  EXPECT_EQ(s[2], "3 sites remain!");
  EXPECT_EQ(s[3], "Done");
  EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(Randomness, UniformBelowStaysInRangeAndCoversIt) {
  std::mt19937_64 rng(1);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = uniform_below(rng, 7);
    ASSERT_LT(v, 7u);
    ++seen[v];
  }
  for (int c : seen) EXPECT_GT(c, 800);
  EXPECT_EQ(uniform_below(rng, 0), 0u);
  EXPECT_EQ(uniform_below(rng, 1), 0u);
}

TEST(Randomness, UniformUnitInHalfOpenInterval) {
  std::mt19937_64 rng(2);
  double lo = 1, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform_unit(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  EXPECT_LT(lo, 0.01);
  EXPECT_GT(hi, 0.99);
}

TEST(Randomness, SampleIndicesIsDistinctAndSeeded) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 a(seed), b(seed);
    const auto x = sample_indices(a, 40, 15);
    EXPECT_EQ(x, sample_indices(b, 40, 15));
    EXPECT_EQ(std::set<std::size_t>(x.begin(), x.end()).size(), 15u);
    for (auto i : x) EXPECT_LT(i, 40u);
  }
  std::mt19937_64 rng(3);
  EXPECT_EQ(sample_indices(rng, 3, 10).size(), 3u);
}

TEST(Randomness, LargestRemainderMatchesHandComputation) {
  // 7 units over weights 0.5/0.3/0.2: quotas 3.5, 2.1, 1.4 -> 3+2+1, one
  // leftover goes to the largest remainder (0.5).
  const std::vector<std::pair<char, double>> w{{'a', 0.5}, {'b', 0.3}, {'c', 0.2}};
  const auto got = allocate_largest_remainder(w, 7);
  EXPECT_EQ(got.at('a'), 4u);
  EXPECT_EQ(got.at('b'), 2u);
  EXPECT_EQ(got.at('c'), 1u);
}

TEST(Randomness, LargestRemainderPropertySumsAndBounds) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::pair<int, double>> w;
    const auto k = 1 + uniform_below(rng, 8);
    double sum = 0;
    for (std::uint64_t i = 0; i < k; ++i) {
      w.emplace_back(static_cast<int>(i), uniform_unit(rng) + 0.01);
      sum += w.back().second;
    }
    const auto total = uniform_below(rng, 500);
    const auto got = allocate_largest_remainder(w, total);
    std::size_t s = 0;
    for (const auto& [key, weight] : w) {
      const double quota = static_cast<double>(total) * weight / sum;
      EXPECT_GE(static_cast<double>(got.at(key)), std::floor(quota) - 1e-9);
      EXPECT_LE(static_cast<double>(got.at(key)), std::floor(quota) + 1.0 + 1e-9);
      s += got.at(key);
    }
    EXPECT_EQ(s, total);
  }
}

TEST(Errors, CarryCodeAndStage) {
  try {
    require(false, "ingest", "boom");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    EXPECT_EQ(e.stage(), "ingest");
    EXPECT_STREQ(e.what(), "boom");
    EXPECT_EQ(e.with_stage("x").stage(), "x");
  }
  EXPECT_STREQ(to_string(ErrorCode::unmatched_prompt), "unmatched_prompt");
}

TEST(BlockFilter, BoundariesAreInclusive) {
  EXPECT_FALSE(filter_block(std::string(99, 'x')));
  EXPECT_TRUE(filter_block(std::string(100, 'x')));
  EXPECT_TRUE(filter_block(std::string(320, 'x')));
  EXPECT_FALSE(filter_block(std::string(321, 'x')));
  EXPECT_THROW(filter_block("x", 5, 5), Error);
}

TEST(BlockFilter, CountsScalarValuesNotBytes) {
  std::string s;
  for (int i = 0; i < 100; ++i) s += "\xc3\xa9";  // 100 scalars, 200 bytes
  EXPECT_TRUE(filter_block(s));
  s.clear();
  for (int i = 0; i < 99; ++i) s += "\xc3\xa9";
  EXPECT_FALSE(filter_block(s));
}

TEST(Ingest, AssignsStableIdsAndFilters) {
  std::stringstream in;
  in << record("Alpha", std::string(150, 'a')) << '\n'
     << record("Alpha", std::string(50, 'b')) << '\n'  // filtered, still consumes ordinal 1
     << record("Alpha", std::string(150, 'c')) << '\n'
     << "\n"
     << record("Beta", std::string(200, 'd'), {"History", "Early"}, "History") << '\n';
  const auto snap = ingest_snapshot(in, BlockFilter{}, "2024-05-01");
  ASSERT_EQ(snap.size(), 3u);
  EXPECT_EQ(snap.blocks()[0].block_id, make_block_id("Alpha", {"Intro"}, 0));
  EXPECT_EQ(snap.blocks()[1].block_id, make_block_id("Alpha", {"Intro"}, 2));
  EXPECT_EQ(snap.blocks()[2].full_title(), "Beta > History > Early");
  EXPECT_EQ(snap.blocks()[2].category, "History");
  EXPECT_EQ(snap.title_index().at("Alpha").size(), 2u);
  EXPECT_EQ(snap.snapshot_date(), "2024-05-01");
}

TEST(Ingest, RejectsMalformedInput) {
  auto run = [](const std::string& text, const std::string& date = "2024-01-01") {
    std::stringstream in(text);
    return ingest_snapshot(in, BlockFilter{}, date);
  };
  EXPECT_THROW(run("{not json}\n"), Error);
  EXPECT_THROW(run(record("", std::string(150, 'a')) + "\n"), Error);
  EXPECT_THROW(run(R"({"doc_title":"A","text":"x","kind":"poem"})" "\n"), Error);
  EXPECT_THROW(run("", "2024-13-01"), Error);
  EXPECT_THROW(run("", "yesterday"), Error);
  try {
    run(record("A", std::string(150, 'a')) + "\n" + R"({"doc_title":"A"})" + "\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ingest);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Ingest, DuplicateIdsAreCorruption) {
  CorpusSnapshot snap("2024-01-01");
  Block b;
  b.block_id = "b1";
  b.doc_title = "A";
  b.text = "text";
  snap.add(b);
  try {
    snap.add(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::corruption);
  }
}

TEST(Snapshot, SaveLoadRoundTripIsLossless) {
  const auto dir = temp_dir("snap");
  const auto snap = fixtures::fixture_snapshot(10, 1);
  const auto path = (dir / "s.jsonl").string();
  save_snapshot(snap, path);
  const auto loaded = load_snapshot(path);
  EXPECT_EQ(loaded, snap);
  save_snapshot(loaded, (dir / "t.jsonl").string());
  std::ifstream a(path), b(dir / "t.jsonl");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  std::filesystem::remove_all(dir);
}

TEST(Snapshot, ManifestMismatchIsCorruption) {
  const auto dir = temp_dir("manifest");
  const auto path = (dir / "s.jsonl").string();
  save_snapshot(fixtures::fixture_snapshot(2, 1), path);
  {
    std::ofstream out(path, std::ios::app);
    out << record("Extra", "more text") << '\n';
  }
  try {
    load_snapshot(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::corruption);
  }
  std::filesystem::remove(manifest_path(path));
  EXPECT_THROW(load_snapshot(path), Error);
  std::filesystem::remove_all(dir);
}

TEST(Sampling, UnstratifiedIsSeededWithoutReplacement) {
  const auto snap = fixtures::fixture_snapshot(20, 1);
  const auto a = sample_blocks(snap, 25, 9, false);
  const auto b = sample_blocks(snap, 25, 9, false);
  EXPECT_EQ(a, b);
  std::set<std::string> ids;
  for (const auto& blk : a) ids.insert(blk.block_id);
  EXPECT_EQ(ids.size(), 25u);
  EXPECT_NE(a, sample_blocks(snap, 25, 10, false));
  EXPECT_THROW(sample_blocks(snap, 61, 1, false), Error);
}

TEST(Sampling, StratifiedFollowsCategoryProportions) {
  // 20 towns x 3 blocks; categories cycle, so 21/21/18 blocks per category.
  const auto snap = fixtures::fixture_snapshot(20, 1);
  std::map<std::string, std::size_t> sizes;
  for (const auto& b : snap.blocks()) ++sizes[*b.category];
  const auto sample = sample_blocks(snap, 30, 5, true);
  ASSERT_EQ(sample.size(), 30u);
  std::map<std::string, std::size_t> got;
  for (const auto& b : sample) ++got[*b.category];
  for (const auto& [cat, n] : sizes) {
    const double quota = 30.0 * static_cast<double>(n) / 60.0;
    EXPECT_LE(std::abs(static_cast<double>(got[cat]) - quota), 1.0) << cat;
  }
}

TEST(Sampling, StratifiedRequiresCategories) {
  CorpusSnapshot snap("2024-01-01");
  Block b;
  b.block_id = "b";
  b.doc_title = "A";
  b.text = "t";
  snap.add(b);
  EXPECT_THROW(sample_blocks(snap, 1, 1, true), Error);
}
