#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/corpus.hpp"
#include "clid/evaluation.hpp"
#include "clid/facts.hpp"
#include "clid/taxonomy.hpp"

namespace clid {

inline constexpr const char* kSyntheticGenerator = "clid rule-based operators v1";

struct MutationSpec {
  MutationType type = MutationType::logical_direct;
  std::string target_fact_id;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  bool operator==(const MutationSpec&) const = default;
};

/// One injected contradiction. `mutated_block` is the refuting block; for
/// indirect logical cases `support_blocks` holds the bridging premise.
struct InjectedCase {
  std::string case_id;
  AtomicFact original;
  Block mutated_block;
  std::vector<Block> support_blocks;
  MutationSpec mutation;
  /// The exact mutated statement; consumed by the exact-oracle provider.
  std::string marker;
  bool operator==(const InjectedCase&) const = default;
};

// --- operators -------------------------------------------------------------------

namespace synth_detail {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80; }

/// Word spans (alnum runs) in byte offsets.
inline std::vector<Span> word_spans(std::string_view s) {
  std::vector<Span> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_word_char(s[j])) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

inline std::string replace_span(std::string_view s, Span sp, std::string_view with) {
  return std::string(s.substr(0, sp.begin)) + std::string(with) + std::string(s.substr(sp.end));
}

inline bool all_digits(std::string_view w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

/// First integer token (a standalone digit run, years included).
inline std::optional<Span> first_integer(std::string_view s) {
  for (auto sp : word_spans(s)) {
    const auto w = s.substr(sp.begin, sp.end - sp.begin);
    if (all_digits(w) && w.size() <= 9) return sp;
  }
  return std::nullopt;
}

inline std::string match_case(std::string_view original, std::string replacement) {
  if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0])) && !replacement.empty())
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  return replacement;
}

inline std::string strip_final_period(std::string_view s) {
  auto t = trim(s);
  while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?')) t.pop_back();
  return t;
}

/// Claim body for embedding after "that": final period dropped and a
/// leading determiner lowercased ("The town ..." -> "the town ...").
inline std::string as_clause(std::string_view claim) {
  auto body = strip_final_period(claim);
  static const char* const kDeterminers[] = {"The", "A", "An", "This", "These", "Those", "Its", "His", "Her", "Their", "It"};
  for (const char* d : kDeterminers) {
    const std::string_view dv(d);
    if (body.size() > dv.size() && body.compare(0, dv.size(), dv) == 0 && body[dv.size()] == ' ') {
      body[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(body[0])));
      break;
    }
  }
  return body;
}

inline std::string pick(std::mt19937_64& rng, const std::vector<std::string>& pool) {
  return pool[static_cast<std::size_t>(uniform_below(rng, pool.size()))];
}

inline const std::vector<std::string>& month_names() {
  static const std::vector<std::string> v{"January", "February", "March",     "April",   "May",      "June",
                                          "July",    "August",   "September", "October", "November", "December"};
  return v;
}

inline const std::vector<std::pair<std::string, std::string>>& temporal_swaps() {
  static const std::vector<std::pair<std::string, std::string>> v{
      {"before", "after"}, {"earlier", "later"}, {"first", "last"}, {"preceded", "followed"}, {"prior", "subsequent"}};
  return v;
}

inline const std::vector<std::pair<std::string, std::string>>& spatial_swaps() {
  static const std::vector<std::pair<std::string, std::string>> v{
      {"north", "south"},          {"east", "west"},         {"northern", "southern"}, {"eastern", "western"},
      {"northeast", "southwest"},  {"northwest", "southeast"}, {"upstream", "downstream"}, {"above", "below"},
      {"inside", "outside"},       {"left", "right"},          {"northeastern", "southwestern"},
      {"northwestern", "southeastern"}};
  return v;
}

inline const std::vector<std::string>& definition_pool() {
  static const std::vector<std::string> v{"a unit of measurement used in land surveying",
                                          "a ceremonial title granted by a regional council",
                                          "a technique for preserving fish with salt",
                                          "a style of choral singing without accompaniment",
                                          "a legal term for an unpaid agricultural lease",
                                          "a type of sailing vessel with two masts",
                                          "a mineral used to glaze pottery",
                                          "a grammatical case found in some Baltic languages"};
  return v;
}

inline const std::vector<std::string>& category_pool() {
  static const std::vector<std::string> v{"river",  "village", "novel",    "mammal",   "opera",  "comet",
                                          "fortress", "dialect", "festival", "mineral", "glacier", "painter"};
  return v;
}

inline const std::vector<std::string>& entity_pool() {
  static const std::vector<std::string> v{"Aldous Brennan", "Harrowgate", "Miriam Okafor", "Castellane",
                                          "Tobias Lindqvist", "Port Verrin", "the Halden Society", "Ysolde Marchetti"};
  return v;
}

inline const std::vector<std::string>& filler_pool() {
  static const std::vector<std::string> v{"This entry was compiled from archival notes.",
                                          "Further details are kept in the appendix.",
                                          "The record has been reformatted for consistency.",
                                          "Sources for this entry are listed separately."};
  return v;
}

inline bool is_month_or_day(std::string_view w) {
  static const std::set<std::string, std::less<>> extra{"Monday", "Tuesday", "Wednesday", "Thursday",
                                                        "Friday", "Saturday", "Sunday"};
  for (const auto& m : month_names())
    if (w == m) return true;
  return extra.count(w) > 0;
}

/// Capitalized word runs not starting the sentence (months and weekdays
/// excluded), joined across single spaces.
inline std::vector<Span> entity_spans(std::string_view s) {
  const auto words = word_spans(s);
  std::vector<Span> out;
  std::optional<Span> cur;
  for (std::size_t i = 1; i < words.size(); ++i) {
    const auto w = s.substr(words[i].begin, words[i].end - words[i].begin);
    const bool cap = std::isupper(static_cast<unsigned char>(w[0])) && !is_month_or_day(w);
    const bool adjacent = cur && words[i].begin == cur->end + 1 && s[cur->end] == ' ';
    if (cap) {
      if (adjacent) cur->end = words[i].end;
      else {
        if (cur) out.push_back(*cur);
        cur = words[i];
      }
    } else if (cur) {
      out.push_back(*cur);
      cur.reset();
    }
  }
  if (cur) out.push_back(*cur);
  return out;
}

inline std::optional<Span> find_word(std::string_view s, const std::vector<std::string>& lowercase_words) {
  for (auto sp : word_spans(s)) {
    const auto w = to_lower_ascii(s.substr(sp.begin, sp.end - sp.begin));
    if (std::find(lowercase_words.begin(), lowercase_words.end(), w) != lowercase_words.end()) return sp;
  }
  return std::nullopt;
}

/// Position just past " is a " / " is an " style copulas (byte offset of
/// the predicate) plus the copula text itself.
struct Copula {
  std::size_t predicate = 0;
  std::size_t copula_begin = 0;
  std::string verb;  // "is" / "was" / "are" / "were"
};

inline std::optional<Copula> find_copula_article(std::string_view s) {
  for (std::string_view verb : {"is", "was", "are", "were"})
    for (std::string_view art : {"a", "an"}) {
      const auto pat = " " + std::string(verb) + " " + std::string(art) + " ";
      const auto pos = s.find(pat);
      if (pos != std::string::npos && pos > 0) return Copula{pos + pat.size(), pos, std::string(verb)};
    }
  return std::nullopt;
}

inline std::optional<std::pair<std::size_t, std::string>> find_definition_marker(std::string_view s) {
  for (std::string_view m : {" refers to ", " is defined as ", " means "}) {
    const auto pos = s.find(m);
    if (pos != std::string::npos && pos > 0) return std::make_pair(pos + m.size(), std::string(m));
  }
  return std::nullopt;
}

inline std::string article_for(std::string_view word) {
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word.empty() ? 'x' : word[0])));
  return std::string("aeiou").find(c) != std::string::npos ? "an" : "a";
}

}  // namespace synth_detail

struct MutationOutcome {
  std::string mutated;
  /// Indirect logical only: the bridging premise.
  std::optional<std::string> bridge;
  std::map<std::string, std::string> params;
};

/// True iff the operator can transform `claim`.
inline bool mutation_applicable(MutationType type, std::string_view claim) {
  using namespace synth_detail;
  switch (type) {
    case MutationType::numerical_off_by_one:
    case MutationType::numerical_clear: return first_integer(claim).has_value();
    case MutationType::logical_direct:
    case MutationType::logical_indirect: return !trim(claim).empty();
    case MutationType::definition: return find_copula_article(claim) || find_definition_marker(claim);
    case MutationType::categorical: {
      auto c = find_copula_article(claim);
      if (!c) return false;
      auto spans = word_spans(claim.substr(c->predicate));
      return !spans.empty();
    }
    case MutationType::temporal: {
      std::vector<std::string> words;
      for (const auto& m : month_names()) words.push_back(to_lower_ascii(m));
      for (const auto& [a, b] : temporal_swaps()) {
        words.push_back(a);
        words.push_back(b);
      }
      return find_word(claim, words).has_value();
    }
    case MutationType::named_entity: return !entity_spans(claim).empty();
    case MutationType::spatial: {
      std::vector<std::string> words;
      for (const auto& [a, b] : spatial_swaps()) {
        words.push_back(a);
        words.push_back(b);
      }
      return find_word(claim, words).has_value();
    }
  }
  return false;
}

/// Applies one operator. `params` overrides seeded choices ("delta",
/// "replacement"); the resolved parameters are returned so the case is
/// reproducible from its mutation record alone. `entity_candidates` feeds named-entity
/// replacement.
inline MutationOutcome apply_mutation(MutationType type, std::string_view claim_in, std::mt19937_64& rng,
                                      const std::map<std::string, std::string>& params = {},
                                      const std::vector<std::string>& entity_candidates = {}) {
  using namespace synth_detail;
  const auto claim = trim(claim_in);
  if (!mutation_applicable(type, claim))
    throw Error(ErrorCode::invalid_argument, "synth", std::string(to_string(type)) + " does not apply to: " + claim);
  MutationOutcome out;
  auto param = [&](const char* key) -> std::optional<std::string> {
    auto it = params.find(key);
    return it == params.end() ? std::nullopt : std::optional<std::string>(it->second);
  };

  switch (type) {
    case MutationType::numerical_off_by_one:
    case MutationType::numerical_clear: {
      const auto sp = *first_integer(claim);
      const long long value = std::stoll(claim.substr(sp.begin, sp.end - sp.begin));
      long long delta;
      if (auto d = param("delta")) {
        delta = std::stoll(*d);
      } else if (type == MutationType::numerical_off_by_one) {
        delta = 1;
      } else {
        const bool year_like = value >= 1000 && value <= 2100;
        const long long span = year_like ? 36 : std::max<long long>(8, value / 2);
        delta = 2 + static_cast<long long>(uniform_below(rng, static_cast<std::uint64_t>(span)));
        if (uniform_below(rng, 2) == 0 && value - delta >= 0) delta = -delta;
      }
      if (type == MutationType::numerical_off_by_one)
        require(delta == 1 || delta == -1, "synth", "off-by-one delta must be +1 or -1");
      else
        require(delta <= -2 || delta >= 2, "synth", "clear numerical delta must be at least 2 in magnitude");
      if (value + delta < 0) delta = -delta;
      out.params["delta"] = std::to_string(delta);
      out.params["original"] = std::to_string(value);
      out.mutated = replace_span(claim, sp, std::to_string(value + delta));
      break;
    }
    case MutationType::logical_direct: {
      const std::vector<std::string> aux{"is", "are", "was", "were", "has", "have", "had",
                                         "can", "will", "could", "would", "should", "does", "did"};
      const auto spans = word_spans(claim);
      for (std::size_t i = 0; i < spans.size(); ++i) {
        const auto w = claim.substr(spans[i].begin, spans[i].end - spans[i].begin);
        if (std::find(aux.begin(), aux.end(), w) == aux.end()) continue;
        const bool already = i + 1 < spans.size() &&
                             claim.substr(spans[i + 1].begin, spans[i + 1].end - spans[i + 1].begin) == "not";
        if (already) continue;
        out.mutated = claim.substr(0, spans[i].end) + " not" + claim.substr(spans[i].end);
        out.params["form"] = "auxiliary";
        break;
      }
      if (out.mutated.empty()) {
        out.mutated = "It is not the case that " + as_clause(claim) + ".";
        out.params["form"] = "prefix";
      }
      break;
    }
    case MutationType::logical_indirect: {
      const auto body = as_clause(claim);
      const auto registry = param("register").value_or("the central register");
      out.bridge = "If it is true that " + body + ", then " + registry + " confirms it.";
      out.mutated = registry + " does not confirm that " + body + ".";
      out.mutated[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out.mutated[0])));
      out.params["register"] = registry;
      break;
    }
    case MutationType::definition: {
      std::size_t cut;
      std::string lead;
      if (auto c = find_copula_article(claim)) {
        cut = c->copula_begin;
        lead = " " + c->verb + " ";
      } else {
        auto m = *find_definition_marker(claim);
        cut = m.first - m.second.size();
        lead = m.second;
      }
      const auto original_pred = strip_final_period(claim.substr(cut + lead.size()));
      auto replacement = param("replacement");
      if (!replacement) {
        std::vector<std::string> pool;
        for (const auto& d : definition_pool())
          if (d != original_pred) pool.push_back(d);
        replacement = pick(rng, pool);
      }
      out.params["replacement"] = *replacement;
      // The competing definition names the one it displaces, as
      // conflicting definitions of a term usually do.
      out.mutated = claim.substr(0, cut) + lead + *replacement + ", not " + original_pred + ".";
      break;
    }
    case MutationType::categorical: {
      const auto c = *find_copula_article(claim);
      const auto head = word_spans(claim.substr(c.predicate)).front();
      const Span sp{c.predicate + head.begin, c.predicate + head.end};
      const auto original = to_lower_ascii(claim.substr(sp.begin, sp.end - sp.begin));
      auto replacement = param("replacement");
      if (!replacement) {
        std::vector<std::string> pool;
        for (const auto& w : category_pool())
          if (w != original) pool.push_back(w);
        replacement = pick(rng, pool);
      }
      out.params["replacement"] = *replacement;
      out.params["original"] = original;
      // Re-derive the article so "a river" / "an opera" stay grammatical.
      const auto article_begin = c.copula_begin + 1 + c.verb.size() + 1;
      out.mutated = claim.substr(0, article_begin) + article_for(*replacement) + " " + *replacement +
                    claim.substr(sp.end);
      break;
    }
    case MutationType::temporal: {
      std::vector<std::string> words;
      for (const auto& m : month_names()) words.push_back(to_lower_ascii(m));
      for (const auto& [a, b] : temporal_swaps()) {
        words.push_back(a);
        words.push_back(b);
      }
      const auto sp = *find_word(claim, words);
      const auto original = claim.substr(sp.begin, sp.end - sp.begin);
      const auto lower = to_lower_ascii(original);
      std::string replacement;
      if (auto r = param("replacement")) {
        replacement = *r;
      } else {
        for (const auto& [a, b] : temporal_swaps()) {
          if (lower == a) replacement = b;
          if (lower == b) replacement = a;
        }
        if (replacement.empty()) {
          std::vector<std::string> months;
          for (const auto& m : month_names())
            if (to_lower_ascii(m) != lower) months.push_back(m);
          replacement = pick(rng, months);
        }
      }
      replacement = match_case(original, replacement);
      out.params["original"] = original;
      out.params["replacement"] = replacement;
      out.mutated = replace_span(claim, sp, replacement);
      break;
    }
    case MutationType::named_entity: {
      const auto sp = entity_spans(claim).front();
      const auto original = claim.substr(sp.begin, sp.end - sp.begin);
      auto replacement = param("replacement");
      if (!replacement) {
        std::vector<std::string> pool;
        for (const auto& e : entity_candidates)
          if (e != original && claim.find(e) == std::string::npos) pool.push_back(e);
        if (pool.empty())
          for (const auto& e : entity_pool())
            if (e != original) pool.push_back(e);
        replacement = pick(rng, pool);
      }
      out.params["original"] = original;
      out.params["replacement"] = *replacement;
      out.mutated = replace_span(claim, sp, *replacement);
      break;
    }
    case MutationType::spatial: {
      std::vector<std::string> words;
      for (const auto& [a, b] : spatial_swaps()) {
        words.push_back(a);
        words.push_back(b);
      }
      const auto sp = *find_word(claim, words);
      const auto original = claim.substr(sp.begin, sp.end - sp.begin);
      const auto lower = to_lower_ascii(original);
      std::string replacement;
      for (const auto& [a, b] : spatial_swaps()) {
        if (lower == a) replacement = b;
        if (lower == b) replacement = a;
      }
      if (auto r = param("replacement")) replacement = *r;
      replacement = match_case(original, replacement);
      out.params["original"] = original;
      out.params["replacement"] = replacement;
      out.mutated = replace_span(claim, sp, replacement);
      break;
    }
  }
  if (collapse_whitespace(out.mutated) == collapse_whitespace(claim))
    throw Error(ErrorCode::invalid_argument, "synth", std::string(to_string(type)) + " left the claim unchanged");
  return out;
}

// --- injection -------------------------------------------------------------------

struct InjectOptions {
  /// Generic sentences appended to each mutated block; more filler means
  /// less lexical overlap with the fact and harder retrieval.
  std::size_t filler_sentences = 0;
};

struct InjectionOutcome {
  CorpusSnapshot snapshot;
  std::vector<InjectedCase> cases;
};

inline std::string normalize_claim(std::string_view s) { return to_lower_ascii(collapse_whitespace(s)); }

/// Stable digest of a snapshot's records, for idempotence checks.
inline std::string snapshot_digest(const CorpusSnapshot& snapshot) {
  std::uint64_t h = fnv1a64(snapshot.snapshot_date());
  for (const auto& b : snapshot.blocks()) {
    const auto rec = to_json(b).dump();
    h = hash_fields({hex64(h), rec});
  }
  return hex64(h);
}

namespace synth_detail {

inline std::vector<AtomicFact> dedupe_facts(const std::vector<AtomicFact>& facts) {
  std::set<std::string> seen;
  std::vector<AtomicFact> out;
  for (const auto& f : facts)
    if (seen.insert(normalize_claim(f.claim_text)).second) out.push_back(f);
  return out;
}

inline std::uint64_t case_seed(std::uint64_t seed, std::string_view fact_id, MutationType t) {
  const auto s = std::to_string(seed);
  return hash_fields({s, fact_id, to_string(t)});
}

}  // namespace synth_detail

/// Injects n contradictions. Mutation types are apportioned over n by
/// largest remainder; each type then takes facts from one seeded shuffle,
/// most constrained type first, skipping facts its operator cannot
/// transform. Each mutated block lands under its own synthetic document.
inline InjectionOutcome inject(const CorpusSnapshot& snapshot, const std::vector<AtomicFact>& facts,
                               const TaxonomyDistribution& distribution, std::size_t n, std::uint64_t seed,
                               const InjectOptions& options = {}) {
  using namespace synth_detail;
  validate_distribution(distribution);
  const auto pool = dedupe_facts(facts);
  require(n <= pool.size(), "synth",
          "n=" + std::to_string(n) + " exceeds the " + std::to_string(pool.size()) + " distinct facts available");

  std::mt19937_64 rng(seed);
  const auto order = sample_indices(rng, pool.size(), pool.size());
  const auto quota = n == 0 ? std::map<MutationType, std::size_t>{}
                            : allocate_largest_remainder(distribution, n);

  std::vector<std::string> entity_candidates;
  {
    std::set<std::string> uniq;
    for (const auto& f : pool)
      for (auto sp : entity_spans(f.claim_text)) uniq.insert(f.claim_text.substr(sp.begin, sp.end - sp.begin));
    entity_candidates.assign(uniq.begin(), uniq.end());
  }

  std::vector<std::pair<std::size_t, std::size_t>> type_order;  // (applicable count, dist index)
  for (std::size_t i = 0; i < distribution.size(); ++i) {
    std::size_t applicable = 0;
    for (const auto& f : pool) applicable += mutation_applicable(distribution[i].first, f.claim_text);
    type_order.emplace_back(applicable, i);
  }
  std::sort(type_order.begin(), type_order.end());

  std::vector<bool> used(pool.size(), false);
  std::vector<std::pair<std::size_t, MutationType>> chosen;  // (pool index, type)
  std::vector<std::string> shortfalls;
  for (const auto& [_, di] : type_order) {
    const auto type = distribution[di].first;
    const auto want = quota.count(type) ? quota.at(type) : 0;
    std::size_t got = 0;
    for (auto idx : order) {
      if (got == want) break;
      if (used[idx] || !mutation_applicable(type, pool[idx].claim_text)) continue;
      used[idx] = true;
      chosen.emplace_back(idx, type);
      ++got;
    }
    if (got < want)
      shortfalls.push_back(std::string(to_string(type)) + " " + std::to_string(got) + "/" + std::to_string(want));
  }
  if (!shortfalls.empty())
    throw Error(ErrorCode::invalid_argument, "synth", "not enough mutable facts; achievable counts: " + join(shortfalls, ", "));

  // Cases are emitted in seeded-shuffle order so the output does not
  // cluster by type.
  std::map<std::size_t, MutationType> by_idx(chosen.begin(), chosen.end());
  InjectionOutcome out{snapshot, {}};
  std::set<std::string> titles;
  for (const auto& b : snapshot.blocks()) titles.insert(b.doc_title);
  std::size_t serial = 0;
  for (auto idx : order) {
    auto it = by_idx.find(idx);
    if (it == by_idx.end()) continue;
    const auto& fact = pool[idx];
    const auto type = it->second;
    InjectedCase c;
    c.original = fact;
    c.mutation.type = type;
    c.mutation.target_fact_id = fact.fact_id;
    c.mutation.seed = case_seed(seed, fact.fact_id, type);
    std::mt19937_64 case_rng(c.mutation.seed);
    auto m = apply_mutation(type, fact.claim_text, case_rng, {}, entity_candidates);
    c.mutation.params = m.params;
    c.marker = m.mutated;

    std::string title;
    do {
      char buf[48];
      std::snprintf(buf, sizeof buf, "Synthetic Record %04zu", ++serial);
      title = buf;
    } while (titles.count(title));
    titles.insert(title);

    std::string text = m.mutated;
    for (std::size_t f = 0; f < options.filler_sentences; ++f)
      text += " " + filler_pool()[f % filler_pool().size()];
    const auto* source = snapshot.find(fact.source_block_id);
    Block mutated;
    mutated.doc_title = title;
    mutated.kind = BlockKind::passage;
    mutated.text = text;
    mutated.char_count = utf8_length(text);
    if (source) mutated.category = source->category;
    mutated.block_id = make_block_id(title, {}, 0);
    if (m.bridge) {
      Block bridge;
      bridge.doc_title = title;
      bridge.section_path = {"Premise"};
      bridge.kind = BlockKind::passage;
      bridge.text = *m.bridge;
      bridge.char_count = utf8_length(bridge.text);
      bridge.category = mutated.category;
      bridge.block_id = make_block_id(title, bridge.section_path, 0);
      out.snapshot.add(bridge);
      c.support_blocks.push_back(std::move(bridge));
    }
    out.snapshot.add(mutated);
    c.mutated_block = std::move(mutated);
    c.case_id = "c" + hex64(hash_fields({std::to_string(seed), fact.fact_id, to_string(type)}));
    out.cases.push_back(std::move(c));
  }
  return out;
}

// --- serialization -------------------------------------------------------------

inline nlohmann::json to_json(const InjectedCase& c) {
  nlohmann::json j;
  j["case_id"] = c.case_id;
  j["original"] = to_json(c.original);
  j["mutated_block"] = to_json(c.mutated_block);
  auto support = nlohmann::json::array();
  for (const auto& b : c.support_blocks) support.push_back(to_json(b));
  j["support_blocks"] = support;
  j["gold_label"] = "inconsistent";
  j["mutation"] = {{"type", to_string(c.mutation.type)},
                   {"target_fact_id", c.mutation.target_fact_id},
                   {"params", c.mutation.params},
                   {"seed", c.mutation.seed}};
  j["marker"] = c.marker;
  j["generator"] = kSyntheticGenerator;
  return j;
}

inline InjectedCase case_from_json(const nlohmann::json& j) {
  InjectedCase c;
  c.case_id = j.at("case_id").get<std::string>();
  c.original = fact_from_json(j.at("original"));
  auto block = [](const nlohmann::json& bj) {
    Block b = block_from_json(bj);
    b.char_count = utf8_length(b.text);
    return b;
  };
  c.mutated_block = block(j.at("mutated_block"));
  for (const auto& b : j.value("support_blocks", nlohmann::json::array())) c.support_blocks.push_back(block(b));
  const auto& m = j.at("mutation");
  const auto t = parse_mutation_type(m.at("type").get<std::string>());
  if (!t) throw Error(ErrorCode::parse, "cases", "unknown mutation type " + m.at("type").dump());
  c.mutation.type = *t;
  c.mutation.target_fact_id = m.at("target_fact_id").get<std::string>();
  c.mutation.params = m.at("params").get<std::map<std::string, std::string>>();
  c.mutation.seed = m.at("seed").get<std::uint64_t>();
  c.marker = j.at("marker").get<std::string>();
  return c;
}

inline void write_cases(const std::vector<InjectedCase>& cases, std::ostream& out) {
  for (const auto& c : cases) out << to_json(c).dump() << '\n';
}

inline std::vector<InjectedCase> read_cases(std::istream& in) {
  std::vector<InjectedCase> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(case_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "cases", "bad case at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// --- benchmarks ------------------------------------------------------------------

struct Benchmark {
  CorpusSnapshot snapshot;
  std::vector<InjectedCase> cases;
  std::vector<LabeledFact> dataset;
};

/// Labeled benchmark: `n_injected` facts carrying an injected
/// contradiction plus `n_clean` untouched facts labeled consistent.
inline Benchmark build_benchmark(const CorpusSnapshot& snapshot, const std::vector<AtomicFact>& facts,
                                 std::size_t n_injected, std::size_t n_clean, std::uint64_t seed,
                                 const TaxonomyDistribution& distribution = default_distribution(),
                                 const InjectOptions& options = {}) {
  auto injected = inject(snapshot, facts, distribution, n_injected, seed, options);

  std::set<std::string> mutated_claims;
  for (const auto& c : injected.cases) mutated_claims.insert(normalize_claim(c.original.claim_text));
  std::vector<AtomicFact> clean_pool;
  for (const auto& f : synth_detail::dedupe_facts(facts))
    if (!mutated_claims.count(normalize_claim(f.claim_text))) clean_pool.push_back(f);
  require(n_clean <= clean_pool.size(), "synth",
          "need " + std::to_string(n_clean) + " clean facts, only " + std::to_string(clean_pool.size()) + " remain");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  auto picks = sample_indices(rng, clean_pool.size(), n_clean);
  std::sort(picks.begin(), picks.end());

  Benchmark bench{std::move(injected.snapshot), std::move(injected.cases), {}};
  for (const auto& c : bench.cases) {
    LabeledFact lf;
    lf.fact = c.original;
    lf.gold_label = Label::inconsistent;
    lf.evidence_block_ids.push_back(c.mutated_block.block_id);
    for (const auto& s : c.support_blocks) lf.evidence_block_ids.push_back(s.block_id);
    lf.inconsistency_type = c.mutation.type;
    lf.split = assign_split(lf.fact.fact_id);
    bench.dataset.push_back(std::move(lf));
  }
  for (auto i : picks) {
    LabeledFact lf;
    lf.fact = clean_pool[i];
    lf.gold_label = Label::consistent;
    lf.split = assign_split(lf.fact.fact_id);
    bench.dataset.push_back(std::move(lf));
  }
  return bench;
}

}  // namespace clid
