#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace clid {

enum class ErrorCode {
  invalid_argument,
  ingest,
  corruption,
  dimension_mismatch,
  zero_vector,
  missing_placeholder,
  parse,
  transport,
  empty_response,
  unmatched_prompt,
  verification,
  classification,
  agent,
  tool,
  extraction,
  coverage,
  undefined_metric,
  not_found,
  conflict,
  io,
  pipeline,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::ingest: return "ingest";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::zero_vector: return "zero_vector";
    case ErrorCode::missing_placeholder: return "missing_placeholder";
    case ErrorCode::parse: return "parse";
    case ErrorCode::transport: return "transport";
    case ErrorCode::empty_response: return "empty_response";
    case ErrorCode::unmatched_prompt: return "unmatched_prompt";
    case ErrorCode::verification: return "verification";
    case ErrorCode::classification: return "classification";
    case ErrorCode::agent: return "agent";
    case ErrorCode::tool: return "tool";
    case ErrorCode::extraction: return "extraction";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::undefined_metric: return "undefined_metric";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io: return "io";
    case ErrorCode::pipeline: return "pipeline";
  }
  return "unknown";
}

/// Every failure raised by the toolkit. `stage` names the pipeline stage that
/// failed ("ingest", "retrieval", "verify", ...) so CLI and HTTP layers can
/// report it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string stage, const std::string& message)
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Re-labels the stage while keeping code and message; used when a lower
  /// layer error crosses into an orchestrating stage.
  Error with_stage(std::string stage) const {
    Error copy = *this;
    copy.stage_ = std::move(stage);
    return copy;
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

/// Tagged-region or score parse failure; keeps the raw provider text.
class ParseError : public Error {
 public:
  ParseError(std::string stage, const std::string& message, std::string raw)
      : Error(ErrorCode::parse, std::move(stage), message), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts)
      : Error(ErrorCode::transport, "llm", message), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

inline void require(bool condition, std::string_view stage, const std::string& message) {
  if (!condition) throw Error(ErrorCode::invalid_argument, std::string(stage), message);
}

// --- hashing -----------------------------------------------------------------

/// FNV-1a, 64 bit. Used for ids and transcript keys, which must be stable
/// across platforms and runs (std::hash is not).
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 14695981039346656037ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf, 16);
}

/// Hash of a sequence of fields; the separator byte keeps ("ab","c") and
/// ("a","bc") apart.
inline std::uint64_t hash_fields(const std::vector<std::string_view>& fields) {
  std::uint64_t h = 14695981039346656037ULL;
  for (auto f : fields) {
    h = fnv1a64(f, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  }
  return h;
}

// --- text --------------------------------------------------------------------

/// Number of Unicode scalar values in a UTF-8 string. Throws on malformed input.
inline std::size_t utf8_length(std::string_view s) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t width;
    if (c < 0x80) width = 1;
    else if ((c >> 5) == 0x6) width = 2;
    else if ((c >> 4) == 0xE) width = 3;
    else if ((c >> 3) == 0x1E) width = 4;
    else throw Error(ErrorCode::invalid_argument, "utf8", "invalid UTF-8 lead byte at offset " + std::to_string(i));
    if (i + width > s.size())
      throw Error(ErrorCode::invalid_argument, "utf8", "truncated UTF-8 sequence at offset " + std::to_string(i));
    for (std::size_t k = 1; k < width; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2)
        throw Error(ErrorCode::invalid_argument, "utf8", "invalid UTF-8 continuation at offset " + std::to_string(i + k));
    }
    i += width;
    ++count;
  }
  return count;
}

/// Byte offset -> scalar-value offset, for a prefix known to be valid UTF-8.
inline std::size_t utf8_offset(std::string_view s, std::size_t byte_pos) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < byte_pos && i < s.size(); ++i)
    if ((static_cast<unsigned char>(s[i]) >> 6) != 0x2) ++n;
  return n;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

/// Collapses whitespace runs to one space and trims.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('\n', start);
    if (end == std::string_view::npos) end = s.size();
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Lowercased word tokens: runs of ASCII alphanumerics or non-ASCII bytes.
inline std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline bool is_stopword(std::string_view w) {
  static const char* const kStop[] = {
      "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "and", "or", "is", "was",
      "are", "were", "be", "been", "it", "its", "as", "with", "from", "that", "this", "which", "not"};
  for (auto* s : kStop)
    if (w == s) return true;
  return false;
}

inline std::vector<std::string> content_tokens(std::string_view s) {
  auto toks = word_tokens(s);
  std::erase_if(toks, [](const std::string& t) { return is_stopword(t); });
  return toks;
}

/// Naive sentence splitter: breaks after '.', '!' or '?' followed by
/// whitespace and an uppercase letter or digit. Good enough for corpus
/// fixtures and highlight anchoring; not a linguistic tokenizer.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    if (j < text.size() && !is_space(text[j])) continue;
    while (j < text.size() && is_space(text[j])) ++j;
    if (j < text.size() && !std::isupper(static_cast<unsigned char>(text[j])) &&
        !std::isdigit(static_cast<unsigned char>(text[j])))
      continue;
    auto sentence = trim(text.substr(start, i + 1 - start));
    if (!sentence.empty()) out.push_back(std::move(sentence));
    start = j;
  }
  auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

// --- randomness --------------------------------------------------------------

/// Uniform integer in [0, bound) by rejection sampling over mt19937_64.
/// std::uniform_int_distribution is implementation-defined, and sampled
/// outputs must match across standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// First `k` positions of a seeded Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k && i < n; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(k, n));
  return idx;
}

/// Largest-remainder (Hamilton) apportionment of `total` units across
/// weights. Remainder ties go to the earlier key.
template <typename Key>
std::map<Key, std::size_t> allocate_largest_remainder(const std::vector<std::pair<Key, double>>& weights,
                                                      std::size_t total) {
  double sum = 0.0;
  for (const auto& [_, w] : weights) {
    require(w >= 0.0, "allocation", "negative weight");
    sum += w;
  }
  require(sum > 0.0, "allocation", "weights sum to zero");
  std::map<Key, std::size_t> out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) * weights[i].second / sum;
    const auto base = static_cast<std::size_t>(quota + 1e-12);
    out[weights[i].first] = base;
    assigned += base;
    remainders.emplace_back(quota - static_cast<double>(base), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r, ++assigned)
    ++out[weights[remainders[r].second].first];
  return out;
}

}  // namespace clid
