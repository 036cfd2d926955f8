#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/corpus.hpp"
#include "clid/llm.hpp"
#include "clid/prompts.hpp"

namespace clid {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::vector<float> embed(std::string_view text) = 0;
  virtual std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
};

/// Deterministic, dependency-free test embedder: signed feature hashing of
/// lowercased word tokens into `dim` buckets, L2-normalized. Texts with no
/// word tokens embed to the zero vector.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 512) : dim_(dim) { require(dim > 0, "embed", "dim must be positive"); }

  std::string id() const override { return "hashing-bow-" + std::to_string(dim_); }
  std::size_t dim() const { return dim_; }

  std::vector<float> embed(std::string_view text) override {
    std::vector<double> acc(dim_, 0.0);
    for (const auto& tok : word_tokens(text)) {
      const auto h = fnv1a64(tok);
      acc[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    std::vector<float> out(dim_, 0.0f);
    if (norm > 0.0)
      for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(acc[i] / norm);
    return out;
  }

 private:
  std::size_t dim_;
};

/// Embedder backed by a callable (tests, adapters).
class FunctionEmbedder : public Embedder {
 public:
  using Fn = std::function<std::vector<float>(std::string_view)>;
  FunctionEmbedder(std::string id, Fn fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  std::string id() const override { return id_; }
  std::vector<float> embed(std::string_view text) override { return fn_(text); }

 private:
  std::string id_;
  Fn fn_;
};

/// A retrieved block. `rank` is the similarity rank (1-based);
/// `rerank_rank` is filled by rerank().
struct EvidenceItem {
  std::string block_id;
  double similarity = 0.0;
  int rank = 0;
  std::optional<int> rerank_rank;

  bool operator==(const EvidenceItem&) const = default;
};

inline nlohmann::json to_json(const EvidenceItem& e) {
  nlohmann::json j{{"block_id", e.block_id}, {"similarity", e.similarity}, {"rank", e.rank}};
  j["rerank_rank"] = e.rerank_rank ? nlohmann::json(*e.rerank_rank) : nlohmann::json(nullptr);
  return j;
}

inline EvidenceItem evidence_from_json(const nlohmann::json& j) {
  EvidenceItem e;
  e.block_id = j.at("block_id").get<std::string>();
  e.similarity = j.at("similarity").get<double>();
  e.rank = j.at("rank").get<int>();
  if (j.contains("rerank_rank") && !j["rerank_rank"].is_null()) e.rerank_rank = j["rerank_rank"].get<int>();
  return e;
}

/// Exact brute-force cosine index. Immutable after build; concurrent
/// searches are safe as long as the embedder used for queries is.
class VectorIndex {
 public:
  static constexpr char kMagic[8] = {'C', 'L', 'I', 'D', 'V', 'E', 'C', '1'};

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& block_ids() const { return ids_; }

  std::span<const float> vector(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  /// Embeds every block. All vectors must share one dimension and have
  /// non-zero norm.
  static VectorIndex build(const std::vector<Block>& blocks, Embedder& embedder) {
    require(!blocks.empty(), "index", "cannot build an index over zero blocks");
    std::vector<std::string> texts;
    texts.reserve(blocks.size());
    for (const auto& b : blocks) texts.push_back(b.text);
    const auto vectors = embedder.embed_batch(texts);
    if (vectors.size() != blocks.size())
      throw Error(ErrorCode::dimension_mismatch, "index", "embedder returned a different number of vectors");
    VectorIndex index;
    index.dim_ = vectors.front().size();
    if (index.dim_ == 0) throw Error(ErrorCode::dimension_mismatch, "index", "embedder returned an empty vector");
    index.values_.reserve(index.dim_ * blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& v = vectors[i];
      if (v.size() != index.dim_)
        throw Error(ErrorCode::dimension_mismatch, "index",
                    "block " + blocks[i].block_id + " embedded to dim " + std::to_string(v.size()) + ", expected " +
                        std::to_string(index.dim_));
      index.append(blocks[i].block_id, blocks[i].doc_title, v);
    }
    return index;
  }

  static VectorIndex build(const CorpusSnapshot& snapshot, Embedder& embedder) {
    return build(snapshot.blocks(), embedder);
  }

  /// Top min(k, eligible) blocks by cosine similarity, ties broken by
  /// block_id ascending. Blocks of `exclude_doc_title` are not eligible.
  std::vector<EvidenceItem> search(std::string_view query, std::size_t k, Embedder& embedder,
                                   const std::optional<std::string>& exclude_doc_title = std::nullopt) const {
    require(k >= 1, "retrieval", "k must be at least 1");
    if (trim(query).empty()) throw Error(ErrorCode::invalid_argument, "retrieval", "empty query");
    const auto q = embedder.embed(query);
    if (q.size() != dim_)
      throw Error(ErrorCode::dimension_mismatch, "retrieval",
                  "query embedded to dim " + std::to_string(q.size()) + ", index dim " + std::to_string(dim_));
    return search_vector(q, k, exclude_doc_title);
  }

  std::vector<EvidenceItem> search_vector(std::span<const float> q, std::size_t k,
                                          const std::optional<std::string>& exclude_doc_title = std::nullopt) const {
    const double qnorm = norm(q);
    if (qnorm == 0.0) throw Error(ErrorCode::zero_vector, "retrieval", "query embeds to the zero vector");
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (exclude_doc_title && titles_[i] == *exclude_doc_title) continue;
      const auto v = vector(i);
      double dot = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) dot += static_cast<double>(q[d]) * static_cast<double>(v[d]);
      const double sim = std::clamp(dot / (qnorm * norms_[i]), -1.0, 1.0);
      scored.emplace_back(sim, i);
    }
    const auto take = std::min(k, scored.size());
    auto better = [this](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return ids_[a.second] < ids_[b.second];
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
    std::vector<EvidenceItem> out;
    out.reserve(take);
    for (std::size_t r = 0; r < take; ++r)
      out.push_back({ids_[scored[r].second], scored[r].first, static_cast<int>(r + 1), std::nullopt});
    return out;
  }

  /// Binary layout (little-endian host order): 8-byte magic, u32 dim,
  /// u64 count, count*dim float32 values, then count block_id records of
  /// u32 length + bytes.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "index", "cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    const auto dim = static_cast<std::uint32_t>(dim_);
    const auto count = static_cast<std::uint64_t>(ids_.size());
    out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(values_.size() * sizeof(float)));
    for (const auto& id : ids_) {
      const auto len = static_cast<std::uint32_t>(id.size());
      out.write(reinterpret_cast<const char*>(&len), sizeof len);
      out.write(id.data(), len);
    }
    if (!out) throw Error(ErrorCode::io, "index", "short write to " + path);
  }

  /// Loads an index file; doc titles are resolved through `snapshot`,
  /// which must contain every indexed block.
  static VectorIndex load(const std::string& path, const CorpusSnapshot& snapshot) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "index", "cannot read " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
      throw Error(ErrorCode::corruption, "index", path + " is not an index file");
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || dim == 0) throw Error(ErrorCode::corruption, "index", "bad index header in " + path);
    std::vector<float> values(static_cast<std::size_t>(count) * dim);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) throw Error(ErrorCode::corruption, "index", "truncated vector block in " + path);
    VectorIndex index;
    index.dim_ = dim;
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint32_t len = 0;
      in.read(reinterpret_cast<char*>(&len), sizeof len);
      std::string id(len, '\0');
      in.read(id.data(), len);
      if (!in) throw Error(ErrorCode::corruption, "index", "truncated id table in " + path);
      const auto* block = snapshot.find(id);
      if (!block) throw Error(ErrorCode::corruption, "index", "indexed block " + id + " not in snapshot");
      index.append(id, block->doc_title, std::span<const float>(values.data() + i * dim, dim));
    }
    return index;
  }

  bool operator==(const VectorIndex& o) const { return dim_ == o.dim_ && ids_ == o.ids_ && values_ == o.values_; }

 private:
  static double norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
    return std::sqrt(s);
  }

  void append(const std::string& id, const std::string& title, std::span<const float> v) {
    const double n = norm(v);
    if (n == 0.0) throw Error(ErrorCode::zero_vector, "index", "block " + id + " embeds to the zero vector");
    if (!positions_.emplace(id, ids_.size()).second)
      throw Error(ErrorCode::corruption, "index", "duplicate block " + id);
    ids_.push_back(id);
    titles_.push_back(title);
    norms_.push_back(n);
    values_.insert(values_.end(), v.begin(), v.end());
  }

  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::string> titles_;
  std::vector<double> norms_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> positions_;
};

/// "[i] Title: <full title>\n<text>" entries separated by blank lines, in
/// list order. This is the document format every verification prompt uses.
inline std::string format_documents(const CorpusSnapshot& snapshot, const std::vector<EvidenceItem>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& b = snapshot.at(items[i].block_id);
    if (i) out += "\n\n";
    out += "[" + std::to_string(i + 1) + "] Title: " + b.full_title() + "\n" + b.text;
  }
  return out;
}

struct RerankResult {
  std::vector<EvidenceItem> items;
  bool degraded = false;
  std::string note;
};

/// Parses "3, 1, 2" (1-based) into a 0-based permutation of [0, n).
inline std::optional<std::vector<std::size_t>> parse_permutation(std::string_view text, std::size_t n) {
  std::vector<std::size_t> perm;
  std::string num;
  auto flush = [&]() -> bool {
    if (num.empty()) return true;
    const auto v = std::stoull(num);
    num.clear();
    if (v < 1 || v > n) return false;
    perm.push_back(static_cast<std::size_t>(v - 1));
    return true;
  };
  for (char c : text) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      num.push_back(c);
      if (num.size() > 9) return std::nullopt;
    } else if (c == ',' || c == ' ' || c == '\n' || c == '\t' || c == '[' || c == ']' || c == '>') {
      if (!flush()) return std::nullopt;
    } else {
      return std::nullopt;
    }
  }
  if (!flush() || perm.size() != n) return std::nullopt;
  std::vector<bool> seen(n, false);
  for (auto p : perm) {
    if (seen[p]) return std::nullopt;
    seen[p] = true;
  }
  return perm;
}

/// Listwise rerank in a single provider call. The output is always a
/// permutation of `items`; an unusable ordering falls back to the input
/// order with degraded=true.
inline RerankResult rerank(std::string_view query, const std::vector<EvidenceItem>& items,
                           const CorpusSnapshot& snapshot, LlmGateway& llm) {
  require(!items.empty(), "rerank", "rerank needs at least one item");
  RerankResult result;
  std::optional<std::vector<std::size_t>> perm;
  try {
    const auto response =
        llm.call(prompts::rerank_template(), {{"query", std::string(query)}, {"passages", format_documents(snapshot, items)}});
    perm = parse_permutation(extract_tagged(response, "ranking"), items.size());
    if (!perm) result.note = "provider ordering is not a permutation of 1.." + std::to_string(items.size());
  } catch (const ParseError& e) {
    result.note = e.what();
  }
  if (!perm) {
    result.degraded = true;
    perm.emplace(items.size());
    std::iota(perm->begin(), perm->end(), std::size_t{0});
  }
  result.items.reserve(items.size());
  for (std::size_t r = 0; r < perm->size(); ++r) {
    auto item = items[(*perm)[r]];
    item.rerank_rank = static_cast<int>(r + 1);
    result.items.push_back(std::move(item));
  }
  return result;
}

}  // namespace clid
