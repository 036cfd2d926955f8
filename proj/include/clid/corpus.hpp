#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"

namespace clid {

enum class BlockKind { passage, table, infobox };

inline const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::passage: return "passage";
    case BlockKind::table: return "table";
    case BlockKind::infobox: return "infobox";
  }
  return "passage";
}

inline std::optional<BlockKind> parse_block_kind(std::string_view s) {
  if (s == "passage") return BlockKind::passage;
  if (s == "table") return BlockKind::table;
  if (s == "infobox") return BlockKind::infobox;
  return std::nullopt;
}

/// One retrievable corpus unit. Tables and infoboxes arrive pre-serialized
/// as pipe-delimited text.
struct Block {
  std::string block_id;
  std::string doc_title;
  std::vector<std::string> section_path;
  BlockKind kind = BlockKind::passage;
  std::string text;
  std::optional<std::string> category;
  std::size_t char_count = 0;

  /// "Title > Section > Subsection", the form shown to models.
  std::string full_title() const {
    std::string out = doc_title;
    for (const auto& s : section_path) out += " > " + s;
    return out;
  }

  bool operator==(const Block&) const = default;
};

inline nlohmann::json to_json(const Block& b) {
  nlohmann::json j;
  j["block_id"] = b.block_id;
  j["doc_title"] = b.doc_title;
  j["section_path"] = b.section_path;
  j["kind"] = to_string(b.kind);
  j["text"] = b.text;
  j["category"] = b.category ? nlohmann::json(*b.category) : nlohmann::json(nullptr);
  return j;
}

/// Parses a block record without id assignment or validation beyond types.
inline Block block_from_json(const nlohmann::json& j) {
  Block b;
  if (j.contains("block_id") && !j["block_id"].is_null()) b.block_id = j.at("block_id").get<std::string>();
  b.doc_title = j.at("doc_title").get<std::string>();
  if (j.contains("section_path") && !j["section_path"].is_null())
    b.section_path = j["section_path"].get<std::vector<std::string>>();
  const auto kind = j.contains("kind") ? j["kind"].get<std::string>() : std::string("passage");
  auto parsed = parse_block_kind(kind);
  if (!parsed) throw Error(ErrorCode::ingest, "ingest", "unknown block kind '" + kind + "'");
  b.kind = *parsed;
  b.text = j.at("text").get<std::string>();
  if (j.contains("category") && !j["category"].is_null()) b.category = j["category"].get<std::string>();
  return b;
}

/// Inclusive character-length bounds for block filtering.
struct BlockFilter {
  std::size_t min_chars = 100;
  std::size_t max_chars = 320;

  static BlockFilter permissive() { return {0, std::numeric_limits<std::size_t>::max()}; }
};

/// True iff min_chars <= length(text) <= max_chars, with length counted in
/// Unicode scalar values.
inline bool filter_block(std::string_view block_text, std::size_t min_chars = 100, std::size_t max_chars = 320) {
  require(min_chars < max_chars, "filter", "min_chars must be below max_chars");
  const auto n = utf8_length(block_text);
  return n >= min_chars && n <= max_chars;
}

/// block_id = stable hash of (doc_title, section_path, ordinal).
inline std::string make_block_id(std::string_view doc_title, const std::vector<std::string>& section_path,
                                 std::size_t ordinal) {
  const auto sections = join(section_path, std::string_view("\x1e", 1));
  const auto ord = std::to_string(ordinal);
  return "b" + hex64(hash_fields({doc_title, sections, ord}));
}

/// Write-once block collection. Built by ingest_snapshot (or assembled via
/// add() and then treated as frozen); all accessors are const.
class CorpusSnapshot {
 public:
  CorpusSnapshot() = default;
  explicit CorpusSnapshot(std::string snapshot_date) : snapshot_date_(std::move(snapshot_date)) {}

  const std::string& snapshot_date() const { return snapshot_date_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }

  const Block* find(std::string_view block_id) const {
    auto it = by_id_.find(std::string(block_id));
    return it == by_id_.end() ? nullptr : &blocks_[it->second];
  }

  const Block& at(std::string_view block_id) const {
    if (const auto* b = find(block_id)) return *b;
    throw Error(ErrorCode::not_found, "corpus", "unknown block_id " + std::string(block_id));
  }

  const std::map<std::string, std::vector<std::string>>& title_index() const { return title_index_; }

  /// Appends a block; char_count is recomputed. Duplicate ids are corruption.
  void add(Block block) {
    if (block.text.empty()) throw Error(ErrorCode::ingest, "ingest", "block " + block.block_id + " has empty text");
    block.char_count = utf8_length(block.text);
    if (by_id_.count(block.block_id))
      throw Error(ErrorCode::corruption, "ingest", "duplicate block_id " + block.block_id);
    by_id_.emplace(block.block_id, blocks_.size());
    title_index_[block.doc_title].push_back(block.block_id);
    blocks_.push_back(std::move(block));
  }

  bool operator==(const CorpusSnapshot& other) const {
    return snapshot_date_ == other.snapshot_date_ && blocks_ == other.blocks_;
  }

 private:
  std::string snapshot_date_;
  std::vector<Block> blocks_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::string, std::vector<std::string>> title_index_;
};

inline bool is_iso_date(std::string_view d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(d[i]))) return false;
  const int month = (d[5] - '0') * 10 + (d[6] - '0');
  const int day = (d[8] - '0') * 10 + (d[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

/// Reads line-delimited block records. Records carrying a block_id keep it
/// (this is how a serialized snapshot round-trips); others get an id from
/// (doc_title, section_path, ordinal), where ordinal counts every record of
/// that section in input order, filtered or not.
inline CorpusSnapshot ingest_snapshot(std::istream& source, const BlockFilter& filter,
                                      const std::string& snapshot_date) {
  require(filter.min_chars < filter.max_chars, "ingest", "filter bounds must satisfy min < max");
  require(is_iso_date(snapshot_date), "ingest", "snapshot_date must be an ISO-8601 date, got '" + snapshot_date + "'");
  CorpusSnapshot snapshot(snapshot_date);
  std::map<std::string, std::size_t> ordinals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = "line " + std::to_string(line_no);
    Block block;
    try {
      block = block_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ingest, "ingest", "malformed record at " + where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ingest, "ingest", std::string(e.what()) + " at " + where);
    }
    if (block.doc_title.empty()) throw Error(ErrorCode::ingest, "ingest", "empty doc_title at " + where);
    if (block.text.empty()) throw Error(ErrorCode::ingest, "ingest", "empty text at " + where);
    std::size_t length;
    try {
      length = utf8_length(block.text);
    } catch (const Error& e) {
      throw Error(ErrorCode::ingest, "ingest", std::string(e.what()) + " at " + where);
    }
    const auto group = block.doc_title + '\x1f' + join(block.section_path, "\x1e");
    const auto ordinal = ordinals[group]++;
    if (block.block_id.empty()) block.block_id = make_block_id(block.doc_title, block.section_path, ordinal);
    if (length < filter.min_chars || length > filter.max_chars) continue;
    try {
      snapshot.add(std::move(block));
    } catch (const Error& e) {
      throw Error(e.code(), "ingest", std::string(e.what()) + " at " + where);
    }
  }
  return snapshot;
}

inline void write_snapshot_records(const CorpusSnapshot& snapshot, std::ostream& out) {
  for (const auto& b : snapshot.blocks()) out << to_json(b).dump() << '\n';
}

inline std::string manifest_path(const std::string& snapshot_path) { return snapshot_path + ".manifest.json"; }

/// Writes the records file and its sidecar manifest.
inline void save_snapshot(const CorpusSnapshot& snapshot, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "snapshot", "cannot write " + path);
  write_snapshot_records(snapshot, out);
  std::ofstream manifest(manifest_path(path), std::ios::binary);
  if (!manifest) throw Error(ErrorCode::io, "snapshot", "cannot write " + manifest_path(path));
  nlohmann::json m;
  m["snapshot_date"] = snapshot.snapshot_date();
  m["block_count"] = snapshot.size();
  m["format"] = "clid-blocks-v1";
  manifest << m.dump(2) << '\n';
}

inline CorpusSnapshot load_snapshot(const std::string& path) {
  std::ifstream manifest(manifest_path(path));
  if (!manifest) throw Error(ErrorCode::io, "snapshot", "missing manifest " + manifest_path(path));
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::corruption, "snapshot", std::string("bad manifest: ") + e.what());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "snapshot", "cannot read " + path);
  auto snapshot = ingest_snapshot(in, BlockFilter::permissive(), m.at("snapshot_date").get<std::string>());
  const auto expected = m.at("block_count").get<std::size_t>();
  if (snapshot.size() != expected)
    throw Error(ErrorCode::corruption, "snapshot",
                "manifest says " + std::to_string(expected) + " blocks, file has " + std::to_string(snapshot.size()));
  return snapshot;
}

/// Seeded sample of n blocks. Unstratified: uniform without replacement, in
/// draw order. Stratified: per-category counts by largest-remainder
/// allocation of n over category sizes (categories in name order), each
/// category sampled uniformly; output grouped by category name.
inline std::vector<Block> sample_blocks(const CorpusSnapshot& snapshot, std::size_t n, std::uint64_t seed,
                                        bool stratify_by_category) {
  const auto& blocks = snapshot.blocks();
  require(n <= blocks.size(), "sample",
          "sample size " + std::to_string(n) + " exceeds population " + std::to_string(blocks.size()));
  std::mt19937_64 rng(seed);
  std::vector<Block> out;
  out.reserve(n);
  if (!stratify_by_category) {
    for (auto i : sample_indices(rng, blocks.size(), n)) out.push_back(blocks[i]);
    return out;
  }
  std::vector<std::string> missing;
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i].category || blocks[i].category->empty()) missing.push_back(blocks[i].block_id);
    else strata[*blocks[i].category].push_back(i);
  }
  if (!missing.empty())
    throw Error(ErrorCode::invalid_argument, "sample", "blocks without category: " + join(missing, ", "));
  if (n == 0) return out;
  std::vector<std::pair<std::string, double>> weights;
  for (const auto& [cat, members] : strata) weights.emplace_back(cat, static_cast<double>(members.size()));
  const auto allocation = allocate_largest_remainder(weights, n);
  for (const auto& [cat, members] : strata) {
    const auto take = allocation.at(cat);
    for (auto i : sample_indices(rng, members.size(), take)) out.push_back(blocks[members[i]]);
  }
  return out;
}

}  // namespace clid
