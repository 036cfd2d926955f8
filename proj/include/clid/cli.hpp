#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/corpus.hpp"
#include "clid/detectors.hpp"
#include "clid/embedding.hpp"
#include "clid/estimation.hpp"
#include "clid/evaluation.hpp"
#include "clid/facts.hpp"
#include "clid/http_clients.hpp"
#include "clid/llm.hpp"
#include "clid/oracle_provider.hpp"
#include "clid/review_server.hpp"
#include "clid/synthetic.hpp"

namespace clid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags, bad config values, or a configuration that cannot run.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every tunable setting. Defaults follow the published experimental
/// setup: 10 agent steps, 15 passages per agent search, 20 per baseline
/// query, reranking on, decision threshold 0.5.
struct RunConfig {
  std::string snapshot;
  std::string index;
  std::string facts;
  std::string dataset;
  std::string results;
  std::string cases;
  std::string transcripts;
  std::string provider;  // "", scripted, oracle, http
  std::string llm_base_url = "https://api.openai.com/v1";
  std::string llm_model = "gpt-4o";
  std::string embedder = "hashing";  // hashing, http
  std::string embed_url;
  std::size_t embed_dim = 512;
  std::string system = "agent";
  int budget = 10;
  std::size_t k_search = 15;
  std::size_t k_baseline = 20;
  std::size_t k_clarify = 10;
  bool rerank = true;
  double threshold = 0.5;
  int count_threshold = 1;
  std::string score_mode = "strict";
  std::uint64_t seed = 0;
  std::string output_dir = "clid-out";
  std::size_t jobs = 1;
  std::string format = "table";

  DetectorConfig detector_config() const {
    DetectorConfig d;
    d.budget = budget;
    d.k_search = k_search;
    d.k_baseline = k_baseline;
    d.k_clarify = k_clarify;
    d.rerank = rerank;
    d.count_threshold = count_threshold;
    d.score_mode = score_mode == "lenient" ? ScoreMode::lenient : ScoreMode::strict;
    return d;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"snapshot", c.snapshot},       {"index", c.index},
          {"facts", c.facts},             {"dataset", c.dataset},
          {"results", c.results},         {"cases", c.cases},
          {"transcripts", c.transcripts}, {"provider", c.provider},
          {"llm_base_url", c.llm_base_url}, {"llm_model", c.llm_model},
          {"embedder", c.embedder},       {"embed_url", c.embed_url},
          {"embed_dim", c.embed_dim},     {"system", c.system},
          {"budget", c.budget},           {"k_search", c.k_search},
          {"k_baseline", c.k_baseline},   {"k_clarify", c.k_clarify},
          {"rerank", c.rerank},           {"threshold", c.threshold},
          {"count_threshold", c.count_threshold}, {"score_mode", c.score_mode},
          {"seed", c.seed},               {"output_dir", c.output_dir},
          {"jobs", c.jobs},               {"format", c.format}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("snapshot", c.snapshot);
  get("index", c.index);
  get("facts", c.facts);
  get("dataset", c.dataset);
  get("results", c.results);
  get("cases", c.cases);
  get("transcripts", c.transcripts);
  get("provider", c.provider);
  get("llm_base_url", c.llm_base_url);
  get("llm_model", c.llm_model);
  get("embedder", c.embedder);
  get("embed_url", c.embed_url);
  get("embed_dim", c.embed_dim);
  get("system", c.system);
  get("budget", c.budget);
  get("k_search", c.k_search);
  get("k_baseline", c.k_baseline);
  get("k_clarify", c.k_clarify);
  get("rerank", c.rerank);
  get("threshold", c.threshold);
  get("count_threshold", c.count_threshold);
  get("score_mode", c.score_mode);
  get("seed", c.seed);
  get("output_dir", c.output_dir);
  get("jobs", c.jobs);
  get("format", c.format);
  return c;
}

inline RunConfig default_run_config() { return RunConfig{}; }

/// Environment variable that feeds a setting: CLID_ + uppercased key.
inline std::string env_name(const std::string& key) {
  std::string out = "CLID_";
  for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

/// Parses a raw string into the JSON type of the key's default value.
inline nlohmann::json parse_setting(const std::string& key, const std::string& raw, const nlohmann::json& defaults) {
  if (!defaults.contains(key)) throw UsageError("unknown setting '" + key + "'");
  const auto& proto = defaults.at(key);
  try {
    if (proto.is_boolean()) {
      const auto v = to_lower_ascii(trim(raw));
      if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "off" || v == "no") return false;
      throw UsageError("setting '" + key + "' expects a boolean, got '" + raw + "'");
    }
    std::size_t used = 0;
    if (proto.is_number_unsigned()) {
      if (!raw.empty() && raw[0] == '-') throw UsageError("setting '" + key + "' must be non-negative");
      const auto v = std::stoull(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    }
    if (proto.is_number_integer()) {
      const auto v = std::stoll(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    }
    if (proto.is_number_float()) {
      const auto v = std::stod(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
      return v;
    }
  } catch (const std::invalid_argument&) {
    throw UsageError("setting '" + key + "' cannot parse '" + raw + "'");
  } catch (const std::out_of_range&) {
    throw UsageError("setting '" + key + "' is out of range: '" + raw + "'");
  }
  return raw;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

/// flags > config file > environment > defaults. Credentials are never
/// settings: a config file naming one is rejected.
inline RunConfig resolve_config(const std::map<std::string, std::string>& flags, const nlohmann::json& config_file,
                                const EnvLookup& env = process_env) {
  const auto defaults = to_json(default_run_config());
  auto merged = defaults;
  for (const auto& [key, _] : defaults.items())
    if (auto v = env(env_name(key))) merged[key] = parse_setting(key, *v, defaults);
  if (!config_file.is_null()) {
    if (!config_file.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : config_file.items()) {
      const auto lower = to_lower_ascii(key);
      if (lower.find("key") != std::string::npos || lower.find("token") != std::string::npos ||
          lower.find("secret") != std::string::npos || lower.find("password") != std::string::npos)
        throw UsageError("credential-like setting '" + key + "' is not allowed in config files; use the environment");
      if (!defaults.contains(key)) throw UsageError("unknown setting '" + key + "' in config file");
      if (value.is_string()) {
        merged[key] = parse_setting(key, value.get<std::string>(), defaults);
        continue;
      }
      const auto& proto = defaults.at(key);
      const bool same_kind = proto.is_boolean() ? value.is_boolean()
                             : proto.is_number_float() ? value.is_number()
                             : proto.is_number() ? value.is_number_integer()
                                                 : false;
      if (!same_kind) throw UsageError("setting '" + key + "' has the wrong type in config file");
      if (proto.is_number_unsigned() && value.get<std::int64_t>() < 0)
        throw UsageError("setting '" + key + "' must be non-negative");
      merged[key] = value;
    }
  }
  for (const auto& [key, raw] : flags) merged[key] = parse_setting(key, raw, defaults);
  try {
    return run_config_from_json(merged);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad setting type: ") + e.what());
  }
}

/// Validation that needs no file access; every issue is a usage error.
inline void validate_config(const RunConfig& c) {
  if (!parse_system(c.system)) throw UsageError("system must be agent, rv or nli");
  if (c.budget < 1) throw UsageError("budget must be at least 1");
  if (c.k_search < 1 || c.k_baseline < 1 || c.k_clarify < 1) throw UsageError("k values must be at least 1");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw UsageError("threshold must lie in [0,1]");
  if (c.count_threshold < 1) throw UsageError("count_threshold must be at least 1");
  if (c.score_mode != "strict" && c.score_mode != "lenient") throw UsageError("score_mode must be strict or lenient");
  if (c.format != "table" && c.format != "records") throw UsageError("format must be table or records");
  if (c.jobs < 1) throw UsageError("jobs must be at least 1");
  if (c.embedder != "hashing" && c.embedder != "http") throw UsageError("embedder must be hashing or http");
  if (c.embedder == "http" && c.embed_url.empty()) throw UsageError("embedder http needs embed_url");
  if (c.provider != "" && c.provider != "scripted" && c.provider != "oracle" && c.provider != "http")
    throw UsageError("provider must be scripted, oracle or http");
  if (c.provider == "scripted" && c.transcripts.empty()) throw UsageError("provider scripted needs --transcripts");
  if (c.provider == "oracle" && c.cases.empty()) throw UsageError("provider oracle needs --cases");
}

// --- plumbing -------------------------------------------------------------------------

namespace detail {

inline std::ifstream open_in(const std::string& path, const std::string& stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, stage, "cannot read " + path);
  return in;
}

inline std::ofstream open_out(const std::string& dir, const std::string& name, const std::string& stage) {
  std::filesystem::create_directories(dir);
  const auto path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, stage, "cannot write " + path);
  return out;
}

inline void write_resolved(const RunConfig& c, const std::string& command, const nlohmann::json& args) {
  auto out = open_out(c.output_dir, "resolved_config.json", "config");
  out << nlohmann::json{{"command", command}, {"config", to_json(c)}, {"args", args}}.dump(2) << '\n';
}

inline std::unique_ptr<Embedder> make_embedder(const RunConfig& c) {
  if (c.embedder == "http") return std::make_unique<HttpEmbedder>(c.embed_url, c.embed_dim);
  return std::make_unique<HashingEmbedder>(c.embed_dim);
}

/// Accepts {key, response} transcripts and recorded run logs
/// ({key, response_text}).
inline void load_transcripts(ScriptedProvider& p, const std::string& path) {
  auto in = open_in(path, "transcript");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto response = j.contains("response") ? j.at("response") : j.at("response_text");
      p.add(j.at("key").get<std::string>(), response.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "transcript", path + " line " + std::to_string(n) + ": " + e.what());
    }
  }
}

inline std::unique_ptr<LlmProvider> make_provider(const RunConfig& c) {
  if (c.provider.empty()) throw UsageError("this command needs --provider (scripted, oracle or http)");
  if (c.provider == "scripted") {
    auto p = std::make_unique<ScriptedProvider>(ScriptedProvider::Mode::keyed, "scripted");
    load_transcripts(*p, c.transcripts);
    return p;
  }
  if (c.provider == "oracle") {
    auto in = open_in(c.cases, "cases");
    OracleRegistry registry;
    registry.add_cases(read_cases(in));
    return std::make_unique<ExactOracleProvider>(std::move(registry));
  }
  HttpChatProvider::Options o;
  o.base_url = c.llm_base_url;
  o.model = c.llm_model;
  return std::make_unique<HttpChatProvider>(o);
}

inline CorpusSnapshot need_snapshot(const RunConfig& c) {
  if (c.snapshot.empty()) throw UsageError("--snapshot is required");
  return load_snapshot(c.snapshot);
}

inline VectorIndex need_index(const RunConfig& c, const CorpusSnapshot& snapshot, Embedder& embedder) {
  if (!c.index.empty()) return VectorIndex::load(c.index, snapshot);
  return VectorIndex::build(snapshot, embedder);
}

inline std::vector<AtomicFact> need_facts(const RunConfig& c) {
  if (!c.facts.empty()) {
    auto in = open_in(c.facts, "facts");
    return read_facts(in);
  }
  if (!c.dataset.empty()) {
    auto in = open_in(c.dataset, "dataset");
    std::vector<AtomicFact> out;
    for (auto& lf : read_dataset(in)) out.push_back(std::move(lf.fact));
    return out;
  }
  throw UsageError("--facts or --dataset is required");
}

}  // namespace detail

// --- subcommands ------------------------------------------------------------------------

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct IngestArgs {
  std::string input;
  std::string snapshot_date;
  std::size_t min_chars = 100;
  std::size_t max_chars = 320;
};

inline int cmd_ingest(const RunConfig& c, const IngestArgs& a, Streams io) {
  if (a.input.empty()) throw UsageError("--input is required");
  if (!is_iso_date(a.snapshot_date)) throw UsageError("--snapshot-date must be YYYY-MM-DD");
  if (a.min_chars >= a.max_chars) throw UsageError("--min-chars must be below --max-chars");
  auto in = detail::open_in(a.input, "ingest");
  const auto snapshot = ingest_snapshot(in, BlockFilter{a.min_chars, a.max_chars}, a.snapshot_date);
  std::filesystem::create_directories(c.output_dir);
  save_snapshot(snapshot, c.output_dir + "/snapshot.jsonl");
  detail::write_resolved(c, "ingest",
                         {{"input", a.input}, {"snapshot_date", a.snapshot_date}, {"min_chars", a.min_chars}, {"max_chars", a.max_chars}});
  io.out << "ingested " << snapshot.size() << " blocks -> " << c.output_dir << "/snapshot.jsonl\n";
  return kExitOk;
}

inline int cmd_index(const RunConfig& c, Streams io) {
  const auto snapshot = detail::need_snapshot(c);
  auto embedder = detail::make_embedder(c);
  const auto index = VectorIndex::build(snapshot, *embedder);
  std::filesystem::create_directories(c.output_dir);
  index.save(c.output_dir + "/index.bin");
  detail::write_resolved(c, "index", nlohmann::json::object());
  io.out << "indexed " << snapshot.size() << " blocks with " << embedder->id() << " -> " << c.output_dir
         << "/index.bin\n";
  return kExitOk;
}

struct ExtractArgs {
  std::size_t sample = 0;  // 0 = every block
  bool stratify = false;
  bool faithfulness = false;
};

inline int cmd_extract(const RunConfig& c, const ExtractArgs& a, Streams io) {
  const auto snapshot = detail::need_snapshot(c);
  auto provider = detail::make_provider(c);
  RunLog log;
  LlmGateway llm(*provider, log);
  const auto blocks = a.sample ? sample_blocks(snapshot, a.sample, c.seed, a.stratify) : snapshot.blocks();
  std::vector<AtomicFact> facts;
  for (const auto& b : blocks) {
    auto outcome = extract_facts_with_warnings(b, llm);
    for (const auto& w : outcome.warnings) io.err << "warning: " << w << '\n';
    for (auto& f : outcome.facts) {
      if (a.faithfulness) faithfulness_check(f, llm);
      facts.push_back(std::move(f));
    }
  }
  const auto before = facts.size();
  if (a.faithfulness) facts = drop_unfaithful(std::move(facts));
  auto out = detail::open_out(c.output_dir, "facts.jsonl", "extract");
  write_facts(facts, out);
  detail::write_resolved(c, "extract", {{"sample", a.sample}, {"stratify", a.stratify}, {"faithfulness", a.faithfulness}});
  io.out << "extracted " << facts.size() << " facts from " << blocks.size() << " blocks";
  if (a.faithfulness) io.out << " (" << before - facts.size() << " dropped as unfaithful)";
  io.out << '\n';
  return kExitOk;
}

struct DetectArgs {
  bool reports = false;
  bool record_log = false;
};

inline int cmd_detect(const RunConfig& c, const DetectArgs& a, Streams io) {
  const auto system = *parse_system(c.system);
  auto provider = detail::make_provider(c);  // validated before any file is read
  const auto snapshot = detail::need_snapshot(c);
  const auto facts = detail::need_facts(c);
  auto embedder = detail::make_embedder(c);
  const auto index = detail::need_index(c, snapshot, *embedder);

  std::filesystem::create_directories(c.output_dir);
  std::ofstream log_file;
  if (a.record_log) log_file = detail::open_out(c.output_dir, "run_log.jsonl", "detect");
  RunLog log(a.record_log ? &log_file : nullptr);
  LlmGateway::Options gopts;
  gopts.max_in_flight = std::max<std::size_t>(1, c.jobs);
  LlmGateway llm(*provider, log, gopts);
  DetectionContext ctx{snapshot, index, *embedder, llm};
  const auto dconf = c.detector_config();

  std::vector<std::optional<DetectionResult>> results(facts.size());
  std::vector<std::optional<TwoSidedReport>> reports(facts.size());
  std::vector<std::string> failures(facts.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < facts.size(); i = next++) {
      try {
        results[i] = run_detector(system, facts[i], ctx, dconf);
        if (a.reports) reports[i] = generate_report(facts[i], *results[i], ctx);
      } catch (const Error& e) {
        failures[i] = "fact " + facts[i].fact_id + ": [" + e.stage() + "] " + to_string(e.code()) + ": " + e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(c.jobs, facts.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t failed = 0;
  for (const auto& f : failures)
    if (!f.empty()) {
      io.err << "error: " << f << '\n';
      ++failed;
    }
  if (failed) {
    io.err << failed << " of " << facts.size() << " facts failed; no results written\n";
    return kExitRuntime;
  }

  // Merge order is by fact_id regardless of which worker finished first.
  std::vector<std::size_t> order(facts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return facts[x].fact_id < facts[y].fact_id; });
  auto out = detail::open_out(c.output_dir, "results.jsonl", "detect");
  for (auto i : order) out << to_json(*results[i]).dump() << '\n';
  if (a.reports) {
    auto rep = detail::open_out(c.output_dir, "reports.jsonl", "detect");
    for (auto i : order) {
      auto j = to_json(*reports[i]);
      j["fact_id"] = facts[i].fact_id;
      rep << j.dump() << '\n';
    }
  }
  detail::write_resolved(c, "detect", {{"reports", a.reports}, {"record_log", a.record_log}});
  std::size_t flagged = 0;
  for (const auto& r : results)
    flagged += (r->system == SystemKind::nli_pipeline && r->refute_count)
                   ? nli_decision(*r->refute_count, c.count_threshold)
                   : r->score > c.threshold;
  io.out << "detected " << facts.size() << " facts with " << to_string(system) << "; " << flagged
         << " flagged inconsistent -> " << c.output_dir << "/results.jsonl\n";
  return kExitOk;
}

struct SynthArgs {
  std::size_t n = 50;
  std::optional<std::size_t> clean;
  std::size_t filler = 0;
  std::string distribution;  // JSON file {type: weight}
};

inline TaxonomyDistribution load_distribution(const std::string& path) {
  auto in = detail::open_in(path, "synth");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("distribution file is not JSON: ") + e.what());
  }
  TaxonomyDistribution dist;
  for (auto t : kAllMutationTypes)
    if (j.contains(to_string(t))) dist.emplace_back(t, j.at(to_string(t)).get<double>());
  for (const auto& [key, _] : j.items())
    if (!parse_mutation_type(key)) throw UsageError("unknown mutation type '" + key + "' in distribution");
  return dist;
}

inline int cmd_synth(const RunConfig& c, const SynthArgs& a, Streams io) {
  const auto snapshot = detail::need_snapshot(c);
  std::vector<AtomicFact> facts;
  if (!c.facts.empty()) facts = detail::need_facts(c);
  else
    for (const auto& b : snapshot.blocks())
      for (auto& f : facts_from_sentences(b)) facts.push_back(std::move(f));
  const auto dist = a.distribution.empty() ? default_distribution() : load_distribution(a.distribution);
  InjectOptions opts;
  opts.filler_sentences = a.filler;
  const auto bench = build_benchmark(snapshot, facts, a.n, a.clean.value_or(a.n), c.seed, dist, opts);

  std::filesystem::create_directories(c.output_dir);
  save_snapshot(bench.snapshot, c.output_dir + "/snapshot.jsonl");
  {
    auto out = detail::open_out(c.output_dir, "cases.jsonl", "synth");
    write_cases(bench.cases, out);
  }
  {
    auto out = detail::open_out(c.output_dir, "dataset.jsonl", "synth");
    write_dataset(bench.dataset, out);
  }
  {
    auto out = detail::open_out(c.output_dir, "facts.jsonl", "synth");
    std::vector<AtomicFact> dataset_facts;
    for (const auto& lf : bench.dataset) dataset_facts.push_back(lf.fact);
    write_facts(dataset_facts, out);
  }
  detail::write_resolved(c, "synth", {{"n", a.n}, {"clean", a.clean.value_or(a.n)}, {"filler", a.filler},
                                      {"distribution", a.distribution}});
  std::map<std::string, std::size_t> by_type;
  for (const auto& cs : bench.cases) ++by_type[to_string(cs.mutation.type)];
  io.out << "injected " << bench.cases.size() << " cases, " << bench.dataset.size() - bench.cases.size()
         << " clean facts; snapshot digest " << snapshot_digest(bench.snapshot) << '\n';
  for (const auto& [t, k] : by_type) io.out << "  " << t << ": " << k << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string split = "all";  // all, validation, test
  bool tune = false;          // pick the threshold on validation, report test
};

inline int cmd_evaluate(const RunConfig& c, const EvaluateArgs& a, Streams io) {
  if (c.dataset.empty()) throw UsageError("--dataset is required");
  if (c.results.empty()) throw UsageError("--results is required");
  if (a.split != "all" && a.split != "validation" && a.split != "test")
    throw UsageError("--split must be all, validation or test");
  auto din = detail::open_in(c.dataset, "evaluation");
  const auto dataset = read_dataset(din);
  auto rin = detail::open_in(c.results, "evaluation");
  const auto results = read_results(rin);

  auto subset = [&](std::optional<Split> s) {
    std::vector<LabeledFact> out;
    for (const auto& lf : dataset)
      if (!s || lf.split == *s) out.push_back(lf);
    return out;
  };
  auto results_for = [&](const std::vector<LabeledFact>& ds) {
    std::set<std::string> ids;
    for (const auto& lf : ds) ids.insert(lf.fact.fact_id);
    std::vector<DetectionResult> out;
    for (const auto& r : results)
      if (ids.count(r.fact_id)) out.push_back(r);
    return out;
  };

  EvaluateOptions opts{c.threshold, c.count_threshold};
  std::vector<LabeledFact> target;
  if (a.tune) {
    const auto val = subset(Split::validation);
    const auto val_results = results_for(val);
    std::map<std::string, double> score;
    for (const auto& r : val_results) score[r.fact_id] = r.score;
    std::vector<double> s;
    std::vector<int> g;
    for (const auto& lf : val) {
      if (!score.count(lf.fact.fact_id))
        throw Error(ErrorCode::coverage, "evaluation", "no result for validation fact " + lf.fact.fact_id);
      s.push_back(score[lf.fact.fact_id]);
      g.push_back(lf.gold_label == Label::inconsistent);
    }
    opts.threshold = select_threshold(s, g);
    target = subset(Split::test);
  } else {
    target = subset(a.split == "all" ? std::nullopt
                                     : std::optional<Split>(a.split == "validation" ? Split::validation : Split::test));
  }
  if (target.empty()) throw Error(ErrorCode::invalid_argument, "evaluation", "selected split is empty");
  const auto report = evaluate(target, results_for(target), opts);
  auto out = detail::open_out(c.output_dir, "metrics.json", "evaluation");
  auto j = to_json(report);
  j["split"] = a.tune ? "test" : a.split;
  j["tuned_on_validation"] = a.tune;
  out << j.dump(2) << '\n';
  detail::write_resolved(c, "evaluate", {{"split", a.split}, {"tune", a.tune}});
  if (c.format == "records") io.out << j.dump() << '\n';
  else io.out << format_metrics_table({report});
  for (const auto& w : report.warnings) io.err << "warning: " << w << '\n';
  return kExitOk;
}

struct EstimateArgs {
  std::string confirmations;
  double confidence = 0.99;
  std::optional<std::uint64_t> total_facts;
  bool wilson = false;
};

inline int cmd_estimate(const RunConfig& c, const EstimateArgs& a, Streams io) {
  if (a.confirmations.empty()) throw UsageError("--confirmations is required");
  if (!a.total_facts) throw UsageError("--total-facts is required (the corpus fact count is not derivable)");
  if (!(a.confidence > 0.0 && a.confidence < 1.0)) throw UsageError("--confidence must lie in (0,1)");
  auto in = detail::open_in(a.confirmations, "estimate");
  const auto records = read_confirmations(in);
  if (records.empty()) throw Error(ErrorCode::invalid_argument, "estimate", "confirmations file is empty");
  std::uint64_t confirmed = 0;
  std::vector<std::pair<std::string, bool>> cats;
  bool all_categorized = true;
  for (const auto& r : records) {
    confirmed += r.confirmed;
    if (r.category.empty()) all_categorized = false;
    cats.emplace_back(r.category, r.confirmed);
  }
  const auto est = proportion_ci(confirmed, records.size(), a.confidence, a.wilson ? CiMethod::wilson : CiMethod::wald);
  const auto [lo, hi] = extrapolate(est.lo, est.hi, *a.total_facts);
  std::map<std::string, CategoryRate> rates;
  if (all_categorized) rates = per_category_rates(cats);
  else io.err << "warning: some records lack a category; category table skipped\n";

  nlohmann::json j{{"estimate", to_json(est)},
                   {"total_facts", *a.total_facts},
                   {"extrapolated", {lo, hi}},
                   {"categories", nlohmann::json::object()}};
  for (const auto& [cat, r] : rates)
    j["categories"][cat] = {{"confirmed", r.confirmed}, {"count", r.count}, {"rate", r.rate()}};
  auto out = detail::open_out(c.output_dir, "estimate.json", "estimate");
  out << j.dump(2) << '\n';
  detail::write_resolved(c, "estimate", {{"confirmations", a.confirmations}, {"confidence", a.confidence},
                                         {"total_facts", *a.total_facts}, {"wilson", a.wilson}});
  if (c.format == "records") {
    io.out << j.dump() << '\n';
  } else {
    io.out << format_estimate(est, rates);
    io.out << "extrapolated to " << *a.total_facts << " facts: " << lo << " to " << hi << '\n';
  }
  return kExitOk;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store_dir;
  std::size_t workers = 2;
};

inline int cmd_serve(const RunConfig& c, const ServeArgs& a, Streams io) {
  auto provider = detail::make_provider(c);
  const auto snapshot = detail::need_snapshot(c);
  auto embedder = detail::make_embedder(c);
  const auto index = detail::need_index(c, snapshot, *embedder);
  RunLog log;
  LlmGateway llm(*provider, log);
  ReviewStore store(ReviewStore::Options{a.store_dir.empty() ? c.output_dir + "/review" : a.store_dir, 1000});
  ReviewService::Options sopts;
  sopts.workers = a.workers;
  sopts.detector = c.detector_config();
  ReviewService service(DetectionContext{snapshot, index, *embedder, llm}, store, sopts);
  ReviewServer server(service, snapshot);
  detail::write_resolved(c, "serve", {{"host", a.host}, {"port", a.port}, {"workers", a.workers}});
  io.out << "serving on http://" << a.host << ":" << a.port << '\n' << std::flush;
  server.run(a.host, a.port);
  return kExitOk;
}

// --- entry point ------------------------------------------------------------------------

/// Parses argv-style arguments (without the program name) and runs one
/// subcommand. Never throws: usage problems return 2, runtime errors 1.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr, const EnvLookup& env = process_env) {
  CLI::App app{"clid: corpus-level inconsistency detection toolkit", "clid"};
  app.require_subcommand(1);
  std::map<std::string, std::string> flags;
  std::string config_path;

  // Settings shared by every subcommand; values land in `flags` so that
  // precedence is resolved in one place.
  auto setting = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    setting(sub, "--output-dir", "output_dir", "directory for every output file");
    setting(sub, "--format", "format", "table|records");
    setting(sub, "--seed", "seed", "random seed");
  };
  auto corpus = [&](CLI::App* sub) {
    setting(sub, "--snapshot", "snapshot", "snapshot records file");
    setting(sub, "--index", "index", "vector index file (built on the fly if absent)");
    setting(sub, "--embedder", "embedder", "hashing|http");
    setting(sub, "--embed-url", "embed_url", "embedding service base URL");
    setting(sub, "--embed-dim", "embed_dim", "embedding dimension");
  };
  auto model = [&](CLI::App* sub) {
    setting(sub, "--provider", "provider", "scripted|oracle|http");
    setting(sub, "--transcripts", "transcripts", "scripted transcript file");
    setting(sub, "--cases", "cases", "injected cases file (oracle provider)");
    setting(sub, "--llm-base-url", "llm_base_url", "chat-completions base URL");
    setting(sub, "--llm-model", "llm_model", "model name");
    setting(sub, "--jobs", "jobs", "parallel facts");
  };
  auto detector = [&](CLI::App* sub) {
    setting(sub, "--system", "system", "agent|rv|nli");
    setting(sub, "--budget", "budget", "agent step budget");
    setting(sub, "--k-search", "k_search", "passages per agent search");
    setting(sub, "--k-baseline", "k_baseline", "passages per baseline query");
    setting(sub, "--k-clarify", "k_clarify", "passages per clarify call");
    setting(sub, "--threshold", "threshold", "decision threshold on scores");
    setting(sub, "--count-threshold", "count_threshold", "NLI refute count threshold");
    setting(sub, "--score-mode", "score_mode", "strict|lenient");
    sub->add_flag_function("--no-rerank", [&flags](std::int64_t) { flags["rerank"] = "false"; }, "disable reranking");
    sub->add_flag_function("--rerank", [&flags](std::int64_t) { flags["rerank"] = "true"; }, "enable reranking");
  };

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "filter block records into a snapshot");
  common(ingest);
  ingest->add_option("--input", ingest_args.input, "line-delimited block records")->required();
  ingest->add_option("--snapshot-date", ingest_args.snapshot_date, "YYYY-MM-DD")->required();
  ingest->add_option("--min-chars", ingest_args.min_chars, "shortest kept block");
  ingest->add_option("--max-chars", ingest_args.max_chars, "longest kept block");

  auto* index = app.add_subcommand("index", "embed every block of a snapshot");
  common(index);
  corpus(index);

  ExtractArgs extract_args;
  auto* extract = app.add_subcommand("extract", "extract atomic facts");
  common(extract);
  corpus(extract);
  model(extract);
  extract->add_option("--sample", extract_args.sample, "sample this many blocks (0 = all)");
  extract->add_flag("--stratify", extract_args.stratify, "stratify the sample by category");
  extract->add_flag("--faithfulness", extract_args.faithfulness, "drop facts judged unfaithful");

  DetectArgs detect_args;
  auto* detect = app.add_subcommand("detect", "score facts for corpus-level inconsistency");
  common(detect);
  corpus(detect);
  model(detect);
  detector(detect);
  setting(detect, "--facts", "facts", "facts file");
  setting(detect, "--dataset", "dataset", "dataset file (facts taken from it)");
  detect->add_flag("--reports", detect_args.reports, "also write two-sided reports");
  detect->add_flag("--record-log", detect_args.record_log, "write the model exchange log (includes timings)");

  SynthArgs synth_args;
  std::size_t synth_clean = 0;
  auto* synth = app.add_subcommand("synth", "inject labeled contradictions");
  common(synth);
  corpus(synth);
  setting(synth, "--facts", "facts", "facts file (default: one fact per sentence)");
  synth->add_option("--n", synth_args.n, "injected cases");
  auto* clean_opt = synth->add_option("--clean", synth_clean, "clean facts (default: same as --n)");
  synth->add_option("--filler", synth_args.filler, "filler sentences per mutated block");
  synth->add_option("--distribution", synth_args.distribution, "JSON file of type weights");

  EvaluateArgs eval_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "metrics for results against a dataset");
  common(evaluate_cmd);
  setting(evaluate_cmd, "--dataset", "dataset", "dataset file");
  setting(evaluate_cmd, "--results", "results", "results file");
  setting(evaluate_cmd, "--threshold", "threshold", "decision threshold on scores");
  setting(evaluate_cmd, "--count-threshold", "count_threshold", "NLI refute count threshold");
  evaluate_cmd->add_option("--split", eval_args.split, "all|validation|test");
  evaluate_cmd->add_flag("--tune", eval_args.tune, "choose the threshold on validation, report test");

  EstimateArgs est_args;
  std::uint64_t total_facts = 0;
  auto* estimate = app.add_subcommand("estimate", "prevalence estimate from confirmed samples");
  common(estimate);
  estimate->add_option("--confirmations", est_args.confirmations, "records {fact_id, category, confirmed}")->required();
  estimate->add_option("--confidence", est_args.confidence, "confidence level");
  auto* total_opt = estimate->add_option("--total-facts", total_facts, "corpus fact count to extrapolate to");
  estimate->add_flag("--wilson", est_args.wilson, "Wilson score interval instead of Wald");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "run the review HTTP service");
  common(serve);
  corpus(serve);
  model(serve);
  detector(serve);
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "port");
  serve->add_option("--store-dir", serve_args.store_dir, "review store directory");
  serve->add_option("--workers", serve_args.workers, "analysis workers");

  std::vector<std::string> argv_store{"clid"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    nlohmann::json config_json;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot read config file " + config_path);
      try {
        config_json = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config file is not JSON: ") + e.what());
      }
    }
    const auto config = resolve_config(flags, config_json, env);
    validate_config(config);
    Streams io{out, err};
    if (*ingest) return cmd_ingest(config, ingest_args, io);
    if (*index) return cmd_index(config, io);
    if (*extract) return cmd_extract(config, extract_args, io);
    if (*detect) return cmd_detect(config, detect_args, io);
    if (*synth) {
      if (clean_opt->count()) synth_args.clean = synth_clean;
      return cmd_synth(config, synth_args, io);
    }
    if (*evaluate_cmd) return cmd_evaluate(config, eval_args, io);
    if (*estimate) {
      if (total_opt->count()) est_args.total_facts = total_facts;
      return cmd_estimate(config, est_args, io);
    }
    if (*serve) return cmd_serve(config, serve_args, io);
    err << "no subcommand\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << e.stage() << "] " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace clid::cli
