#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"
#include "clid/detectors.hpp"
#include "clid/facts.hpp"
#include "clid/taxonomy.hpp"

namespace clid {

// Positive class everywhere below is "inconsistent" (gold 1).

enum class Label { consistent, inconsistent };

inline const char* to_string(Label l) { return l == Label::inconsistent ? "inconsistent" : "consistent"; }

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "inconsistent") return Label::inconsistent;
  if (s == "consistent") return Label::consistent;
  return std::nullopt;
}

enum class Split { validation, test };

inline const char* to_string(Split s) { return s == Split::validation ? "validation" : "test"; }

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "validation") return Split::validation;
  if (s == "test") return Split::test;
  return std::nullopt;
}

/// Deterministic split: even fact_id hash goes to validation.
inline Split assign_split(std::string_view fact_id) {
  return fnv1a64(fact_id) % 2 == 0 ? Split::validation : Split::test;
}

inline constexpr std::size_t kMaxReviewedPassages = 40;

struct LabeledFact {
  AtomicFact fact;
  Label gold_label = Label::consistent;
  std::vector<std::string> evidence_block_ids;
  std::optional<MutationType> inconsistency_type;
  Split split = Split::validation;

  bool operator==(const LabeledFact&) const = default;
};

inline void validate_labeled_fact(const LabeledFact& lf) {
  if (lf.gold_label == Label::inconsistent && lf.evidence_block_ids.empty())
    throw Error(ErrorCode::invalid_argument, "dataset",
                "inconsistent fact " + lf.fact.fact_id + " has no contradicting evidence");
  if (lf.gold_label == Label::consistent && lf.evidence_block_ids.size() > kMaxReviewedPassages)
    throw Error(ErrorCode::invalid_argument, "dataset",
                "fact " + lf.fact.fact_id + " lists more than 40 reviewed passages");
}

inline nlohmann::json to_json(const LabeledFact& lf) {
  nlohmann::json j;
  j["fact"] = to_json(lf.fact);
  j["gold_label"] = to_string(lf.gold_label);
  j["evidence_block_ids"] = lf.evidence_block_ids;
  j["inconsistency_type"] =
      lf.inconsistency_type ? nlohmann::json(to_string(*lf.inconsistency_type)) : nlohmann::json(nullptr);
  j["split"] = to_string(lf.split);
  return j;
}

inline LabeledFact labeled_fact_from_json(const nlohmann::json& j) {
  LabeledFact lf;
  lf.fact = fact_from_json(j.at("fact"));
  const auto label = parse_label(j.at("gold_label").get<std::string>());
  if (!label) throw Error(ErrorCode::parse, "dataset", "bad gold_label " + j.at("gold_label").dump());
  lf.gold_label = *label;
  lf.evidence_block_ids = j.value("evidence_block_ids", std::vector<std::string>{});
  if (j.contains("inconsistency_type") && !j["inconsistency_type"].is_null()) {
    auto t = parse_mutation_type(j["inconsistency_type"].get<std::string>());
    if (!t) throw Error(ErrorCode::parse, "dataset", "bad inconsistency_type " + j["inconsistency_type"].dump());
    lf.inconsistency_type = t;
  }
  const auto split = parse_split(j.at("split").get<std::string>());
  if (!split) throw Error(ErrorCode::parse, "dataset", "bad split " + j.at("split").dump());
  lf.split = *split;
  validate_labeled_fact(lf);
  return lf;
}

inline void write_dataset(const std::vector<LabeledFact>& dataset, std::ostream& out) {
  for (const auto& lf : dataset) out << to_json(lf).dump() << '\n';
}

inline std::vector<LabeledFact> read_dataset(std::istream& in) {
  std::vector<LabeledFact> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(labeled_fact_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "dataset", "bad record at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline void write_results(const std::vector<DetectionResult>& results, std::ostream& out) {
  for (const auto& r : results) out << to_json(r).dump() << '\n';
}

inline std::vector<DetectionResult> read_results(std::istream& in) {
  std::vector<DetectionResult> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(result_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "results", "bad record at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

// --- decisions and point metrics -----------------------------------------------

/// Inconsistent iff score is strictly above the threshold.
inline Label score_to_decision(double score, double threshold) {
  require(score >= 0.0 && score <= 1.0, "evaluation", "score outside [0,1]");
  require(threshold >= 0.0 && threshold <= 1.0, "evaluation", "threshold outside [0,1]");
  return score > threshold ? Label::inconsistent : Label::consistent;
}

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when a zero denominator forced the value to 0.
  bool precision_degenerate = false;
  bool recall_degenerate = false;
};

namespace detail {
inline void check_binary(const std::vector<int>& v, std::string_view what) {
  for (int x : v)
    if (x != 0 && x != 1) throw Error(ErrorCode::invalid_argument, "evaluation", std::string(what) + " must be 0 or 1");
}
}  // namespace detail

inline F1Result f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  F1Result r;
  if (tp + fp == 0) r.precision_degenerate = true;
  else r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0) r.recall_degenerate = true;
  else r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  // 2tp / (2tp + fp + fn) equals the harmonic mean whenever it is defined.
  if (tp > 0) r.f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return r;
}

inline F1Result compute_f1(const std::vector<int>& predictions, const std::vector<int>& golds) {
  require(predictions.size() == golds.size(), "evaluation", "predictions and golds differ in length");
  require(!golds.empty(), "evaluation", "empty input");
  detail::check_binary(predictions, "predictions");
  detail::check_binary(golds, "golds");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i] && golds[i]) ++tp;
    else if (predictions[i]) ++fp;
    else if (golds[i]) ++fn;
  }
  return f1_from_counts(tp, fp, fn);
}

// --- ranking metrics -----------------------------------------------------------

namespace detail {
inline void check_ranking_input(const std::vector<double>& scores, const std::vector<int>& golds) {
  require(scores.size() == golds.size(), "evaluation", "scores and golds differ in length");
  check_binary(golds, "golds");
  for (double s : scores) require(std::isfinite(s), "evaluation", "scores must be finite");
  const auto pos = std::count(golds.begin(), golds.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(golds.size()))
    throw Error(ErrorCode::undefined_metric, "evaluation", "metric needs both classes present");
}
}  // namespace detail

/// Rank-sum (Mann-Whitney) AUROC with midranks, so tied positive/negative
/// pairs earn half credit.
inline double compute_auroc(const std::vector<double>& scores, const std::vector<int>& golds) {
  detail::check_ranking_input(scores, golds);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (golds[order[t]]) {
        rank_sum_pos += midrank;
        ++n_pos;
      }
    i = j;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n - n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

enum class RocMode { score_threshold, count_threshold };

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Positive iff value >= threshold. +inf marks the all-negative start.
  double threshold = 0.0;
};

/// ROC points sorted by fpr, from (0,0) to (1,1). Score mode sweeps every
/// unique score; count mode sweeps integer thresholds 0..max+1 over
/// non-negative integer counts and drops repeated points.
inline std::vector<RocPoint> roc_curve(const std::vector<double>& values, const std::vector<int>& golds,
                                       RocMode mode = RocMode::score_threshold) {
  detail::check_ranking_input(values, golds);
  const double P = static_cast<double>(std::count(golds.begin(), golds.end(), 1));
  const double N = static_cast<double>(golds.size()) - P;
  auto point_at = [&](double t) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] >= t) (golds[i] ? tp : fp)++;
    return RocPoint{static_cast<double>(fp) / N, static_cast<double>(tp) / P, t};
  };
  std::vector<double> thresholds;
  if (mode == RocMode::score_threshold) {
    thresholds.push_back(std::numeric_limits<double>::infinity());
    std::set<double, std::greater<>> uniq(values.begin(), values.end());
    thresholds.insert(thresholds.end(), uniq.begin(), uniq.end());
  } else {
    double max_count = 0.0;
    for (double v : values) {
      require(v >= 0.0 && v == std::floor(v), "evaluation", "count mode needs non-negative integer counts");
      max_count = std::max(max_count, v);
    }
    for (double t = max_count + 1.0; t >= 0.0; t -= 1.0) thresholds.push_back(t);
  }
  std::vector<RocPoint> points;
  for (double t : thresholds) {
    auto p = point_at(t);
    if (!points.empty() && points.back().fpr == p.fpr && points.back().tpr == p.tpr) continue;
    points.push_back(p);
  }
  // Thresholds descend, so fpr and tpr are already non-decreasing.
  return points;
}

inline double auroc_trapezoid(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

/// Candidate thresholds: 0, midpoints between adjacent unique scores, 1.
inline std::vector<double> threshold_grid(const std::vector<double>& scores) {
  std::set<double> uniq(scores.begin(), scores.end());
  std::vector<double> u(uniq.begin(), uniq.end());
  std::vector<double> grid{0.0};
  for (std::size_t i = 1; i < u.size(); ++i) grid.push_back((u[i - 1] + u[i]) / 2.0);
  grid.push_back(1.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

inline double f1_at_threshold(const std::vector<double>& scores, const std::vector<int>& golds, double t) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > t;
    if (pred && golds[i]) ++tp;
    else if (pred) ++fp;
    else if (golds[i]) ++fn;
  }
  return f1_from_counts(tp, fp, fn).f1;
}

/// Grid threshold with the highest validation F1; ties go to the smaller
/// threshold.
inline double select_threshold(const std::vector<double>& scores, const std::vector<int>& golds) {
  detail::check_ranking_input(scores, golds);
  for (double s : scores) require(s >= 0.0 && s <= 1.0, "evaluation", "scores must lie in [0,1]");
  double best_t = 0.0, best_f1 = -1.0;
  for (double t : threshold_grid(scores)) {
    const double f1 = f1_at_threshold(scores, golds, t);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

// --- dataset-level evaluation ----------------------------------------------------

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct TypeRecall {
  std::size_t detected = 0;
  std::size_t total = 0;
  double recall() const { return total ? static_cast<double>(detected) / static_cast<double>(total) : 0.0; }
};

struct MetricsReport {
  std::string system;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Absent when the dataset holds a single class.
  std::optional<double> auroc;
  double threshold_used = 0.5;
  std::string decision_rule;
  ConfusionCounts counts;
  std::map<std::string, TypeRecall> per_type;
  std::vector<std::string> warnings;
};

struct EvaluateOptions {
  double threshold = 0.5;
  /// NLI-pipeline results decide on refute_count >= count_threshold.
  int count_threshold = 1;
};

/// Joins results to the dataset by fact_id and computes every metric.
/// Every dataset fact needs exactly one result; results for facts outside
/// the dataset are ignored with a warning.
inline MetricsReport evaluate(const std::vector<LabeledFact>& dataset, const std::vector<DetectionResult>& results,
                              const EvaluateOptions& options = {}) {
  require(!dataset.empty(), "evaluation", "dataset is empty");
  std::map<std::string, std::vector<const DetectionResult*>> by_fact;
  for (const auto& r : results) by_fact[r.fact_id].push_back(&r);
  std::vector<std::string> missing, duplicated;
  std::set<std::string> dataset_ids;
  for (const auto& lf : dataset) {
    if (!dataset_ids.insert(lf.fact.fact_id).second)
      throw Error(ErrorCode::coverage, "evaluation", "dataset lists fact " + lf.fact.fact_id + " twice");
    auto it = by_fact.find(lf.fact.fact_id);
    if (it == by_fact.end()) missing.push_back(lf.fact.fact_id);
    else if (it->second.size() > 1) duplicated.push_back(lf.fact.fact_id);
  }
  if (!missing.empty() || !duplicated.empty()) {
    std::string msg = "results do not cover the dataset exactly once;";
    if (!missing.empty()) msg += " missing: " + join(missing, ", ") + ";";
    if (!duplicated.empty()) msg += " duplicated: " + join(duplicated, ", ") + ";";
    throw Error(ErrorCode::coverage, "evaluation", msg);
  }

  MetricsReport report;
  std::size_t extra = 0;
  for (const auto& [id, _] : by_fact)
    if (!dataset_ids.count(id)) ++extra;
  if (extra) report.warnings.push_back(std::to_string(extra) + " results have no dataset fact and were ignored");

  std::set<SystemKind> systems;
  std::vector<double> scores;
  std::vector<int> golds;
  for (const auto& lf : dataset) {
    const auto& r = *by_fact.at(lf.fact.fact_id).front();
    systems.insert(r.system);
    bool predicted;
    if (r.system == SystemKind::nli_pipeline && r.refute_count)
      predicted = nli_decision(*r.refute_count, options.count_threshold);
    else
      predicted = score_to_decision(r.score, options.threshold) == Label::inconsistent;
    const bool gold = lf.gold_label == Label::inconsistent;
    if (predicted && gold) ++report.counts.tp;
    else if (predicted) ++report.counts.fp;
    else if (gold) ++report.counts.fn;
    else ++report.counts.tn;
    if (gold && lf.inconsistency_type) {
      auto& tr = report.per_type[to_string(*lf.inconsistency_type)];
      ++tr.total;
      if (predicted) ++tr.detected;
    }
    scores.push_back(r.score);
    golds.push_back(gold ? 1 : 0);
  }

  if (systems.size() == 1) report.system = to_string(*systems.begin());
  else report.warnings.push_back("results mix several systems");
  const bool nli = systems.size() == 1 && *systems.begin() == SystemKind::nli_pipeline;
  report.threshold_used = nli ? static_cast<double>(options.count_threshold) : options.threshold;
  report.decision_rule = nli ? "refute_count >= " + std::to_string(options.count_threshold)
                             : "score > " + nlohmann::json(options.threshold).dump();

  const auto& c = report.counts;
  report.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const auto f1 = f1_from_counts(c.tp, c.fp, c.fn);
  report.precision = f1.precision;
  report.recall = f1.recall;
  report.f1 = f1.f1;
  if (f1.precision_degenerate) report.warnings.push_back("no positive predictions; precision set to 0");
  if (f1.recall_degenerate) report.warnings.push_back("no inconsistent facts; recall set to 0");
  try {
    report.auroc = compute_auroc(scores, golds);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::undefined_metric) throw;
    report.warnings.push_back("auroc undefined: dataset has a single class");
  }
  return report;
}

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["system"] = m.system;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auroc"] = m.auroc ? nlohmann::json(*m.auroc) : nlohmann::json(nullptr);
  j["threshold_used"] = m.threshold_used;
  j["decision_rule"] = m.decision_rule;
  j["counts"] = {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"tn", m.counts.tn}, {"fn", m.counts.fn}};
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [t, r] : m.per_type)
    types[t] = {{"recall", r.recall()}, {"detected", r.detected}, {"total", r.total}};
  j["per_type_recall"] = types;
  j["warnings"] = m.warnings;
  return j;
}

/// Published numbers for the GPT-4o agent on the real validation split.
/// Printed for orientation only; nothing here is checked.
struct ReferenceMetrics {
  static constexpr double accuracy = 76.5;
  static constexpr double f1 = 67.4;
  static constexpr double auroc = 80.9;
};

inline std::string percent1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
  return buf;
}

/// Aligned text table (percentages, one decimal) with a reference footer.
inline std::string format_metrics_table(const std::vector<MetricsReport>& reports) {
  std::vector<std::vector<std::string>> rows{{"System", "Acc", "Prec", "Rec", "F1", "AUROC", "Rule"}};
  for (const auto& m : reports)
    rows.push_back({m.system.empty() ? "mixed" : m.system, percent1(m.accuracy), percent1(m.precision),
                    percent1(m.recall), percent1(m.f1), m.auroc ? percent1(*m.auroc) : "n/a", m.decision_rule});
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& cell = rows[r][c];
      const auto pad = std::string(width[c] - cell.size(), ' ');
      // First and last columns are text; numbers are right-aligned.
      line += (c == 0 || c + 1 == rows[r].size()) ? cell + pad : pad + cell;
      if (c + 1 < rows[r].size()) line += "  ";
    }
    out += trim(line) + "\n";
    if (r == 0) out += std::string(trim(line).size(), '-') + "\n";
  }
  char foot[160];
  std::snprintf(foot, sizeof foot,
                "reference (GPT-4o agent, real validation split): acc %.1f  F1 %.1f  AUROC %.1f  [not asserted]\n",
                ReferenceMetrics::accuracy, ReferenceMetrics::f1, ReferenceMetrics::auroc);
  out += foot;
  return out;
}

}  // namespace clid
