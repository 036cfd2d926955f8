#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clid/common.hpp"

namespace clid {

/// n = ceil(z^2 p (1-p) / E^2). A 1e-9 slack keeps products that are
/// integral up to rounding (e.g. 384.0000000001) from being pushed up.
inline std::uint64_t cochran_sample_size(double z, double p, double margin) {
  require(margin > 0.0, "estimation", "margin must be positive");
  require(z > 0.0, "estimation", "z must be positive");
  require(p >= 0.0 && p <= 1.0, "estimation", "p must lie in [0,1]");
  const double n = z * z * p * (1.0 - p) / (margin * margin);
  return static_cast<std::uint64_t>(std::max(0.0, std::ceil(n - 1e-9)));
}

/// Standard normal quantile: Acklam's rational approximation followed by
/// one Halley step against erfc, good to about 1e-15 in the body.
inline double inverse_normal(double p) {
  require(p > 0.0 && p < 1.0, "estimation", "quantile probability must lie in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  constexpr double lo = 0.02425, hi = 1.0 - lo;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= hi) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

/// Two-sided z for a confidence level, e.g. 0.99 -> 2.5758.
inline double z_for_confidence(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw Error(ErrorCode::invalid_argument, "estimation", "confidence must lie in (0,1)");
  return inverse_normal(1.0 - (1.0 - confidence) / 2.0);
}

enum class CiMethod { wald, wilson };

inline const char* to_string(CiMethod m) { return m == CiMethod::wald ? "wald" : "wilson"; }

struct SampleEstimate {
  std::uint64_t successes = 0;
  std::uint64_t n = 0;
  double confidence = 0.99;
  double p_hat = 0.0;
  /// Half-width of the interval before clipping.
  double margin = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double z = 0.0;
  CiMethod method = CiMethod::wald;
  /// Wald interval collapsed to zero width (p_hat of 0 or 1).
  bool degenerate = false;
};

/// Wald (default): p_hat +/- z sqrt(p_hat(1-p_hat)/n), clipped to [0,1].
/// Wilson: score interval around the shrunk center; p_hat stays s/n.
inline SampleEstimate proportion_ci(std::uint64_t successes, std::uint64_t n, double confidence,
                                    CiMethod method = CiMethod::wald) {
  require(n >= 1, "estimation", "n must be at least 1");
  require(successes <= n, "estimation", "successes exceed n");
  SampleEstimate e;
  e.successes = successes;
  e.n = n;
  e.confidence = confidence;
  e.z = z_for_confidence(confidence);
  e.method = method;
  const double nn = static_cast<double>(n);
  e.p_hat = static_cast<double>(successes) / nn;
  if (method == CiMethod::wald) {
    e.margin = e.z * std::sqrt(e.p_hat * (1.0 - e.p_hat) / nn);
    e.lo = std::max(0.0, e.p_hat - e.margin);
    e.hi = std::min(1.0, e.p_hat + e.margin);
    e.degenerate = successes == 0 || successes == n;
  } else {
    const double z2 = e.z * e.z;
    const double denom = 1.0 + z2 / nn;
    const double center = (e.p_hat + z2 / (2.0 * nn)) / denom;
    e.margin = e.z / denom * std::sqrt(e.p_hat * (1.0 - e.p_hat) / nn + z2 / (4.0 * nn * nn));
    e.lo = std::max(0.0, center - e.margin);
    e.hi = std::min(1.0, center + e.margin);
  }
  return e;
}

/// Interval endpoints scaled to a corpus of `total_facts`, rounded to the
/// nearest integer.
inline std::pair<std::uint64_t, std::uint64_t> extrapolate(double lo, double hi, std::uint64_t total_facts) {
  require(0.0 <= lo && lo <= hi && hi <= 1.0, "estimation", "need 0 <= lo <= hi <= 1");
  const double t = static_cast<double>(total_facts);
  return {static_cast<std::uint64_t>(std::llround(lo * t)), static_cast<std::uint64_t>(std::llround(hi * t))};
}

struct CategoryRate {
  std::uint64_t confirmed = 0;
  std::uint64_t count = 0;
  double rate() const { return count ? static_cast<double>(confirmed) / static_cast<double>(count) : 0.0; }
};

inline std::map<std::string, CategoryRate> per_category_rates(
    const std::vector<std::pair<std::string, bool>>& sampled) {
  require(!sampled.empty(), "estimation", "no sampled records");
  std::map<std::string, CategoryRate> out;
  for (const auto& [category, confirmed] : sampled) {
    if (trim(category).empty()) throw Error(ErrorCode::invalid_argument, "estimation", "record with empty category");
    auto& r = out[category];
    ++r.count;
    if (confirmed) ++r.confirmed;
  }
  return out;
}

struct Confirmation {
  std::string fact_id;
  std::string category;
  bool confirmed = false;
};

inline std::vector<Confirmation> read_confirmations(std::istream& in) {
  std::vector<Confirmation> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Confirmation c;
      c.fact_id = j.at("fact_id").get<std::string>();
      c.category = j.value("category", std::string());
      c.confirmed = j.at("confirmed").get<bool>();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, "estimate", "bad confirmation at line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// Reported category rates from the real-corpus sample, shown for
/// orientation only.
inline const std::map<std::string, double>& reference_category_rates() {
  static const std::map<std::string, double> v{{"History", 0.177}, {"Mathematics", 0.056}, {"Technology", 0.094}};
  return v;
}

inline nlohmann::json to_json(const SampleEstimate& e) {
  return {{"successes", e.successes}, {"n", e.n},           {"confidence", e.confidence},
          {"p_hat", e.p_hat},         {"margin", e.margin}, {"interval", {e.lo, e.hi}},
          {"z", e.z},                 {"method", to_string(e.method)}, {"degenerate", e.degenerate}};
}

inline std::string format_estimate(const SampleEstimate& e, const std::map<std::string, CategoryRate>& categories) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "rate %.2f%% +/- %.2f%%  [%.1f%%, %.1f%%]  (%llu of %llu, %.0f%% %s, z=%.4f)%s\n",
                e.p_hat * 100, e.margin * 100, e.lo * 100, e.hi * 100, static_cast<unsigned long long>(e.successes),
                static_cast<unsigned long long>(e.n), e.confidence * 100, to_string(e.method), e.z,
                e.degenerate ? "  degenerate" : "");
  std::string out = buf;
  if (!categories.empty()) {
    std::size_t w = 8;
    for (const auto& [c, _] : categories) w = std::max(w, c.size());
    std::snprintf(buf, sizeof buf, "%-*s  %9s  %5s  %6s\n", static_cast<int>(w), "category", "confirmed", "n", "rate");
    out += buf;
    for (const auto& [c, r] : categories) {
      std::snprintf(buf, sizeof buf, "%-*s  %9llu  %5llu  %5.1f%%\n", static_cast<int>(w), c.c_str(),
                    static_cast<unsigned long long>(r.confirmed), static_cast<unsigned long long>(r.count),
                    r.rate() * 100);
      out += buf;
    }
  }
  return out;
}

}  // namespace clid
