#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "clid/common.hpp"

namespace clid {

/// Seven inconsistency families, with numerical and logical split into
/// their two subtypes.
enum class MutationType {
  numerical_off_by_one,
  numerical_clear,
  logical_direct,
  logical_indirect,
  definition,
  temporal,
  named_entity,
  categorical,
  spatial,
};

inline constexpr std::array<MutationType, 9> kAllMutationTypes{
    MutationType::numerical_off_by_one, MutationType::numerical_clear, MutationType::logical_direct,
    MutationType::logical_indirect,     MutationType::definition,      MutationType::temporal,
    MutationType::named_entity,         MutationType::categorical,     MutationType::spatial};

inline const char* to_string(MutationType t) {
  switch (t) {
    case MutationType::numerical_off_by_one: return "numerical_off_by_one";
    case MutationType::numerical_clear: return "numerical_clear";
    case MutationType::logical_direct: return "logical_direct";
    case MutationType::logical_indirect: return "logical_indirect";
    case MutationType::definition: return "definition";
    case MutationType::temporal: return "temporal";
    case MutationType::named_entity: return "named_entity";
    case MutationType::categorical: return "categorical";
    case MutationType::spatial: return "spatial";
  }
  return "numerical_clear";
}

inline std::optional<MutationType> parse_mutation_type(std::string_view s) {
  for (auto t : kAllMutationTypes)
    if (s == to_string(t)) return t;
  return std::nullopt;
}

/// Probability per mutation type, in canonical type order.
using TaxonomyDistribution = std::vector<std::pair<MutationType, double>>;

/// Observed breakdown of real inconsistencies: numerical 54.7% (23.0
/// off-by-one, 31.7 clear), logical 17.5% (14.8 direct, 2.7 indirect),
/// definition 10.6, temporal 7.9, named entity 6.0, categorical 2.1,
/// spatial 1.2.
inline TaxonomyDistribution default_distribution() {
  return {{MutationType::numerical_off_by_one, 0.230}, {MutationType::numerical_clear, 0.317},
          {MutationType::logical_direct, 0.148},       {MutationType::logical_indirect, 0.027},
          {MutationType::definition, 0.106},           {MutationType::temporal, 0.079},
          {MutationType::named_entity, 0.060},         {MutationType::categorical, 0.021},
          {MutationType::spatial, 0.012}};
}

inline void validate_distribution(const TaxonomyDistribution& dist) {
  require(!dist.empty(), "taxonomy", "distribution is empty");
  double sum = 0.0;
  std::vector<MutationType> seen;
  for (const auto& [t, p] : dist) {
    require(std::isfinite(p) && p >= 0.0, "taxonomy", std::string("negative or non-finite weight for ") + to_string(t));
    require(std::find(seen.begin(), seen.end(), t) == seen.end(), "taxonomy",
            std::string("type listed twice: ") + to_string(t));
    seen.push_back(t);
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::invalid_argument, "taxonomy",
                "distribution must sum to 1 within 1e-9, sums to " + std::to_string(sum));
}

/// One categorical draw by inverse CDF over a uniform in [0,1).
inline MutationType sample_mutation_type(const TaxonomyDistribution& dist, std::mt19937_64& rng) {
  validate_distribution(dist);
  const double u = uniform_unit(rng);
  double acc = 0.0;
  for (const auto& [t, p] : dist) {
    acc += p;
    if (u < acc) return t;
  }
  // Rounding can leave u just above the accumulated sum; take the last type
  // with positive weight.
  for (auto it = dist.rbegin(); it != dist.rend(); ++it)
    if (it->second > 0.0) return it->first;
  return dist.back().first;
}

}  // namespace clid
