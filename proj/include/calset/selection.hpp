#pragma once

// Calibration set selection. Relevance pools yield ranked sets of k_rank
// candidates; faithfulness pools yield disjoint positive/negative sets of
// k_pos/k_neg candidates drawn only from matching polarity hints.
//
// Determinism: candidates are sorted by candidate_id before anything else
// happens, all ties break by candidate_id, and subset searches scan
// lexicographically, so selection is invariant to pool permutation.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "calset/core.hpp"
#include "calset/metrics.hpp"

namespace calset {

enum class StrategyFamily {
  random,
  quality,
  margin,
  diversity,
  likelihood,
  spurious,
  hybrid_corr,
};

std::string to_string(StrategyFamily f);
StrategyFamily strategy_family_from_string(const std::string& s);

struct StrategyId {
  StrategyFamily family = StrategyFamily::random;
  std::string mode;  // empty for single-mode families (random, hybrid_corr)

  // Parses "family" or "family:mode".
  static StrategyId parse(const std::string& text);
  std::string str() const;

  bool operator==(const StrategyId&) const = default;
};

struct CatalogEntry {
  StrategyId id;
  PoolKind kind;
};

// Closed strategy catalog. Relevance carries the 14 ranked-set strategies
// plus hybrid_corr; faithfulness carries its 9 contrast-set strategies.
const std::vector<CatalogEntry>& strategy_catalog();
bool in_catalog(const StrategyId& id, PoolKind kind);

struct SelectionConfig {
  StrategyId strategy;
  int k_rank = 4;
  int k_pos = 2;
  int k_neg = 2;
  std::uint64_t rng_seed = 0;
  std::size_t enumeration_cap = 200000;
  AggregateWeights weights;  // only used if aggregates must be recomputed

  // Quality metric per pool kind: rel_agg for relevance, faith_agg for
  // faithfulness. Fixed by kind, not configurable.
};

// k-subset enumeration. Exact lexicographic enumeration while C(n, k) stays
// within cap; beyond that, a seeded uniform sample of cap subsets plus the
// caller's greedy incumbent, with `exact` cleared.
struct KSubsets {
  int n = 0;
  int k = 0;
  bool exact = true;
  std::vector<std::int32_t> flat;  // size() == count() * k

  std::size_t count() const { return k == 0 ? 0 : flat.size() / k; }
  std::span<const std::int32_t> at(std::size_t i) const {
    return {flat.data() + i * static_cast<std::size_t>(k),
            static_cast<std::size_t>(k)};
  }
};

KSubsets enumerate_k_subsets(int n, int k, std::size_t cap,
                             std::uint64_t seed = 0,
                             const std::vector<std::int32_t>& incumbent = {});

// C(n, k), saturating at `cap` to avoid overflow.
std::size_t binomial_capped(int n, int k, std::size_t cap);

// Runs one strategy against one pool. Requires the aggregates (rel_agg or
// faith_agg per kind) to be present on every candidate the strategy ranks;
// likelihood strategies additionally require beam_rank (relevance) or
// token_logprobs (faithfulness).
SelectedSet select(const CandidatePool& pool, const SelectionConfig& config);

}  // namespace calset
