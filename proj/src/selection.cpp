// Strategy catalog and selection dispatch.

#include "calset/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "calset/analysis.hpp"

namespace calset {

std::string to_string(StrategyFamily f) {
  switch (f) {
    case StrategyFamily::random: return "random";
    case StrategyFamily::quality: return "quality";
    case StrategyFamily::margin: return "margin";
    case StrategyFamily::diversity: return "diversity";
    case StrategyFamily::likelihood: return "likelihood";
    case StrategyFamily::spurious: return "spurious";
    case StrategyFamily::hybrid_corr: return "hybrid_corr";
  }
  throw Error("unknown strategy family enum value");
}

StrategyFamily strategy_family_from_string(const std::string& s) {
  if (s == "random") return StrategyFamily::random;
  if (s == "quality") return StrategyFamily::quality;
  if (s == "margin") return StrategyFamily::margin;
  if (s == "diversity") return StrategyFamily::diversity;
  if (s == "likelihood") return StrategyFamily::likelihood;
  if (s == "spurious") return StrategyFamily::spurious;
  if (s == "hybrid_corr") return StrategyFamily::hybrid_corr;
  throw Error("unknown strategy family '" + s + "'");
}

StrategyId StrategyId::parse(const std::string& text) {
  StrategyId id;
  std::size_t colon = text.find(':');
  if (colon == std::string::npos) {
    id.family = strategy_family_from_string(text);
  } else {
    id.family = strategy_family_from_string(text.substr(0, colon));
    id.mode = text.substr(colon + 1);
  }
  return id;
}

std::string StrategyId::str() const {
  std::string s = to_string(family);
  if (!mode.empty()) s += ":" + mode;
  return s;
}

const std::vector<CatalogEntry>& strategy_catalog() {
  using F = StrategyFamily;
  constexpr PoolKind R = PoolKind::relevance;
  constexpr PoolKind T = PoolKind::faithfulness;
  static const std::vector<CatalogEntry> catalog = {
      // ranked relevance sets
      {{F::random, ""}, R},
      {{F::quality, "extreme"}, R},
      {{F::quality, "average"}, R},
      {{F::quality, "min"}, R},
      {{F::quality, "high"}, R},
      {{F::margin, "max"}, R},
      {{F::margin, "min"}, R},
      {{F::diversity, "max"}, R},
      {{F::diversity, "min"}, R},
      {{F::likelihood, "extreme_beam"}, R},
      {{F::likelihood, "top_beam"}, R},
      {{F::likelihood, "bottom_beam"}, R},
      {{F::spurious, "max_length"}, R},
      {{F::spurious, "min_length"}, R},
      {{F::hybrid_corr, ""}, R},
      // faithfulness contrast sets
      {{F::random, ""}, T},
      {{F::quality, "average"}, T},
      {{F::margin, "max"}, T},
      {{F::margin, "min"}, T},
      {{F::diversity, "max"}, T},
      {{F::diversity, "min"}, T},
      {{F::likelihood, "easy"}, T},
      {{F::likelihood, "hard"}, T},
      {{F::spurious, "max_extract_gap"}, T},
  };
  return catalog;
}

bool in_catalog(const StrategyId& id, PoolKind kind) {
  for (const auto& entry : strategy_catalog()) {
    if (entry.id == id && entry.kind == kind) return true;
  }
  return false;
}

std::size_t binomial_capped(int n, int k, std::size_t cap) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::size_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is always integral at this point.
    std::size_t numerator = static_cast<std::size_t>(n - k + i);
    if (result > (cap * static_cast<std::size_t>(i)) / numerator + 1) {
      return cap + 1;  // saturated
    }
    result = result * numerator / static_cast<std::size_t>(i);
    if (result > cap) return cap + 1;
  }
  return result;
}

KSubsets enumerate_k_subsets(int n, int k, std::size_t cap, std::uint64_t seed,
                             const std::vector<std::int32_t>& incumbent) {
  if (k < 0 || n < 0) throw Error("enumerate_k_subsets: negative arguments");
  if (k > n) throw Error("enumerate_k_subsets: k exceeds n");
  KSubsets out;
  out.n = n;
  out.k = k;
  if (k == 0) return out;

  std::size_t total = binomial_capped(n, k, cap);
  if (total <= cap) {
    out.exact = true;
    out.flat.reserve(total * static_cast<std::size_t>(k));
    std::vector<std::int32_t> combo(k);
    std::iota(combo.begin(), combo.end(), 0);
    while (true) {
      out.flat.insert(out.flat.end(), combo.begin(), combo.end());
      // Lexicographic successor.
      int i = k - 1;
      while (i >= 0 && combo[i] == n - k + i) --i;
      if (i < 0) break;
      ++combo[i];
      for (int j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }
    return out;
  }

  out.exact = false;
  if (!incumbent.empty()) {
    if (static_cast<int>(incumbent.size()) != k) {
      throw Error("enumerate_k_subsets: incumbent size must equal k");
    }
    std::vector<std::int32_t> sorted = incumbent;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < k; ++i) {
      if (sorted[i] < 0 || sorted[i] >= n || (i > 0 && sorted[i] == sorted[i - 1])) {
        throw Error("enumerate_k_subsets: invalid incumbent");
      }
    }
    out.flat.insert(out.flat.end(), sorted.begin(), sorted.end());
  }
  Rng rng(seed_from({std::to_string(seed), "subset-sample"}));
  for (std::size_t s = 0; s < cap; ++s) {
    std::vector<std::size_t> draw =
        rng.sample_indices(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
    std::sort(draw.begin(), draw.end());
    for (std::size_t v : draw) out.flat.push_back(static_cast<std::int32_t>(v));
  }
  return out;
}

namespace {

struct Entry {
  const Candidate* cand = nullptr;
  double agg = 0.0;  // quality aggregate for the pool kind
};

double require_agg(const Candidate& c, PoolKind kind, const StrategyId& strategy) {
  const std::optional<double>& v =
      kind == PoolKind::relevance ? c.scores.rel_agg : c.scores.faith_agg;
  if (!v) {
    throw Error("strategy " + strategy.str() + " requires " +
                (kind == PoolKind::relevance ? std::string("rel_agg") :
                                               std::string("faith_agg")) +
                " on candidate '" + c.candidate_id + "'");
  }
  return *v;
}

// All candidates in stable candidate_id order; selection is permutation
// invariant because every downstream step starts from this ordering.
std::vector<const Candidate*> id_sorted(const CandidatePool& pool) {
  std::vector<const Candidate*> out;
  out.reserve(pool.candidates.size());
  for (const auto& c : pool.candidates) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](const Candidate* a, const Candidate* b) {
    return a->candidate_id < b->candidate_id;
  });
  return out;
}

std::vector<Entry> with_aggs(const std::vector<const Candidate*>& cands,
                             PoolKind kind, const StrategyId& strategy) {
  std::vector<Entry> out;
  out.reserve(cands.size());
  for (const Candidate* c : cands) {
    out.push_back({c, require_agg(*c, kind, strategy)});
  }
  return out;
}

// Descending aggregate, candidate_id ties.
void sort_by_agg_desc(std::vector<Entry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.agg != b.agg) return a.agg > b.agg;
    return a.cand->candidate_id < b.cand->candidate_id;
  });
}

void sort_by_agg_asc(std::vector<Entry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.agg != b.agg) return a.agg < b.agg;
    return a.cand->candidate_id < b.cand->candidate_id;
  });
}

std::vector<std::string> ids_of(const std::vector<Entry>& entries) {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.cand->candidate_id);
  return out;
}

double avg_ll_of(const Candidate& c, const StrategyId& strategy) {
  if (c.token_logprobs) return avg_token_loglik(*c.token_logprobs);
  // bartscore is the scoring service's mean token log-likelihood, so it
  // stands in when per-token values were never produced (corruption pools).
  if (c.scores.bartscore) return *c.scores.bartscore;
  throw Error("strategy " + strategy.str() +
              " requires token_logprobs or bartscore on candidate '" +
              c.candidate_id + "'");
}

double density_of(const Candidate& c, const StrategyId& strategy) {
  if (!c.scores.extractive_density) {
    throw Error("strategy " + strategy.str() +
                " requires extractive_density on candidate '" + c.candidate_id + "'");
  }
  return *c.scores.extractive_density;
}

// ---- subset objectives -----------------------------------------------------

// Subset search over entries: maximize or minimize `objective` across
// k-subsets, lexicographic-first tie handling. Entries must already be in
// candidate_id order so lexicographic subsets are well defined.
template <typename Objective>
std::vector<Entry> best_subset(const std::vector<Entry>& entries, int k,
                               const SelectionConfig& config, bool maximize,
                               const std::vector<std::int32_t>& incumbent,
                               Objective&& objective) {
  const int n = static_cast<int>(entries.size());
  KSubsets subsets = enumerate_k_subsets(n, k, config.enumeration_cap,
                                         config.rng_seed, incumbent);
  bool have_best = false;
  double best_value = 0.0;
  std::vector<std::int32_t> best;
  for (std::size_t s = 0; s < subsets.count(); ++s) {
    auto subset = subsets.at(s);
    double value = objective(subset);
    bool better = !have_best || (maximize ? value > best_value : value < best_value);
    if (better) {
      have_best = true;
      best_value = value;
      best.assign(subset.begin(), subset.end());
    }
  }
  if (!have_best) throw Error("subset search found no candidates");
  std::vector<Entry> out;
  out.reserve(best.size());
  for (std::int32_t idx : best) out.push_back(entries[idx]);
  return out;
}

double subset_margin_gap(std::span<const std::int32_t> subset,
                         const std::vector<Entry>& entries) {
  double mn = entries[subset[0]].agg, mx = entries[subset[0]].agg;
  for (std::int32_t idx : subset) {
    mn = std::min(mn, entries[idx].agg);
    mx = std::max(mx, entries[idx].agg);
  }
  return (mx - mn) / static_cast<double>(subset.size() - 1);
}

double subset_inverse_self_bleu(std::span<const std::int32_t> subset,
                                const std::vector<std::vector<double>>& bleu) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::int32_t i : subset) {
    for (std::int32_t j : subset) {
      if (i == j) continue;
      sum += bleu[i][j];
      ++pairs;
    }
  }
  if (pairs == 0) return 0.0;  // singleton sets carry no diversity signal
  return 1.0 - sum / static_cast<double>(pairs);
}

// Greedy incumbents used only when enumeration falls back to sampling.

std::vector<std::int32_t> greedy_extreme_incumbent(const std::vector<Entry>& entries,
                                                   int k) {
  std::vector<std::int32_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (entries[a].agg != entries[b].agg) return entries[a].agg > entries[b].agg;
    return entries[a].cand->candidate_id < entries[b].cand->candidate_id;
  });
  std::vector<std::int32_t> out;
  int top = (k + 1) / 2;
  for (int i = 0; i < top; ++i) out.push_back(order[i]);
  for (int i = 0; i < k - top; ++i) out.push_back(order[order.size() - 1 - i]);
  return out;
}

std::vector<std::int32_t> greedy_window_incumbent(const std::vector<Entry>& entries,
                                                  int k) {
  // Narrowest window of k in sorted order minimizes the spread.
  std::vector<std::int32_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    return entries[a].agg < entries[b].agg;
  });
  std::size_t best_start = 0;
  double best_spread = entries[order[k - 1]].agg - entries[order[0]].agg;
  for (std::size_t s = 1; s + k <= order.size(); ++s) {
    double spread = entries[order[s + k - 1]].agg - entries[order[s]].agg;
    if (spread < best_spread) {
      best_spread = spread;
      best_start = s;
    }
  }
  return {order.begin() + best_start, order.begin() + best_start + k};
}

template <typename Objective>
std::vector<std::int32_t> greedy_objective_incumbent(int n, int k, bool maximize,
                                                     Objective&& objective) {
  if (k == 1) return {0};
  // Best pair first, then best single additions.
  std::vector<std::int32_t> current;
  while (static_cast<int>(current.size()) < k) {
    std::vector<std::int32_t> best;
    bool have = false;
    double best_value = 0.0;
    if (current.empty()) {
      for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t j = i + 1; j < n; ++j) {
          std::vector<std::int32_t> trial = {i, j};
          double v = objective(std::span<const std::int32_t>(trial));
          if (!have || (maximize ? v > best_value : v < best_value)) {
            have = true;
            best_value = v;
            best = trial;
          }
        }
      }
    } else {
      for (std::int32_t i = 0; i < n; ++i) {
        if (std::find(current.begin(), current.end(), i) != current.end()) continue;
        std::vector<std::int32_t> trial = current;
        trial.push_back(i);
        std::sort(trial.begin(), trial.end());
        double v = objective(std::span<const std::int32_t>(trial));
        if (!have || (maximize ? v > best_value : v < best_value)) {
          have = true;
          best_value = v;
          best = trial;
        }
      }
    }
    current = best;
  }
  std::sort(current.begin(), current.end());
  return current;
}

// ---- relevance strategies --------------------------------------------------

std::vector<Entry> pick_relevance(const CandidatePool& pool,
                                  const SelectionConfig& config,
                                  const std::vector<const Candidate*>& cands) {
  const StrategyId& strategy = config.strategy;
  const int k = config.k_rank;
  std::vector<Entry> entries = with_aggs(cands, PoolKind::relevance, strategy);

  switch (strategy.family) {
    case StrategyFamily::random: {
      Rng rng(seed_from({std::to_string(config.rng_seed), "random-select",
                         pool.example.example_id}));
      std::vector<std::size_t> picks = rng.sample_indices(entries.size(),
                                                          static_cast<std::size_t>(k));
      std::vector<Entry> out;
      for (std::size_t p : picks) out.push_back(entries[p]);
      return out;
    }
    case StrategyFamily::quality: {
      std::vector<Entry> sorted = entries;
      sort_by_agg_desc(sorted);
      std::vector<Entry> out;
      if (strategy.mode == "high") {
        out.assign(sorted.begin(), sorted.begin() + k);
      } else if (strategy.mode == "min") {
        out.assign(sorted.end() - k, sorted.end());
      } else if (strategy.mode == "extreme") {
        int top = (k + 1) / 2;
        out.assign(sorted.begin(), sorted.begin() + top);
        out.insert(out.end(), sorted.end() - (k - top), sorted.end());
      } else if (strategy.mode == "average") {
        double mean = 0.0;
        for (const auto& e : entries) mean += e.agg;
        mean /= static_cast<double>(entries.size());
        std::vector<Entry> by_dist = entries;
        std::sort(by_dist.begin(), by_dist.end(), [&](const Entry& a, const Entry& b) {
          double da = std::abs(a.agg - mean), db = std::abs(b.agg - mean);
          if (da != db) return da < db;
          return a.cand->candidate_id < b.cand->candidate_id;
        });
        out.assign(by_dist.begin(), by_dist.begin() + k);
      } else {
        throw Error("unknown quality mode '" + strategy.mode + "'");
      }
      return out;
    }
    case StrategyFamily::margin: {
      bool maximize = strategy.mode == "max";
      auto objective = [&](std::span<const std::int32_t> subset) {
        return subset_margin_gap(subset, entries);
      };
      std::vector<std::int32_t> incumbent;
      if (binomial_capped(static_cast<int>(entries.size()), k,
                          config.enumeration_cap) > config.enumeration_cap) {
        incumbent = maximize ? greedy_extreme_incumbent(entries, k)
                             : greedy_window_incumbent(entries, k);
        std::sort(incumbent.begin(), incumbent.end());
      }
      return best_subset(entries, k, config, maximize, incumbent, objective);
    }
    case StrategyFamily::diversity: {
      bool maximize = strategy.mode == "max";
      std::vector<std::string> texts;
      for (const auto& e : entries) texts.push_back(e.cand->text);
      auto bleu = bleu_matrix(texts);
      auto objective = [&](std::span<const std::int32_t> subset) {
        return subset_inverse_self_bleu(subset, bleu);
      };
      std::vector<std::int32_t> incumbent;
      if (binomial_capped(static_cast<int>(entries.size()), k,
                          config.enumeration_cap) > config.enumeration_cap) {
        incumbent = greedy_objective_incumbent(static_cast<int>(entries.size()), k,
                                               maximize, objective);
      }
      return best_subset(entries, k, config, maximize, incumbent, objective);
    }
    case StrategyFamily::likelihood: {
      std::vector<Entry> order = entries;
      for (const auto& e : order) {
        if (!e.cand->beam_rank) {
          throw Error("strategy " + strategy.str() +
                      " requires beam_rank on candidate '" + e.cand->candidate_id +
                      "' (diverse-beam relevance pools only)");
        }
      }
      std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
        if (*a.cand->beam_rank != *b.cand->beam_rank) {
          return *a.cand->beam_rank < *b.cand->beam_rank;
        }
        return a.cand->candidate_id < b.cand->candidate_id;
      });
      std::vector<Entry> out;
      if (strategy.mode == "top_beam") {
        out.assign(order.begin(), order.begin() + k);
      } else if (strategy.mode == "bottom_beam") {
        out.assign(order.end() - k, order.end());
      } else if (strategy.mode == "extreme_beam") {
        int top = (k + 1) / 2;
        out.assign(order.begin(), order.begin() + top);
        out.insert(out.end(), order.end() - (k - top), order.end());
      } else {
        throw Error("unknown likelihood mode '" + strategy.mode + "'");
      }
      return out;
    }
    case StrategyFamily::spurious: {
      std::vector<Entry> order = entries;
      bool longest = strategy.mode == "max_length";
      if (!longest && strategy.mode != "min_length") {
        throw Error("unknown spurious mode '" + strategy.mode + "'");
      }
      std::sort(order.begin(), order.end(), [&](const Entry& a, const Entry& b) {
        if (a.cand->scores.n_tokens != b.cand->scores.n_tokens) {
          return longest ? a.cand->scores.n_tokens > b.cand->scores.n_tokens
                         : a.cand->scores.n_tokens < b.cand->scores.n_tokens;
        }
        return a.cand->candidate_id < b.cand->candidate_id;
      });
      return {order.begin(), order.begin() + k};
    }
    case StrategyFamily::hybrid_corr: {
      // Maximize rank correlation between the two aggregates inside the set.
      std::vector<double> faith;
      for (const auto& e : entries) {
        if (!e.cand->scores.faith_agg) {
          throw Error("strategy hybrid_corr requires faith_agg on candidate '" +
                      e.cand->candidate_id + "'");
        }
        faith.push_back(*e.cand->scores.faith_agg);
      }
      auto objective = [&](std::span<const std::int32_t> subset) {
        std::vector<double> xs, ys;
        for (std::int32_t idx : subset) {
          xs.push_back(entries[idx].agg);
          ys.push_back(faith[idx]);
        }
        return spearman(xs, ys).value;  // degenerate ranks count as 0
      };
      std::vector<std::int32_t> incumbent;
      if (binomial_capped(static_cast<int>(entries.size()), k,
                          config.enumeration_cap) > config.enumeration_cap) {
        incumbent = greedy_objective_incumbent(static_cast<int>(entries.size()), k,
                                               true, objective);
      }
      return best_subset(entries, k, config, true, incumbent, objective);
    }
  }
  throw Error("unhandled strategy family");
}

// ---- faithfulness strategies -----------------------------------------------

struct ContrastPick {
  std::vector<Entry> positives;
  std::vector<Entry> negatives;
};

ContrastPick pick_faithfulness(const CandidatePool& pool,
                               const SelectionConfig& config,
                               const std::vector<const Candidate*>& cands) {
  const StrategyId& strategy = config.strategy;
  std::vector<const Candidate*> pos, neg;
  for (const Candidate* c : cands) {
    if (c->polarity_hint == Polarity::positive) pos.push_back(c);
    if (c->polarity_hint == Polarity::negative) neg.push_back(c);
  }
  if (static_cast<int>(pos.size()) < config.k_pos) {
    throw Error("pool for '" + pool.example.example_id + "' has " +
                std::to_string(pos.size()) + " positive candidates, need k_pos=" +
                std::to_string(config.k_pos));
  }
  if (static_cast<int>(neg.size()) < config.k_neg) {
    throw Error("pool for '" + pool.example.example_id + "' has " +
                std::to_string(neg.size()) + " negative candidates, need k_neg=" +
                std::to_string(config.k_neg));
  }

  ContrastPick out;
  switch (strategy.family) {
    case StrategyFamily::random: {
      Rng rng(seed_from({std::to_string(config.rng_seed), "random-contrast",
                         pool.example.example_id}));
      for (std::size_t p : rng.sample_indices(pos.size(),
                                              static_cast<std::size_t>(config.k_pos))) {
        out.positives.push_back({pos[p], 0.0});
      }
      for (std::size_t p : rng.sample_indices(neg.size(),
                                              static_cast<std::size_t>(config.k_neg))) {
        out.negatives.push_back({neg[p], 0.0});
      }
      return out;
    }
    case StrategyFamily::quality: {
      if (strategy.mode != "average") {
        throw Error("unknown quality mode '" + strategy.mode +
                    "' for faithfulness pools");
      }
      std::vector<Entry> all = with_aggs(cands, PoolKind::faithfulness, strategy);
      double mean = 0.0;
      for (const auto& e : all) mean += e.agg;
      mean /= static_cast<double>(all.size());
      auto closest = [&](const std::vector<const Candidate*>& side, int k) {
        std::vector<Entry> entries = with_aggs(side, PoolKind::faithfulness, strategy);
        std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
          double da = std::abs(a.agg - mean), db = std::abs(b.agg - mean);
          if (da != db) return da < db;
          return a.cand->candidate_id < b.cand->candidate_id;
        });
        return std::vector<Entry>(entries.begin(), entries.begin() + k);
      };
      out.positives = closest(pos, config.k_pos);
      out.negatives = closest(neg, config.k_neg);
      return out;
    }
    case StrategyFamily::margin: {
      std::vector<Entry> pe = with_aggs(pos, PoolKind::faithfulness, strategy);
      std::vector<Entry> ne = with_aggs(neg, PoolKind::faithfulness, strategy);
      if (strategy.mode == "max") {
        // Widest contrast: most faithful positives, least faithful negatives.
        sort_by_agg_desc(pe);
        sort_by_agg_asc(ne);
      } else if (strategy.mode == "min") {
        sort_by_agg_asc(pe);
        sort_by_agg_desc(ne);
      } else {
        throw Error("unknown margin mode '" + strategy.mode + "'");
      }
      out.positives.assign(pe.begin(), pe.begin() + config.k_pos);
      out.negatives.assign(ne.begin(), ne.begin() + config.k_neg);
      return out;
    }
    case StrategyFamily::diversity: {
      bool maximize = strategy.mode == "max";
      if (!maximize && strategy.mode != "min") {
        throw Error("unknown diversity mode '" + strategy.mode + "'");
      }
      auto side_pick = [&](const std::vector<const Candidate*>& side, int k) {
        std::vector<Entry> entries;
        for (const Candidate* c : side) entries.push_back({c, 0.0});
        std::vector<std::string> texts;
        for (const auto& e : entries) texts.push_back(e.cand->text);
        auto bleu = bleu_matrix(texts);
        auto objective = [&](std::span<const std::int32_t> subset) {
          return subset_inverse_self_bleu(subset, bleu);
        };
        std::vector<std::int32_t> incumbent;
        if (binomial_capped(static_cast<int>(entries.size()), k,
                            config.enumeration_cap) > config.enumeration_cap) {
          incumbent = greedy_objective_incumbent(static_cast<int>(entries.size()), k,
                                                 maximize, objective);
        }
        return best_subset(entries, k, config, maximize, incumbent, objective);
      };
      out.positives = side_pick(pos, config.k_pos);
      out.negatives = side_pick(neg, config.k_neg);
      return out;
    }
    case StrategyFamily::likelihood: {
      if (strategy.mode == "top_beam" || strategy.mode == "bottom_beam" ||
          strategy.mode == "extreme_beam") {
        throw Error("strategy " + strategy.str() +
                    " requires beam_rank (diverse-beam relevance pools only)");
      }
      if (strategy.mode != "easy" && strategy.mode != "hard") {
        throw Error("unknown likelihood mode '" + strategy.mode + "'");
      }
      bool easy = strategy.mode == "easy";
      auto by_ll = [&](const std::vector<const Candidate*>& side, int k, bool desc) {
        std::vector<Entry> entries;
        for (const Candidate* c : side) entries.push_back({c, avg_ll_of(*c, strategy)});
        if (desc) {
          sort_by_agg_desc(entries);
        } else {
          sort_by_agg_asc(entries);
        }
        return std::vector<Entry>(entries.begin(), entries.begin() + k);
      };
      // Easy: the likely positives and unlikely negatives the model already
      // separates. Hard: the reverse.
      out.positives = by_ll(pos, config.k_pos, easy);
      out.negatives = by_ll(neg, config.k_neg, !easy);
      return out;
    }
    case StrategyFamily::spurious: {
      if (strategy.mode != "max_extract_gap") {
        throw Error("unknown spurious mode '" + strategy.mode +
                    "' for faithfulness pools");
      }
      auto by_density = [&](const std::vector<const Candidate*>& side, int k,
                            bool desc) {
        std::vector<Entry> entries;
        for (const Candidate* c : side) entries.push_back({c, density_of(*c, strategy)});
        if (desc) {
          sort_by_agg_desc(entries);
        } else {
          sort_by_agg_asc(entries);
        }
        return std::vector<Entry>(entries.begin(), entries.begin() + k);
      };
      // Most extractive positives vs most abstractive negatives.
      out.positives = by_density(pos, config.k_pos, true);
      out.negatives = by_density(neg, config.k_neg, false);
      return out;
    }
    case StrategyFamily::hybrid_corr:
      break;
  }
  throw Error("strategy " + strategy.str() + " not defined for faithfulness pools");
}

}  // namespace

SelectedSet select(const CandidatePool& pool, const SelectionConfig& config) {
  const StrategyId& strategy = config.strategy;
  if (!in_catalog(strategy, pool.pool_kind)) {
    if (strategy.family == StrategyFamily::likelihood &&
        pool.pool_kind == PoolKind::faithfulness &&
        (strategy.mode == "top_beam" || strategy.mode == "bottom_beam" ||
         strategy.mode == "extreme_beam")) {
      throw Error("strategy " + strategy.str() +
                  " requires beam_rank (diverse-beam relevance pools only)");
    }
    throw Error("strategy " + strategy.str() + " not in catalog for " +
                to_string(pool.pool_kind) + " pools");
  }
  if (config.k_rank < 2 || config.k_pos < 1 || config.k_neg < 1) {
    throw Error("selection sizes must satisfy k_rank >= 2, k_pos/k_neg >= 1");
  }

  std::vector<const Candidate*> cands = id_sorted(pool);
  SelectedSet set;
  set.example_id = pool.example.example_id;
  set.strategy = to_string(strategy.family);
  set.mode = strategy.mode;
  set.kind = pool.pool_kind;

  if (pool.pool_kind == PoolKind::relevance) {
    if (static_cast<int>(cands.size()) < config.k_rank) {
      throw Error("pool for '" + pool.example.example_id + "' has " +
                  std::to_string(cands.size()) + " candidates, need k_rank=" +
                  std::to_string(config.k_rank));
    }
    std::vector<Entry> picked = pick_relevance(pool, config, cands);
    // Ranked sets always come out ordered by descending quality.
    sort_by_agg_desc(picked);
    set.rank_order = ids_of(picked);
    set.k_rank = config.k_rank;
  } else {
    ContrastPick picked = pick_faithfulness(pool, config, cands);
    auto by_id = [](std::vector<Entry>& entries) {
      std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.cand->candidate_id < b.cand->candidate_id;
      });
    };
    by_id(picked.positives);
    by_id(picked.negatives);
    set.positives = ids_of(picked.positives);
    set.negatives = ids_of(picked.negatives);
    set.k_pos = config.k_pos;
    set.k_neg = config.k_neg;
  }
  return set;
}

}  // namespace calset
