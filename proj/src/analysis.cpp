// Set statistics, BLEU, correlations, and the strategy comparison report.

#include "calset/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "calset/metrics.hpp"

namespace calset {

namespace {

std::unordered_map<std::string, int> count_ngrams(const std::vector<std::string>& tokens,
                                                  int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k > 0) key.push_back('\x1F');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

double sentence_bleu(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference) {
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    auto cand = count_ngrams(candidate, n);
    auto ref = count_ngrams(reference, n);
    long long matches = 0, total = 0;
    for (const auto& [key, cnt] : cand) {
      total += cnt;
      auto it = ref.find(key);
      if (it != ref.end()) matches += std::min(cnt, it->second);
    }
    // Add-one smoothing on every order.
    double p = (static_cast<double>(matches) + 1.0) / (static_cast<double>(total) + 1.0);
    log_sum += 0.25 * std::log(p);
  }
  double bp = 1.0;
  if (candidate.size() < reference.size()) {
    bp = std::exp(1.0 - static_cast<double>(reference.size()) /
                            static_cast<double>(candidate.size()));
  }
  return bp * std::exp(log_sum);
}

std::vector<std::vector<double>> bleu_matrix(const std::vector<std::string>& texts) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(texts.size());
  for (const auto& t : texts) tokens.push_back(rouge_tokens(t));
  std::vector<std::vector<double>> b(texts.size(),
                                     std::vector<double>(texts.size(), 0.0));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = 0; j < texts.size(); ++j) {
      if (i != j) b[i][j] = sentence_bleu(tokens[i], tokens[j]);
    }
  }
  return b;
}

double self_bleu(const std::vector<std::string>& texts) {
  if (texts.size() < 2) throw Error("self_bleu: needs at least 2 texts");
  auto b = bleu_matrix(texts);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = 0; j < texts.size(); ++j) {
      if (i == j) continue;
      sum += b[i][j];
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double margin_gap(const std::vector<double>& values) {
  if (values.size() < 2) throw Error("margin_gap: needs at least 2 values");
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  return (*mx - *mn) / static_cast<double>(values.size() - 1);
}

double likelihood_gap(const std::vector<double>& positive_means,
                      const std::vector<double>& negative_means) {
  if (positive_means.empty() || negative_means.empty()) {
    throw Error("likelihood_gap: both sides must be non-empty");
  }
  double p = std::accumulate(positive_means.begin(), positive_means.end(), 0.0) /
             static_cast<double>(positive_means.size());
  double n = std::accumulate(negative_means.begin(), negative_means.end(), 0.0) /
             static_cast<double>(negative_means.size());
  return p - n;
}

namespace {

// Average ranks, 1-based, ascending order; ties share their mean position.
std::vector<double> ascending_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double pearson_or_nan(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::vector<double> descending_ranks(const std::vector<double>& values) {
  std::vector<double> negated(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) negated[i] = -values[i];
  return ascending_ranks(negated);
}

CorrelationResult spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("spearman: length mismatch");
  if (xs.size() < 2) throw Error("spearman: needs at least 2 points");
  double r = pearson_or_nan(ascending_ranks(xs), ascending_ranks(ys));
  if (std::isnan(r)) return {0.0, true};
  return {r, false};
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("pearson: length mismatch");
  if (xs.size() < 2) throw Error("pearson: needs at least 2 points");
  double r = pearson_or_nan(xs, ys);
  if (std::isnan(r)) throw Error("pearson: constant input has no correlation");
  return r;
}

double precalibration_score(const std::vector<int>& beam_ranks,
                            const std::vector<double>& rel_aggs) {
  if (beam_ranks.size() != rel_aggs.size()) {
    throw Error("precalibration_score: length mismatch");
  }
  if (beam_ranks.size() < 2) {
    throw Error("precalibration_score: needs at least 2 candidates");
  }
  std::vector<double> beams(beam_ranks.begin(), beam_ranks.end());
  CorrelationResult rho = spearman(beams, descending_ranks(rel_aggs));
  return -rho.value;
}

SetStatistics set_statistics(const SelectedSet& set, const CandidatePool& pool) {
  if (set.example_id != pool.example.example_id) {
    throw Error("set_statistics: set and pool refer to different examples");
  }
  auto member = [&](const std::string& id) -> const Candidate& {
    const Candidate* c = pool.find(id);
    if (!c) {
      throw Error("set_statistics: candidate '" + id + "' not in pool");
    }
    return *c;
  };
  auto agg_of = [&](const Candidate& c) -> double {
    const std::optional<double>& v =
        set.kind == PoolKind::relevance ? c.scores.rel_agg : c.scores.faith_agg;
    if (!v) {
      throw Error("set_statistics: candidate '" + c.candidate_id +
                  "' missing aggregate score");
    }
    return *v;
  };
  auto density_of = [&](const Candidate& c) -> double {
    if (!c.scores.extractive_density) {
      throw Error("set_statistics: candidate '" + c.candidate_id +
                  "' missing extractive_density");
    }
    return *c.scores.extractive_density;
  };

  SetStatistics st;
  std::vector<std::string> all_ids;
  if (set.kind == PoolKind::relevance) {
    all_ids = set.rank_order;
  } else {
    all_ids = set.positives;
    all_ids.insert(all_ids.end(), set.negatives.begin(), set.negatives.end());
  }
  if (all_ids.empty()) throw Error("set_statistics: empty selected set");

  double sum_agg = 0.0, sum_len = 0.0, sum_density = 0.0;
  std::vector<std::string> texts;
  for (const auto& id : all_ids) {
    const Candidate& c = member(id);
    sum_agg += agg_of(c);
    sum_len += static_cast<double>(c.scores.n_tokens);
    sum_density += density_of(c);
    texts.push_back(c.text);
  }
  const double n = static_cast<double>(all_ids.size());
  st.mean_quality = sum_agg / n;
  st.mean_length_tokens = sum_len / n;
  st.mean_extractive_density = sum_density / n;

  if (set.kind == PoolKind::relevance) {
    std::vector<double> aggs;
    std::vector<int> beams;
    bool have_beams = true;
    for (const auto& id : set.rank_order) {
      const Candidate& c = member(id);
      aggs.push_back(agg_of(c));
      if (c.beam_rank) {
        beams.push_back(*c.beam_rank);
      } else {
        have_beams = false;
      }
    }
    st.margin_gap = margin_gap(aggs);
    st.inverse_self_bleu = 1.0 - self_bleu(texts);
    if (have_beams && beams.size() >= 2) {
      st.precalibration_score = precalibration_score(beams, aggs);
    }
  } else {
    std::vector<double> pos_aggs, neg_aggs;
    std::vector<std::string> pos_texts, neg_texts;
    std::vector<double> pos_lls, neg_lls;
    bool have_lls = true;
    // Mean token log-likelihood: per-token values when present, else the
    // scoring service's bartscore (same quantity, precomputed).
    auto mean_ll = [](const Candidate& c) -> std::optional<double> {
      if (c.token_logprobs) return avg_token_loglik(*c.token_logprobs);
      return c.scores.bartscore;
    };
    for (const auto& id : set.positives) {
      const Candidate& c = member(id);
      pos_aggs.push_back(agg_of(c));
      pos_texts.push_back(c.text);
      if (auto ll = mean_ll(c)) {
        pos_lls.push_back(*ll);
      } else {
        have_lls = false;
      }
    }
    for (const auto& id : set.negatives) {
      const Candidate& c = member(id);
      neg_aggs.push_back(agg_of(c));
      neg_texts.push_back(c.text);
      if (auto ll = mean_ll(c)) {
        neg_lls.push_back(*ll);
      } else {
        have_lls = false;
      }
    }
    auto mean_of = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    // Contrast-set margin: positive-half minus negative-half mean aggregate.
    st.margin_gap = mean_of(pos_aggs) - mean_of(neg_aggs);
    double inv = 0.0;
    int halves = 0;
    if (pos_texts.size() >= 2) {
      inv += 1.0 - self_bleu(pos_texts);
      ++halves;
    }
    if (neg_texts.size() >= 2) {
      inv += 1.0 - self_bleu(neg_texts);
      ++halves;
    }
    st.inverse_self_bleu = halves > 0 ? inv / halves : 0.0;
    if (have_lls) st.likelihood_gap = likelihood_gap(pos_lls, neg_lls);
  }
  return st;
}

CorrelateReport correlate_runs(const std::vector<RunRow>& rows) {
  if (rows.size() < 3) throw Error("correlate_runs: needs at least 3 runs");
  // Union of statistic names, sorted for a stable report.
  std::vector<std::string> stats;
  for (const auto& row : rows) {
    for (const auto& [name, _] : row.stat_means) {
      if (std::find(stats.begin(), stats.end(), name) == stats.end()) {
        stats.push_back(name);
      }
    }
  }
  std::sort(stats.begin(), stats.end());

  std::vector<double> deltas;
  for (const auto& row : rows) deltas.push_back(row.downstream_delta);

  CorrelateReport report;
  std::ostringstream table;
  table << "statistic                     r        n\n";
  for (const auto& stat : stats) {
    std::vector<double> xs, ys;
    for (const auto& row : rows) {
      auto it = row.stat_means.find(stat);
      if (it == row.stat_means.end()) continue;
      xs.push_back(it->second);
      ys.push_back(deltas[&row - rows.data()]);
    }
    StatCorrelation sc;
    sc.stat = stat;
    if (xs.size() < 3) {
      sc.degenerate = true;
    } else {
      double r = pearson_or_nan(xs, ys);
      if (std::isnan(r)) {
        sc.degenerate = true;
      } else {
        sc.r = r;
      }
    }
    char line[128];
    if (sc.degenerate) {
      std::snprintf(line, sizeof(line), "%-28s %8s %4zu\n", stat.c_str(), "-",
                    xs.size());
    } else {
      std::snprintf(line, sizeof(line), "%-28s %+8.4f %4zu\n", stat.c_str(), sc.r,
                    xs.size());
    }
    table << line;
    report.correlations.push_back(std::move(sc));
  }
  report.table_text = table.str();
  return report;
}

}  // namespace calset
