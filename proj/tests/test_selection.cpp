#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>

#include "calset/analysis.hpp"
#include "calset/selection.hpp"

using namespace calset;

namespace {

std::string pad2(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

// Relevance pool with ids c00..cNN so candidate_id order equals build order,
// which keeps the brute-force oracle's index space aligned with selection's.
CandidatePool rel_pool(int n, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> vocab = {"alpha", "beta",  "gamma", "delta",
                                          "eps",   "zeta",  "eta",   "theta",
                                          "iota",  "kappa"};
  CandidatePool pool;
  pool.pool_kind = PoolKind::relevance;
  pool.example.example_id = "ex";
  for (int i = 0; i < n; ++i) {
    Candidate c;
    c.candidate_id = "c" + pad2(i);
    c.example_id = "ex";
    c.method = Method::diverse_beam;
    c.beam_rank = i;
    int len = 4 + static_cast<int>(rng.bounded(5));
    std::string text;
    for (int t = 0; t < len; ++t) {
      text += (text.empty() ? "" : " ") + vocab[rng.bounded(vocab.size())];
    }
    c.text = text;
    c.scores.n_tokens = len;
    c.scores.rel_agg = rng.unit() * 2.0 - 1.0;
    c.scores.faith_agg = rng.unit() * 2.0 - 1.0;
    c.token_logprobs = std::vector<double>{-rng.unit() - 0.1};
    pool.candidates.push_back(std::move(c));
  }
  return pool;
}

CandidatePool faith_pool(int n_pos, int n_neg, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> vocab = {"mu", "nu", "xi", "pi", "rho", "sigma"};
  CandidatePool pool;
  pool.pool_kind = PoolKind::faithfulness;
  pool.example.example_id = "ex";
  auto add = [&](const std::string& prefix, int count, Method method) {
    for (int i = 0; i < count; ++i) {
      Candidate c;
      c.candidate_id = prefix + pad2(i);
      c.example_id = "ex";
      c.method = method;
      c.polarity_hint = expected_polarity(method);
      int len = 4 + static_cast<int>(rng.bounded(4));
      std::string text;
      for (int t = 0; t < len; ++t) {
        text += (text.empty() ? "" : " ") + vocab[rng.bounded(vocab.size())];
      }
      c.text = text;
      c.scores.n_tokens = len;
      c.scores.faith_agg = rng.unit() * 2.0 - 1.0;
      c.scores.extractive_density = rng.unit() * 4.0;
      c.token_logprobs = std::vector<double>{-rng.unit() - 0.1, -rng.unit()};
      pool.candidates.push_back(std::move(c));
    }
  };
  add("p", n_pos, Method::paraphrase);
  add("n", n_neg, Method::swap_intrinsic);
  return pool;
}

SelectionConfig config_for(const std::string& strategy) {
  SelectionConfig config;
  config.strategy = StrategyId::parse(strategy);
  return config;
}

std::vector<std::string> sorted_ids(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  return ids;
}

double margin_objective(const std::vector<double>& aggs,
                        const std::vector<int>& subset) {
  double mn = aggs[subset[0]], mx = aggs[subset[0]];
  for (int idx : subset) {
    mn = std::min(mn, aggs[idx]);
    mx = std::max(mx, aggs[idx]);
  }
  return (mx - mn) / static_cast<double>(subset.size() - 1);
}

double diversity_objective(const std::vector<std::vector<double>>& bleu,
                           const std::vector<int>& subset) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (int i : subset) {
    for (int j : subset) {
      if (i == j) continue;
      sum += bleu[i][j];
      ++pairs;
    }
  }
  if (pairs == 0) return 0.0;
  return 1.0 - sum / static_cast<double>(pairs);
}

double corr_objective(const std::vector<double>& rel, const std::vector<double>& fai,
                      const std::vector<int>& subset) {
  std::vector<double> xs, ys;
  for (int idx : subset) {
    xs.push_back(rel[idx]);
    ys.push_back(fai[idx]);
  }
  return spearman(xs, ys).value;
}

// Exhaustive scan over all k-subsets of {0..n-1}, ascending index order.
template <typename Objective>
double brute_best(int n, int k, bool maximize, Objective&& objective) {
  std::vector<int> subset;
  double best = 0.0;
  bool have = false;
  std::function<void(int)> search = [&](int start) {
    if (static_cast<int>(subset.size()) == k) {
      double value = objective(subset);
      if (!have || (maximize ? value > best : value < best)) {
        have = true;
        best = value;
      }
      return;
    }
    for (int i = start; i <= n - (k - static_cast<int>(subset.size())); ++i) {
      subset.push_back(i);
      search(i + 1);
      subset.pop_back();
    }
  };
  search(0);
  REQUIRE(have);
  return best;
}

std::vector<int> indices_of(const std::vector<std::string>& ids,
                            const std::string& prefix) {
  std::vector<int> out;
  for (const auto& id : ids) {
    out.push_back(std::stoi(id.substr(prefix.size())));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("the strategy catalog carries every published configuration") {
  int relevance = 0, faithfulness = 0;
  for (const auto& entry : strategy_catalog()) {
    if (entry.kind == PoolKind::relevance) ++relevance;
    if (entry.kind == PoolKind::faithfulness) ++faithfulness;
    // str/parse round-trip for each entry
    CHECK(StrategyId::parse(entry.id.str()) == entry.id);
    CHECK(in_catalog(entry.id, entry.kind));
  }
  CHECK(relevance == 15);
  CHECK(faithfulness == 9);

  for (const char* s :
       {"random", "quality:extreme", "quality:average", "quality:min",
        "quality:high", "margin:max", "margin:min", "diversity:max",
        "diversity:min", "likelihood:extreme_beam", "likelihood:top_beam",
        "likelihood:bottom_beam", "spurious:max_length", "spurious:min_length",
        "hybrid_corr"}) {
    CHECK(in_catalog(StrategyId::parse(s), PoolKind::relevance));
  }
  for (const char* s :
       {"random", "quality:average", "margin:max", "margin:min", "diversity:max",
        "diversity:min", "likelihood:easy", "likelihood:hard",
        "spurious:max_extract_gap"}) {
    CHECK(in_catalog(StrategyId::parse(s), PoolKind::faithfulness));
  }

  CHECK(!in_catalog(StrategyId::parse("hybrid_corr"), PoolKind::faithfulness));
  CHECK(!in_catalog(StrategyId::parse("quality:high"), PoolKind::faithfulness));
  CHECK(!in_catalog(StrategyId::parse("spurious:max_extract_gap"),
                    PoolKind::relevance));
  CHECK(!in_catalog(StrategyId::parse("likelihood:easy"), PoolKind::relevance));
  CHECK_THROWS_WITH_AS(StrategyId::parse("bogus:max"),
                       doctest::Contains("unknown strategy family 'bogus'"), Error);
}

TEST_CASE("binomial_capped saturates instead of overflowing") {
  CHECK(binomial_capped(5, 2, 1000) == 10);
  CHECK(binomial_capped(12, 4, 1000) == 495);
  CHECK(binomial_capped(20, 4, 100000) == 4845);
  CHECK(binomial_capped(60, 2, 100000) == 1770);
  CHECK(binomial_capped(4, 0, 10) == 1);
  CHECK(binomial_capped(3, 5, 10) == 0);
  CHECK(binomial_capped(30, 15, 1000) == 1001);    // saturated at cap + 1
  CHECK(binomial_capped(200, 100, 200000) == 200001);
}

TEST_CASE("subset enumeration is exact under the cap and sampled beyond it") {
  KSubsets small = enumerate_k_subsets(5, 4, 200000);
  CHECK(small.exact);
  REQUIRE(small.count() == 5);
  CHECK(std::vector<std::int32_t>(small.at(0).begin(), small.at(0).end()) ==
        std::vector<std::int32_t>{0, 1, 2, 3});
  CHECK(std::vector<std::int32_t>(small.at(4).begin(), small.at(4).end()) ==
        std::vector<std::int32_t>{1, 2, 3, 4});

  KSubsets mid = enumerate_k_subsets(20, 4, 200000);
  CHECK(mid.exact);
  CHECK(mid.count() == 4845);
  // Lexicographic: successive subsets never decrease.
  for (std::size_t i = 1; i < 10; ++i) {
    auto prev = mid.at(i - 1);
    auto curr = mid.at(i);
    CHECK(std::lexicographical_compare(prev.begin(), prev.end(), curr.begin(),
                                       curr.end()));
  }

  SUBCASE("sampling kicks in over the cap") {
    KSubsets capped = enumerate_k_subsets(30, 10, 500, 1);
    CHECK(!capped.exact);
    CHECK(capped.count() == 500);
    for (std::size_t s = 0; s < capped.count(); ++s) {
      auto subset = capped.at(s);
      for (std::size_t i = 1; i < subset.size(); ++i) {
        CHECK(subset[i - 1] < subset[i]);  // sorted, distinct
      }
      CHECK(subset.front() >= 0);
      CHECK(subset.back() < 30);
    }
    KSubsets again = enumerate_k_subsets(30, 10, 500, 1);
    CHECK(again.flat == capped.flat);

    std::vector<std::int32_t> incumbent = {9, 3, 5, 0, 7, 11, 13, 15, 17, 19};
    KSubsets seeded = enumerate_k_subsets(30, 10, 500, 1, incumbent);
    CHECK(seeded.count() == 501);  // incumbent first, then the samples
    auto first = seeded.at(0);
    CHECK(std::vector<std::int32_t>(first.begin(), first.end()) ==
          std::vector<std::int32_t>{0, 3, 5, 7, 9, 11, 13, 15, 17, 19});
  }
  SUBCASE("incumbent validation") {
    CHECK_THROWS_WITH_AS(enumerate_k_subsets(30, 10, 500, 1, {1, 2, 3}),
                         doctest::Contains("incumbent size must equal k"), Error);
    CHECK_THROWS_WITH_AS(
        enumerate_k_subsets(30, 10, 500, 1, {0, 1, 2, 3, 4, 5, 6, 7, 8, 8}),
        doctest::Contains("invalid incumbent"), Error);
    CHECK_THROWS_WITH_AS(
        enumerate_k_subsets(30, 10, 500, 1, {0, 1, 2, 3, 4, 5, 6, 7, 8, 30}),
        doctest::Contains("invalid incumbent"), Error);
  }
  SUBCASE("degenerate arguments") {
    CHECK_THROWS_WITH_AS(enumerate_k_subsets(3, 5, 10),
                         doctest::Contains("k exceeds n"), Error);
    CHECK_THROWS_WITH_AS(enumerate_k_subsets(-1, 0, 10),
                         doctest::Contains("negative arguments"), Error);
  }
}

TEST_CASE("optimizing strategies match exhaustive search exactly") {
  // Unit-scale version of the acceptance sweep: every optimizing strategy's
  // achieved objective must equal the brute-force optimum, not approximate it.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng size_rng(seed ^ 0x9E3779B97F4A7C15ULL);
    int n = 5 + static_cast<int>(size_rng.bounded(8));  // 5..12
    CandidatePool pool = rel_pool(n, seed + 1000);
    std::vector<double> rel, fai;
    std::vector<std::string> texts;
    for (const auto& c : pool.candidates) {
      rel.push_back(*c.scores.rel_agg);
      fai.push_back(*c.scores.faith_agg);
      texts.push_back(c.text);
    }
    auto bleu = bleu_matrix(texts);
    CAPTURE(seed);

    for (bool maximize : {true, false}) {
      SelectedSet set =
          select(pool, config_for(maximize ? "margin:max" : "margin:min"));
      std::vector<int> picked = indices_of(set.rank_order, "c");
      double got = margin_objective(rel, picked);
      double best = brute_best(n, 4, maximize, [&](const std::vector<int>& s) {
        return margin_objective(rel, s);
      });
      CHECK(got == best);
    }
    for (bool maximize : {true, false}) {
      SelectedSet set =
          select(pool, config_for(maximize ? "diversity:max" : "diversity:min"));
      std::vector<int> picked = indices_of(set.rank_order, "c");
      double got = diversity_objective(bleu, picked);
      double best = brute_best(n, 4, maximize, [&](const std::vector<int>& s) {
        return diversity_objective(bleu, s);
      });
      CHECK(got == best);
    }
    {
      SelectedSet set = select(pool, config_for("hybrid_corr"));
      std::vector<int> picked = indices_of(set.rank_order, "c");
      double got = corr_objective(rel, fai, picked);
      double best = brute_best(n, 4, true, [&](const std::vector<int>& s) {
        return corr_objective(rel, fai, s);
      });
      CHECK(got == best);
    }
  }
}

TEST_CASE("faithfulness diversity optimizes each half independently") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng size_rng(seed * 31 + 5);
    int n_pos = 3 + static_cast<int>(size_rng.bounded(4));  // 3..6
    int n_neg = 3 + static_cast<int>(size_rng.bounded(4));
    CandidatePool pool = faith_pool(n_pos, n_neg, seed + 77);
    std::vector<std::string> pos_texts, neg_texts;
    for (const auto& c : pool.candidates) {
      if (c.polarity_hint == Polarity::positive) pos_texts.push_back(c.text);
      if (c.polarity_hint == Polarity::negative) neg_texts.push_back(c.text);
    }
    auto pos_bleu = bleu_matrix(pos_texts);
    auto neg_bleu = bleu_matrix(neg_texts);
    CAPTURE(seed);

    for (bool maximize : {true, false}) {
      SelectedSet set =
          select(pool, config_for(maximize ? "diversity:max" : "diversity:min"));
      double got_pos = diversity_objective(pos_bleu, indices_of(set.positives, "p"));
      double got_neg = diversity_objective(neg_bleu, indices_of(set.negatives, "n"));
      double best_pos =
          brute_best(n_pos, 2, maximize, [&](const std::vector<int>& s) {
            return diversity_objective(pos_bleu, s);
          });
      double best_neg =
          brute_best(n_neg, 2, maximize, [&](const std::vector<int>& s) {
            return diversity_objective(neg_bleu, s);
          });
      CHECK(got_pos == best_pos);
      CHECK(got_neg == best_neg);
    }
  }
}

TEST_CASE("selection ignores pool row order") {
  CandidatePool pool = rel_pool(9, 42);
  CandidatePool reversed = pool;
  std::reverse(reversed.candidates.begin(), reversed.candidates.end());
  for (const char* s : {"margin:max", "diversity:min", "quality:extreme", "random",
                        "hybrid_corr", "spurious:max_length"}) {
    CHECK(select(pool, config_for(s)) == select(reversed, config_for(s)));
  }

  CandidatePool faith = faith_pool(5, 5, 43);
  CandidatePool faith_reversed = faith;
  std::reverse(faith_reversed.candidates.begin(), faith_reversed.candidates.end());
  for (const char* s : {"random", "quality:average", "margin:max",
                        "likelihood:easy", "spurious:max_extract_gap"}) {
    CHECK(select(faith, config_for(s)) == select(faith_reversed, config_for(s)));
  }
}

TEST_CASE("relevance strategies pick their documented sets") {
  CandidatePool pool;
  pool.pool_kind = PoolKind::relevance;
  pool.example.example_id = "ex";
  const std::vector<double> aggs = {1.0, 0.9, 0.5, 0.1, 0.0};
  const std::vector<int> lengths = {5, 9, 7, 3, 11};
  for (int i = 0; i < 5; ++i) {
    Candidate c;
    c.candidate_id = "c" + std::to_string(i);
    c.example_id = "ex";
    c.method = Method::diverse_beam;
    c.beam_rank = i;
    c.text = "text " + std::to_string(i);
    c.scores.rel_agg = aggs[i];
    c.scores.faith_agg = 0.1 * lengths[i];  // hybrid_corr input, order scrambled
    c.scores.n_tokens = lengths[i];
    pool.candidates.push_back(std::move(c));
  }

  using Ids = std::vector<std::string>;
  CHECK(select(pool, config_for("margin:max")).rank_order ==
        Ids{"c0", "c1", "c2", "c4"});  // gap 1/3, lexicographic-first optimum
  CHECK(select(pool, config_for("margin:min")).rank_order ==
        Ids{"c0", "c1", "c2", "c3"});  // gap 0.3
  CHECK(select(pool, config_for("quality:high")).rank_order ==
        Ids{"c0", "c1", "c2", "c3"});
  CHECK(select(pool, config_for("quality:min")).rank_order ==
        Ids{"c1", "c2", "c3", "c4"});
  CHECK(select(pool, config_for("quality:extreme")).rank_order ==
        Ids{"c0", "c1", "c3", "c4"});
  // Pool mean is 0.5; the four nearest are c2 (0), c1/c3 (0.4), then the
  // c0/c4 tie at 0.5 resolved by id.
  CHECK(select(pool, config_for("quality:average")).rank_order ==
        Ids{"c0", "c1", "c2", "c3"});
  // Longest four are c4/c1/c2/c0; emission re-sorts by aggregate.
  CHECK(select(pool, config_for("spurious:max_length")).rank_order ==
        Ids{"c0", "c1", "c2", "c4"});
  CHECK(select(pool, config_for("spurious:min_length")).rank_order ==
        Ids{"c0", "c1", "c2", "c3"});

  SelectedSet random_set = select(pool, config_for("random"));
  CHECK(random_set.rank_order.size() == 4);
  std::vector<std::string> random_ids = sorted_ids(random_set.rank_order);
  CHECK(std::adjacent_find(random_ids.begin(), random_ids.end()) ==
        random_ids.end());
  CHECK(select(pool, config_for("random")) == random_set);
  SelectionConfig other_seed = config_for("random");
  other_seed.rng_seed = 9;
  SelectedSet shifted = select(pool, other_seed);
  CHECK(shifted.rank_order.size() == 4);

  SUBCASE("set metadata is stamped") {
    SelectedSet set = select(pool, config_for("margin:max"));
    CHECK(set.example_id == "ex");
    CHECK(set.strategy == "margin");
    CHECK(set.mode == "max");
    CHECK(set.kind == PoolKind::relevance);
    CHECK(set.k_rank == 4);
    CHECK(set.positives.empty());
    CHECK(set.negatives.empty());
  }
  SUBCASE("rank order is descending aggregate for every strategy") {
    for (const auto& entry : strategy_catalog()) {
      if (entry.kind != PoolKind::relevance) continue;
      SelectedSet set = select(pool, SelectionConfig{entry.id});
      REQUIRE(set.rank_order.size() == 4);
      auto agg_of = [&](const std::string& id) {
        for (const auto& c : pool.candidates) {
          if (c.candidate_id == id) return *c.scores.rel_agg;
        }
        REQUIRE(false);
        return 0.0;
      };
      for (std::size_t i = 1; i < set.rank_order.size(); ++i) {
        CHECK(agg_of(set.rank_order[i - 1]) >= agg_of(set.rank_order[i]));
      }
    }
  }
}

TEST_CASE("beam likelihood strategies slice the rank ladder") {
  CandidatePool pool;
  pool.pool_kind = PoolKind::relevance;
  pool.example.example_id = "ex";
  for (int i = 0; i < 10; ++i) {
    Candidate c;
    c.candidate_id = "b" + std::to_string(i);
    c.example_id = "ex";
    c.method = Method::diverse_beam;
    c.beam_rank = i;
    c.text = "beam " + std::to_string(i);
    c.scores.rel_agg = 0.37 * ((i * 3) % 7);  // scrambled quality
    c.scores.n_tokens = 5;
    pool.candidates.push_back(std::move(c));
  }
  using Ids = std::vector<std::string>;
  CHECK(sorted_ids(select(pool, config_for("likelihood:top_beam")).rank_order) ==
        Ids{"b0", "b1", "b2", "b3"});
  CHECK(sorted_ids(select(pool, config_for("likelihood:bottom_beam")).rank_order) ==
        Ids{"b6", "b7", "b8", "b9"});
  CHECK(sorted_ids(select(pool, config_for("likelihood:extreme_beam")).rank_order) ==
        Ids{"b0", "b1", "b8", "b9"});

  SUBCASE("beam_rank is required") {
    pool.candidates[3].beam_rank.reset();
    CHECK_THROWS_WITH_AS(select(pool, config_for("likelihood:top_beam")),
                         doctest::Contains("requires beam_rank on candidate 'b3'"),
                         Error);
  }
}

TEST_CASE("faithfulness strategies pick their documented halves") {
  CandidatePool pool;
  pool.pool_kind = PoolKind::faithfulness;
  pool.example.example_id = "ex";
  auto add = [&](const std::string& id, Method method, double agg, double ll,
                 double density) {
    Candidate c;
    c.candidate_id = id;
    c.example_id = "ex";
    c.method = method;
    c.polarity_hint = expected_polarity(method);
    c.text = "text " + id;
    c.scores.faith_agg = agg;
    c.scores.extractive_density = density;
    c.scores.n_tokens = 4;
    c.token_logprobs = std::vector<double>{ll};
    pool.candidates.push_back(std::move(c));
  };
  add("p0", Method::paraphrase, 0.9, -0.1, 3.0);
  add("p1", Method::paraphrase, 0.5, -0.5, 1.0);
  add("p2", Method::paraphrase, 0.1, -1.0, 2.0);
  add("n0", Method::swap_intrinsic, 0.8, -0.2, 0.5);
  add("n1", Method::swap_intrinsic, 0.4, -0.6, 2.5);
  add("n2", Method::swap_intrinsic, 0.0, -1.2, 1.5);

  using Ids = std::vector<std::string>;
  SelectedSet wide = select(pool, config_for("margin:max"));
  CHECK(wide.positives == Ids{"p0", "p1"});
  CHECK(wide.negatives == Ids{"n1", "n2"});
  SelectedSet narrow = select(pool, config_for("margin:min"));
  CHECK(narrow.positives == Ids{"p1", "p2"});
  CHECK(narrow.negatives == Ids{"n0", "n1"});

  // Pool mean aggregate is 0.45; nearest per half.
  SelectedSet average = select(pool, config_for("quality:average"));
  CHECK(average.positives == Ids{"p1", "p2"});
  CHECK(average.negatives == Ids{"n0", "n1"});

  SelectedSet easy = select(pool, config_for("likelihood:easy"));
  CHECK(easy.positives == Ids{"p0", "p1"});   // most likely positives
  CHECK(easy.negatives == Ids{"n1", "n2"});   // least likely negatives
  SelectedSet hard = select(pool, config_for("likelihood:hard"));
  CHECK(hard.positives == Ids{"p1", "p2"});
  CHECK(hard.negatives == Ids{"n0", "n1"});

  SelectedSet gap = select(pool, config_for("spurious:max_extract_gap"));
  CHECK(gap.positives == Ids{"p0", "p2"});    // densest positives
  CHECK(gap.negatives == Ids{"n0", "n2"});    // most abstractive negatives

  SelectedSet random_set = select(pool, config_for("random"));
  CHECK(random_set.positives.size() == 2);
  CHECK(random_set.negatives.size() == 2);
  CHECK(select(pool, config_for("random")) == random_set);

  SUBCASE("set metadata is stamped") {
    CHECK(wide.kind == PoolKind::faithfulness);
    CHECK(wide.k_pos == 2);
    CHECK(wide.k_neg == 2);
    CHECK(wide.rank_order.empty());
  }
  SUBCASE("bartscore stands in for missing token logprobs") {
    pool.candidates[0].token_logprobs.reset();  // p0
    pool.candidates[0].scores.bartscore = -0.05;
    SelectedSet fallback = select(pool, config_for("likelihood:easy"));
    CHECK(fallback.positives == Ids{"p0", "p1"});
    pool.candidates[0].scores.bartscore.reset();
    CHECK_THROWS_WITH_AS(
        select(pool, config_for("likelihood:easy")),
        doctest::Contains("requires token_logprobs or bartscore on candidate 'p0'"),
        Error);
  }
  SUBCASE("extractive density is required for the spurious gap") {
    pool.candidates[4].scores.extractive_density.reset();  // n1
    CHECK_THROWS_WITH_AS(
        select(pool, config_for("spurious:max_extract_gap")),
        doctest::Contains("requires extractive_density on candidate 'n1'"), Error);
  }
}

TEST_CASE("hybrid correlation survives monotone transforms of either aggregate") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CandidatePool pool = rel_pool(8, seed + 300);
    SelectedSet base = select(pool, config_for("hybrid_corr"));

    CandidatePool warped = pool;
    for (auto& c : warped.candidates) {
      c.scores.rel_agg = std::exp(*c.scores.rel_agg);       // monotone in rel
      c.scores.faith_agg = 2.0 * *c.scores.faith_agg + 1.0; // affine in faith
    }
    SelectedSet transformed = select(warped, config_for("hybrid_corr"));
    CHECK(transformed.rank_order == base.rank_order);
  }
}

TEST_CASE("margin:max never scores below margin:min") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CandidatePool pool = rel_pool(6 + static_cast<int>(seed % 6), seed + 500);
    std::vector<double> rel;
    for (const auto& c : pool.candidates) rel.push_back(*c.scores.rel_agg);
    double max_gap = margin_objective(
        rel, indices_of(select(pool, config_for("margin:max")).rank_order, "c"));
    double min_gap = margin_objective(
        rel, indices_of(select(pool, config_for("margin:min")).rank_order, "c"));
    CHECK(max_gap >= min_gap);
  }
}

TEST_CASE("selection guards sizes, catalog membership, and inputs") {
  CandidatePool small = rel_pool(3, 1);
  CHECK_THROWS_WITH_AS(select(small, config_for("quality:high")),
                       doctest::Contains("has 3 candidates, need k_rank=4"), Error);

  CandidatePool pool = rel_pool(6, 2);
  SelectionConfig tiny = config_for("quality:high");
  tiny.k_rank = 1;
  CHECK_THROWS_WITH_AS(
      select(pool, tiny),
      doctest::Contains("k_rank >= 2, k_pos/k_neg >= 1"), Error);

  CHECK_THROWS_WITH_AS(select(pool, config_for("spurious:max_extract_gap")),
                       doctest::Contains("not in catalog for relevance pools"),
                       Error);

  CandidatePool faith = faith_pool(4, 4, 3);
  CHECK_THROWS_WITH_AS(select(faith, config_for("quality:extreme")),
                       doctest::Contains("not in catalog for faithfulness pools"),
                       Error);
  CHECK_THROWS_WITH_AS(
      select(faith, config_for("likelihood:top_beam")),
      doctest::Contains("requires beam_rank (diverse-beam relevance pools only)"),
      Error);

  CandidatePool starved = faith_pool(1, 4, 4);
  CHECK_THROWS_WITH_AS(select(starved, config_for("margin:max")),
                       doctest::Contains("has 1 positive candidates, need k_pos=2"),
                       Error);

  CandidatePool no_agg = rel_pool(6, 5);
  no_agg.candidates[2].scores.rel_agg.reset();
  CHECK_THROWS_WITH_AS(select(no_agg, config_for("margin:max")),
                       doctest::Contains("requires rel_agg on candidate 'c02'"),
                       Error);

  CandidatePool no_faith = rel_pool(6, 6);
  no_faith.candidates[1].scores.faith_agg.reset();
  CHECK_THROWS_WITH_AS(select(no_faith, config_for("hybrid_corr")),
                       doctest::Contains("requires faith_agg on candidate 'c01'"),
                       Error);
}
