#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "calset/analysis.hpp"
#include "calset/metrics.hpp"

using namespace calset;

namespace {

std::vector<std::string> toks(const std::string& text) { return rouge_tokens(text); }

std::vector<std::string> random_texts(Rng& rng, std::size_t count) {
  const std::vector<std::string> vocab = {"red",  "green", "blue",  "cyan",
                                          "teal", "plum",  "amber", "jade"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < count; ++i) {
    int len = 3 + static_cast<int>(rng.bounded(6));
    std::string t;
    for (int w = 0; w < len; ++w) {
      t += (t.empty() ? "" : " ") + vocab[rng.bounded(vocab.size())];
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("sentence BLEU rewards shared n-grams and penalizes brevity") {
  // Identical token lists: every smoothed precision is exactly 1.
  CHECK(sentence_bleu(toks("the cat sat down"), toks("the cat sat down")) == 1.0);
  // One differing tail token: precisions 4/5, 3/4, 2/3, 1/2.
  CHECK(sentence_bleu(toks("a b c d"), toks("a b c e")) ==
        doctest::Approx(std::pow(0.2, 0.25)).epsilon(1e-12));
  CHECK(sentence_bleu({}, toks("a b")) == 0.0);
  // Short candidate takes the brevity penalty exp(1 - r/c).
  double clipped = sentence_bleu(toks("a b"), toks("a b c d"));
  double full = sentence_bleu(toks("a b c d"), toks("a b c d"));
  CHECK(clipped < full);
  CHECK(clipped ==
        doctest::Approx(std::exp(1.0 - 2.0) *
                        std::pow((3.0 / 3.0) * (2.0 / 2.0) * (1.0 / 1.0) *
                                     (1.0 / 1.0),
                                 0.25))
            .epsilon(1e-12));
}

TEST_CASE("the BLEU matrix is zero on the diagonal and pairwise complete") {
  std::vector<std::string> texts = {"a b c d", "a b c e", "x y z w"};
  auto b = bleu_matrix(texts);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(b[i][i] == 0.0);
  CHECK(b[0][1] == doctest::Approx(std::pow(0.2, 0.25)).epsilon(1e-12));
  CHECK(b[0][1] == b[1][0]);  // equal lengths, symmetric counts
  CHECK(b[0][2] < b[0][1]);   // disjoint vocabulary scores lower
}

TEST_CASE("self BLEU averages ordered-pair sentence BLEU") {
  CHECK(self_bleu({"a b c d", "a b c e"}) ==
        doctest::Approx(std::pow(0.2, 0.25)).epsilon(1e-12));
  CHECK(self_bleu({"same words here", "same words here"}) == 1.0);
  CHECK(self_bleu({"one two three", "one two three", "one two three"}) == 1.0);
  CHECK_THROWS_WITH_AS(self_bleu({"lonely"}),
                       doctest::Contains("needs at least 2 texts"), Error);

  SUBCASE("permutation invariance") {
    Rng rng(20250822);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::string> texts = random_texts(rng, 3 + rng.bounded(4));
      double base = self_bleu(texts);
      std::vector<std::string> shuffled = texts;
      for (std::size_t i = shuffled.size(); i > 1; --i) {
        std::swap(shuffled[i - 1], shuffled[rng.bounded(i)]);
      }
      CHECK(self_bleu(shuffled) == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("margin gap is the span divided by the rank count") {
  CHECK(margin_gap({1.0, 0.4, 0.3, 0.1}) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(margin_gap({2.0, 2.0}) == 0.0);
  CHECK(margin_gap({-1.0, 1.0}) == 2.0);
  CHECK_THROWS_WITH_AS(margin_gap({1.0}),
                       doctest::Contains("needs at least 2 values"), Error);

  SUBCASE("equals the mean adjacent difference of the sorted values") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> values;
      int n = 2 + static_cast<int>(rng.bounded(8));
      for (int i = 0; i < n; ++i) values.push_back(rng.unit() * 10.0 - 5.0);
      std::vector<double> sorted = values;
      std::sort(sorted.rbegin(), sorted.rend());
      double mean_adjacent = 0.0;
      for (std::size_t i = 1; i < sorted.size(); ++i) {
        mean_adjacent += sorted[i - 1] - sorted[i];
      }
      mean_adjacent /= static_cast<double>(sorted.size() - 1);
      CHECK(margin_gap(values) ==
            doctest::Approx(mean_adjacent).epsilon(1e-12));
    }
  }
}

TEST_CASE("likelihood gap subtracts the negative-half mean") {
  CHECK(likelihood_gap({-0.2, -0.4}, {-1.0, -2.0}) ==
        doctest::Approx(1.2).epsilon(1e-12));
  CHECK(likelihood_gap({-1.0}, {-1.0}) == 0.0);
  CHECK_THROWS_WITH_AS(likelihood_gap({}, {-1.0}),
                       doctest::Contains("both sides must be non-empty"), Error);
  CHECK_THROWS_WITH_AS(likelihood_gap({-1.0}, {}),
                       doctest::Contains("both sides must be non-empty"), Error);
}

TEST_CASE("rank correlation handles ties and flags constant input") {
  CHECK(spearman({1.0, 2.0, 3.0}, {1.0, 3.0, 2.0}).value ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(spearman({1.0, 2.0, 3.0}, {10.0, 20.0, 30.0}).value ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}).value ==
        doctest::Approx(-1.0).epsilon(1e-12));
  // Tied pair takes the average rank 2.5: r = sqrt(0.9).
  CHECK(spearman({1.0, 2.0, 2.0, 3.0}, {1.0, 2.0, 3.0, 4.0}).value ==
        doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));

  CorrelationResult flat = spearman({5.0, 5.0, 5.0}, {1.0, 2.0, 3.0});
  CHECK(flat.degenerate);
  CHECK(flat.value == 0.0);

  CHECK_THROWS_WITH_AS(spearman({1.0}, {1.0, 2.0}),
                       doctest::Contains("length mismatch"), Error);
  CHECK_THROWS_WITH_AS(spearman({1.0}, {2.0}),
                       doctest::Contains("needs at least 2 points"), Error);

  SUBCASE("strictly monotone transforms never change the result") {
    Rng rng(13);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> xs, ys;
      int n = 4 + static_cast<int>(rng.bounded(6));
      for (int i = 0; i < n; ++i) {
        xs.push_back(rng.unit() * 4.0 - 2.0);
        ys.push_back(rng.unit() * 4.0 - 2.0);
      }
      CorrelationResult base = spearman(xs, ys);
      std::vector<double> ex = xs, ay = ys;
      for (auto& v : ex) v = std::exp(v);          // strictly increasing
      for (auto& v : ay) v = 3.0 * v - 11.0;       // strictly increasing
      CorrelationResult mapped = spearman(ex, ay);
      CHECK(mapped.degenerate == base.degenerate);
      CHECK(mapped.value == base.value);  // identical ranks, identical arithmetic
    }
  }
}

TEST_CASE("descending ranks average tied positions") {
  CHECK(descending_ranks({0.9, 0.5, 0.7, 0.1}) ==
        std::vector<double>{1.0, 3.0, 2.0, 4.0});
  CHECK(descending_ranks({1.0, 1.0}) == std::vector<double>{1.5, 1.5});
  CHECK(descending_ranks({2.0, 3.0, 2.0, 1.0}) ==
        std::vector<double>{2.5, 1.0, 2.5, 4.0});
}

TEST_CASE("plain correlation rejects constant input instead of guessing") {
  CHECK(pearson({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pearson({1.0, 2.0, 3.0}, {-2.0, -4.0, -6.0}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(pearson({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}),
                       doctest::Contains("constant input has no correlation"),
                       Error);
  CHECK_THROWS_WITH_AS(pearson({1.0, 2.0}, {1.0}),
                       doctest::Contains("length mismatch"), Error);
}

TEST_CASE("precalibration reads +1 as fully miscalibrated beam order") {
  // Quality strictly falls with beam rank: calibrated, score -1.
  CHECK(precalibration_score({0, 1, 2, 3}, {0.9, 0.7, 0.5, 0.1}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  // Quality strictly rises with beam rank: inverted, score +1.
  CHECK(precalibration_score({0, 1, 2, 3}, {0.1, 0.5, 0.7, 0.9}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(precalibration_score({0, 1, 2, 3}, {0.9, 0.5, 0.7, 0.1}) ==
        doctest::Approx(-0.8).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(precalibration_score({0, 1}, {1.0}),
                       doctest::Contains("length mismatch"), Error);
  CHECK_THROWS_WITH_AS(precalibration_score({0}, {1.0}),
                       doctest::Contains("needs at least 2 candidates"), Error);

  SUBCASE("always lands in [-1, 1] and hits the endpoints on monotone input") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      int n = 3 + static_cast<int>(rng.bounded(6));
      std::vector<int> beams(n);
      std::vector<double> aggs;
      for (int i = 0; i < n; ++i) beams[i] = i;
      // Strictly decreasing aggregates with random gaps.
      double v = 5.0;
      for (int i = 0; i < n; ++i) {
        v -= 0.05 + rng.unit();
        aggs.push_back(v);
      }
      CHECK(precalibration_score(beams, aggs) ==
            doctest::Approx(-1.0).epsilon(1e-12));
      std::vector<double> reversed(aggs.rbegin(), aggs.rend());
      CHECK(precalibration_score(beams, reversed) ==
            doctest::Approx(1.0).epsilon(1e-12));
      std::vector<double> noisy;
      for (int i = 0; i < n; ++i) noisy.push_back(rng.unit());
      double score = precalibration_score(beams, noisy);
      CHECK(score >= -1.0 - 1e-12);
      CHECK(score <= 1.0 + 1e-12);
    }
  }
}

namespace {

CandidatePool stats_rel_pool() {
  CandidatePool pool;
  pool.pool_kind = PoolKind::relevance;
  pool.example.example_id = "ex";
  const std::vector<double> aggs = {0.8, 0.6, 0.4, 0.2};
  const std::vector<int> lens = {4, 6, 8, 10};
  const std::vector<std::string> texts = {
      "alpha beta gamma delta", "alpha beta epsilon zeta",
      "eta theta iota kappa", "lambda mu nu xi"};
  for (int i = 0; i < 4; ++i) {
    Candidate c;
    c.candidate_id = "r" + std::to_string(i);
    c.example_id = "ex";
    c.method = Method::diverse_beam;
    c.beam_rank = i;
    c.text = texts[i];
    c.scores.rel_agg = aggs[i];
    c.scores.n_tokens = lens[i];
    c.scores.extractive_density = 1.0 + i;
    pool.candidates.push_back(std::move(c));
  }
  return pool;
}

CandidatePool stats_faith_pool() {
  CandidatePool pool;
  pool.pool_kind = PoolKind::faithfulness;
  pool.example.example_id = "ex";
  auto add = [&](const std::string& id, Method m, double agg,
                 std::vector<double> lps, const std::string& text) {
    Candidate c;
    c.candidate_id = id;
    c.example_id = "ex";
    c.method = m;
    c.polarity_hint = expected_polarity(m);
    c.text = text;
    c.scores.faith_agg = agg;
    c.scores.n_tokens = 4;
    c.scores.extractive_density = 2.0;
    c.token_logprobs = std::move(lps);
    pool.candidates.push_back(std::move(c));
  };
  add("p0", Method::paraphrase, 0.9, {-0.2, -0.4}, "one two three four");
  add("p1", Method::paraphrase, 0.7, {-0.6}, "one two three five");
  add("n0", Method::swap_intrinsic, 0.2, {-1.0, -2.0}, "six seven eight nine");
  add("n1", Method::swap_intrinsic, 0.0, {-3.0}, "six seven eight ten");
  return pool;
}

SelectedSet rel_set() {
  SelectedSet set;
  set.example_id = "ex";
  set.strategy = "quality";
  set.mode = "high";
  set.kind = PoolKind::relevance;
  set.rank_order = {"r0", "r1", "r2", "r3"};
  set.k_rank = 4;
  return set;
}

SelectedSet faith_set() {
  SelectedSet set;
  set.example_id = "ex";
  set.strategy = "margin";
  set.mode = "max";
  set.kind = PoolKind::faithfulness;
  set.positives = {"p0", "p1"};
  set.negatives = {"n0", "n1"};
  set.k_pos = 2;
  set.k_neg = 2;
  return set;
}

}  // namespace

TEST_CASE("ranked-set statistics cover quality, spread, diversity, and order") {
  CandidatePool pool = stats_rel_pool();
  SetStatistics st = set_statistics(rel_set(), pool);
  CHECK(st.mean_quality == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(st.mean_length_tokens == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(st.mean_extractive_density == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(st.margin_gap == doctest::Approx(0.2).epsilon(1e-12));
  std::vector<std::string> texts;
  for (const auto& c : pool.candidates) texts.push_back(c.text);
  CHECK(st.inverse_self_bleu ==
        doctest::Approx(1.0 - self_bleu(texts)).epsilon(1e-12));
  // Aggregates strictly fall along beam order: fully calibrated.
  REQUIRE(st.precalibration_score.has_value());
  CHECK(*st.precalibration_score == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(!st.likelihood_gap.has_value());

  SUBCASE("a missing beam rank drops the order statistic only") {
    pool.candidates[2].beam_rank.reset();
    SetStatistics partial = set_statistics(rel_set(), pool);
    CHECK(!partial.precalibration_score.has_value());
    CHECK(partial.mean_quality == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("validation") {
    SelectedSet wrong = rel_set();
    wrong.example_id = "other";
    CHECK_THROWS_WITH_AS(set_statistics(wrong, pool),
                         doctest::Contains("different examples"), Error);
    SelectedSet ghost = rel_set();
    ghost.rank_order[1] = "zz";
    CHECK_THROWS_WITH_AS(set_statistics(ghost, pool),
                         doctest::Contains("candidate 'zz' not in pool"), Error);
    SelectedSet empty = rel_set();
    empty.rank_order.clear();
    CHECK_THROWS_WITH_AS(set_statistics(empty, pool),
                         doctest::Contains("empty selected set"), Error);
    pool.candidates[0].scores.rel_agg.reset();
    CHECK_THROWS_WITH_AS(set_statistics(rel_set(), pool),
                         doctest::Contains("missing aggregate score"), Error);
    pool.candidates[0].scores.rel_agg = 0.8;
    pool.candidates[3].scores.extractive_density.reset();
    CHECK_THROWS_WITH_AS(set_statistics(rel_set(), pool),
                         doctest::Contains("missing extractive_density"), Error);
  }
}

TEST_CASE("contrast-set statistics split across the two halves") {
  CandidatePool pool = stats_faith_pool();
  SetStatistics st = set_statistics(faith_set(), pool);
  CHECK(st.mean_quality == doctest::Approx(0.45).epsilon(1e-12));
  // Positive-half mean aggregate minus negative-half mean aggregate.
  CHECK(st.margin_gap == doctest::Approx(0.8 - 0.1).epsilon(1e-12));
  // Mean over the two within-half inverse self-BLEU values.
  double pos_inv = 1.0 - self_bleu({"one two three four", "one two three five"});
  double neg_inv = 1.0 - self_bleu({"six seven eight nine", "six seven eight ten"});
  CHECK(st.inverse_self_bleu ==
        doctest::Approx((pos_inv + neg_inv) / 2.0).epsilon(1e-12));
  // Mean token log-likelihoods: p (-0.3, -0.6), n (-1.5, -3.0).
  REQUIRE(st.likelihood_gap.has_value());
  CHECK(*st.likelihood_gap ==
        doctest::Approx((-0.45) - (-2.25)).epsilon(1e-12));
  CHECK(!st.precalibration_score.has_value());

  SUBCASE("bartscore substitutes for missing token log-probabilities") {
    pool.candidates[0].token_logprobs.reset();  // p0
    pool.candidates[0].scores.bartscore = -0.3;
    SetStatistics sub = set_statistics(faith_set(), pool);
    REQUIRE(sub.likelihood_gap.has_value());
    CHECK(*sub.likelihood_gap == doctest::Approx(2.25 - 0.45).epsilon(1e-12));

    pool.candidates[0].scores.bartscore.reset();
    SetStatistics missing = set_statistics(faith_set(), pool);
    CHECK(!missing.likelihood_gap.has_value());
    CHECK(missing.margin_gap == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("singleton halves contribute no diversity term") {
    SelectedSet narrow = faith_set();
    narrow.positives = {"p0"};
    narrow.negatives = {"n0"};
    narrow.k_pos = 1;
    narrow.k_neg = 1;
    SetStatistics single = set_statistics(narrow, pool);
    CHECK(single.inverse_self_bleu == 0.0);
    CHECK(single.margin_gap == doctest::Approx(0.9 - 0.2).epsilon(1e-12));
  }
}

TEST_CASE("the strategy comparison report correlates statistics with outcomes") {
  std::vector<RunRow> rows;
  for (int i = 0; i < 3; ++i) {
    RunRow row;
    row.label = "run" + std::to_string(i);
    row.stat_means["alpha"] = 1.0 + i;   // equals the delta column
    row.stat_means["beta"] = 5.0;        // constant, no correlation
    row.downstream_delta = 1.0 + i;
    rows.push_back(std::move(row));
  }
  CorrelateReport report = correlate_runs(rows);
  REQUIRE(report.correlations.size() == 2);
  CHECK(report.correlations[0].stat == "alpha");
  CHECK(report.correlations[0].r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(!report.correlations[0].degenerate);
  CHECK(report.correlations[1].stat == "beta");
  CHECK(report.correlations[1].degenerate);

  CHECK(report.table_text ==
        "statistic                     r        n\n"
        "alpha                         +1.0000    3\n"
        "beta                                -    3\n");

  SUBCASE("anticorrelated statistics carry a negative sign") {
    for (auto& row : rows) row.stat_means["gamma"] = -2.0 * row.downstream_delta;
    CorrelateReport signed_report = correlate_runs(rows);
    REQUIRE(signed_report.correlations.size() == 3);
    CHECK(signed_report.correlations[2].stat == "gamma");
    CHECK(signed_report.correlations[2].r ==
          doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("statistics present in fewer than 3 runs are reported without r") {
    rows[0].stat_means["sparse"] = 1.0;
    rows[1].stat_means["sparse"] = 2.0;
    CorrelateReport sparse = correlate_runs(rows);
    REQUIRE(sparse.correlations.size() == 3);
    CHECK(sparse.correlations[2].stat == "sparse");
    CHECK(sparse.correlations[2].degenerate);
    CHECK(sparse.table_text.find("sparse") != std::string::npos);
    CHECK(sparse.table_text.find("   2\n") != std::string::npos);
  }
  SUBCASE("noisy planted correlation is recovered with the right sign") {
    Rng rng(19);
    std::vector<RunRow> wide;
    for (int i = 0; i < 10; ++i) {
      RunRow row;
      row.label = "run" + std::to_string(i);
      row.downstream_delta = rng.unit() * 2.0 - 1.0;
      row.stat_means["signal"] =
          2.0 * row.downstream_delta + (rng.unit() - 0.5) * 0.1;
      wide.push_back(std::move(row));
    }
    CorrelateReport planted = correlate_runs(wide);
    REQUIRE(planted.correlations.size() == 1);
    CHECK(planted.correlations[0].r > 0.8);
  }
  SUBCASE("too few runs") {
    rows.resize(2);
    CHECK_THROWS_WITH_AS(correlate_runs(rows),
                         doctest::Contains("needs at least 3 runs"), Error);
  }
}
