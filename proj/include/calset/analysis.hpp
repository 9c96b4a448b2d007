#pragma once

// Set statistics and batch correlation: the read-only instruments used to
// compare selection strategies before any training run.

#include <optional>
#include <string>
#include <vector>

#include "calset/core.hpp"

namespace calset {

// Sentence BLEU of `candidate` against one reference: n-grams 1..4, add-one
// smoothing on every precision, brevity penalty. Empty candidate scores 0.
double sentence_bleu(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference);

// b[i][j] = BLEU(texts[i] against texts[j]), diagonal 0. Tokenization
// matches the lexical metrics.
std::vector<std::vector<double>> bleu_matrix(const std::vector<std::string>& texts);

// Mean over all ordered pairs (i, j), i != j, of BLEU(texts[i] | texts[j]).
// Needs >= 2 texts. Identical texts give exactly 1.
double self_bleu(const std::vector<std::string>& texts);

// Mean adjacent difference of the descending-sorted values:
// (max - min) / (k - 1). Needs >= 2 values.
double margin_gap(const std::vector<double>& values);

// mean(positive mean log-likelihoods) - mean(negative mean log-likelihoods).
double likelihood_gap(const std::vector<double>& positive_means,
                      const std::vector<double>& negative_means);

struct CorrelationResult {
  double value = 0.0;
  bool degenerate = false;  // a rank vector was constant
};

// Pearson on average ranks (ties averaged). Constant input on either side
// is degenerate: value 0, flag set.
CorrelationResult spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Pearson correlation; constant input is an error.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Average ranks (1-based) of values in descending order; ties share the
// mean of the positions they span.
std::vector<double> descending_ranks(const std::vector<double>& values);

// -spearman(beam ranks, descending ranks of the aggregates): +1 when beam
// order and metric order are fully reversed, -1 when they agree.
double precalibration_score(const std::vector<int>& beam_ranks,
                            const std::vector<double>& rel_aggs);

// Statistics of one selected set against its pool. Relevance sets report
// precalibration_score and leave likelihood_gap empty; faithfulness sets do
// the reverse (likelihood_gap only when every member carries token
// log-probabilities or a bartscore standing in for their mean). Faithfulness
// margin_gap is the positive-minus-negative mean aggregate delta;
// faithfulness inverse self-BLEU averages the two within-half values.
SetStatistics set_statistics(const SelectedSet& set, const CandidatePool& pool);

// One strategy run summarized for correlation: per-statistic means across
// examples plus the downstream outcome delta it produced.
struct RunRow {
  std::string label;
  std::map<std::string, double> stat_means;
  double downstream_delta = 0.0;
};

struct StatCorrelation {
  std::string stat;
  double r = 0.0;
  bool degenerate = false;  // constant column, correlation omitted
};

struct CorrelateReport {
  std::vector<StatCorrelation> correlations;
  std::string table_text;  // aligned text table, one row per statistic
};

// Pearson correlation of each statistic column against the downstream
// delta column. Constant columns are flagged and skipped. Needs >= 3 rows.
CorrelateReport correlate_runs(const std::vector<RunRow>& rows);

}  // namespace calset
