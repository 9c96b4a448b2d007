#pragma once

// Quality metrics and score normalization.
//
// Lexical metrics (ROUGE, extractive fragments, alignment) run on tokens
// produced by rouge_tokens: NFC + lowercase + whitespace split + per-token
// punctuation strip, no stemming. Precision/recall/F1 are computed as single
// divisions of integer counts (F1 = 2m / (h + r)), so results are exactly
// the correctly rounded rationals and can be tested with zero tolerance.

#include <string>
#include <utility>
#include <vector>

#include "calset/clients.hpp"
#include "calset/core.hpp"

namespace calset {

// Tokenizer behind every lexical metric in this header.
std::vector<std::string> rouge_tokens(const std::string& text);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// N-gram overlap with clipped counts. Zero matches (including empty or
// too-short inputs) give all-zero scores.
RougeScore rouge_n(const std::string& hypothesis, const std::string& reference, int n);
RougeScore rouge_n_tokens(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref, int n);

// Longest-common-subsequence variant, same F1 convention.
RougeScore rouge_l(const std::string& hypothesis, const std::string& reference);

// Greedy shared-sequence decomposition of the summary against the source.
// fragments are (summary token start, length) runs; coverage sums fragment
// lengths over summary length, density sums squared lengths.
struct FragmentSet {
  std::vector<std::pair<int, int>> fragments;
  double coverage = 0.0;  // [0, 1]
  double density = 0.0;   // >= 0
};

FragmentSet extractive_fragments(const std::string& source, const std::string& summary);

// Greedy source-sentence alignment for one summary sentence: repeatedly add
// the sentence with the largest gain in unigram recall of the concatenation
// against the summary sentence. Always returns at least one index (ties by
// lowest index); stops when gain <= 0 or max_k reached. Indices are in pick
// order.
std::vector<int> greedy_align(const std::string& summary_sentence,
                              const std::vector<std::string>& source_sentences,
                              int max_k = 5);

const std::vector<std::string>& default_abbreviations();

// Sentence splitting: boundary at . ? ! followed by whitespace and an
// uppercase letter or digit, unless the preceding word is a known
// abbreviation.
std::vector<std::string> split_sentences(const std::string& text,
                                         const std::vector<std::string>& abbreviations =
                                             default_abbreviations());

// Mean supported-probability over summary sentences, each judged against its
// greedily aligned source sentences (premise = aligned sentences in document
// order). Scores come from the entailment_supported service kind.
double fact_score(const std::string& summary,
                  const std::vector<std::string>& source_sentences,
                  const ServiceClient& client, int max_k = 5);

// Mean of token log-probabilities; input non-empty, all <= 0.
double avg_token_loglik(const std::vector<double>& token_logprobs);

// (raw - mean) / stddev.
double normalize(double raw, const MetricStats& stats);

// Population mean/stddev per metric over the rows where it is present.
// Metrics absent everywhere are skipped; a zero-variance metric is an error.
NormalizationStats fit_normalization(const std::vector<ScoreVector>& rows,
                                     const std::string& provenance);

enum class AggregateKind { rel, faith };

// Weights for the two three-member aggregates. Each triple must be
// non-negative and sum to 1.
struct AggregateWeights {
  double rouge1 = 1.0 / 3.0;
  double rouge2 = 1.0 / 3.0;
  double bertscore_ref = 1.0 / 3.0;
  double factscore = 1.0 / 3.0;
  double bartscore = 1.0 / 3.0;
  double bertscore_src = 1.0 / 3.0;

  void validate() const;
};

// Weighted mean of z-normalized member metrics. A missing member metric or
// missing stats entry is an error naming the metric.
double aggregate(const ScoreVector& scores, const NormalizationStats& stats,
                 const AggregateWeights& weights, AggregateKind kind);

// Names of the member metrics per aggregate, in weight order.
const std::vector<std::string>& aggregate_members(AggregateKind kind);

}  // namespace calset
