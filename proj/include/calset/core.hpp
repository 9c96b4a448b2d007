#pragma once

// Core value types and line-oriented JSON I/O shared by every stage of the
// calibration-set toolkit: annotated examples, candidate pools, score
// vectors, normalization stats, selected sets, and set statistics.
//
// Conventions that everything downstream relies on:
//   * log-probabilities are natural log, always <= 0
//   * token counts come from whitespace tokenization after NFC + lowercasing
//   * stored text is never rewritten by normalization; only derived counts
//     and dedup keys use the normalized form

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace calset {

using json = nlohmann::json;

// Every validation or I/O failure raises this; the message carries file and
// line context where one exists.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// text utilities (implemented in text.cpp)

// Canonical composition for the Latin combining sequences that show up in
// scientific corpora (base letter + U+0300..U+0327 marks). Sequences outside
// the table pass through unchanged, as do invalid UTF-8 bytes.
std::string nfc(const std::string& text);

// ASCII + Latin-1 lowercasing; other codepoints unchanged.
std::string lowercase(const std::string& text);

// Whitespace runs collapsed to single spaces, ends trimmed.
std::string normalize_ws(const std::string& text);

// NFC + lowercase + whitespace split. The tokenizer behind n_tokens and all
// length accounting.
std::vector<std::string> tokenize(const std::string& text);

// Dedup key for candidate texts: exact text post NFC, case preserved.
std::string dedup_key(const std::string& text);

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(const std::string& data);

// Seed derivation from labeled parts, e.g. seed_from({id, "mask", "low", "3"}).
std::uint64_t seed_from(const std::vector<std::string>& parts);

// Deterministic RNG wrapper. All randomness in the library flows through
// this so that artifacts are reproducible bit-for-bit for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, n); rejection sampled, portable across stdlibs.
  std::uint64_t bounded(std::uint64_t n);
  // Uniform in [0, 1) with 53 bits.
  double unit();
  // Standard normal via Box-Muller; spare cached.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// annotated examples

enum class SpanTarget { reference, source };

struct Span {
  int start = 0;  // byte offset, half-open [start, end)
  int end = 0;
  std::string surface;  // must equal text.substr(start, end - start)
  std::string semantic_type;
  SpanTarget target = SpanTarget::reference;

  bool operator==(const Span&) const = default;
};

struct AnnotationSet {
  std::vector<Span> entities;
  std::vector<Span> numbers;
  std::vector<Span> noun_phrases;

  bool operator==(const AnnotationSet&) const = default;
};

struct Example {
  std::string example_id;
  std::string source_text;
  std::vector<std::string> source_sentences;
  std::string reference_text;
  AnnotationSet annotations;

  bool operator==(const Example&) const = default;
};

// ---------------------------------------------------------------------------
// candidates and pools

enum class Method {
  mask_and_fill,
  swap_intrinsic,
  swap_extrinsic,
  paraphrase,
  reference,
  diverse_beam,
};

enum class Polarity { positive, negative, unassigned };

enum class PoolKind { faithfulness, relevance };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);
std::string to_string(PoolKind k);
PoolKind pool_kind_from_string(const std::string& s);

// Polarity is fixed by construction method; diverse-beam candidates stay
// unassigned until a strategy partitions them.
Polarity expected_polarity(Method m);

// Per-candidate quality measurements. Optional fields stay empty until the
// scoring stage fills them; n_tokens is always derivable from text.
struct ScoreVector {
  std::optional<double> rouge1_f1;
  std::optional<double> rouge2_f1;
  std::optional<double> rougeL_f1;
  std::optional<double> bertscore_ref;
  std::optional<double> bertscore_src;
  std::optional<double> bartscore;   // <= 0, mean token log-likelihood
  std::optional<double> factscore;   // [0, 1]
  std::optional<double> rel_agg;
  std::optional<double> faith_agg;
  std::optional<double> extractive_density;   // >= 0
  std::optional<double> extractive_coverage;  // [0, 1]
  int n_tokens = 0;

  bool operator==(const ScoreVector&) const = default;
};

struct Candidate {
  std::string candidate_id;
  std::string example_id;
  Method method = Method::reference;
  json method_params = json::object();  // m, s, t, p, generator, ...
  Polarity polarity_hint = Polarity::unassigned;
  std::optional<int> beam_rank;  // present iff method == diverse_beam
  std::string text;
  std::optional<std::vector<double>> token_logprobs;  // natural log, <= 0
  ScoreVector scores;

  bool operator==(const Candidate&) const = default;
};

struct CandidatePool {
  Example example;
  PoolKind pool_kind = PoolKind::faithfulness;
  std::vector<Candidate> candidates;

  bool operator==(const CandidatePool&) const = default;

  const Candidate* find(const std::string& candidate_id) const;
};

// ---------------------------------------------------------------------------
// normalization stats, selected sets, set statistics

struct MetricStats {
  double mean = 0.0;
  double stddev = 1.0;  // must be > 0 to normalize

  bool operator==(const MetricStats&) const = default;
};

struct NormalizationStats {
  std::map<std::string, MetricStats> per_metric;
  std::string provenance;  // which frozen checkpoint produced the stats

  bool operator==(const NormalizationStats&) const = default;

  const MetricStats& require(const std::string& metric) const;
};

// Output of selection. Relevance sets carry a rank order (best first);
// faithfulness sets carry disjoint positive/negative halves.
struct SelectedSet {
  std::string example_id;
  std::string strategy;  // family, e.g. "margin"
  std::string mode;      // e.g. "max"; empty for single-mode families
  PoolKind kind = PoolKind::relevance;
  std::vector<std::string> rank_order;  // relevance only, descending quality
  std::vector<std::string> positives;   // faithfulness only
  std::vector<std::string> negatives;   // faithfulness only
  int k_rank = 0;
  int k_pos = 0;
  int k_neg = 0;

  bool operator==(const SelectedSet&) const = default;
};

struct SetStatistics {
  double mean_quality = 0.0;
  double margin_gap = 0.0;
  double inverse_self_bleu = 0.0;
  std::optional<double> likelihood_gap;      // faithfulness sets only
  double mean_length_tokens = 0.0;
  double mean_extractive_density = 0.0;
  std::optional<double> precalibration_score;  // relevance sets only

  bool operator==(const SetStatistics&) const = default;
};

// ---------------------------------------------------------------------------
// line-oriented JSON I/O (core_io.cpp)
//
// Every reader validates invariants and reports failures with file + line
// context. Every writer is atomic: temp file in the target directory, then
// rename.

std::vector<Example> load_examples(const std::string& path,
                                   const std::vector<std::string>& semantic_types = {});
void write_examples(const std::vector<Example>& examples, const std::string& path);

std::map<std::string, Example> index_examples(const std::vector<Example>& examples);

struct PoolLoadResult {
  std::vector<CandidatePool> pools;       // ordered by example_id
  std::size_t duplicates_dropped = 0;     // exact-text dups removed on load
};

PoolLoadResult load_pool(const std::string& path, PoolKind kind,
                         const std::map<std::string, Example>& examples);
void write_pool(const std::vector<CandidatePool>& pools, const std::string& path);

std::size_t write_selected(const std::vector<SelectedSet>& sets, const std::string& path);
std::vector<SelectedSet> load_selected(const std::string& path);

NormalizationStats load_stats(const std::string& path);
void write_stats(const NormalizationStats& stats, const std::string& path);

// Scores cache: one {"candidate_id", "scores": {...}} per line.
std::map<std::string, ScoreVector> load_scores(const std::string& path);
void write_scores(const std::map<std::string, ScoreVector>& scores, const std::string& path);

// Latent vectors: one {"candidate_id", "h": [...]} per line.
std::map<std::string, std::vector<double>> load_latents(const std::string& path);
void write_latents(const std::map<std::string, std::vector<double>>& latents,
                   const std::string& path);

json score_vector_to_json(const ScoreVector& sv);
ScoreVector score_vector_from_json(const json& j, const std::string& context);

Candidate candidate_from_json(const json& j, const std::string& context);
json candidate_to_json(const Candidate& c);

// Atomic text write used by every artifact writer.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

void log_warn(const std::string& message);

}  // namespace calset
