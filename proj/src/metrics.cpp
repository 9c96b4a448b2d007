// Lexical metric implementations and normalization.

#include "calset/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

namespace calset {

namespace {

bool is_strip_punct(char ch) {
  static const std::string punct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
  return punct.find(ch) != std::string::npos;
}

// Joins an n-gram into a single hash key; tokens cannot contain the
// separator (it is not whitespace, but tokens are produced by our own
// tokenizer from whitespace splits, so an embedded \x1F would stay inside a
// token; still unambiguous because both sides use the same join).
std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start, int n) {
  std::string key;
  for (int k = 0; k < n; ++k) {
    if (k > 0) key.push_back('\x1F');
    key += tokens[start + k];
  }
  return key;
}

std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens,
                                                  int n) {
  std::unordered_map<std::string, int> counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[ngram_key(tokens, i, n)];
  }
  return counts;
}

RougeScore from_counts(long long matches, long long hyp_total, long long ref_total) {
  RougeScore s;
  if (matches == 0) return s;
  s.precision = static_cast<double>(matches) / static_cast<double>(hyp_total);
  s.recall = static_cast<double>(matches) / static_cast<double>(ref_total);
  s.f1 = 2.0 * static_cast<double>(matches) /
         static_cast<double>(hyp_total + ref_total);
  return s;
}

}  // namespace

std::vector<std::string> rouge_tokens(const std::string& text) {
  std::vector<std::string> raw = tokenize(text);
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (auto& tok : raw) {
    std::size_t begin = 0;
    std::size_t end = tok.size();
    while (begin < end && is_strip_punct(tok[begin])) ++begin;
    while (end > begin && is_strip_punct(tok[end - 1])) --end;
    if (end > begin) out.push_back(tok.substr(begin, end - begin));
  }
  return out;
}

RougeScore rouge_n_tokens(const std::vector<std::string>& hyp,
                          const std::vector<std::string>& ref, int n) {
  if (n < 1) throw Error("rouge_n: n must be >= 1");
  auto hyp_counts = ngram_counts(hyp, n);
  auto ref_counts = ngram_counts(ref, n);
  long long matches = 0, hyp_total = 0, ref_total = 0;
  for (const auto& [key, cnt] : hyp_counts) {
    hyp_total += cnt;
    auto it = ref_counts.find(key);
    if (it != ref_counts.end()) matches += std::min(cnt, it->second);
  }
  for (const auto& [key, cnt] : ref_counts) ref_total += cnt;
  return from_counts(matches, hyp_total, ref_total);
}

RougeScore rouge_n(const std::string& hypothesis, const std::string& reference, int n) {
  return rouge_n_tokens(rouge_tokens(hypothesis), rouge_tokens(reference), n);
}

RougeScore rouge_l(const std::string& hypothesis, const std::string& reference) {
  std::vector<std::string> hyp = rouge_tokens(hypothesis);
  std::vector<std::string> ref = rouge_tokens(reference);
  if (hyp.empty() || ref.empty()) return {};
  // Classic O(n m) LCS table, rolling rows.
  std::vector<long long> prev(ref.size() + 1, 0), curr(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      if (hyp[i - 1] == ref[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    std::swap(prev, curr);
  }
  return from_counts(prev[ref.size()], static_cast<long long>(hyp.size()),
                     static_cast<long long>(ref.size()));
}

FragmentSet extractive_fragments(const std::string& source, const std::string& summary) {
  std::vector<std::string> src = rouge_tokens(source);
  std::vector<std::string> sum = rouge_tokens(summary);
  FragmentSet fs;
  if (sum.empty()) return fs;

  long long total_len = 0, total_sq = 0;
  std::size_t i = 0;
  while (i < sum.size()) {
    std::size_t best = 0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      if (src[j] != sum[i]) continue;
      std::size_t len = 0;
      while (i + len < sum.size() && j + len < src.size() &&
             src[j + len] == sum[i + len]) {
        ++len;
      }
      best = std::max(best, len);
    }
    if (best > 0) {
      fs.fragments.emplace_back(static_cast<int>(i), static_cast<int>(best));
      total_len += static_cast<long long>(best);
      total_sq += static_cast<long long>(best) * static_cast<long long>(best);
      i += best;
    } else {
      i += 1;
    }
  }
  fs.coverage = static_cast<double>(total_len) / static_cast<double>(sum.size());
  fs.density = static_cast<double>(total_sq) / static_cast<double>(sum.size());
  return fs;
}

std::vector<int> greedy_align(const std::string& summary_sentence,
                              const std::vector<std::string>& source_sentences,
                              int max_k) {
  if (source_sentences.empty()) throw Error("greedy_align: no source sentences");
  if (max_k < 1) throw Error("greedy_align: max_k must be >= 1");
  std::vector<std::string> ref = rouge_tokens(summary_sentence);
  std::vector<std::vector<std::string>> sent_tokens;
  sent_tokens.reserve(source_sentences.size());
  for (const auto& s : source_sentences) sent_tokens.push_back(rouge_tokens(s));

  std::vector<int> picked;
  std::vector<bool> used(source_sentences.size(), false);
  std::vector<std::string> concat;
  double current = 0.0;
  while (static_cast<int>(picked.size()) < max_k) {
    int best_idx = -1;
    double best_recall = -1.0;
    for (std::size_t j = 0; j < sent_tokens.size(); ++j) {
      if (used[j]) continue;
      std::vector<std::string> trial = concat;
      trial.insert(trial.end(), sent_tokens[j].begin(), sent_tokens[j].end());
      double recall = rouge_n_tokens(trial, ref, 1).recall;
      if (recall > best_recall) {
        best_recall = recall;
        best_idx = static_cast<int>(j);
      }
    }
    if (best_idx < 0) break;
    double gain = best_recall - current;
    if (!picked.empty() && gain <= 0.0) break;
    picked.push_back(best_idx);
    used[best_idx] = true;
    concat.insert(concat.end(), sent_tokens[best_idx].begin(),
                  sent_tokens[best_idx].end());
    current = best_recall;
  }
  return picked;
}

const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> abbrevs = {
      "e.g", "i.e", "cf", "vs", "al", "fig", "dr", "mr", "ms", "etc", "no",
  };
  return abbrevs;
}

std::vector<std::string> split_sentences(const std::string& text,
                                         const std::vector<std::string>& abbreviations) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (ch != '.' && ch != '?' && ch != '!') continue;
    // Require whitespace then an uppercase letter or digit.
    std::size_t j = i + 1;
    if (j >= text.size() || !std::isspace(static_cast<unsigned char>(text[j]))) continue;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j >= text.size()) continue;
    unsigned char next = static_cast<unsigned char>(text[j]);
    if (!std::isupper(next) && !std::isdigit(next)) continue;
    if (ch == '.') {
      // Word before the period, lowercased, dots inside kept ("e.g").
      std::size_t w = i;
      while (w > start && !std::isspace(static_cast<unsigned char>(text[w - 1]))) --w;
      std::string word = lowercase(text.substr(w, i - w));
      if (std::find(abbreviations.begin(), abbreviations.end(), word) !=
          abbreviations.end()) {
        continue;
      }
    }
    std::string sentence = normalize_ws(text.substr(start, i + 1 - start));
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
    start = j;
    i = j - 1;
  }
  std::string tail = normalize_ws(text.substr(start));
  if (!tail.empty()) sentences.push_back(std::move(tail));
  if (sentences.empty()) throw Error("split_sentences: no sentences in text");
  return sentences;
}

double fact_score(const std::string& summary,
                  const std::vector<std::string>& source_sentences,
                  const ServiceClient& client, int max_k) {
  std::vector<std::string> sentences = split_sentences(summary);
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(sentences.size());
  for (const auto& sentence : sentences) {
    std::vector<int> aligned = greedy_align(sentence, source_sentences, max_k);
    std::sort(aligned.begin(), aligned.end());  // premise in document order
    std::string premise;
    for (int idx : aligned) {
      if (!premise.empty()) premise += " ";
      premise += source_sentences[idx];
    }
    pairs.emplace_back(std::move(premise), sentence);
  }
  std::vector<double> scores = client.score_pairs(ScoreKind::entailment_supported, pairs);
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

double avg_token_loglik(const std::vector<double>& token_logprobs) {
  if (token_logprobs.empty()) throw Error("avg_token_loglik: empty input");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (lp > 0.0) throw Error("avg_token_loglik: log-probabilities must be <= 0");
    sum += lp;
  }
  return sum / static_cast<double>(token_logprobs.size());
}

double normalize(double raw, const MetricStats& stats) {
  if (stats.stddev <= 0.0) throw Error("normalize: stddev must be > 0");
  return (raw - stats.mean) / stats.stddev;
}

NormalizationStats fit_normalization(const std::vector<ScoreVector>& rows,
                                     const std::string& provenance) {
  if (rows.empty()) throw Error("fit_normalization: no rows");
  NormalizationStats stats;
  stats.provenance = provenance;

  auto field = [](const ScoreVector& sv, const std::string& name)
      -> const std::optional<double>* {
    if (name == "rouge1_f1") return &sv.rouge1_f1;
    if (name == "rouge2_f1") return &sv.rouge2_f1;
    if (name == "rougeL_f1") return &sv.rougeL_f1;
    if (name == "bertscore_ref") return &sv.bertscore_ref;
    if (name == "bertscore_src") return &sv.bertscore_src;
    if (name == "bartscore") return &sv.bartscore;
    if (name == "factscore") return &sv.factscore;
    if (name == "extractive_density") return &sv.extractive_density;
    if (name == "extractive_coverage") return &sv.extractive_coverage;
    return nullptr;
  };

  static const std::vector<std::string> metric_names = {
      "rouge1_f1", "rouge2_f1", "rougeL_f1", "bertscore_ref", "bertscore_src",
      "bartscore", "factscore", "extractive_density", "extractive_coverage",
  };
  for (const auto& name : metric_names) {
    std::vector<double> values;
    for (const auto& row : rows) {
      const auto* v = field(row, name);
      if (v && v->has_value()) values.push_back(**v);
    }
    if (values.empty()) continue;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());  // population variance
    if (var <= 0.0) {
      throw Error("fit_normalization: metric '" + name + "' has zero variance");
    }
    stats.per_metric[name] = MetricStats{mean, std::sqrt(var)};
  }
  if (stats.per_metric.empty()) {
    throw Error("fit_normalization: no metrics present in rows");
  }
  return stats;
}

void AggregateWeights::validate() const {
  auto check_triple = [](double a, double b, double c, const char* which) {
    if (a < 0.0 || b < 0.0 || c < 0.0) {
      throw Error(std::string("aggregate weights for ") + which + " must be >= 0");
    }
    if (std::abs(a + b + c - 1.0) > 1e-9) {
      throw Error(std::string("aggregate weights for ") + which + " must sum to 1");
    }
  };
  check_triple(rouge1, rouge2, bertscore_ref, "rel_agg");
  check_triple(factscore, bartscore, bertscore_src, "faith_agg");
}

const std::vector<std::string>& aggregate_members(AggregateKind kind) {
  static const std::vector<std::string> rel = {"rouge1_f1", "rouge2_f1",
                                               "bertscore_ref"};
  static const std::vector<std::string> faith = {"factscore", "bartscore",
                                                 "bertscore_src"};
  return kind == AggregateKind::rel ? rel : faith;
}

double aggregate(const ScoreVector& scores, const NormalizationStats& stats,
                 const AggregateWeights& weights, AggregateKind kind) {
  weights.validate();
  struct Member {
    const std::optional<double>* value;
    double weight;
    const char* name;
  };
  std::vector<Member> members;
  if (kind == AggregateKind::rel) {
    members = {{&scores.rouge1_f1, weights.rouge1, "rouge1_f1"},
               {&scores.rouge2_f1, weights.rouge2, "rouge2_f1"},
               {&scores.bertscore_ref, weights.bertscore_ref, "bertscore_ref"}};
  } else {
    members = {{&scores.factscore, weights.factscore, "factscore"},
               {&scores.bartscore, weights.bartscore, "bartscore"},
               {&scores.bertscore_src, weights.bertscore_src, "bertscore_src"}};
  }
  double acc = 0.0;
  for (const auto& m : members) {
    if (!m.value->has_value()) {
      throw Error("aggregate: missing metric '" + std::string(m.name) + "'");
    }
    acc += m.weight * normalize(**m.value, stats.require(m.name));
  }
  return acc;
}

}  // namespace calset
