// Line-oriented JSON readers/writers with invariant checks and atomic writes.

#include "calset/core.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace calset {

namespace {

namespace fs = std::filesystem;

std::string ctx(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

// Parses one JSONL line, rethrowing with file:line context.
json parse_line(const std::string& line, const std::string& path, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ctx(path, line_no) + ": parse error: " + e.what());
  }
}

double require_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw Error(where + ": missing or non-numeric field '" + key + "'");
  }
  return j[key].get<double>();
}

std::string require_string(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(where + ": missing or non-string field '" + key + "'");
  }
  return j[key].get<std::string>();
}

void check_unit_interval(double v, const std::string& name, const std::string& where) {
  if (v < 0.0 || v > 1.0) {
    throw Error(where + ": " + name + " out of [0,1]: " + std::to_string(v));
  }
}

Span span_from_json(const json& j, const std::string& where) {
  Span s;
  s.start = static_cast<int>(require_number(j, "start", where));
  s.end = static_cast<int>(require_number(j, "end", where));
  s.surface = require_string(j, "surface", where);
  s.semantic_type = j.value("type", std::string{});
  std::string target = j.value("target", std::string{"reference"});
  if (target == "reference") {
    s.target = SpanTarget::reference;
  } else if (target == "source") {
    s.target = SpanTarget::source;
  } else {
    throw Error(where + ": unknown span target '" + target + "'");
  }
  return s;
}

json span_to_json(const Span& s) {
  json j;
  j["start"] = s.start;
  j["end"] = s.end;
  j["surface"] = s.surface;
  j["type"] = s.semantic_type;
  j["target"] = s.target == SpanTarget::reference ? "reference" : "source";
  return j;
}

void validate_span_list(const std::vector<Span>& spans, const Example& ex,
                        const std::string& list_name,
                        const std::vector<std::string>& semantic_types,
                        const std::string& where) {
  for (const auto& s : spans) {
    const std::string& text =
        s.target == SpanTarget::reference ? ex.reference_text : ex.source_text;
    if (s.start < 0 || s.end <= s.start ||
        s.end > static_cast<int>(text.size())) {
      throw Error(where + ": " + list_name + " span [" + std::to_string(s.start) +
                  "," + std::to_string(s.end) + ") out of bounds");
    }
    std::string actual = text.substr(s.start, s.end - s.start);
    if (actual != s.surface) {
      throw Error(where + ": " + list_name + " span surface mismatch: stored '" +
                  s.surface + "' vs text '" + actual + "'");
    }
    if (!semantic_types.empty() && list_name != "noun_phrases") {
      if (std::find(semantic_types.begin(), semantic_types.end(),
                    s.semantic_type) == semantic_types.end()) {
        throw Error(where + ": " + list_name + " semantic type '" +
                    s.semantic_type + "' not in declared vocabulary");
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// enum names

std::string to_string(Method m) {
  switch (m) {
    case Method::mask_and_fill: return "mask_and_fill";
    case Method::swap_intrinsic: return "swap_intrinsic";
    case Method::swap_extrinsic: return "swap_extrinsic";
    case Method::paraphrase: return "paraphrase";
    case Method::reference: return "reference";
    case Method::diverse_beam: return "diverse_beam";
  }
  throw Error("unknown method enum value");
}

Method method_from_string(const std::string& s) {
  if (s == "mask_and_fill") return Method::mask_and_fill;
  if (s == "swap_intrinsic") return Method::swap_intrinsic;
  if (s == "swap_extrinsic") return Method::swap_extrinsic;
  if (s == "paraphrase") return Method::paraphrase;
  if (s == "reference") return Method::reference;
  if (s == "diverse_beam") return Method::diverse_beam;
  throw Error("unknown method '" + s + "'");
}

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::positive: return "positive";
    case Polarity::negative: return "negative";
    case Polarity::unassigned: return "unassigned";
  }
  throw Error("unknown polarity enum value");
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "positive") return Polarity::positive;
  if (s == "negative") return Polarity::negative;
  if (s == "unassigned") return Polarity::unassigned;
  throw Error("unknown polarity '" + s + "'");
}

std::string to_string(PoolKind k) {
  return k == PoolKind::faithfulness ? "faithfulness" : "relevance";
}

PoolKind pool_kind_from_string(const std::string& s) {
  if (s == "faithfulness") return PoolKind::faithfulness;
  if (s == "relevance") return PoolKind::relevance;
  throw Error("unknown pool kind '" + s + "'");
}

Polarity expected_polarity(Method m) {
  switch (m) {
    case Method::mask_and_fill:
    case Method::swap_intrinsic:
    case Method::swap_extrinsic:
      return Polarity::negative;
    case Method::paraphrase:
    case Method::reference:
      return Polarity::positive;
    case Method::diverse_beam:
      return Polarity::unassigned;
  }
  throw Error("unknown method enum value");
}

const Candidate* CandidatePool::find(const std::string& candidate_id) const {
  for (const auto& c : candidates) {
    if (c.candidate_id == candidate_id) return &c;
  }
  return nullptr;
}

const MetricStats& NormalizationStats::require(const std::string& metric) const {
  auto it = per_metric.find(metric);
  if (it == per_metric.end()) {
    throw Error("normalization stats missing metric '" + metric + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// file helpers

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  fs::path target(path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  fs::path tmp = dir / (target.filename().string() + ".tmp." +
                        std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

namespace {

// Shared JSONL walker: calls fn(parsed, line_no) for each non-empty line.
template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    fn(parse_line(line, path, line_no), line_no);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// examples

std::vector<Example> load_examples(const std::string& path,
                                   const std::vector<std::string>& semantic_types) {
  std::vector<Example> out;
  std::set<std::string> seen_ids;
  for_each_line(path, [&](const json& j, std::size_t line_no) {
    const std::string where = ctx(path, line_no);
    Example ex;
    ex.example_id = require_string(j, "example_id", where);
    if (ex.example_id.empty()) throw Error(where + ": empty example_id");
    if (!seen_ids.insert(ex.example_id).second) {
      throw Error(where + ": duplicate example_id '" + ex.example_id + "'");
    }
    ex.source_text = require_string(j, "source_text", where);
    ex.reference_text = require_string(j, "reference_text", where);
    if (!j.contains("source_sentences") || !j["source_sentences"].is_array()) {
      throw Error(where + ": missing source_sentences array");
    }
    for (const auto& s : j["source_sentences"]) {
      ex.source_sentences.push_back(s.get<std::string>());
    }
    std::string joined;
    for (const auto& s : ex.source_sentences) {
      if (!joined.empty()) joined += " ";
      joined += s;
    }
    if (normalize_ws(joined) != normalize_ws(ex.source_text)) {
      throw Error(where + ": source_sentences do not reassemble source_text");
    }
    if (j.contains("annotations")) {
      const json& a = j["annotations"];
      auto read_list = [&](const char* key, std::vector<Span>& dst) {
        if (!a.contains(key)) return;
        for (const auto& sj : a[key]) dst.push_back(span_from_json(sj, where));
      };
      read_list("entities", ex.annotations.entities);
      read_list("numbers", ex.annotations.numbers);
      read_list("noun_phrases", ex.annotations.noun_phrases);
      validate_span_list(ex.annotations.entities, ex, "entities", semantic_types, where);
      validate_span_list(ex.annotations.numbers, ex, "numbers", semantic_types, where);
      validate_span_list(ex.annotations.noun_phrases, ex, "noun_phrases", {}, where);
    }
    out.push_back(std::move(ex));
  });
  return out;
}

void write_examples(const std::vector<Example>& examples, const std::string& path) {
  std::ostringstream ss;
  for (const auto& ex : examples) {
    json j;
    j["example_id"] = ex.example_id;
    j["source_text"] = ex.source_text;
    j["source_sentences"] = ex.source_sentences;
    j["reference_text"] = ex.reference_text;
    json a;
    a["entities"] = json::array();
    a["numbers"] = json::array();
    a["noun_phrases"] = json::array();
    for (const auto& s : ex.annotations.entities) a["entities"].push_back(span_to_json(s));
    for (const auto& s : ex.annotations.numbers) a["numbers"].push_back(span_to_json(s));
    for (const auto& s : ex.annotations.noun_phrases) a["noun_phrases"].push_back(span_to_json(s));
    j["annotations"] = a;
    ss << j.dump() << "\n";
  }
  write_file_atomic(path, ss.str());
}

std::map<std::string, Example> index_examples(const std::vector<Example>& examples) {
  std::map<std::string, Example> out;
  for (const auto& ex : examples) out[ex.example_id] = ex;
  return out;
}

// ---------------------------------------------------------------------------
// score vectors

ScoreVector score_vector_from_json(const json& j, const std::string& context) {
  ScoreVector sv;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number()) {
      throw Error(context + ": score field '" + std::string(key) + "' not numeric");
    }
    return j[key].get<double>();
  };
  sv.rouge1_f1 = opt("rouge1_f1");
  sv.rouge2_f1 = opt("rouge2_f1");
  sv.rougeL_f1 = opt("rougeL_f1");
  sv.bertscore_ref = opt("bertscore_ref");
  sv.bertscore_src = opt("bertscore_src");
  sv.bartscore = opt("bartscore");
  sv.factscore = opt("factscore");
  sv.rel_agg = opt("rel_agg");
  sv.faith_agg = opt("faith_agg");
  sv.extractive_density = opt("extractive_density");
  sv.extractive_coverage = opt("extractive_coverage");
  if (j.contains("n_tokens")) {
    sv.n_tokens = static_cast<int>(require_number(j, "n_tokens", context));
  }
  for (const char* name : {"rouge1_f1", "rouge2_f1", "rougeL_f1", "factscore",
                           "extractive_coverage"}) {
    if (j.contains(name) && !j[name].is_null()) {
      check_unit_interval(j[name].get<double>(), name, context);
    }
  }
  if (sv.bartscore && *sv.bartscore > 0.0) {
    throw Error(context + ": bartscore must be <= 0");
  }
  if (sv.extractive_density && *sv.extractive_density < 0.0) {
    throw Error(context + ": extractive_density must be >= 0");
  }
  return sv;
}

json score_vector_to_json(const ScoreVector& sv) {
  json j = json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("rouge1_f1", sv.rouge1_f1);
  put("rouge2_f1", sv.rouge2_f1);
  put("rougeL_f1", sv.rougeL_f1);
  put("bertscore_ref", sv.bertscore_ref);
  put("bertscore_src", sv.bertscore_src);
  put("bartscore", sv.bartscore);
  put("factscore", sv.factscore);
  put("rel_agg", sv.rel_agg);
  put("faith_agg", sv.faith_agg);
  put("extractive_density", sv.extractive_density);
  put("extractive_coverage", sv.extractive_coverage);
  j["n_tokens"] = sv.n_tokens;
  return j;
}

// ---------------------------------------------------------------------------
// candidates and pools

Candidate candidate_from_json(const json& j, const std::string& context) {
  Candidate c;
  c.candidate_id = require_string(j, "candidate_id", context);
  c.example_id = require_string(j, "example_id", context);
  c.method = method_from_string(require_string(j, "method", context));
  if (j.contains("method_params")) {
    if (!j["method_params"].is_object()) {
      throw Error(context + ": method_params must be an object");
    }
    c.method_params = j["method_params"];
  }
  if (j.contains("polarity_hint") && !j["polarity_hint"].is_null()) {
    c.polarity_hint = polarity_from_string(j["polarity_hint"].get<std::string>());
  } else {
    c.polarity_hint = expected_polarity(c.method);
  }
  if (c.polarity_hint != expected_polarity(c.method)) {
    throw Error(context + ": polarity_hint '" + to_string(c.polarity_hint) +
                "' inconsistent with method '" + to_string(c.method) + "'");
  }
  if (j.contains("beam_rank") && !j["beam_rank"].is_null()) {
    if (c.method != Method::diverse_beam) {
      throw Error(context + ": beam_rank only valid for diverse_beam candidates");
    }
    c.beam_rank = static_cast<int>(require_number(j, "beam_rank", context));
    if (*c.beam_rank < 0) throw Error(context + ": beam_rank must be >= 0");
  } else if (c.method == Method::diverse_beam) {
    throw Error(context + ": diverse_beam candidate missing beam_rank");
  }
  c.text = require_string(j, "text", context);
  if (c.text.empty()) throw Error(context + ": empty candidate text");
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
    std::vector<double> lps;
    for (const auto& v : j["token_logprobs"]) {
      double lp = v.get<double>();
      if (lp > 0.0) {
        throw Error(context + ": token_logprobs must be <= 0 (natural log)");
      }
      lps.push_back(lp);
    }
    c.token_logprobs = std::move(lps);
  }
  if (j.contains("scores") && !j["scores"].is_null()) {
    c.scores = score_vector_from_json(j["scores"], context);
  }
  if (c.scores.n_tokens == 0) {
    c.scores.n_tokens = static_cast<int>(tokenize(c.text).size());
  }
  return c;
}

json candidate_to_json(const Candidate& c) {
  json j;
  j["candidate_id"] = c.candidate_id;
  j["example_id"] = c.example_id;
  j["method"] = to_string(c.method);
  j["method_params"] = c.method_params;
  j["polarity_hint"] = to_string(c.polarity_hint);
  if (c.beam_rank) j["beam_rank"] = *c.beam_rank;
  j["text"] = c.text;
  if (c.token_logprobs) j["token_logprobs"] = *c.token_logprobs;
  j["scores"] = score_vector_to_json(c.scores);
  return j;
}

namespace {

bool method_allowed(PoolKind kind, Method m) {
  if (kind == PoolKind::relevance) return m == Method::diverse_beam;
  return m != Method::diverse_beam;
}

}  // namespace

PoolLoadResult load_pool(const std::string& path, PoolKind kind,
                         const std::map<std::string, Example>& examples) {
  std::map<std::string, std::vector<Candidate>> grouped;
  std::set<std::string> seen_ids;
  for_each_line(path, [&](const json& j, std::size_t line_no) {
    const std::string where = ctx(path, line_no);
    Candidate c = candidate_from_json(j, where);
    if (!method_allowed(kind, c.method)) {
      throw Error(where + ": method '" + to_string(c.method) +
                  "' not allowed in " + to_string(kind) + " pool");
    }
    if (!seen_ids.insert(c.candidate_id).second) {
      throw Error(where + ": duplicate candidate_id '" + c.candidate_id + "'");
    }
    if (!examples.count(c.example_id)) {
      throw Error(where + ": unknown example_id '" + c.example_id + "'");
    }
    grouped[c.example_id].push_back(std::move(c));
  });

  PoolLoadResult result;
  for (auto& [example_id, cands] : grouped) {
    // Stable candidate_id order makes loading independent of file order.
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) {
                return a.candidate_id < b.candidate_id;
              });
    CandidatePool pool;
    pool.example = examples.at(example_id);
    pool.pool_kind = kind;
    std::set<std::string> seen_texts;
    std::size_t dropped = 0;
    for (auto& c : cands) {
      if (!seen_texts.insert(dedup_key(c.text)).second) {
        ++dropped;
        continue;
      }
      pool.candidates.push_back(std::move(c));
    }
    if (dropped > 0) {
      log_warn(path + ": dropped " + std::to_string(dropped) +
               " duplicate candidate text(s) in pool " + example_id);
      result.duplicates_dropped += dropped;
    }
    result.pools.push_back(std::move(pool));
  }
  return result;
}

void write_pool(const std::vector<CandidatePool>& pools, const std::string& path) {
  std::ostringstream ss;
  for (const auto& pool : pools) {
    for (const auto& c : pool.candidates) {
      ss << candidate_to_json(c).dump() << "\n";
    }
  }
  write_file_atomic(path, ss.str());
}

// ---------------------------------------------------------------------------
// selected sets

namespace {

void validate_selected(const SelectedSet& s) {
  auto check_distinct = [&](const std::vector<std::string>& ids, const char* what) {
    std::set<std::string> u(ids.begin(), ids.end());
    if (u.size() != ids.size()) {
      throw Error("selected set for '" + s.example_id + "': duplicate ids in " + what);
    }
  };
  if (s.kind == PoolKind::relevance) {
    if (s.rank_order.empty() || !s.positives.empty() || !s.negatives.empty()) {
      throw Error("selected set for '" + s.example_id +
                  "': relevance sets carry rank_order only");
    }
    check_distinct(s.rank_order, "rank_order");
    if (s.k_rank != static_cast<int>(s.rank_order.size())) {
      throw Error("selected set for '" + s.example_id + "': rank_order size " +
                  std::to_string(s.rank_order.size()) + " != k_rank " +
                  std::to_string(s.k_rank));
    }
  } else {
    if (!s.rank_order.empty() || s.positives.empty() || s.negatives.empty()) {
      throw Error("selected set for '" + s.example_id +
                  "': faithfulness sets carry positives and negatives");
    }
    check_distinct(s.positives, "positives");
    check_distinct(s.negatives, "negatives");
    for (const auto& id : s.positives) {
      if (std::find(s.negatives.begin(), s.negatives.end(), id) != s.negatives.end()) {
        throw Error("selected set for '" + s.example_id +
                    "': positives and negatives not disjoint (id '" + id + "')");
      }
    }
    if (s.k_pos != static_cast<int>(s.positives.size()) ||
        s.k_neg != static_cast<int>(s.negatives.size())) {
      throw Error("selected set for '" + s.example_id +
                  "': positive/negative sizes do not match k_pos/k_neg");
    }
  }
}

}  // namespace

std::size_t write_selected(const std::vector<SelectedSet>& sets, const std::string& path) {
  for (const auto& s : sets) validate_selected(s);
  std::ostringstream ss;
  for (const auto& s : sets) {
    json j;
    j["example_id"] = s.example_id;
    j["strategy"] = s.strategy;
    j["mode"] = s.mode;
    j["kind"] = to_string(s.kind);
    if (s.kind == PoolKind::relevance) {
      j["rank_order"] = s.rank_order;
      j["k_rank"] = s.k_rank;
    } else {
      j["positives"] = s.positives;
      j["negatives"] = s.negatives;
      j["k_pos"] = s.k_pos;
      j["k_neg"] = s.k_neg;
    }
    ss << j.dump() << "\n";
  }
  write_file_atomic(path, ss.str());
  return sets.size();
}

std::vector<SelectedSet> load_selected(const std::string& path) {
  std::vector<SelectedSet> out;
  for_each_line(path, [&](const json& j, std::size_t line_no) {
    const std::string where = ctx(path, line_no);
    SelectedSet s;
    s.example_id = require_string(j, "example_id", where);
    s.strategy = require_string(j, "strategy", where);
    s.mode = j.value("mode", std::string{});
    s.kind = pool_kind_from_string(require_string(j, "kind", where));
    if (s.kind == PoolKind::relevance) {
      for (const auto& id : j.value("rank_order", json::array())) {
        s.rank_order.push_back(id.get<std::string>());
      }
      s.k_rank = static_cast<int>(require_number(j, "k_rank", where));
    } else {
      for (const auto& id : j.value("positives", json::array())) {
        s.positives.push_back(id.get<std::string>());
      }
      for (const auto& id : j.value("negatives", json::array())) {
        s.negatives.push_back(id.get<std::string>());
      }
      s.k_pos = static_cast<int>(require_number(j, "k_pos", where));
      s.k_neg = static_cast<int>(require_number(j, "k_neg", where));
    }
    try {
      validate_selected(s);
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    out.push_back(std::move(s));
  });
  return out;
}

// ---------------------------------------------------------------------------
// normalization stats

NormalizationStats load_stats(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(path + ": parse error: " + e.what());
  }
  NormalizationStats stats;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "_provenance") {
      stats.provenance = it.value().get<std::string>();
      continue;
    }
    const json& m = it.value();
    MetricStats ms;
    ms.mean = require_number(m, "mean", path + " metric " + it.key());
    ms.stddev = require_number(m, "stddev", path + " metric " + it.key());
    if (ms.stddev <= 0.0) {
      throw Error(path + ": metric '" + it.key() + "' has stddev <= 0");
    }
    stats.per_metric[it.key()] = ms;
  }
  return stats;
}

void write_stats(const NormalizationStats& stats, const std::string& path) {
  json j = json::object();
  if (!stats.provenance.empty()) j["_provenance"] = stats.provenance;
  for (const auto& [name, ms] : stats.per_metric) {
    j[name] = {{"mean", ms.mean}, {"stddev", ms.stddev}};
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// scores cache and latents

std::map<std::string, ScoreVector> load_scores(const std::string& path) {
  std::map<std::string, ScoreVector> out;
  for_each_line(path, [&](const json& j, std::size_t line_no) {
    const std::string where = ctx(path, line_no);
    std::string id = require_string(j, "candidate_id", where);
    if (out.count(id)) throw Error(where + ": duplicate candidate_id '" + id + "'");
    if (!j.contains("scores")) throw Error(where + ": missing scores object");
    out[id] = score_vector_from_json(j["scores"], where);
  });
  return out;
}

void write_scores(const std::map<std::string, ScoreVector>& scores,
                  const std::string& path) {
  std::ostringstream ss;
  for (const auto& [id, sv] : scores) {
    json j;
    j["candidate_id"] = id;
    j["scores"] = score_vector_to_json(sv);
    ss << j.dump() << "\n";
  }
  write_file_atomic(path, ss.str());
}

std::map<std::string, std::vector<double>> load_latents(const std::string& path) {
  std::map<std::string, std::vector<double>> out;
  for_each_line(path, [&](const json& j, std::size_t line_no) {
    const std::string where = ctx(path, line_no);
    std::string id = require_string(j, "candidate_id", where);
    if (out.count(id)) throw Error(where + ": duplicate candidate_id '" + id + "'");
    if (!j.contains("h") || !j["h"].is_array() || j["h"].empty()) {
      throw Error(where + ": missing latent vector 'h'");
    }
    std::vector<double> h;
    for (const auto& v : j["h"]) h.push_back(v.get<double>());
    out[id] = std::move(h);
  });
  return out;
}

void write_latents(const std::map<std::string, std::vector<double>>& latents,
                   const std::string& path) {
  std::ostringstream ss;
  for (const auto& [id, h] : latents) {
    json j;
    j["candidate_id"] = id;
    j["h"] = h;
    ss << j.dump() << "\n";
  }
  write_file_atomic(path, ss.str());
}

}  // namespace calset
