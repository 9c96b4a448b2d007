// Config loading, manifests, and the stage runners behind the CLI.

#include "calset/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "calset/analysis.hpp"
#include "calset/losses.hpp"

namespace fs = std::filesystem;

namespace calset {

namespace {

std::string basename_of(const std::string& path) {
  return fs::path(path).filename().string();
}

std::string resolve_path(const std::string& config_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(config_dir) / path).lexically_normal().string();
}

void require_artifact(const std::string& path, const std::string& what,
                      const std::string& producing_stage) {
  if (path.empty()) {
    throw Error(what + " path not set (run " + producing_stage + " first)");
  }
  if (!fs::exists(path)) {
    throw Error(what + " not found at '" + path + "' (run " + producing_stage +
                " first)");
  }
}

// --- strict config parsing -------------------------------------------------

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw Error("config: '" + where + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw Error("config: unknown key '" + key + "' in " + where);
    }
  }
}

double get_double(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) {
    throw Error(std::string("config: '") + key + "' must be a number");
  }
  return obj[key].get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) {
    throw Error(std::string("config: '") + key + "' must be an integer");
  }
  return obj[key].get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) {
    throw Error(std::string("config: '") + key + "' must be a boolean");
  }
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) {
    throw Error(std::string("config: '") + key + "' must be a string");
  }
  return obj[key].get<std::string>();
}

ServiceEndpoint parse_endpoint(const json& obj, const std::string& where) {
  check_keys(obj, where, {"base_url", "timeout_s", "max_retries", "backoff_ms",
                          "auth_token"});
  ServiceEndpoint e;
  e.base_url = get_string(obj, "base_url", "");
  e.timeout_s = get_double(obj, "timeout_s", e.timeout_s);
  e.max_retries = get_int(obj, "max_retries", e.max_retries);
  e.backoff_ms = get_int(obj, "backoff_ms", e.backoff_ms);
  e.auth_token = get_string(obj, "auth_token", "");
  if (e.timeout_s <= 0) throw Error("config: " + where + ".timeout_s must be > 0");
  if (e.max_retries < 0) throw Error("config: " + where + ".max_retries must be >= 0");
  return e;
}

std::vector<double> parse_weight_triple(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 3) {
    throw Error("config: " + where + " must be an array of 3 weights");
  }
  std::vector<double> w;
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error("config: " + where + " entries must be numbers");
    w.push_back(v.get<double>());
  }
  return w;
}

std::vector<Demonstration> load_demonstrations(const std::string& path) {
  std::string content = read_file(path);
  std::vector<Demonstration> demos;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    std::string line = content.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("original") || !j["original"].is_string() ||
        !j.contains("paraphrase") || !j["paraphrase"].is_string()) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": demonstration needs string 'original' and 'paraphrase'");
    }
    demos.push_back({j["original"].get<std::string>(),
                     j["paraphrase"].get<std::string>()});
  }
  return demos;
}

double unit_from_label(const std::string& label) {
  return static_cast<double>(fnv1a64("delta\x1F" + label) >> 11) * 0x1.0p-53;
}

// Sequence log-likelihood of a candidate: token log-probs when present,
// otherwise the mean-per-token bartscore scaled back up by token count.
double total_loglik(const Candidate& c) {
  if (c.token_logprobs) {
    double s = 0.0;
    for (double lp : *c.token_logprobs) s += lp;
    return s;
  }
  if (c.scores.bartscore) {
    return *c.scores.bartscore * static_cast<double>(c.scores.n_tokens);
  }
  throw Error("candidate '" + c.candidate_id +
              "' has neither token_logprobs nor bartscore; run score first");
}

const Candidate& pool_member(const CandidatePool& pool, const std::string& id) {
  const Candidate* c = pool.find(id);
  if (!c) {
    throw Error("candidate '" + id + "' not in pool for example '" +
                pool.example.example_id + "'");
  }
  return *c;
}

std::map<std::string, const CandidatePool*> pools_by_example(
    const std::vector<CandidatePool>& pools) {
  std::map<std::string, const CandidatePool*> by_id;
  for (const auto& p : pools) by_id[p.example.example_id] = &p;
  return by_id;
}

struct LoadedPools {
  std::vector<Example> examples;
  std::vector<CandidatePool> pools;
};

LoadedPools load_pools_with_scores(const PipelineConfig& config, PoolKind kind,
                                   const std::string& pool_path,
                                   const std::string& scores_path) {
  require_artifact(config.examples_path, "examples file", "nothing; fix the config");
  require_artifact(pool_path, "pool file", "pool");
  LoadedPools out;
  out.examples = load_examples(config.examples_path, config.semantic_types);
  out.pools = load_pool(pool_path, kind, index_examples(out.examples)).pools;
  if (!scores_path.empty()) {
    require_artifact(scores_path, "scores file", "score and normalize");
    attach_scores(out.pools, load_scores(scores_path));
  }
  return out;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw Error("config file not found: " + path);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error("config " + path + ": " + e.what());
  }
  check_keys(j, "config root",
             {"corpus", "pool", "selection", "weights", "losses", "endpoints",
              "seed", "out_dir"});

  PipelineConfig c;
  c.raw = j;
  c.config_dir = fs::path(path).has_parent_path()
                     ? fs::path(path).parent_path().string()
                     : std::string(".");

  const json corpus = j.value("corpus", json::object());
  check_keys(corpus, "corpus",
             {"examples", "beam_files", "entity_index", "demonstrations",
              "semantic_types"});
  c.examples_path = resolve_path(c.config_dir, get_string(corpus, "examples", ""));
  if (c.examples_path.empty()) throw Error("config: corpus.examples is required");
  c.entity_index_path =
      resolve_path(c.config_dir, get_string(corpus, "entity_index", ""));
  c.demonstrations_path =
      resolve_path(c.config_dir, get_string(corpus, "demonstrations", ""));
  if (corpus.contains("semantic_types")) {
    if (!corpus["semantic_types"].is_array()) {
      throw Error("config: corpus.semantic_types must be an array of strings");
    }
    for (const auto& t : corpus["semantic_types"]) {
      if (!t.is_string()) {
        throw Error("config: corpus.semantic_types must be an array of strings");
      }
      c.semantic_types.push_back(t.get<std::string>());
    }
  }
  if (corpus.contains("beam_files")) {
    if (!corpus["beam_files"].is_array()) {
      throw Error("config: corpus.beam_files must be an array");
    }
    for (const auto& b : corpus["beam_files"]) {
      check_keys(b, "corpus.beam_files[]", {"generator", "path"});
      BeamFileSpec spec;
      spec.generator = get_string(b, "generator", "");
      spec.path = resolve_path(c.config_dir, get_string(b, "path", ""));
      if (spec.generator.empty() || spec.path.empty()) {
        throw Error("config: beam_files entries need 'generator' and 'path'");
      }
      c.pool.beam_files.push_back(std::move(spec));
    }
  }

  c.pool.variants = PoolBuildConfig::defaults().variants;
  const json pool = j.value("pool", json::object());
  check_keys(pool, "pool",
             {"variants", "paraphrase_count", "paraphrase_temperature",
              "paraphrase_instruction", "include_reference", "max_regen_attempts"});
  if (pool.contains("variants")) {
    if (!pool["variants"].is_array()) {
      throw Error("config: pool.variants must be an array");
    }
    c.pool.variants.clear();
    for (const auto& v : pool["variants"]) {
      check_keys(v, "pool.variants[]", {"method", "label", "rate", "count"});
      VariantSpec spec;
      spec.method = method_from_string(get_string(v, "method", ""));
      if (spec.method == Method::paraphrase || spec.method == Method::reference ||
          spec.method == Method::diverse_beam) {
        throw Error("config: pool.variants methods must be corruptions "
                    "(mask_and_fill or swap_*)");
      }
      spec.label = get_string(v, "label", "");
      spec.rate = get_double(v, "rate", 0.0);
      spec.count = get_int(v, "count", 0);
      if (spec.label.empty()) throw Error("config: variant label is required");
      if (spec.rate <= 0.0 || spec.rate > 1.0) {
        throw Error("config: variant rate must be in (0, 1]");
      }
      if (spec.count < 1) throw Error("config: variant count must be >= 1");
      c.pool.variants.push_back(std::move(spec));
    }
  }
  c.pool.paraphrase_count = get_int(pool, "paraphrase_count", c.pool.paraphrase_count);
  c.pool.paraphrase_temperature =
      get_double(pool, "paraphrase_temperature", c.pool.paraphrase_temperature);
  c.pool.paraphrase_instruction =
      get_string(pool, "paraphrase_instruction", c.pool.paraphrase_instruction);
  c.pool.include_reference =
      get_bool(pool, "include_reference", c.pool.include_reference);
  c.pool.max_regen_attempts =
      get_int(pool, "max_regen_attempts", c.pool.max_regen_attempts);
  if (c.pool.paraphrase_count < 0) {
    throw Error("config: pool.paraphrase_count must be >= 0");
  }
  if (c.pool.max_regen_attempts < 0) {
    throw Error("config: pool.max_regen_attempts must be >= 0");
  }

  const json sel = j.value("selection", json::object());
  check_keys(sel, "selection", {"k_rank", "k_pos", "k_neg", "enumeration_cap"});
  c.selection.k_rank = get_int(sel, "k_rank", c.selection.k_rank);
  c.selection.k_pos = get_int(sel, "k_pos", c.selection.k_pos);
  c.selection.k_neg = get_int(sel, "k_neg", c.selection.k_neg);
  int cap = get_int(sel, "enumeration_cap",
                    static_cast<int>(c.selection.enumeration_cap));
  if (cap < 1) throw Error("config: selection.enumeration_cap must be >= 1");
  c.selection.enumeration_cap = static_cast<std::size_t>(cap);
  if (c.selection.k_rank < 2) throw Error("config: selection.k_rank must be >= 2");
  if (c.selection.k_pos < 1 || c.selection.k_neg < 1) {
    throw Error("config: selection.k_pos and k_neg must be >= 1");
  }

  const json weights = j.value("weights", json::object());
  check_keys(weights, "weights", {"relevance", "faithfulness"});
  if (weights.contains("relevance")) {
    auto w = parse_weight_triple(weights["relevance"], "weights.relevance");
    c.weights.rouge1 = w[0];
    c.weights.rouge2 = w[1];
    c.weights.bertscore_ref = w[2];
  }
  if (weights.contains("faithfulness")) {
    auto w = parse_weight_triple(weights["faithfulness"], "weights.faithfulness");
    c.weights.factscore = w[0];
    c.weights.bartscore = w[1];
    c.weights.bertscore_src = w[2];
  }
  c.weights.validate();
  c.selection.weights = c.weights;

  const json losses = j.value("losses", json::object());
  check_keys(losses, "losses", {"relevance", "faithfulness"});
  const json rel = losses.value("relevance", json::object());
  check_keys(rel, "losses.relevance",
             {"lambda_mle", "lambda_ca", "lambda_margin", "alpha", "tau_scale"});
  c.losses.rel_lambda_mle = get_double(rel, "lambda_mle", c.losses.rel_lambda_mle);
  c.losses.rel_lambda_ca = get_double(rel, "lambda_ca", c.losses.rel_lambda_ca);
  c.losses.lambda_margin = get_double(rel, "lambda_margin", c.losses.lambda_margin);
  c.losses.alpha = get_double(rel, "alpha", c.losses.alpha);
  c.losses.tau_scale = get_double(rel, "tau_scale", c.losses.tau_scale);
  const json faith = losses.value("faithfulness", json::object());
  check_keys(faith, "losses.faithfulness",
             {"lambda_mle", "lambda_ca", "tau", "include_positive_in_denominator",
              "latent_dim"});
  c.losses.faith_lambda_mle =
      get_double(faith, "lambda_mle", c.losses.faith_lambda_mle);
  c.losses.faith_lambda_ca = get_double(faith, "lambda_ca", c.losses.faith_lambda_ca);
  c.losses.tau_contrast = get_double(faith, "tau", c.losses.tau_contrast);
  c.losses.include_positive_in_denominator =
      get_bool(faith, "include_positive_in_denominator",
               c.losses.include_positive_in_denominator);
  c.losses.latent_dim = get_int(faith, "latent_dim", c.losses.latent_dim);
  if (c.losses.tau_scale <= 0 || c.losses.tau_contrast <= 0) {
    throw Error("config: loss temperatures must be > 0");
  }
  if (c.losses.latent_dim < 2) throw Error("config: latent_dim must be >= 2");

  const json endpoints = j.value("endpoints", json::object());
  check_keys(endpoints, "endpoints", {"generate", "score"});
  if (endpoints.contains("generate")) {
    c.generate_endpoint = parse_endpoint(endpoints["generate"], "endpoints.generate");
  }
  if (endpoints.contains("score")) {
    c.score_endpoint = parse_endpoint(endpoints["score"], "endpoints.score");
  }

  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw Error("config: seed must be a non-negative integer");
    }
    long long s = j["seed"].get<long long>();
    if (s < 0) throw Error("config: seed must be a non-negative integer");
    c.seed = static_cast<std::uint64_t>(s);
  }
  c.out_dir = resolve_path(c.config_dir, get_string(j, "out_dir", "runs"));
  return c;
}

std::string config_hash(const PipelineConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(config.raw.dump()));
  return buf;
}

void write_manifest(const std::string& artifact_path, const PipelineConfig& config,
                    std::uint64_t seed, const std::vector<std::string>& inputs) {
  json m;
  m["artifact"] = basename_of(artifact_path);
  m["config_hash"] = config_hash(config);
  json in = json::array();
  for (const auto& i : inputs) in.push_back(basename_of(i));
  m["inputs"] = in;
  m["seed"] = seed;
  m["tool_version"] = kToolVersion;
  write_file_atomic(artifact_path + ".manifest.json", m.dump(2) + "\n");
}

void attach_scores(std::vector<CandidatePool>& pools,
                   const std::map<std::string, ScoreVector>& scores) {
  for (auto& pool : pools) {
    for (auto& c : pool.candidates) {
      auto it = scores.find(c.candidate_id);
      if (it == scores.end()) continue;
      int n_tokens = c.scores.n_tokens;
      c.scores = it->second;
      if (c.scores.n_tokens == 0) c.scores.n_tokens = n_tokens;
    }
  }
}

std::vector<double> synth_latent(const std::string& candidate_id, int dim) {
  Rng rng(seed_from({"latent", candidate_id}));
  std::vector<double> h(static_cast<std::size_t>(dim));
  double norm2 = 0.0;
  for (auto& x : h) {
    x = rng.normal();
    norm2 += x * x;
  }
  if (norm2 < 1e-12) h[0] = 1.0;
  return h;
}

json set_statistics_to_json(const SetStatistics& s) {
  json j;
  j["mean_quality"] = s.mean_quality;
  j["margin_gap"] = s.margin_gap;
  j["inverse_self_bleu"] = s.inverse_self_bleu;
  if (s.likelihood_gap) j["likelihood_gap"] = *s.likelihood_gap;
  j["mean_length_tokens"] = s.mean_length_tokens;
  j["mean_extractive_density"] = s.mean_extractive_density;
  if (s.precalibration_score) j["precalibration_score"] = *s.precalibration_score;
  return j;
}

SetStatistics set_statistics_from_json(const json& j, const std::string& context) {
  if (!j.is_object()) throw Error(context + ": stats must be an object");
  auto need = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw Error(context + ": missing numeric '" + key + "'");
    }
    return j[key].get<double>();
  };
  SetStatistics s;
  s.mean_quality = need("mean_quality");
  s.margin_gap = need("margin_gap");
  s.inverse_self_bleu = need("inverse_self_bleu");
  s.mean_length_tokens = need("mean_length_tokens");
  s.mean_extractive_density = need("mean_extractive_density");
  if (j.contains("likelihood_gap")) s.likelihood_gap = need("likelihood_gap");
  if (j.contains("precalibration_score")) {
    s.precalibration_score = need("precalibration_score");
  }
  return s;
}

// --- stages ----------------------------------------------------------------

void run_index_entities(const PipelineConfig& config, const std::string& out_path) {
  require_artifact(config.examples_path, "examples file", "nothing; fix the config");
  std::vector<Example> examples =
      load_examples(config.examples_path, config.semantic_types);
  EntityIndex index = EntityIndex::build(examples);
  index.save(out_path);
  write_manifest(out_path, config, config.seed, {config.examples_path});
}

void run_pool(const PipelineConfig& config, PoolKind kind,
              const std::string& out_path, bool offline, std::uint64_t seed) {
  (void)seed;  // pool randomness is keyed entirely off per-candidate ids
  require_artifact(config.examples_path, "examples file", "nothing; fix the config");
  std::vector<Example> examples =
      load_examples(config.examples_path, config.semantic_types);

  PoolBuildConfig pool_config = config.pool;
  std::vector<std::string> inputs = {config.examples_path};

  EntityIndex index;
  const EntityIndex* index_ptr = nullptr;
  if (kind == PoolKind::faithfulness) {
    bool needs_index = std::any_of(
        pool_config.variants.begin(), pool_config.variants.end(),
        [](const VariantSpec& v) { return v.method == Method::swap_extrinsic; });
    if (needs_index) {
      require_artifact(config.entity_index_path, "entity index", "index-entities");
      index = EntityIndex::load(config.entity_index_path);
      index_ptr = &index;
      inputs.push_back(config.entity_index_path);
    }
    if (!config.demonstrations_path.empty()) {
      require_artifact(config.demonstrations_path, "demonstrations file",
                       "nothing; fix the config");
      pool_config.demonstrations = load_demonstrations(config.demonstrations_path);
      inputs.push_back(config.demonstrations_path);
    }
  } else {
    for (const auto& spec : pool_config.beam_files) {
      require_artifact(spec.path, "beam file for generator '" + spec.generator + "'",
                       "the decoding job that exports beams");
      inputs.push_back(spec.path);
    }
  }

  ServiceClient client = ServiceClient::make(config.generate_endpoint, offline);
  std::vector<CandidatePool> pools;
  for (const auto& example : examples) {
    pools.push_back(build_pool(example, kind, pool_config, client, index_ptr));
  }
  write_pool(pools, out_path);
  write_manifest(out_path, config, config.seed, inputs);
}

void run_score(const PipelineConfig& config, PoolKind kind,
               const std::string& pool_path, const std::string& scores_out,
               const std::string& latents_out, bool offline) {
  LoadedPools loaded = load_pools_with_scores(config, kind, pool_path, "");
  ServiceClient client = ServiceClient::make(config.score_endpoint, offline);
  if (!latents_out.empty() && !client.offline()) {
    throw Error("latent synthesis is offline-only; online latents come from the "
                "trainer's export, not this tool");
  }

  std::map<std::string, ScoreVector> scores;
  std::map<std::string, std::vector<double>> latents;
  for (const auto& pool : loaded.pools) {
    const std::string& ref = pool.example.reference_text;
    const std::string& src = pool.example.source_text;

    std::vector<std::pair<std::string, std::string>> vs_ref, vs_src, seq;
    for (const auto& c : pool.candidates) {
      vs_ref.emplace_back(c.text, ref);
      vs_src.emplace_back(c.text, src);
      seq.emplace_back(src, c.text);
    }
    std::vector<double> bert_ref = client.score_pairs(ScoreKind::embed_sim_ref, vs_ref);
    std::vector<double> bert_src = client.score_pairs(ScoreKind::embed_sim_src, vs_src);
    std::vector<double> bart = client.score_pairs(ScoreKind::seq_loglik, seq);

    for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
      const Candidate& c = pool.candidates[i];
      ScoreVector sv = c.scores;
      sv.rouge1_f1 = rouge_n(c.text, ref, 1).f1;
      sv.rouge2_f1 = rouge_n(c.text, ref, 2).f1;
      sv.rougeL_f1 = rouge_l(c.text, ref).f1;
      FragmentSet frags = extractive_fragments(src, c.text);
      sv.extractive_coverage = frags.coverage;
      sv.extractive_density = frags.density;
      sv.bertscore_ref = bert_ref[i];
      sv.bertscore_src = bert_src[i];
      sv.bartscore = bart[i];
      sv.factscore = fact_score(c.text, pool.example.source_sentences, client);
      sv.n_tokens = static_cast<int>(tokenize(c.text).size());
      scores[c.candidate_id] = sv;
      if (!latents_out.empty()) {
        latents[c.candidate_id] = synth_latent(c.candidate_id, config.losses.latent_dim);
      }
    }
  }
  write_scores(scores, scores_out);
  write_manifest(scores_out, config, config.seed, {pool_path});
  if (!latents_out.empty()) {
    write_latents(latents, latents_out);
    write_manifest(latents_out, config, config.seed, {pool_path});
  }
}

void run_normalize_fit(const PipelineConfig& config, const std::string& scores_path,
                       const std::string& stats_out, const std::string& provenance) {
  require_artifact(scores_path, "scores file", "score");
  std::map<std::string, ScoreVector> scores = load_scores(scores_path);
  std::vector<ScoreVector> rows;
  rows.reserve(scores.size());
  for (const auto& [id, sv] : scores) {
    (void)id;
    rows.push_back(sv);
  }
  NormalizationStats stats = fit_normalization(rows, provenance);
  write_stats(stats, stats_out);
  write_manifest(stats_out, config, config.seed, {scores_path});
}

void run_normalize_apply(const PipelineConfig& config, const std::string& scores_path,
                         const std::string& stats_path, const std::string& scores_out) {
  require_artifact(scores_path, "scores file", "score");
  require_artifact(stats_path, "normalization stats", "normalize --fit");
  std::map<std::string, ScoreVector> scores = load_scores(scores_path);
  NormalizationStats stats = load_stats(stats_path);

  auto members_ready = [&](const ScoreVector& sv, AggregateKind kind) {
    for (const std::string& name : aggregate_members(kind)) {
      if (!stats.per_metric.count(name)) return false;
      if (name == "rouge1_f1" && !sv.rouge1_f1) return false;
      if (name == "rouge2_f1" && !sv.rouge2_f1) return false;
      if (name == "bertscore_ref" && !sv.bertscore_ref) return false;
      if (name == "factscore" && !sv.factscore) return false;
      if (name == "bartscore" && !sv.bartscore) return false;
      if (name == "bertscore_src" && !sv.bertscore_src) return false;
    }
    return true;
  };
  for (auto& [id, sv] : scores) {
    (void)id;
    if (members_ready(sv, AggregateKind::rel)) {
      sv.rel_agg = aggregate(sv, stats, config.weights, AggregateKind::rel);
    }
    if (members_ready(sv, AggregateKind::faith)) {
      sv.faith_agg = aggregate(sv, stats, config.weights, AggregateKind::faith);
    }
  }
  write_scores(scores, scores_out);
  write_manifest(scores_out, config, config.seed, {scores_path, stats_path});
}

void run_select(const PipelineConfig& config, PoolKind kind,
                const std::string& pool_path, const std::string& scores_path,
                const StrategyId& strategy, const std::string& out_path,
                std::uint64_t seed) {
  LoadedPools loaded = load_pools_with_scores(config, kind, pool_path, scores_path);
  SelectionConfig sc = config.selection;
  sc.strategy = strategy;
  sc.rng_seed = seed;
  std::vector<SelectedSet> sets;
  for (const auto& pool : loaded.pools) {
    sets.push_back(select(pool, sc));
  }
  write_selected(sets, out_path);
  write_manifest(out_path, config, seed, {pool_path, scores_path});
}

void run_stats(const PipelineConfig& config, PoolKind kind,
               const std::string& selected_path, const std::string& pool_path,
               const std::string& scores_path, const std::string& out_path) {
  require_artifact(selected_path, "selected-set file", "select");
  LoadedPools loaded = load_pools_with_scores(config, kind, pool_path, scores_path);
  auto by_id = pools_by_example(loaded.pools);
  std::vector<SelectedSet> sets = load_selected(selected_path);
  std::sort(sets.begin(), sets.end(),
            [](const SelectedSet& a, const SelectedSet& b) {
              return a.example_id < b.example_id;
            });
  std::string out;
  for (const auto& set : sets) {
    auto it = by_id.find(set.example_id);
    if (it == by_id.end()) {
      throw Error("selected set references unknown example '" + set.example_id + "'");
    }
    SetStatistics stats = set_statistics(set, *it->second);
    json row;
    row["example_id"] = set.example_id;
    row["kind"] = to_string(set.kind);
    row["strategy"] = set.strategy;
    row["mode"] = set.mode;
    row["stats"] = set_statistics_to_json(stats);
    out += row.dump() + "\n";
  }
  write_file_atomic(out_path, out);
  write_manifest(out_path, config, config.seed,
                 {selected_path, pool_path, scores_path});
}

void run_loss_eval(const PipelineConfig& config, PoolKind kind,
                   const std::string& selected_path, const std::string& pool_path,
                   const std::string& scores_path, const std::string& latents_path,
                   const std::string& out_path) {
  require_artifact(selected_path, "selected-set file", "select");
  LoadedPools loaded = load_pools_with_scores(config, kind, pool_path, scores_path);
  auto by_id = pools_by_example(loaded.pools);
  std::vector<SelectedSet> sets = load_selected(selected_path);
  std::sort(sets.begin(), sets.end(),
            [](const SelectedSet& a, const SelectedSet& b) {
              return a.example_id < b.example_id;
            });

  std::map<std::string, std::vector<double>> latents;
  if (kind == PoolKind::faithfulness) {
    require_artifact(latents_path, "latents file",
                     "score with a latents output, or export trainer latents");
    latents = load_latents(latents_path);
  }
  const LossHparams& h = config.losses;

  std::string out;
  for (const auto& set : sets) {
    auto it = by_id.find(set.example_id);
    if (it == by_id.end()) {
      throw Error("selected set references unknown example '" + set.example_id + "'");
    }
    const CandidatePool& pool = *it->second;
    json row;
    row["example_id"] = set.example_id;
    row["kind"] = to_string(set.kind);
    row["strategy"] = set.strategy;
    row["mode"] = set.mode;

    if (kind == PoolKind::relevance) {
      std::vector<double> f;
      for (const auto& id : set.rank_order) {
        const Candidate& c = pool_member(pool, id);
        if (c.token_logprobs) {
          f.push_back(length_normalized_score(*c.token_logprobs, h.tau_scale, h.alpha));
        } else {
          f.push_back(h.tau_scale * total_loglik(c) /
                      std::pow(static_cast<double>(c.scores.n_tokens), h.alpha));
        }
      }
      const Candidate& top = pool_member(pool, set.rank_order.front());
      double mle = top.token_logprobs ? mle_loss(*top.token_logprobs)
                                      : -total_loglik(top);
      double margin = margin_rank_loss(f, h.lambda_margin);
      row["rank_scores"] = f;
      row["mle"] = mle;
      row["margin_rank"] = margin;
      row["combined"] =
          combined_objective(mle, margin, h.rel_lambda_mle, h.rel_lambda_ca);
    } else {
      auto latent_of = [&](const std::string& id) {
        auto lit = latents.find(id);
        if (lit == latents.end()) {
          throw Error("latent missing for candidate '" + id + "' in " + latents_path);
        }
        return lit->second;
      };
      std::vector<std::vector<double>> pos_h, neg_h;
      std::vector<double> pos_ll, neg_ll;
      for (const auto& id : set.positives) {
        pos_h.push_back(latent_of(id));
        pos_ll.push_back(total_loglik(pool_member(pool, id)));
      }
      for (const auto& id : set.negatives) {
        neg_h.push_back(latent_of(id));
        neg_ll.push_back(total_loglik(pool_member(pool, id)));
      }
      double contrast = contrastive_loss(pos_h, neg_h, h.tau_contrast,
                                         h.include_positive_in_denominator);
      ConseqResult conseq = conseq_loss(pos_ll, neg_ll);
      row["contrastive"] = contrast;
      row["conseq"] = conseq.value;
      row["conseq_clamped"] = conseq.clamp_engaged;

      const Candidate* reference = nullptr;
      for (const auto& c : pool.candidates) {
        if (c.method == Method::reference) {
          reference = &c;
          break;
        }
      }
      if (reference) {
        double mle = reference->token_logprobs ? mle_loss(*reference->token_logprobs)
                                               : -total_loglik(*reference);
        row["mle"] = mle;
        row["combined_contrastive"] = combined_objective(
            mle, contrast, h.faith_lambda_mle, h.faith_lambda_ca);
        row["combined_conseq"] = combined_objective(
            mle, conseq.value, h.faith_lambda_mle, h.faith_lambda_ca);
      }
    }
    out += row.dump() + "\n";
  }
  write_file_atomic(out_path, out);
  std::vector<std::string> inputs = {selected_path, pool_path, scores_path};
  if (kind == PoolKind::faithfulness) inputs.push_back(latents_path);
  write_manifest(out_path, config, config.seed, inputs);
}

void run_report(const PipelineConfig& config, const std::string& deltas_path,
                const std::string& table_out, const std::string& rows_out) {
  require_artifact(deltas_path, "deltas file", "nothing; supply run deltas");
  json j;
  try {
    j = json::parse(read_file(deltas_path));
  } catch (const json::exception& e) {
    throw Error("deltas " + deltas_path + ": " + e.what());
  }
  json runs = j.is_object() && j.contains("runs") ? j["runs"] : j;
  if (!runs.is_array() || runs.empty()) {
    throw Error("deltas file must hold an array of {label, stats_file, delta}");
  }
  std::string deltas_dir = fs::path(deltas_path).has_parent_path()
                               ? fs::path(deltas_path).parent_path().string()
                               : std::string(".");

  std::vector<RunRow> rows;
  std::vector<std::string> inputs = {deltas_path};
  for (const auto& r : runs) {
    check_keys(r, "deltas run entry", {"label", "stats_file", "delta"});
    RunRow row;
    row.label = get_string(r, "label", "");
    std::string stats_file = resolve_path(deltas_dir, get_string(r, "stats_file", ""));
    if (row.label.empty() || stats_file.empty() || !r.contains("delta") ||
        !r["delta"].is_number()) {
      throw Error("deltas entries need label, stats_file, and numeric delta");
    }
    row.downstream_delta = r["delta"].get<double>();
    require_artifact(stats_file, "stats file for run '" + row.label + "'", "stats");
    inputs.push_back(stats_file);

    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    std::string content = read_file(stats_file);
    std::size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
      std::size_t eol = content.find('\n', pos);
      if (eol == std::string::npos) eol = content.size();
      std::string line = content.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(stats_file + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (!rec.contains("stats") || !rec["stats"].is_object()) {
        throw Error(stats_file + ":" + std::to_string(line_no) +
                    ": missing 'stats' object");
      }
      for (const auto& [name, value] : rec["stats"].items()) {
        if (!value.is_number()) continue;
        sums[name] += value.get<double>();
        counts[name] += 1;
      }
    }
    for (const auto& [name, sum] : sums) {
      row.stat_means[name] = sum / counts[name];
    }
    rows.push_back(std::move(row));
  }

  CorrelateReport report = correlate_runs(rows);
  write_file_atomic(table_out, report.table_text);
  write_manifest(table_out, config, config.seed, inputs);
  std::string machine;
  for (const auto& c : report.correlations) {
    json rec;
    rec["stat"] = c.stat;
    rec["pearson"] = c.degenerate ? json() : json(c.r);
    rec["degenerate"] = c.degenerate;
    machine += rec.dump() + "\n";
  }
  write_file_atomic(rows_out, machine);
  write_manifest(rows_out, config, config.seed, inputs);
}

std::vector<std::string> run_full_pipeline(const PipelineConfig& config,
                                           const std::string& out_dir, bool offline) {
  fs::create_directories(out_dir);
  std::vector<std::string> artifacts;
  auto add = [&](const std::string& path) {
    artifacts.push_back(path);
    artifacts.push_back(path + ".manifest.json");
  };
  auto at = [&](const std::string& name) { return out_dir + "/" + name; };

  PipelineConfig c = config;
  std::string index_path = at("entity_index.tsv");
  run_index_entities(c, index_path);
  add(index_path);
  c.entity_index_path = index_path;

  struct KindPaths {
    PoolKind kind;
    std::string tag, pool, scores, stats, scored, latents;
  };
  std::vector<KindPaths> kinds = {
      {PoolKind::faithfulness, "faithfulness", at("pool_faithfulness.jsonl"),
       at("scores_faithfulness.jsonl"), at("stats_faithfulness.json"),
       at("scored_faithfulness.jsonl"), at("latents_faithfulness.jsonl")},
      {PoolKind::relevance, "relevance", at("pool_relevance.jsonl"),
       at("scores_relevance.jsonl"), at("stats_relevance.json"),
       at("scored_relevance.jsonl"), std::string()},
  };
  for (const auto& k : kinds) {
    run_pool(c, k.kind, k.pool, offline, c.seed);
    add(k.pool);
    run_score(c, k.kind, k.pool, k.scores, k.latents, offline);
    add(k.scores);
    if (!k.latents.empty()) add(k.latents);
    run_normalize_fit(c, k.scores, k.stats, "fit:" + basename_of(k.scores));
    add(k.stats);
    run_normalize_apply(c, k.scores, k.stats, k.scored);
    add(k.scored);
  }

  std::map<PoolKind, json> deltas;
  deltas[PoolKind::faithfulness] = json::array();
  deltas[PoolKind::relevance] = json::array();
  for (const auto& entry : strategy_catalog()) {
    const KindPaths& k = kinds[entry.kind == PoolKind::faithfulness ? 0 : 1];
    std::string label = (entry.kind == PoolKind::faithfulness ? "faith_" : "rel_") +
                        to_string(entry.id.family) +
                        (entry.id.mode.empty() ? "" : "-" + entry.id.mode);
    std::string sel = at("selected_" + label + ".jsonl");
    run_select(c, entry.kind, k.pool, k.scored, entry.id, sel, c.seed);
    add(sel);
    std::string st = at("stats_" + label + ".jsonl");
    run_stats(c, entry.kind, sel, k.pool, k.scored, st);
    add(st);
    std::string lo = at("losses_" + label + ".jsonl");
    run_loss_eval(c, entry.kind, sel, k.pool, k.scored, k.latents, lo);
    add(lo);

    json d;
    d["label"] = label;
    d["stats_file"] = basename_of(st);
    d["delta"] = unit_from_label(label);
    deltas[entry.kind].push_back(d);
  }

  for (const auto& k : kinds) {
    std::string deltas_path = at("deltas_" + k.tag + ".json");
    write_file_atomic(deltas_path, deltas[k.kind].dump(2) + "\n");
    artifacts.push_back(deltas_path);
    std::string table = at("report_" + k.tag + ".txt");
    std::string rows = at("report_" + k.tag + ".jsonl");
    run_report(c, deltas_path, table, rows);
    add(table);
    add(rows);
  }
  return artifacts;
}

}  // namespace calset
