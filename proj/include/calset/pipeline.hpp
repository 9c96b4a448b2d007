#pragma once

// Stage orchestration: declarative config, per-stage runners, and artifact
// manifests. Every stage writes its outputs atomically plus a sidecar
// manifest (config hash, seed, inputs, tool version; no timestamps), so two
// runs from the same config and seed produce byte-identical trees.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "calset/clients.hpp"
#include "calset/core.hpp"
#include "calset/corruptions.hpp"
#include "calset/metrics.hpp"
#include "calset/selection.hpp"

namespace calset {

inline constexpr const char* kToolVersion = "0.1.0";

struct LossHparams {
  // Rank calibration (relevance).
  double rel_lambda_mle = 0.1;
  double rel_lambda_ca = 1.0;
  double lambda_margin = 0.001;
  double alpha = 1.0;      // length penalty in the normalized sequence score
  double tau_scale = 0.01; // scale in the normalized sequence score

  // Contrast calibration (faithfulness).
  double faith_lambda_mle = 1.0;
  double faith_lambda_ca = 1.0;
  double tau_contrast = 1.0;
  bool include_positive_in_denominator = false;
  int latent_dim = 8;  // synthesized latent width in offline mode
};

struct PipelineConfig {
  std::string config_dir;  // directory of the config file; relative paths
                           // inside the config resolve against it

  std::string examples_path;
  std::string entity_index_path;     // read by pool, written by index-entities
  std::string demonstrations_path;   // optional paraphrase demonstrations
  std::vector<std::string> semantic_types;

  PoolBuildConfig pool;       // beam_files carries resolved paths
  SelectionConfig selection;  // strategy filled per invocation
  AggregateWeights weights;
  LossHparams losses;

  ServiceEndpoint generate_endpoint;
  ServiceEndpoint score_endpoint;

  std::uint64_t seed = 17;
  std::string out_dir;  // default artifact directory

  json raw;  // config file as parsed; the hash input
};

// Parses and validates the config file. Unknown keys are errors; omitted
// keys take the defaults above (which reproduce the default pool ladder and
// calibration coefficients).
PipelineConfig load_config(const std::string& path);

// 16 hex chars over the canonical dump of the raw config (paths as written,
// so the hash is machine-independent).
std::string config_hash(const PipelineConfig& config);

// Writes <artifact>.manifest.json next to the artifact.
void write_manifest(const std::string& artifact_path, const PipelineConfig& config,
                    std::uint64_t seed, const std::vector<std::string>& inputs);

// Merge a scores sidecar into pool candidates by candidate_id. Candidates
// without a row keep their stored scores; n_tokens is preserved when the
// sidecar carries 0 for it.
void attach_scores(std::vector<CandidatePool>& pools,
                   const std::map<std::string, ScoreVector>& scores);

// Deterministic stand-in latent for offline loss evaluation; unit-free
// gaussian components seeded by candidate id.
std::vector<double> synth_latent(const std::string& candidate_id, int dim);

json set_statistics_to_json(const SetStatistics& stats);
SetStatistics set_statistics_from_json(const json& j, const std::string& context);

// Stage runners. Each loads its inputs, writes `out_path` (plus manifest)
// atomically, and throws Error with an actionable message when an upstream
// artifact is missing.
void run_index_entities(const PipelineConfig& config, const std::string& out_path);

void run_pool(const PipelineConfig& config, PoolKind kind,
              const std::string& out_path, bool offline, std::uint64_t seed);

// Fills every locally computable metric plus the client-backed ones, and in
// offline mode writes synthesized latents when latents_out is non-empty.
void run_score(const PipelineConfig& config, PoolKind kind,
               const std::string& pool_path, const std::string& scores_out,
               const std::string& latents_out, bool offline);

void run_normalize_fit(const PipelineConfig& config, const std::string& scores_path,
                       const std::string& stats_out, const std::string& provenance);

// Adds rel_agg / faith_agg to every row whose member metrics are all present.
void run_normalize_apply(const PipelineConfig& config, const std::string& scores_path,
                         const std::string& stats_path, const std::string& scores_out);

void run_select(const PipelineConfig& config, PoolKind kind,
                const std::string& pool_path, const std::string& scores_path,
                const StrategyId& strategy, const std::string& out_path,
                std::uint64_t seed);

void run_stats(const PipelineConfig& config, PoolKind kind,
               const std::string& selected_path, const std::string& pool_path,
               const std::string& scores_path, const std::string& out_path);

void run_loss_eval(const PipelineConfig& config, PoolKind kind,
                   const std::string& selected_path, const std::string& pool_path,
                   const std::string& scores_path, const std::string& latents_path,
                   const std::string& out_path);

// Deltas file: JSON array of {"label", "stats_file", "delta"}; stats_file
// paths resolve relative to the deltas file. Writes the aligned table to
// table_out and one JSON row per statistic to rows_out.
void run_report(const PipelineConfig& config, const std::string& deltas_path,
                const std::string& table_out, const std::string& rows_out);

// Full offline flow into out_dir: index-entities, both pools, scoring,
// normalization, every catalog strategy's selection + stats + loss report,
// and the two correlation reports. Returns the artifact paths written, in
// order. Used directly by the determinism checks.
std::vector<std::string> run_full_pipeline(const PipelineConfig& config,
                                           const std::string& out_dir, bool offline);

}  // namespace calset
