// calset: build candidate pools, score and normalize them, select
// calibration sets, and evaluate set statistics and loss kernels.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "calset/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

void ensure_parent(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

calset::PoolKind parse_kind(const std::string& kind) {
  return calset::pool_kind_from_string(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibration set toolkit: candidate pools, metric scoring, "
               "set selection, statistics, and loss evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool offline = false;
  std::optional<std::uint64_t> seed_override;
  app.add_option("--config", config_path, "pipeline config file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_flag("--offline", offline,
               "use the deterministic offline service stubs (CALSET_OFFLINE=1 "
               "does the same)");
  app.add_option("--seed", seed_override, "override the config seed");

  std::string kind = "faithfulness", out, pool_path, scores_path, stats_path;
  std::string latents_path, selected_path, strategy_text, provenance;
  std::string deltas_path, table_out, rows_out, out_dir;
  bool fit = false;

  CLI::App* cmd_index = app.add_subcommand(
      "index-entities", "build the corpus entity index backing extrinsic swaps");
  cmd_index->add_option("--out", out, "index output path (TSV)");

  CLI::App* cmd_pool =
      app.add_subcommand("pool", "build candidate pools for every example");
  cmd_pool->add_option("--kind", kind, "faithfulness or relevance")->required();
  cmd_pool->add_option("--out", out, "pool output path (JSONL)");

  CLI::App* cmd_score = app.add_subcommand(
      "score", "compute per-candidate metrics (and offline latents)");
  cmd_score->add_option("--kind", kind, "faithfulness or relevance")->required();
  cmd_score->add_option("--pool", pool_path, "pool file from the pool stage");
  cmd_score->add_option("--out", out, "scores output path (JSONL)");
  cmd_score->add_option("--latents-out", latents_path,
                        "also write synthesized latents (offline only)");

  CLI::App* cmd_norm = app.add_subcommand(
      "normalize", "fit normalization stats or apply them as aggregates");
  cmd_norm->add_option("--scores", scores_path, "scores file")->required();
  cmd_norm->add_option("--stats", stats_path,
                       "stats file (output with --fit, input otherwise)")
      ->required();
  cmd_norm->add_flag("--fit", fit, "fit stats from the scores file");
  cmd_norm->add_option("--out", out, "aggregated scores output (apply mode)");
  cmd_norm->add_option("--provenance", provenance,
                       "stats provenance label (fit mode)");

  CLI::App* cmd_select =
      app.add_subcommand("select", "run one selection strategy over the pools");
  cmd_select->add_option("--kind", kind, "faithfulness or relevance")->required();
  cmd_select->add_option("--pool", pool_path, "pool file");
  cmd_select->add_option("--scores", scores_path, "aggregated scores file")
      ->required();
  cmd_select->add_option("--strategy", strategy_text, "family or family:mode")
      ->required();
  cmd_select->add_option("--out", out, "selected-set output path (JSONL)");

  CLI::App* cmd_stats =
      app.add_subcommand("stats", "set statistics for a selected-set file");
  cmd_stats->add_option("--kind", kind, "faithfulness or relevance")->required();
  cmd_stats->add_option("--selected", selected_path, "selected-set file")
      ->required();
  cmd_stats->add_option("--pool", pool_path, "pool file");
  cmd_stats->add_option("--scores", scores_path, "aggregated scores file")
      ->required();
  cmd_stats->add_option("--out", out, "stats output path (JSONL)");

  CLI::App* cmd_loss = app.add_subcommand(
      "loss-eval", "evaluate calibration losses on a selected-set file");
  cmd_loss->add_option("--kind", kind, "faithfulness or relevance")->required();
  cmd_loss->add_option("--selected", selected_path, "selected-set file")
      ->required();
  cmd_loss->add_option("--pool", pool_path, "pool file");
  cmd_loss->add_option("--scores", scores_path, "scores file")->required();
  cmd_loss->add_option("--latents", latents_path,
                       "latents file (faithfulness only)");
  cmd_loss->add_option("--out", out, "loss report output path (JSONL)");

  CLI::App* cmd_report = app.add_subcommand(
      "report", "correlate set statistics against downstream deltas");
  cmd_report->add_option("--deltas", deltas_path,
                         "JSON array of {label, stats_file, delta}")
      ->required();
  cmd_report->add_option("--table-out", table_out, "aligned table output path");
  cmd_report->add_option("--rows-out", rows_out, "machine-readable rows path");

  CLI::App* cmd_all = app.add_subcommand(
      "run-all", "full offline flow: pools, scores, every strategy, reports");
  cmd_all->add_option("--out-dir", out_dir, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  try {
    calset::PipelineConfig config = calset::load_config(config_path);
    if (seed_override) config.seed = *seed_override;
    bool use_offline = offline || calset::offline_mode_forced();
    auto at = [&](const std::string& name) { return config.out_dir + "/" + name; };

    if (cmd_index->parsed()) {
      if (out.empty()) {
        out = config.entity_index_path.empty() ? at("entity_index.tsv")
                                               : config.entity_index_path;
      }
      ensure_parent(out);
      calset::run_index_entities(config, out);
      std::cout << "wrote " << out << "\n";
    } else if (cmd_pool->parsed()) {
      calset::PoolKind k = parse_kind(kind);
      if (out.empty()) out = at("pool_" + kind + ".jsonl");
      ensure_parent(out);
      calset::run_pool(config, k, out, use_offline, config.seed);
      std::cout << "wrote " << out << "\n";
    } else if (cmd_score->parsed()) {
      calset::PoolKind k = parse_kind(kind);
      if (pool_path.empty()) pool_path = at("pool_" + kind + ".jsonl");
      if (out.empty()) out = at("scores_" + kind + ".jsonl");
      ensure_parent(out);
      if (!latents_path.empty()) ensure_parent(latents_path);
      calset::run_score(config, k, pool_path, out, latents_path, use_offline);
      std::cout << "wrote " << out << "\n";
    } else if (cmd_norm->parsed()) {
      if (fit) {
        if (provenance.empty()) {
          provenance = "fit:" + fs::path(scores_path).filename().string();
        }
        ensure_parent(stats_path);
        calset::run_normalize_fit(config, scores_path, stats_path, provenance);
        std::cout << "wrote " << stats_path << "\n";
      } else {
        if (out.empty()) {
          throw calset::Error("normalize: --out is required when applying stats "
                              "(or pass --fit)");
        }
        ensure_parent(out);
        calset::run_normalize_apply(config, scores_path, stats_path, out);
        std::cout << "wrote " << out << "\n";
      }
    } else if (cmd_select->parsed()) {
      calset::PoolKind k = parse_kind(kind);
      calset::StrategyId strategy = calset::StrategyId::parse(strategy_text);
      if (pool_path.empty()) pool_path = at("pool_" + kind + ".jsonl");
      if (out.empty()) {
        std::string label = strategy.str();
        for (auto& ch : label) {
          if (ch == ':') ch = '-';
        }
        out = at("selected_" + kind + "_" + label + ".jsonl");
      }
      ensure_parent(out);
      calset::run_select(config, k, pool_path, scores_path, strategy, out,
                         config.seed);
      std::cout << "wrote " << out << "\n";
    } else if (cmd_stats->parsed()) {
      calset::PoolKind k = parse_kind(kind);
      if (pool_path.empty()) pool_path = at("pool_" + kind + ".jsonl");
      if (out.empty()) out = at("stats_sets.jsonl");
      ensure_parent(out);
      calset::run_stats(config, k, selected_path, pool_path, scores_path, out);
      std::cout << "wrote " << out << "\n";
    } else if (cmd_loss->parsed()) {
      calset::PoolKind k = parse_kind(kind);
      if (pool_path.empty()) pool_path = at("pool_" + kind + ".jsonl");
      if (out.empty()) out = at("losses.jsonl");
      ensure_parent(out);
      calset::run_loss_eval(config, k, selected_path, pool_path, scores_path,
                            latents_path, out);
      std::cout << "wrote " << out << "\n";
    } else if (cmd_report->parsed()) {
      if (table_out.empty()) table_out = at("report.txt");
      if (rows_out.empty()) rows_out = at("report.jsonl");
      ensure_parent(table_out);
      ensure_parent(rows_out);
      calset::run_report(config, deltas_path, table_out, rows_out);
      std::cout << "wrote " << table_out << " and " << rows_out << "\n";
    } else if (cmd_all->parsed()) {
      if (out_dir.empty()) out_dir = config.out_dir;
      auto artifacts = calset::run_full_pipeline(config, out_dir, use_offline);
      std::cout << "wrote " << artifacts.size() << " artifacts under " << out_dir
                << "\n";
    }
  } catch (const calset::Error& e) {
    std::cerr << "calset: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "calset: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
