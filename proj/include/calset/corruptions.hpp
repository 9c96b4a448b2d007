#pragma once

// Candidate construction: corruption planners (entity/number swaps, noun
// phrase mask-and-fill), paraphrase and beam ingestion, and the per-example
// pool builder.
//
// Planner determinism: every random draw is seeded, and for a fixed seed the
// High-rate swap plan is a superset of the Low-rate plan. The planner draws
// one fixed ordering of eligible spans per seed and takes a prefix whose
// length depends only on the rate, so raising the rate only extends the
// prefix. Replacement choices hash off (seed, span) and are therefore
// rate-independent too.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "calset/clients.hpp"
#include "calset/core.hpp"

namespace calset {

enum class SwapMode { intrinsic, extrinsic };

// Corpus-level semantic_type -> surfaces map backing extrinsic swaps.
struct EntityIndex {
  std::map<std::string, std::vector<std::string>> by_type;

  // Collects source-side entity and number surfaces from every example.
  // Surfaces are unique per type and sorted.
  static EntityIndex build(const std::vector<Example>& examples);

  static EntityIndex load(const std::string& path);  // TSV type<TAB>surface
  void save(const std::string& path) const;

  std::size_t total_surfaces() const;
};

struct SwapReplacement {
  Span target;              // reference-side span being replaced
  std::string replacement;  // same semantic type, different surface
};

struct SwapPlan {
  SwapMode mode = SwapMode::intrinsic;
  double swap_rate = 0.0;
  // All replacements, entity slots then number slots, pairwise
  // non-overlapping, sorted by span start.
  std::vector<SwapReplacement> replacements;
  std::size_t skipped_slots = 0;  // slots with no usable replacement
};

struct MaskPlan {
  double mask_rate = 0.0;
  std::vector<Span> chosen;             // non-overlapping, sorted by start
  std::vector<int> masked_token_counts; // whitespace token count per span
};

// Slot count rule shared by both planners: max(1, round(rate * n)) when
// n > 0, else 0. Rounding is half-up.
int corruption_slot_count(double rate, int n);

// Plans entity and number swaps over the reference annotations. Slot counts
// are computed separately for entities and numbers from the same rate.
// Intrinsic replacements come from same-type source-side spans; extrinsic
// ones from the corpus index (required for extrinsic mode). A slot with no
// same-type replacement differing from the original surface is skipped and
// counted; a plan where every slot skips is an error.
SwapPlan plan_swaps(const Example& example, SwapMode mode, double swap_rate,
                    const EntityIndex* corpus_index, std::uint64_t seed);

// Applies replacements right to left so byte offsets stay valid.
std::string apply_swaps(const std::string& reference_text, const SwapPlan& plan);

// Chooses max(1, round(mask_rate * n)) noun phrases, walking a seeded
// ordering and dropping picks that overlap earlier accepted ones. At least
// one noun phrase annotation is required.
MaskPlan plan_masks(const Example& example, double mask_rate, std::uint64_t seed);

// Sentinel form for masked spans, index ascending left to right.
std::string sentinel_token(int index);

// Builds the sentinel-masked reference and asks the generation service for
// fills; fills splice back right to left. Each fill carries at least the
// masked token count, so output length never drops below the reference.
std::string mask_and_fill(const Example& example, const MaskPlan& plan,
                          const ServiceClient& client);

// One corruption variant: a method at fixed parameters producing `count`
// candidates. The default faithfulness ladder is two mask rates, two
// intrinsic swap rates, and two extrinsic swap rates at 10 candidates each.
struct VariantSpec {
  Method method = Method::mask_and_fill;
  std::string label;   // "low" or "high", part of candidate ids and seeds
  double rate = 0.0;   // mask rate m or swap rate s
  int count = 0;
};

struct BeamFileSpec {
  std::string generator;  // e.g. "primera", "longt5"
  std::string path;
};

struct PoolBuildConfig {
  std::vector<VariantSpec> variants;       // faithfulness corruption ladder
  int paraphrase_count = 5;
  double paraphrase_temperature = 0.7;
  std::string paraphrase_instruction = "Paraphrase this abstract.";
  std::vector<Demonstration> demonstrations;
  bool include_reference = true;
  std::vector<BeamFileSpec> beam_files;    // relevance generators
  int max_regen_attempts = 4;              // extra draws before allowing a dup

  static PoolBuildConfig defaults();
};

// Beam file records for one generator: {"example_id", "generator",
// "beam_rank", "text", "token_logprobs"} per line.
struct BeamRecord {
  std::string example_id;
  std::string generator;
  int beam_rank = 0;
  std::string text;
  std::vector<double> token_logprobs;
};

std::vector<BeamRecord> load_beams(const std::string& path);

// Builds the full candidate pool for one example. Faithfulness pools run
// the corruption ladder + paraphrases + the reference; relevance pools
// ingest diverse-beam records. Candidate ids and all randomness derive from
// (example_id, method, variant label, index), so rebuilds are identical.
CandidatePool build_pool(const Example& example, PoolKind kind,
                         const PoolBuildConfig& config,
                         const ServiceClient& generation_client,
                         const EntityIndex* corpus_index);

}  // namespace calset
