// Corruption planners and the candidate pool builder.

#include "calset/corruptions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace calset {

namespace {

bool spans_overlap(const Span& a, const Span& b) {
  return a.start < b.end && b.start < a.end;
}

std::vector<Span> reference_spans(const std::vector<Span>& spans) {
  std::vector<Span> out;
  for (const auto& s : spans) {
    if (s.target == SpanTarget::reference) out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const Span& a, const Span& b) {
    return a.start < b.start || (a.start == b.start && a.end < b.end);
  });
  return out;
}

// Seeded ordering over span indices. The ordering depends only on the seed
// and the span list, never on the slot count; prefix selection then makes
// higher rates strict extensions of lower ones.
std::vector<std::size_t> seeded_ordering(std::size_t n, std::uint64_t seed,
                                         const std::string& salt) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed_from({std::to_string(seed), salt}));
  rng.shuffle(order);
  return order;
}

// Replacement draw for one span: keyed by (seed, span position) so the
// choice is identical across swap rates for the same seed.
std::string draw_replacement(const std::vector<std::string>& options,
                             std::uint64_t seed, const Span& span) {
  Rng rng(seed_from({std::to_string(seed), "replacement",
                     std::to_string(span.start), std::to_string(span.end)}));
  return options[static_cast<std::size_t>(rng.bounded(options.size()))];
}

std::vector<std::string> same_type_surfaces(const std::vector<Span>& spans,
                                            const std::string& type,
                                            const std::string& exclude) {
  std::set<std::string> surfaces;
  for (const auto& s : spans) {
    if (s.target == SpanTarget::source && s.semantic_type == type &&
        s.surface != exclude) {
      surfaces.insert(s.surface);
    }
  }
  return {surfaces.begin(), surfaces.end()};
}

}  // namespace

int corruption_slot_count(double rate, int n) {
  if (n <= 0) return 0;
  int rounded = static_cast<int>(std::floor(rate * n + 0.5));  // half-up
  return std::max(1, rounded);
}

EntityIndex EntityIndex::build(const std::vector<Example>& examples) {
  std::map<std::string, std::set<std::string>> acc;
  for (const auto& ex : examples) {
    for (const auto* list : {&ex.annotations.entities, &ex.annotations.numbers}) {
      for (const auto& s : *list) {
        if (s.target == SpanTarget::source) acc[s.semantic_type].insert(s.surface);
      }
    }
  }
  EntityIndex index;
  for (auto& [type, surfaces] : acc) {
    index.by_type[type] = {surfaces.begin(), surfaces.end()};
  }
  return index;
}

EntityIndex EntityIndex::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  EntityIndex index;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::set<std::string>> acc;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw Error(path + ":" + std::to_string(line_no) +
                  ": expected type<TAB>surface");
    }
    acc[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  for (auto& [type, surfaces] : acc) {
    index.by_type[type] = {surfaces.begin(), surfaces.end()};
  }
  return index;
}

void EntityIndex::save(const std::string& path) const {
  std::ostringstream ss;
  for (const auto& [type, surfaces] : by_type) {
    for (const auto& surface : surfaces) {
      ss << type << '\t' << surface << '\n';
    }
  }
  write_file_atomic(path, ss.str());
}

std::size_t EntityIndex::total_surfaces() const {
  std::size_t n = 0;
  for (const auto& [type, surfaces] : by_type) n += surfaces.size();
  return n;
}

SwapPlan plan_swaps(const Example& example, SwapMode mode, double swap_rate,
                    const EntityIndex* corpus_index, std::uint64_t seed) {
  if (swap_rate <= 0.0 || swap_rate > 1.0) {
    throw Error("plan_swaps: swap_rate must be in (0, 1]");
  }
  if (mode == SwapMode::extrinsic && corpus_index == nullptr) {
    throw Error("plan_swaps: extrinsic mode requires a corpus entity index");
  }

  std::vector<Span> entities = reference_spans(example.annotations.entities);
  std::vector<Span> numbers = reference_spans(example.annotations.numbers);
  // Number spans overlapping any entity annotation are never swap targets;
  // excluding them up front keeps eligibility independent of the slot count.
  std::erase_if(numbers, [&](const Span& n) {
    return std::any_of(entities.begin(), entities.end(),
                       [&](const Span& e) { return spans_overlap(n, e); });
  });

  const int entity_slots =
      corruption_slot_count(swap_rate, static_cast<int>(entities.size()));
  const int number_slots =
      corruption_slot_count(swap_rate, static_cast<int>(numbers.size()));
  if (entity_slots + number_slots == 0) {
    throw Error("plan_swaps: example '" + example.example_id +
                "' has no reference entities or numbers to swap");
  }

  SwapPlan plan;
  plan.mode = mode;
  plan.swap_rate = swap_rate;

  auto plan_list = [&](const std::vector<Span>& spans, int slots,
                       const std::string& salt) {
    if (slots == 0 || spans.empty()) return;
    std::vector<std::size_t> order = seeded_ordering(spans.size(), seed, salt);
    std::vector<Span> accepted;
    int filled = 0;
    for (std::size_t pos : order) {
      if (filled >= slots) break;
      const Span& span = spans[pos];
      bool overlaps = std::any_of(accepted.begin(), accepted.end(),
                                  [&](const Span& a) { return spans_overlap(a, span); });
      if (overlaps) continue;
      accepted.push_back(span);
      ++filled;
      std::vector<std::string> options;
      if (mode == SwapMode::intrinsic) {
        std::vector<Span> all_source = example.annotations.entities;
        all_source.insert(all_source.end(), example.annotations.numbers.begin(),
                          example.annotations.numbers.end());
        options = same_type_surfaces(all_source, span.semantic_type, span.surface);
      } else {
        // Extrinsic replacements must be novel to this example: anything the
        // source already mentions belongs to the intrinsic option set.
        std::vector<Span> all_source = example.annotations.entities;
        all_source.insert(all_source.end(), example.annotations.numbers.begin(),
                          example.annotations.numbers.end());
        std::vector<std::string> own =
            same_type_surfaces(all_source, span.semantic_type, "");
        std::set<std::string> excluded(own.begin(), own.end());
        excluded.insert(span.surface);
        auto it = corpus_index->by_type.find(span.semantic_type);
        if (it != corpus_index->by_type.end()) {
          for (const auto& surface : it->second) {
            if (!excluded.contains(surface)) options.push_back(surface);
          }
        }
      }
      if (options.empty()) {
        ++plan.skipped_slots;
        log_warn("plan_swaps: no " + std::string(mode == SwapMode::intrinsic
                                                     ? "intrinsic"
                                                     : "extrinsic") +
                 " replacement for type '" + span.semantic_type + "' in example '" +
                 example.example_id + "', slot skipped");
        continue;
      }
      plan.replacements.push_back({span, draw_replacement(options, seed, span)});
    }
  };

  plan_list(entities, entity_slots, "entity-order");
  plan_list(numbers, number_slots, "number-order");

  if (plan.replacements.empty()) {
    throw Error("plan_swaps: swap produced identity for example '" +
                example.example_id + "' (all slots skipped)");
  }
  std::sort(plan.replacements.begin(), plan.replacements.end(),
            [](const SwapReplacement& a, const SwapReplacement& b) {
              return a.target.start < b.target.start;
            });
  return plan;
}

std::string apply_swaps(const std::string& reference_text, const SwapPlan& plan) {
  for (std::size_t i = 0; i < plan.replacements.size(); ++i) {
    const Span& s = plan.replacements[i].target;
    if (s.start < 0 || s.end <= s.start ||
        s.end > static_cast<int>(reference_text.size())) {
      throw Error("apply_swaps: span out of bounds");
    }
    if (reference_text.substr(s.start, s.end - s.start) != s.surface) {
      throw Error("apply_swaps: span surface mismatch at offset " +
                  std::to_string(s.start));
    }
    if (i > 0 && plan.replacements[i - 1].target.end > s.start) {
      throw Error("apply_swaps: overlapping replacement spans");
    }
  }
  std::string out = reference_text;
  for (auto it = plan.replacements.rbegin(); it != plan.replacements.rend(); ++it) {
    out.replace(it->target.start, it->target.end - it->target.start, it->replacement);
  }
  return out;
}

MaskPlan plan_masks(const Example& example, double mask_rate, std::uint64_t seed) {
  if (mask_rate <= 0.0 || mask_rate > 1.0) {
    throw Error("plan_masks: mask_rate must be in (0, 1]");
  }
  std::vector<Span> phrases = reference_spans(example.annotations.noun_phrases);
  if (phrases.empty()) {
    throw Error("plan_masks: example '" + example.example_id +
                "' has no noun phrase annotations");
  }
  const int slots = corruption_slot_count(mask_rate, static_cast<int>(phrases.size()));

  MaskPlan plan;
  plan.mask_rate = mask_rate;
  std::vector<std::size_t> order = seeded_ordering(phrases.size(), seed, "mask-order");
  for (std::size_t pos : order) {
    if (static_cast<int>(plan.chosen.size()) >= slots) break;
    const Span& span = phrases[pos];
    bool overlaps = std::any_of(plan.chosen.begin(), plan.chosen.end(),
                                [&](const Span& c) { return spans_overlap(c, span); });
    if (overlaps) continue;  // dropped, walk continues to the next draw
    plan.chosen.push_back(span);
  }
  std::sort(plan.chosen.begin(), plan.chosen.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  for (const auto& span : plan.chosen) {
    plan.masked_token_counts.push_back(
        static_cast<int>(tokenize(span.surface).size()));
  }
  return plan;
}

std::string sentinel_token(int index) {
  return "<extra_id_" + std::to_string(index) + ">";
}

std::string mask_and_fill(const Example& example, const MaskPlan& plan,
                          const ServiceClient& client) {
  if (plan.chosen.empty()) throw Error("mask_and_fill: empty mask plan");
  const std::string& ref = example.reference_text;

  std::string masked;
  std::vector<InfillSpan> requests;
  int cursor = 0;
  for (std::size_t i = 0; i < plan.chosen.size(); ++i) {
    const Span& span = plan.chosen[i];
    masked += ref.substr(cursor, span.start - cursor);
    masked += sentinel_token(static_cast<int>(i));
    requests.push_back({plan.masked_token_counts[i], span.surface});
    cursor = span.end;
  }
  masked += ref.substr(cursor);

  std::vector<std::string> fills = client.infill(masked, requests);

  std::string out;
  cursor = 0;
  for (std::size_t i = 0; i < plan.chosen.size(); ++i) {
    const Span& span = plan.chosen[i];
    out += ref.substr(cursor, span.start - cursor);
    out += fills[i];
    cursor = span.end;
  }
  out += ref.substr(cursor);
  return out;
}

PoolBuildConfig PoolBuildConfig::defaults() {
  PoolBuildConfig config;
  config.variants = {
      {Method::mask_and_fill, "low", 0.25, 10},
      {Method::mask_and_fill, "high", 0.75, 10},
      {Method::swap_intrinsic, "low", 0.5, 10},
      {Method::swap_intrinsic, "high", 1.0, 10},
      {Method::swap_extrinsic, "low", 0.5, 10},
      {Method::swap_extrinsic, "high", 1.0, 10},
  };
  return config;
}

std::vector<BeamRecord> load_beams(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<BeamRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(where + ": parse error: " + e.what());
    }
    BeamRecord r;
    r.example_id = j.at("example_id").get<std::string>();
    r.generator = j.at("generator").get<std::string>();
    r.beam_rank = j.at("beam_rank").get<int>();
    if (r.beam_rank < 0) throw Error(where + ": beam_rank must be >= 0");
    r.text = j.at("text").get<std::string>();
    if (r.text.empty()) throw Error(where + ": empty beam text");
    for (const auto& v : j.at("token_logprobs")) {
      double lp = v.get<double>();
      if (lp > 0.0) throw Error(where + ": token_logprobs must be <= 0");
      r.token_logprobs.push_back(lp);
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::string pad2(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

std::string make_candidate_id(const std::string& example_id, const std::string& stem,
                              int index) {
  return example_id + "::" + stem + "::" + pad2(index);
}

Candidate base_candidate(const Example& example, Method method) {
  Candidate c;
  c.example_id = example.example_id;
  c.method = method;
  c.polarity_hint = expected_polarity(method);
  return c;
}

}  // namespace

CandidatePool build_pool(const Example& example, PoolKind kind,
                         const PoolBuildConfig& config,
                         const ServiceClient& generation_client,
                         const EntityIndex* corpus_index) {
  CandidatePool pool;
  pool.example = example;
  pool.pool_kind = kind;

  if (kind == PoolKind::relevance) {
    if (config.beam_files.empty()) {
      throw Error("build_pool: relevance pool requires beam files");
    }
    for (const auto& spec : config.beam_files) {
      std::vector<BeamRecord> beams = load_beams(spec.path);
      std::erase_if(beams, [&](const BeamRecord& r) {
        return r.example_id != example.example_id || r.generator != spec.generator;
      });
      if (beams.empty()) {
        throw Error("build_pool: no beams for example '" + example.example_id +
                    "' and generator '" + spec.generator + "' in " + spec.path);
      }
      std::sort(beams.begin(), beams.end(),
                [](const BeamRecord& a, const BeamRecord& b) {
                  return a.beam_rank < b.beam_rank;
                });
      for (const auto& r : beams) {
        Candidate c = base_candidate(example, Method::diverse_beam);
        c.candidate_id = make_candidate_id(example.example_id,
                                           "diverse_beam_" + spec.generator,
                                           r.beam_rank);
        c.method_params = {{"p", 1}, {"generator", spec.generator}};
        c.beam_rank = r.beam_rank;
        c.text = r.text;
        c.token_logprobs = r.token_logprobs;
        c.scores.n_tokens = static_cast<int>(tokenize(c.text).size());
        pool.candidates.push_back(std::move(c));
      }
    }
    return pool;
  }

  // Faithfulness: corruption ladder, then paraphrases, then the reference.
  // Uniqueness is tracked pool-wide (including the reference) so regen
  // attempts steer away from collisions across variants, not just within one.
  std::set<std::string> pool_texts;
  if (config.include_reference) pool_texts.insert(dedup_key(example.reference_text));
  for (const auto& variant : config.variants) {
    for (int index = 0; index < variant.count; ++index) {
      std::string text;
      // Fresh seeds on collision keep variant members distinct where the
      // annotation space allows it; after the attempt budget the duplicate
      // is kept and resolved by dedup at load.
      for (int attempt = 0; attempt <= config.max_regen_attempts; ++attempt) {
        std::vector<std::string> parts = {example.example_id,
                                          to_string(variant.method), variant.label,
                                          std::to_string(index)};
        if (attempt > 0) parts.push_back("attempt" + std::to_string(attempt));
        std::uint64_t seed = seed_from(parts);
        if (variant.method == Method::mask_and_fill) {
          MaskPlan plan = plan_masks(example, variant.rate, seed);
          text = mask_and_fill(example, plan, generation_client);
        } else {
          SwapMode mode = variant.method == Method::swap_intrinsic
                              ? SwapMode::intrinsic
                              : SwapMode::extrinsic;
          SwapPlan plan = plan_swaps(example, mode, variant.rate, corpus_index, seed);
          text = apply_swaps(example.reference_text, plan);
        }
        if (!pool_texts.count(dedup_key(text))) break;
      }
      pool_texts.insert(dedup_key(text));
      Candidate c = base_candidate(example, variant.method);
      c.candidate_id = make_candidate_id(
          example.example_id, to_string(variant.method) + "_" + variant.label, index);
      c.method_params = variant.method == Method::mask_and_fill
                            ? json{{"m", variant.rate}, {"level", variant.label}}
                            : json{{"s", variant.rate}, {"level", variant.label}};
      c.text = text;
      c.scores.n_tokens = static_cast<int>(tokenize(c.text).size());
      pool.candidates.push_back(std::move(c));
    }
  }

  if (config.paraphrase_count > 0) {
    std::vector<std::string> outputs = generation_client.paraphrase(
        example.reference_text, config.demonstrations,
        config.paraphrase_temperature, config.paraphrase_count,
        config.paraphrase_instruction);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      Candidate c = base_candidate(example, Method::paraphrase);
      c.candidate_id = make_candidate_id(example.example_id, "paraphrase",
                                         static_cast<int>(i));
      c.method_params = {{"t", config.paraphrase_temperature}};
      c.text = outputs[i];
      c.scores.n_tokens = static_cast<int>(tokenize(c.text).size());
      pool.candidates.push_back(std::move(c));
    }
  }

  if (config.include_reference) {
    Candidate c = base_candidate(example, Method::reference);
    c.candidate_id = make_candidate_id(example.example_id, "reference", 0);
    c.text = example.reference_text;
    c.scores.n_tokens = static_cast<int>(tokenize(c.text).size());
    pool.candidates.push_back(std::move(c));
  }

  if (pool.candidates.empty()) {
    throw Error("build_pool: empty pool for example '" + example.example_id + "'");
  }
  return pool;
}

}  // namespace calset
