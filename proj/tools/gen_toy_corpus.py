#!/usr/bin/env python3
"""Regenerates the committed toy corpus under data/toy.

The corpus is fully synthetic and deterministic. Shape constraints the
pipeline relies on:
  * every reference has 2 typed entities, 2 typed numbers, and 9 multi-word
    noun phrases, so the default corruption ladder always has slots to fill
  * every semantic type used in a reference has at least 2 same-type,
    different-surface alternatives on the source side (4 for entities), so
    swap planning never collapses to identity
  * all 20 beams per example are pairwise distinct, so pool loading keeps
    all of them
"""

import json
import os

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data", "toy")

DRUGS = ["metformin", "lisinopril", "atorvastatin", "warfarin", "ibuprofen",
         "amoxicillin", "prednisone", "insulin", "omeprazole", "sertraline"]
CONDITIONS = ["hypertension", "diabetes", "asthma", "migraine", "arthritis",
              "pneumonia", "anemia", "depression", "obesity", "eczema"]


class SentenceBuilder:
    """Accumulates one sentence while recording span offsets."""

    def __init__(self):
        self.text = ""
        self.spans = []  # (list_name, type, start, end, surface)

    def add(self, piece, list_name=None, stype=""):
        start = len(self.text)
        self.text += piece
        if list_name:
            self.spans.append((list_name, stype, start, len(self.text), piece))
        return self


def join_sentences(builders):
    """Joins sentences with single spaces, shifting span offsets."""
    text = ""
    spans = []
    for b in builders:
        if text:
            text += " "
        offset = len(text)
        text += b.text
        for (list_name, stype, start, end, surface) in b.spans:
            spans.append((list_name, stype, start + offset, end + offset, surface))
    return text, spans


def spans_to_json(spans, target):
    by_list = {"entities": [], "numbers": [], "noun_phrases": []}
    for (list_name, stype, start, end, surface) in spans:
        by_list[list_name].append({
            "start": start, "end": end, "surface": surface,
            "type": stype, "target": target,
        })
    return by_list


def build_example(i):
    drug = DRUGS[i]
    d_alts = [DRUGS[(i + k) % 10] for k in range(1, 5)]
    cond = CONDITIONS[i]
    c_alts = [CONDITIONS[(i + k) % 10] for k in range(1, 5)]

    n_participants = str(120 + 7 * i)
    n_weeks = str(12 + i)
    age = str(47 + i)
    adh = str(81 + i)
    drop = str(4 + i)
    scr = str(19 + i)
    n_points = str(14 + i)
    pct_ref = str(61 + i)

    src = []
    s = SentenceBuilder()
    s.add("This trial enrolled ").add(n_participants, "numbers", "count")
    s.add(" adults with ").add(cond, "entities", "condition")
    s.add(" at four clinical sites.")
    src.append(s)

    s = SentenceBuilder()
    s.add("Participants received ").add(drug, "entities", "drug")
    s.add(" or matched placebo for ").add(n_weeks, "numbers", "count")
    s.add(" weeks.")
    src.append(s)

    s = SentenceBuilder()
    s.add("Earlier cohorts had tested ").add(d_alts[0], "entities", "drug")
    s.add(", ").add(d_alts[1], "entities", "drug")
    s.add(", and ").add(d_alts[2], "entities", "drug")
    s.add(" without durable benefit.")
    src.append(s)

    s = SentenceBuilder()
    s.add("Prior exposure to ").add(d_alts[3], "entities", "drug")
    s.add(" was documented for patients with ").add(c_alts[0], "entities", "condition")
    s.add(".")
    src.append(s)

    s = SentenceBuilder()
    s.add("Comorbid ").add(c_alts[1], "entities", "condition")
    s.add(" and ").add(c_alts[2], "entities", "condition")
    s.add(" were tracked in the registry alongside ")
    s.add(c_alts[3], "entities", "condition").add(".")
    src.append(s)

    s = SentenceBuilder()
    s.add("Mean adherence reached ").add(adh, "numbers", "percent")
    s.add(" percent across both arms and median age was ")
    s.add(age, "numbers", "count").add(" years.")
    src.append(s)

    s = SentenceBuilder()
    s.add("Screening excluded ").add(scr, "numbers", "percent")
    s.add(" percent of referred cases and dropout stayed under ")
    s.add(drop, "numbers", "percent").add(" percent.")
    src.append(s)

    source_text, source_spans = join_sentences(src)

    ref = []
    s = SentenceBuilder()
    s.add("Treatment with ").add(drug, "entities", "drug")
    s.add(" ").add("improved outcomes", "noun_phrases")
    s.add(" for ").add("patients with " + cond, "noun_phrases")
    s.add(" in ").add("this cohort", "noun_phrases").add(".")
    ref.append(s)

    s = SentenceBuilder()
    s.add("Relative symptom scores", "noun_phrases")
    s.add(" fell ").add(n_points + " points", "noun_phrases")
    s.add(" ").add("from baseline", "noun_phrases").add(".")
    ref.append(s)

    s = SentenceBuilder()
    s.add("Overall adherence", "noun_phrases")
    s.add(" stayed near ").add(pct_ref + " percent", "noun_phrases")
    s.add(" through ").add("final follow-up", "noun_phrases").add(".")
    ref.append(s)

    reference_text, ref_spans = join_sentences(ref)

    # The entity/number spans inside the reference, annotated separately so
    # they stay independent of the noun-phrase list.
    extra = []
    cond_surface = "patients with " + cond
    cond_start = reference_text.index(cond_surface) + len("patients with ")
    extra.append(("entities", "condition", cond_start, cond_start + len(cond), cond))
    p_start = reference_text.index(n_points + " points")
    extra.append(("numbers", "count", p_start, p_start + len(n_points), n_points))
    pct_start = reference_text.index(pct_ref + " percent")
    extra.append(("numbers", "percent", pct_start, pct_start + len(pct_ref), pct_ref))

    annotations = spans_to_json(extra + ref_spans, "reference")
    source_annotations = spans_to_json(source_spans, "source")
    for key in annotations:
        annotations[key].extend(source_annotations[key])
        annotations[key].sort(key=lambda sp: (sp["target"], sp["start"]))

    return {
        "example_id": f"toy{i + 1:02d}",
        "source_text": source_text,
        "source_sentences": [b.text for b in src],
        "reference_text": reference_text,
        "annotations": annotations,
    }


def build_beams(example, generator, g):
    words = example["reference_text"].split()
    beams = []
    for rank in range(10):
        keep = max(6, len(words) - 2 * rank - 3 * g)
        text = " ".join(words[:keep]).rstrip(".,")
        text += f" with {generator} review {rank + g + 2} pending."
        n = len(text.split())
        logprobs = [round(-(0.05 + 0.02 * rank + 0.01 * ((tok + g) % 5)), 6)
                    for tok in range(n)]
        beams.append({
            "example_id": example["example_id"],
            "generator": generator,
            "beam_rank": rank,
            "text": text,
            "token_logprobs": logprobs,
        })
    return beams


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    examples = [build_example(i) for i in range(10)]

    with open(os.path.join(OUT_DIR, "examples.jsonl"), "w") as f:
        for ex in examples:
            f.write(json.dumps(ex, sort_keys=True) + "\n")

    for g, generator in enumerate(["primera", "longt5"]):
        with open(os.path.join(OUT_DIR, f"beams_{generator}.jsonl"), "w") as f:
            for ex in examples:
                for beam in build_beams(ex, generator, g):
                    f.write(json.dumps(beam, sort_keys=True) + "\n")

    # Source-side (type, surface) pairs, the same construction the
    # index-entities stage performs.
    pairs = set()
    for ex in examples:
        for list_name in ("entities", "numbers"):
            for sp in ex["annotations"][list_name]:
                if sp["target"] == "source":
                    pairs.add((sp["type"], sp["surface"]))
    with open(os.path.join(OUT_DIR, "entity_index.tsv"), "w") as f:
        for stype, surface in sorted(pairs):
            f.write(f"{stype}\t{surface}\n")

    demos = [
        {"original": "The cohort improved rapidly under treatment.",
         "paraphrase": "The cohort recovered quickly while being treated."},
        {"original": "Doctors observed fewer complications among patients.",
         "paraphrase": "Clinicians saw complications decline across the group."},
    ]
    with open(os.path.join(OUT_DIR, "demonstrations.jsonl"), "w") as f:
        for d in demos:
            f.write(json.dumps(d, sort_keys=True) + "\n")

    config = {
        "corpus": {
            "examples": "examples.jsonl",
            "beam_files": [
                {"generator": "primera", "path": "beams_primera.jsonl"},
                {"generator": "longt5", "path": "beams_longt5.jsonl"},
            ],
            "entity_index": "entity_index.tsv",
            "demonstrations": "demonstrations.jsonl",
            "semantic_types": ["condition", "count", "drug", "percent"],
        },
        "pool": {
            "variants": [
                {"method": "mask_and_fill", "label": "low", "rate": 0.25, "count": 10},
                {"method": "mask_and_fill", "label": "high", "rate": 0.75, "count": 10},
                {"method": "swap_intrinsic", "label": "low", "rate": 0.5, "count": 10},
                {"method": "swap_intrinsic", "label": "high", "rate": 1.0, "count": 10},
                {"method": "swap_extrinsic", "label": "low", "rate": 0.5, "count": 10},
                {"method": "swap_extrinsic", "label": "high", "rate": 1.0, "count": 10},
            ],
            "paraphrase_count": 5,
            "paraphrase_temperature": 0.7,
            "include_reference": True,
            "max_regen_attempts": 4,
        },
        "selection": {"k_rank": 4, "k_pos": 2, "k_neg": 2,
                      "enumeration_cap": 200000},
        "losses": {
            "relevance": {"lambda_mle": 0.1, "lambda_ca": 1.0,
                          "lambda_margin": 0.001, "alpha": 1.0,
                          "tau_scale": 0.01},
            "faithfulness": {"lambda_mle": 1.0, "lambda_ca": 1.0, "tau": 1.0,
                             "include_positive_in_denominator": False,
                             "latent_dim": 8},
        },
        "seed": 17,
        "out_dir": "runs",
    }
    with open(os.path.join(OUT_DIR, "config.json"), "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)
        f.write("\n")

    print(f"wrote toy corpus to {os.path.abspath(OUT_DIR)}")


if __name__ == "__main__":
    main()
