"""Keyword dictionary construction from true-positive self-explanations.

The pipeline harvests episodes whose two sentences share a relation label,
keeps the ones a vanilla model itself answers Yes on, samples a handful of
those explanations per label, asks an extraction model for the trigger
keywords, merges them with the label's own tokens, and post-processes the
union into the per-label entity/relation keyword lists used at scoring time.

Construction happens offline; scoring only ever loads the persisted JSON.
"""

from __future__ import annotations

import ast
import json
import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .core import (
    Decision,
    Episode,
    GoldAnswer,
    ModelOutput,
    RelationLabel,
    SentenceInstance,
    effective_answer,
)
from .templates import KEYWORD_EXTRACTION_CASE, KEYWORD_EXTRACTION_HEADER, fill
from .textnorm import dedupe_keywords, is_entity_keyword, normalize_keyword, tokenize_label

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class KeywordParseError(ValueError):
    """No bracketed string list could be extracted from a response."""


class DictionaryFormatError(ValueError):
    """A persisted dictionary file is malformed or has the wrong version."""


@dataclass(frozen=True)
class GoodCase:
    """A true-positive explanation: matched pair the vanilla model got right."""

    support: SentenceInstance
    test: SentenceInstance
    label: RelationLabel
    explanation: str
    episode_id: str = ""

    def __post_init__(self) -> None:
        if not (self.support.relation == self.test.relation == self.label):
            raise ValueError("good case labels must agree on both sentences")


@dataclass(frozen=True)
class BuilderConfig:
    """Builder knobs; sample size per label is bounded to keep prompts small."""

    samples_per_label: int = 5
    seed: int = 0
    max_parallel_labels: int = 1
    vanilla_model_id: str = ""
    extractor_model_id: str = ""
    no_relation_cues: tuple[str, ...] = ()
    built_at: str | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.samples_per_label <= 5:
            raise ValueError("samples_per_label must be between 1 and 5")
        if self.max_parallel_labels < 1:
            raise ValueError("max_parallel_labels must be at least 1")


@dataclass(frozen=True)
class DictionaryMeta:
    built_at: str | None
    vanilla_model_id: str
    extractor_model_id: str
    samples_per_label: int
    seed: int
    degraded_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.samples_per_label <= 5:
            raise ValueError("samples_per_label must be between 1 and 5")


@dataclass(frozen=True)
class DictionaryEntry:
    label: RelationLabel
    entity_keywords: tuple[str, ...]
    relation_keywords: tuple[str, ...]
    provenance: tuple[str, ...] = ()


@dataclass(frozen=True)
class KeywordDictionary:
    entries: dict[RelationLabel, DictionaryEntry] = field(default_factory=dict)
    meta: DictionaryMeta = DictionaryMeta(None, "", "", 1, 0)


def collect_positive_pairs(train: list[Episode]) -> list[Episode]:
    """Episodes where both sentences carry the same label and the answer is Yes."""
    return [
        ep
        for ep in train
        if ep.support.relation == ep.test.relation
        and effective_answer(ep) is GoldAnswer.YES
    ]


def filter_true_positives(
    pairs: list[Episode], infer: Callable[[Episode], ModelOutput]
) -> list[GoodCase]:
    """Run the vanilla model on matched pairs and keep the Yes answers.

    Unparseable outputs are skipped and counted in a warning; transport
    errors raised by ``infer`` propagate (its retry budget has already been
    spent by then).
    """
    good: list[GoodCase] = []
    unparseable = 0
    for episode in pairs:
        output = infer(episode)
        if output.decision is Decision.UNPARSEABLE:
            unparseable += 1
            continue
        if output.decision is Decision.YES:
            good.append(
                GoodCase(
                    support=episode.support,
                    test=episode.test,
                    label=episode.support.relation,
                    explanation=output.explanation,
                    episode_id=episode.id,
                )
            )
    if unparseable:
        logger.warning("skipped %d unparseable output(s) while harvesting", unparseable)
    return good


def sample_good_cases(
    cases: list[GoodCase], k: int, seed: int
) -> dict[RelationLabel, list[GoodCase]]:
    """Pick up to ``k`` cases per label, seeded and without replacement."""
    if not 1 <= k <= 5:
        raise ValueError("k must be between 1 and 5")
    grouped: dict[RelationLabel, list[GoodCase]] = {}
    for case in cases:
        grouped.setdefault(case.label, []).append(case)
    rng = random.Random(seed)
    sampled: dict[RelationLabel, list[GoodCase]] = {}
    for label in sorted(grouped, key=lambda l: l.raw):
        group = grouped[label]
        sampled[label] = list(group) if len(group) <= k else rng.sample(group, k)
    return sampled


def build_extraction_prompt(label: RelationLabel, cases: list[GoodCase]) -> str:
    """Render the keyword-extraction prompt with one block per sampled case."""
    if not 1 <= len(cases) <= 5:
        raise ValueError("extraction prompt takes between 1 and 5 cases")
    blocks = [
        fill(
            KEYWORD_EXTRACTION_CASE,
            {
                "index": str(index),
                "content": case.explanation,
                "support_sentence": case.support.text,
                "test_sentence": case.test.text,
            },
        )
        for index, case in enumerate(cases, start=1)
    ]
    return fill(KEYWORD_EXTRACTION_HEADER, {"relation": label.raw}) + "\n".join(blocks)


_BRACKETED_RE = re.compile(r"\[[^\[\]]*\]", re.DOTALL)


def parse_keyword_response(raw: str) -> list[str]:
    """Pull the first bracketed string list out of a model response.

    Tolerates surrounding prose, code fences, and single- or double-quoted
    entries; entries are whitespace-trimmed.
    """
    for match in _BRACKETED_RE.finditer(raw):
        try:
            value = ast.literal_eval(match.group())
        except (ValueError, SyntaxError):
            continue
        if isinstance(value, list) and all(isinstance(item, str) for item in value):
            return [item.strip() for item in value]
    raise KeywordParseError(f"no string list found in response: {raw[:80]!r}")


def assemble_dictionary(
    per_label_keywords: dict[RelationLabel, list[str]],
    config: BuilderConfig,
    provenance: dict[RelationLabel, list[str]] | None = None,
    degraded_labels: tuple[str, ...] = (),
) -> KeywordDictionary:
    """Merge extracted keywords with label tokens into the final dictionary.

    Label tokens come first, then extracted keywords in order; an extracted
    keyword whose stem collides with an entity-type word is routed to the
    entity list, everything else to the relation list.  Labels are emitted in
    sorted order so assembly is independent of extraction timing.
    """
    provenance = provenance or {}
    entries: dict[RelationLabel, DictionaryEntry] = {}
    for label in sorted(per_label_keywords, key=lambda l: l.raw):
        label_keywords = tokenize_label(label)
        entity = list(label_keywords.entity)
        relation = list(label_keywords.relation)
        for keyword in per_label_keywords[label]:
            for normalized in normalize_keyword(keyword):
                if is_entity_keyword(normalized):
                    entity.append(normalized)
                else:
                    relation.append(normalized)
        entries[label] = DictionaryEntry(
            label=label,
            entity_keywords=tuple(dedupe_keywords(entity)),
            relation_keywords=tuple(dedupe_keywords(relation)),
            provenance=tuple(provenance.get(label, ())),
        )
    meta = DictionaryMeta(
        built_at=config.built_at,
        vanilla_model_id=config.vanilla_model_id,
        extractor_model_id=config.extractor_model_id,
        samples_per_label=config.samples_per_label,
        seed=config.seed,
        degraded_labels=tuple(sorted(degraded_labels)),
    )
    return KeywordDictionary(entries=entries, meta=meta)


def build_dictionary(
    train: list[Episode],
    infer: Callable[[Episode], ModelOutput],
    extract: Callable[[str], str],
    config: BuilderConfig,
) -> KeywordDictionary:
    """Run the full offline pipeline: harvest, sample, extract, assemble.

    Per-label extraction failures are retried twice, then the label falls
    back to its tokens alone and is recorded in meta.degraded_labels.  The
    no_relation entry is always present, built from label tokens plus any
    configured cue phrases (it has no positive pairs to harvest from).
    """
    pairs = collect_positive_pairs(train)
    good = filter_true_positives(pairs, infer)
    sampled = sample_good_cases(good, config.samples_per_label, config.seed)

    degraded: list[str] = []

    def extract_label(label: RelationLabel) -> list[str]:
        prompt = build_extraction_prompt(label, sampled[label])
        for attempt in range(3):
            try:
                return parse_keyword_response(extract(prompt))
            except (KeywordParseError, OSError) as exc:
                logger.warning(
                    "keyword extraction for %s failed (attempt %d/3): %s",
                    label.raw, attempt + 1, exc,
                )
        degraded.append(label.raw)
        return []

    labels = sorted(sampled, key=lambda l: l.raw)
    if config.max_parallel_labels > 1 and labels:
        with ThreadPoolExecutor(max_workers=config.max_parallel_labels) as pool:
            keyword_lists = list(pool.map(extract_label, labels))
    else:
        keyword_lists = [extract_label(label) for label in labels]

    per_label = dict(zip(labels, keyword_lists))
    no_relation = RelationLabel("no_relation")
    if no_relation not in per_label:
        per_label[no_relation] = list(config.no_relation_cues)

    provenance = {
        label: [case.episode_id for case in cases] for label, cases in sampled.items()
    }
    return assemble_dictionary(
        per_label, config, provenance=provenance, degraded_labels=tuple(degraded)
    )


def _check_no_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise DictionaryFormatError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def save_dictionary(dictionary: KeywordDictionary, path: str | Path) -> None:
    """Write canonical JSON: sorted keys, two-space indent, LF, UTF-8."""
    payload = {
        "format_version": FORMAT_VERSION,
        "meta": {
            "built_at": dictionary.meta.built_at,
            "vanilla_model_id": dictionary.meta.vanilla_model_id,
            "extractor_model_id": dictionary.meta.extractor_model_id,
            "samples_per_label": dictionary.meta.samples_per_label,
            "seed": dictionary.meta.seed,
            "degraded_labels": list(dictionary.meta.degraded_labels),
        },
        "entries": {
            label.raw: {
                "entity": list(entry.entity_keywords),
                "relation": list(entry.relation_keywords),
                "provenance": list(entry.provenance),
            }
            for label, entry in dictionary.entries.items()
        },
    }
    text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
        handle.write("\n")


def load_dictionary(path: str | Path) -> KeywordDictionary:
    """Load a dictionary saved by save_dictionary; inverse up to equality."""
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle, object_pairs_hook=_check_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise DictionaryFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DictionaryFormatError(f"{path}: expected a JSON object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DictionaryFormatError(
            f"{path}: format version {version!r} not supported (want {FORMAT_VERSION})"
        )
    meta_obj = payload.get("meta", {})
    try:
        meta = DictionaryMeta(
            built_at=meta_obj.get("built_at"),
            vanilla_model_id=str(meta_obj.get("vanilla_model_id", "")),
            extractor_model_id=str(meta_obj.get("extractor_model_id", "")),
            samples_per_label=int(meta_obj.get("samples_per_label", 1)),
            seed=int(meta_obj.get("seed", 0)),
            degraded_labels=tuple(meta_obj.get("degraded_labels", ())),
        )
    except (ValueError, TypeError) as exc:
        raise DictionaryFormatError(f"{path}: bad meta: {exc}") from exc
    entries: dict[RelationLabel, DictionaryEntry] = {}
    raw_entries = payload.get("entries")
    if not isinstance(raw_entries, dict):
        raise DictionaryFormatError(f"{path}: missing entries object")
    for raw_label, obj in raw_entries.items():
        label = RelationLabel(raw_label)
        if not isinstance(obj, dict) or "entity" not in obj or "relation" not in obj:
            raise DictionaryFormatError(f"{path}: malformed entry for {raw_label!r}")
        entries[label] = DictionaryEntry(
            label=label,
            entity_keywords=tuple(obj["entity"]),
            relation_keywords=tuple(obj["relation"]),
            provenance=tuple(obj.get("provenance", ())),
        )
    return KeywordDictionary(entries=entries, meta=meta)
