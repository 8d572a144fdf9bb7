"""Corpus splitting, training-set sampling, and stratified test sampling.

Training sampling caps matched pairs per label, draws the no_relation
negatives per support-relation quota, and thins the cross-label negatives
while approximately preserving their label distribution.  Test sampling is a
stratified random draw that keeps the corpus proportions.  "Approximately
preserving" is pinned to largest-remainder apportionment with a lexicographic
tie-break, and one seeded Mersenne Twister (random.Random) drives every draw,
so results replay exactly for a fixed seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Hashable, Optional

from .core import Episode, RelationLabel

_CATEGORY_POSITIVE = "positive"
_CATEGORY_NO_RELATION = "neg_no_relation"
_CATEGORY_CROSS = "neg_cross"


@dataclass(frozen=True)
class CorpusSplit:
    """The three-way partition of an episode corpus by label structure."""

    positives: tuple[Episode, ...]
    neg_no_relation: tuple[Episode, ...]
    neg_cross: tuple[Episode, ...]


@dataclass(frozen=True)
class SamplerConfig:
    max_positives_per_label: int
    cross_sample_count: int
    seed: int = 0
    quotas: dict[RelationLabel, int] = field(default_factory=dict)
    # used to derive proportional per-relation quotas when quotas is empty
    no_relation_total: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_positives_per_label < 0 or self.cross_sample_count < 0:
            raise ValueError("sample counts must be non-negative")
        if any(q < 0 for q in self.quotas.values()):
            raise ValueError("quotas must be non-negative")
        if self.no_relation_total is not None and self.no_relation_total < 0:
            raise ValueError("no_relation_total must be non-negative")


@dataclass(frozen=True)
class CorpusStats:
    total: int
    positives: int
    neg_no_relation: int
    neg_cross: int
    per_label: dict[str, int]
    ratio: Optional[tuple[int, int]]
    no_relation_share: float

    @property
    def negatives(self) -> int:
        return self.neg_no_relation + self.neg_cross

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "positives": self.positives,
            "negatives": self.negatives,
            "neg_no_relation": self.neg_no_relation,
            "neg_cross": self.neg_cross,
            "per_label": dict(sorted(self.per_label.items())),
            "ratio": None if self.ratio is None else f"{self.ratio[0]}:{self.ratio[1]}",
            "ratio_real": None if self.ratio is None else self.ratio[1] / self.ratio[0],
            "no_relation_share": self.no_relation_share,
        }


def _category(episode: Episode) -> str:
    if episode.support.relation == episode.test.relation:
        return _CATEGORY_POSITIVE
    if episode.test.relation.is_no_relation:
        return _CATEGORY_NO_RELATION
    return _CATEGORY_CROSS


def split_corpus(episodes: list[Episode]) -> CorpusSplit:
    """Partition by label structure: matched, test-side no_relation, cross."""
    buckets: dict[str, list[Episode]] = {
        _CATEGORY_POSITIVE: [],
        _CATEGORY_NO_RELATION: [],
        _CATEGORY_CROSS: [],
    }
    for episode in episodes:
        buckets[_category(episode)].append(episode)
    return CorpusSplit(
        positives=tuple(buckets[_CATEGORY_POSITIVE]),
        neg_no_relation=tuple(buckets[_CATEGORY_NO_RELATION]),
        neg_cross=tuple(buckets[_CATEGORY_CROSS]),
    )


def largest_remainder(sizes: dict[Hashable, int], target: int) -> dict[Hashable, int]:
    """Apportion ``target`` across strata proportionally to their sizes.

    Floors first, then hands the leftover units to the largest fractional
    remainders; ties break on ascending stratum key so the result is
    order-independent.  Every stratum lands within one of its exact quota.
    """
    total = sum(sizes.values())
    if target > total:
        raise ValueError(f"target {target} exceeds population {total}")
    if total == 0:
        return {key: 0 for key in sizes}
    base: dict[Hashable, int] = {}
    remainders: list[tuple[float, Hashable]] = []
    assigned = 0
    for key in sorted(sizes):
        exact = sizes[key] * target / total
        floor = math.floor(exact)
        base[key] = floor
        assigned += floor
        remainders.append((exact - floor, key))
    leftover = target - assigned
    remainders.sort(key=lambda pair: (-pair[0], pair[1]))
    for _, key in remainders[:leftover]:
        base[key] += 1
    return base


def _group_by_support(episodes: tuple[Episode, ...]) -> dict[RelationLabel, list[Episode]]:
    groups: dict[RelationLabel, list[Episode]] = {}
    for episode in episodes:
        groups.setdefault(episode.support.relation, []).append(episode)
    return groups


def _take(rng: random.Random, group: list[Episode], count: int) -> list[Episode]:
    if count >= len(group):
        return list(group)
    return rng.sample(group, count)


def sample_training_set(split: CorpusSplit, cfg: SamplerConfig) -> list[Episode]:
    """Draw the training corpus per the three-bucket sampling procedure.

    Matched pairs are down-sampled to the per-label cap; no_relation
    negatives follow the per-relation quotas (all kept when no quota applies
    and no total is configured); cross negatives are thinned to
    cross_sample_count with per-(support, test) strata apportioned by largest
    remainder.  The result is shuffled; identical inputs and seed replay the
    identical sequence.
    """
    rng = random.Random(cfg.seed)
    out: list[Episode] = []

    positive_groups = _group_by_support(split.positives)
    for label in sorted(positive_groups, key=lambda l: l.raw):
        out.extend(_take(rng, positive_groups[label], cfg.max_positives_per_label))

    no_rel_groups = _group_by_support(split.neg_no_relation)
    quotas: dict[RelationLabel, int]
    if cfg.quotas:
        quotas = dict(cfg.quotas)
    elif cfg.no_relation_total is not None:
        sizes = {label.raw: len(group) for label, group in no_rel_groups.items()}
        target = min(cfg.no_relation_total, sum(sizes.values()))
        apportioned = largest_remainder(sizes, target)
        quotas = {label: apportioned[label.raw] for label in no_rel_groups}
    else:
        quotas = {}
    for label in sorted(no_rel_groups, key=lambda l: l.raw):
        group = no_rel_groups[label]
        quota = quotas.get(label, len(group))
        out.extend(_take(rng, group, quota))

    cross_groups: dict[tuple[str, str], list[Episode]] = {}
    for episode in split.neg_cross:
        key = (episode.support.relation.raw, episode.test.relation.raw)
        cross_groups.setdefault(key, []).append(episode)
    if cross_groups:
        sizes = {key: len(group) for key, group in cross_groups.items()}
        target = min(cfg.cross_sample_count, sum(sizes.values()))
        targets = largest_remainder(sizes, target)
        for key in sorted(cross_groups):
            out.extend(_take(rng, cross_groups[key], targets[key]))

    rng.shuffle(out)
    return out


def sample_test_set(episodes: list[Episode], target_size: int, seed: int) -> list[Episode]:
    """Random test sample stratified by (category, support relation).

    Stratum counts follow largest-remainder apportionment, so every stratum
    with share p of the corpus contributes floor(p*n) or ceil(p*n) items.
    """
    if target_size > len(episodes):
        raise ValueError(
            f"target size {target_size} exceeds corpus size {len(episodes)}"
        )
    rng = random.Random(seed)
    strata: dict[tuple[str, str], list[Episode]] = {}
    for episode in episodes:
        key = (_category(episode), episode.support.relation.raw)
        strata.setdefault(key, []).append(episode)
    sizes = {key: len(group) for key, group in strata.items()}
    targets = largest_remainder(sizes, target_size)
    out: list[Episode] = []
    for key in sorted(strata):
        out.extend(_take(rng, strata[key], targets[key]))
    rng.shuffle(out)
    return out


def corpus_stats(episodes: list[Episode]) -> CorpusStats:
    """Counts, positive:negative ratio, and per-label (test-side) histogram."""
    split = split_corpus(episodes)
    per_label: dict[str, int] = {}
    no_relation_count = 0
    for episode in episodes:
        raw = episode.test.relation.raw
        per_label[raw] = per_label.get(raw, 0) + 1
        if episode.test.relation.is_no_relation:
            no_relation_count += 1
    positives = len(split.positives)
    negatives = len(split.neg_no_relation) + len(split.neg_cross)
    if positives > 0 and negatives > 0:
        divisor = math.gcd(positives, negatives)
        ratio = (positives // divisor, negatives // divisor)
    else:
        ratio = None
    total = len(episodes)
    return CorpusStats(
        total=total,
        positives=positives,
        neg_no_relation=len(split.neg_no_relation),
        neg_cross=len(split.neg_cross),
        per_label=per_label,
        ratio=ratio,
        no_relation_share=(no_relation_count / total) if total else 0.0,
    )
