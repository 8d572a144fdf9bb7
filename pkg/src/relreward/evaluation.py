"""Automatic metrics, human-evaluation sampling/export, and Cohen's kappa.

F1 is binary over the positive (Yes) class across all episode pairs.  An
unparseable prediction scores as a non-Yes answer (a miss when the gold is
Yes, a correct rejection when it is No) and is tallied separately so parse
failures stay visible.
"""

from __future__ import annotations

import csv
import logging
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import ConfusionCategory, Decision, Episode, GoldAnswer, ModelOutput, classify, effective_answer

logger = logging.getLogger(__name__)

# sampling order for human evaluation: TP, TN, FP, FN
_HUMAN_EVAL_CATEGORIES = (
    ConfusionCategory.YES_YES,
    ConfusionCategory.NO_NO,
    ConfusionCategory.NO_YES,
    ConfusionCategory.YES_NO,
)

MAX_ITEM_SCORE = 3

_CSV_COLUMNS = ("episode_id", "category", "explanation", "score", "rater_id")


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    unparseable: int
    precision: float
    recall: float
    f1: float
    per_category: dict[ConfusionCategory, int]

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "unparseable": self.unparseable,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_category": {c.value: n for c, n in self.per_category.items()},
        }


@dataclass(frozen=True)
class HumanEvalItem:
    episode_id: str
    category: ConfusionCategory
    explanation: str
    score: Optional[int] = None
    rater_id: str = ""

    def __post_init__(self) -> None:
        if self.score is not None and self.score not in (0, 1, 2, 3):
            raise ValueError(f"score must be within 0..{MAX_ITEM_SCORE}, got {self.score}")


@dataclass(frozen=True)
class AgreementReport:
    kappa: float
    observed_agreement: float
    expected_agreement: float

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "observed_agreement": self.observed_agreement,
            "expected_agreement": self.expected_agreement,
        }


def score_predictions(pairs: list[tuple[Episode, ModelOutput]]) -> MetricsReport:
    """Precision/recall/F1 on the Yes class, with confusion buckets.

    Zero denominators yield 0.0 rather than an error, so empty or degenerate
    prediction sets report cleanly.
    """
    tp = fp = fn = tn = unparseable = 0
    per_category = {category: 0 for category in ConfusionCategory}
    for episode, output in pairs:
        gold = effective_answer(episode)
        per_category[classify(gold, output.decision)] += 1
        if output.decision is Decision.UNPARSEABLE:
            unparseable += 1
        predicted_yes = output.decision is Decision.YES
        if gold is GoldAnswer.YES:
            if predicted_yes:
                tp += 1
            else:
                fn += 1
        else:
            if predicted_yes:
                fp += 1
            else:
                tn += 1
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        unparseable=unparseable,
        precision=precision,
        recall=recall,
        f1=f1,
        per_category=per_category,
    )


def sample_for_human_eval(
    pairs: list[tuple[Episode, ModelOutput]],
    per_category: int,
    seed: int,
) -> list[HumanEvalItem]:
    """Seeded sample of explanations per confusion category, blind to gold.

    Items carry only the episode id, the category, and the explanation text;
    gold labels never reach the raters.  Categories short of per_category
    contribute what they have, with a warning.
    """
    if per_category < 1:
        raise ValueError("per_category must be at least 1")
    buckets: dict[ConfusionCategory, list[tuple[Episode, ModelOutput]]] = {
        category: [] for category in _HUMAN_EVAL_CATEGORIES
    }
    for episode, output in pairs:
        category = classify(effective_answer(episode), output.decision)
        if category in buckets:
            buckets[category].append((episode, output))
    rng = random.Random(seed)
    items: list[HumanEvalItem] = []
    for category in _HUMAN_EVAL_CATEGORIES:
        bucket = buckets[category]
        take = min(per_category, len(bucket))
        if take < per_category:
            logger.warning(
                "category %s has only %d item(s), wanted %d",
                category.value, len(bucket), per_category,
            )
        chosen = bucket if take == len(bucket) else rng.sample(bucket, take)
        for episode, output in chosen:
            items.append(
                HumanEvalItem(
                    episode_id=episode.id,
                    category=category,
                    explanation=output.explanation,
                )
            )
    return items


def aggregate_human_scores(items: list[HumanEvalItem]) -> dict[ConfusionCategory, int]:
    """Per-category score sums; every item must be scored within the rubric."""
    totals = {category: 0 for category in _HUMAN_EVAL_CATEGORIES}
    counts = {category: 0 for category in _HUMAN_EVAL_CATEGORIES}
    for item in items:
        if item.score is None:
            raise ValueError(f"item {item.episode_id} is unscored")
        totals[item.category] = totals.get(item.category, 0) + item.score
        counts[item.category] = counts.get(item.category, 0) + 1
    for category, total in totals.items():
        if total > MAX_ITEM_SCORE * counts[category]:
            raise ValueError(f"category {category.value} total exceeds rubric maximum")
    return totals


def cohen_kappa(a: Sequence[int], b: Sequence[int]) -> AgreementReport:
    """Chance-corrected agreement between two raters over the same items."""
    if len(a) != len(b):
        raise ValueError(f"rating vectors differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("rating vectors must be non-empty")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    count_a = Counter(a)
    count_b = Counter(b)
    expected = sum(
        (count_a[c] / n) * (count_b[c] / n) for c in count_a.keys() | count_b.keys()
    )
    if expected >= 1.0:
        # both raters constant on the same category; agreement is total
        kappa = 1.0
    else:
        kappa = (observed - expected) / (1.0 - expected)
    return AgreementReport(
        kappa=kappa,
        observed_agreement=observed,
        expected_agreement=expected,
    )


def export_human_eval_csv(items: list[HumanEvalItem], path: str | Path) -> None:
    """Write the rater spreadsheet with the fixed column order."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_CSV_COLUMNS)
        for item in items:
            writer.writerow(
                [
                    item.episode_id,
                    item.category.value,
                    item.explanation,
                    "" if item.score is None else item.score,
                    item.rater_id,
                ]
            )


def read_human_eval_csv(path: str | Path) -> list[HumanEvalItem]:
    """Read a rater spreadsheet back; blank scores stay unscored."""
    items: list[HumanEvalItem] = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = set(_CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s): {', '.join(sorted(missing))}")
        for row in reader:
            score_text = (row["score"] or "").strip()
            items.append(
                HumanEvalItem(
                    episode_id=row["episode_id"],
                    category=ConfusionCategory(row["category"]),
                    explanation=row["explanation"],
                    score=int(score_text) if score_text else None,
                    rater_id=row["rater_id"] or "",
                )
            )
    return items
