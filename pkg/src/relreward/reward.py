"""Reward computation: dictionary hit scoring, accuracy payoff, advantages.

The hit score for one explanation against one relation label is

    S = (w_entity * H_entity + w_relation * H_relation) / (words / N)

where H_entity and H_relation count which dictionary keywords appear in the
explanation (each keyword scores at most once), and ``words`` is the raw
whitespace word count of the full explanation.  The episode-level explanation
reward averages S over the two gold labels, and the total reward adds the
asymmetric accuracy payoff.  Group advantages standardize totals within a
sampled group.

Everything here is pure given an immutable dictionary; missing labels degrade
to a zero score with a warning instead of failing, because scoring runs
inside training loops that must not crash.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .core import Decision, Episode, GoldAnswer, ModelOutput, RelationLabel, effective_answer
from .dictionary import DictionaryEntry, KeywordDictionary
from .textnorm import match_keyword, normalize, word_count

logger = logging.getLogger(__name__)

# (prediction, gold) -> payoff; correct Yes outweighs correct No and wrong Yes
# is punished hardest, countering the 1:K positive/negative imbalance.
DEFAULT_ACC_TABLE: dict[tuple[Decision, GoldAnswer], float] = {
    (Decision.YES, GoldAnswer.YES): 3.0,
    (Decision.NO, GoldAnswer.NO): 1.0,
    (Decision.YES, GoldAnswer.NO): -3.0,
    (Decision.NO, GoldAnswer.YES): -1.0,
    (Decision.UNPARSEABLE, GoldAnswer.YES): 0.0,
    (Decision.UNPARSEABLE, GoldAnswer.NO): 0.0,
}


@dataclass(frozen=True)
class RewardConfig:
    """Reward hyperparameters; defaults are the fixed values used throughout."""

    w_entity: float = 0.4
    w_relation: float = 1.0
    length_normalizer: float = 5.0
    std_epsilon: float = 1e-8
    acc_table: dict[tuple[Decision, GoldAnswer], float] = field(
        default_factory=lambda: dict(DEFAULT_ACC_TABLE)
    )

    def __post_init__(self) -> None:
        if self.w_entity < 0 or self.w_relation < 0:
            raise ValueError("hit weights must be non-negative")
        if self.length_normalizer <= 0:
            raise ValueError("length normalizer must be positive")
        if self.std_epsilon <= 0:
            raise ValueError("std epsilon must be positive")
        missing = [
            (d, g)
            for d in Decision
            for g in (GoldAnswer.YES, GoldAnswer.NO)
            if (d, g) not in self.acc_table
        ]
        if missing:
            raise ValueError(f"acc_table not total, missing {missing}")


@dataclass(frozen=True)
class HitCounts:
    """Distinct dictionary keywords found in an explanation."""

    entity_hits: int
    relation_hits: int
    matched_keywords: tuple[str, ...]


@dataclass(frozen=True)
class RewardBreakdown:
    """Full decomposition of one scored output, for logging and audits."""

    s1: float
    s2: float
    hit_reward: float
    acc_reward: float
    total: float
    counts_1: HitCounts
    counts_2: HitCounts
    word_count: int

    def to_dict(self) -> dict:
        def counts(c: HitCounts) -> dict:
            return {
                "entity_hits": c.entity_hits,
                "relation_hits": c.relation_hits,
                "matched_keywords": list(c.matched_keywords),
            }

        return {
            "s1": self.s1,
            "s2": self.s2,
            "hit_reward": self.hit_reward,
            "acc_reward": self.acc_reward,
            "total": self.total,
            "counts_1": counts(self.counts_1),
            "counts_2": counts(self.counts_2),
            "word_count": self.word_count,
        }


_EMPTY_COUNTS = HitCounts(0, 0, ())


def hit_counts(explanation: str, entry: DictionaryEntry) -> HitCounts:
    """Count which of an entry's keywords appear in the explanation.

    Indicator semantics: a keyword contributes at most 1 however often it
    occurs.  Stopwords are retained in the token stream so phrases like
    "no relation" stay matchable.  For the no_relation entry the entity count
    is defined to equal the relation count.
    """
    tokens = normalize(explanation, drop_stopwords=False)
    matched: list[str] = []
    entity_hits = 0
    for keyword in entry.entity_keywords:
        if match_keyword(keyword, tokens):
            entity_hits += 1
            matched.append(keyword)
    relation_hits = 0
    for keyword in entry.relation_keywords:
        if match_keyword(keyword, tokens):
            relation_hits += 1
            matched.append(keyword)
    if entry.label.is_no_relation:
        entity_hits = relation_hits
    return HitCounts(entity_hits, relation_hits, tuple(matched))


def hit_score(counts: HitCounts, words: int, cfg: RewardConfig) -> float:
    """Length-normalized weighted hit score; an empty explanation scores 0."""
    if words <= 0:
        return 0.0
    weighted = cfg.w_entity * counts.entity_hits + cfg.w_relation * counts.relation_hits
    return weighted / (words / cfg.length_normalizer)


def hit_at_dict_reward(
    explanation: str,
    r1: RelationLabel,
    r2: RelationLabel,
    dictionary: KeywordDictionary,
    cfg: RewardConfig,
) -> RewardBreakdown:
    """Average the hit score of one explanation over both gold labels.

    A label absent from the dictionary scores 0 with a warning; scoring never
    raises for data reasons.
    """
    words = word_count(explanation)

    def score_label(label: RelationLabel) -> tuple[float, HitCounts]:
        entry = dictionary.entries.get(label)
        if entry is None:
            logger.warning("label %s not in dictionary, scoring 0", label.raw)
            return 0.0, _EMPTY_COUNTS
        counts = hit_counts(explanation, entry)
        return hit_score(counts, words, cfg), counts

    s1, counts_1 = score_label(r1)
    s2, counts_2 = score_label(r2)
    hit = (s1 + s2) / 2.0
    return RewardBreakdown(
        s1=s1,
        s2=s2,
        hit_reward=hit,
        acc_reward=0.0,
        total=hit,
        counts_1=counts_1,
        counts_2=counts_2,
        word_count=words,
    )


def accuracy_reward(decision: Decision, gold: GoldAnswer, cfg: RewardConfig) -> float:
    """Payoff for the predicted label against the binary gold answer."""
    if gold is GoldAnswer.DERIVED:
        raise ValueError("gold answer must be resolved to Yes/No before scoring")
    return cfg.acc_table[(decision, gold)]


def combined_reward(
    output: ModelOutput,
    episode: Episode,
    dictionary: KeywordDictionary,
    cfg: RewardConfig,
) -> RewardBreakdown:
    """Total reward: accuracy payoff plus the explanation hit reward."""
    partial = hit_at_dict_reward(
        output.explanation,
        episode.support.relation,
        episode.test.relation,
        dictionary,
        cfg,
    )
    acc = accuracy_reward(output.decision, effective_answer(episode), cfg)
    return RewardBreakdown(
        s1=partial.s1,
        s2=partial.s2,
        hit_reward=partial.hit_reward,
        acc_reward=acc,
        total=acc + partial.hit_reward,
        counts_1=partial.counts_1,
        counts_2=partial.counts_2,
        word_count=partial.word_count,
    )


def group_advantages(rewards: list[float], cfg: RewardConfig) -> list[float]:
    """Standardize rewards within a group (population standard deviation).

    Groups with (near-)identical rewards yield all-zero advantages rather
    than dividing by a vanishing deviation.
    """
    if not rewards:
        raise ValueError("advantage group must contain at least one reward")
    n = len(rewards)
    mean = sum(rewards) / n
    std = math.sqrt(sum((r - mean) ** 2 for r in rewards) / n)
    if std < cfg.std_epsilon:
        return [0.0] * n
    return [(r - mean) / std for r in rewards]
