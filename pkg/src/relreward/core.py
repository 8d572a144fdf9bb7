"""Domain data model shared by every module, plus episode-file ingestion.

All types are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

logger = logging.getLogger(__name__)

NO_RELATION = "no_relation"


class GoldAnswer(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    DERIVED = "Derived"


class Decision(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    UNPARSEABLE = "Unparseable"


class ConfusionCategory(str, enum.Enum):
    """Gold-then-prediction buckets; unparseable predictions get their own."""

    YES_YES = "yes_yes"
    NO_NO = "no_no"
    NO_YES = "no_yes"
    YES_NO = "yes_no"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class RelationLabel:
    """A relation label compared by exact string equality after trimming."""

    raw: str

    def __post_init__(self) -> None:
        trimmed = self.raw.strip()
        if not trimmed:
            raise ValueError("relation label must be non-empty")
        object.__setattr__(self, "raw", trimmed)

    @property
    def is_no_relation(self) -> bool:
        return self.raw == NO_RELATION

    def __str__(self) -> str:
        return self.raw


@dataclass(frozen=True)
class SentenceInstance:
    """One sentence with its entity pair and gold relation label."""

    text: str
    subject: str
    object: str
    relation: RelationLabel


@dataclass(frozen=True)
class Episode:
    """A one-shot instance: a support sentence matched against a test sentence."""

    id: str
    support: SentenceInstance
    test: SentenceInstance
    gold_answer: GoldAnswer = GoldAnswer.DERIVED


@dataclass(frozen=True)
class ModelOutput:
    """A raw completion plus its parsed explanation, summaries and decision."""

    raw_text: str
    explanation: str
    decision: Decision
    summary_1: Optional[str] = None
    summary_2: Optional[str] = None
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if len(self.explanation) > len(self.raw_text):
            raise ValueError("explanation cannot be longer than raw_text")


def effective_answer(episode: Episode) -> GoldAnswer:
    """Resolve an episode's gold answer to a binary Yes/No.

    An explicit gold answer wins.  A derived answer is Yes iff both labels
    are equal and neither is no_relation: a (no_relation, no_relation) pair
    counts as No.
    """
    if episode.gold_answer is not GoldAnswer.DERIVED:
        return episode.gold_answer
    same = episode.support.relation == episode.test.relation
    if same and not episode.support.relation.is_no_relation:
        return GoldAnswer.YES
    return GoldAnswer.NO


def classify(gold: GoldAnswer, decision: Decision) -> ConfusionCategory:
    """Bucket a (gold, prediction) pair; total over all combinations."""
    if decision is Decision.UNPARSEABLE:
        return ConfusionCategory.UNPARSEABLE
    if gold is GoldAnswer.YES:
        return ConfusionCategory.YES_YES if decision is Decision.YES else ConfusionCategory.YES_NO
    return ConfusionCategory.NO_YES if decision is Decision.YES else ConfusionCategory.NO_NO


@dataclass(frozen=True)
class LineError:
    line_no: int
    message: str


class EpisodeLoadError(Exception):
    """Raised when an episode file contains malformed lines."""

    def __init__(self, path: str, errors: list[LineError]):
        self.path = path
        self.errors = errors
        detail = "; ".join(f"line {e.line_no}: {e.message}" for e in errors[:5])
        more = f" (+{len(errors) - 5} more)" if len(errors) > 5 else ""
        super().__init__(f"{path}: {len(errors)} malformed line(s): {detail}{more}")


def _sentence_from_dict(obj: dict, field_name: str) -> SentenceInstance:
    if not isinstance(obj, dict):
        raise ValueError(f'"{field_name}" must be an object')
    missing = [k for k in ("text", "subject", "object", "relation") if k not in obj]
    if missing:
        raise ValueError(f'"{field_name}" missing field(s): {", ".join(missing)}')
    return SentenceInstance(
        text=str(obj["text"]),
        subject=str(obj["subject"]),
        object=str(obj["object"]),
        relation=RelationLabel(str(obj["relation"])),
    )


def episode_from_dict(obj: dict, default_id: str) -> Episode:
    """Build an Episode from one parsed JSONL object."""
    for key in ("support", "test"):
        if key not in obj:
            raise ValueError(f'missing "{key}" field')
    gold_raw = obj.get("gold_answer")
    if gold_raw is None:
        gold = GoldAnswer.DERIVED
    elif gold_raw in (GoldAnswer.YES.value, GoldAnswer.NO.value):
        gold = GoldAnswer(gold_raw)
    else:
        raise ValueError(f'gold_answer must be "Yes", "No" or null, got {gold_raw!r}')
    return Episode(
        id=str(obj.get("id") or default_id),
        support=_sentence_from_dict(obj["support"], "support"),
        test=_sentence_from_dict(obj["test"], "test"),
        gold_answer=gold,
    )


def episode_to_dict(episode: Episode) -> dict:
    def sentence(s: SentenceInstance) -> dict:
        return {
            "text": s.text,
            "subject": s.subject,
            "object": s.object,
            "relation": s.relation.raw,
        }

    gold = None if episode.gold_answer is GoldAnswer.DERIVED else episode.gold_answer.value
    return {
        "id": episode.id,
        "support": sentence(episode.support),
        "test": sentence(episode.test),
        "gold_answer": gold,
    }


def validate_episode(episode: Episode) -> list[str]:
    """Soft checks: entity spans should occur in their sentence text."""
    warnings = []
    for name, s in (("support", episode.support), ("test", episode.test)):
        for role in ("subject", "object"):
            span = getattr(s, role)
            if span and span not in s.text:
                warnings.append(
                    f"episode {episode.id}: {name}.{role} {span!r} not found in sentence text"
                )
    return warnings


def load_episodes(path: str | Path, format: str = "jsonl") -> list[Episode]:
    """Load episodes from a JSONL file, one JSON object per line.

    Blank lines are skipped.  Malformed lines and duplicate ids are collected
    and reported together in a single EpisodeLoadError carrying line numbers.
    Span-containment problems are warnings, not errors: source corpora carry
    tokenization artifacts.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported episode format: {format!r}")
    path = Path(path)
    episodes: list[Episode] = []
    errors: list[LineError] = []
    seen_ids: set[str] = set()
    stem_name = path.stem
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not a JSON object")
                episode = episode_from_dict(obj, default_id=f"{stem_name}:{line_no}")
            except (ValueError, TypeError) as exc:
                errors.append(LineError(line_no, str(exc)))
                continue
            if episode.id in seen_ids:
                errors.append(LineError(line_no, f"duplicate id {episode.id!r}"))
                continue
            seen_ids.add(episode.id)
            for warning in validate_episode(episode):
                logger.warning("%s", warning)
            episodes.append(episode)
    if errors:
        raise EpisodeLoadError(str(path), errors)
    return episodes


def save_episodes(episodes: Iterable[Episode], path: str | Path) -> None:
    """Write episodes as JSONL mirroring the load schema."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for episode in episodes:
            handle.write(json.dumps(episode_to_dict(episode), ensure_ascii=False))
            handle.write("\n")
