"""Deterministic text normalization: tokenizing, stemming, stopword removal.

Feeds two consumers with the same rules: dictionary post-processing (keyword
lists are stored stemmed, lowercase, stopword-free) and explanation matching
at scoring time.  All functions are pure; the stemming kernel is selected in
``_kernels`` (compiled when available).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from ._kernels import stem, stem_words
from .core import RelationLabel

# Word chunks are unicode alphanumeric runs; internal hyphens bind so a
# hyphenated word can be expanded into both its parts and its joined form.
_WORD_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*")

# Relation-label type prefixes expand into the entity words they stand for.
ENTITY_EXPANSIONS = {
    "per": ("person",),
    "org": ("organization", "company"),
    "loc": ("location",),
    "location": ("location",),
    "people": ("person",),
    "business": ("business",),
    "film": ("film",),
}

NO_RELATION_PHRASE = "no relation"


def _load_stopwords() -> frozenset[str]:
    text = (resources.files("relreward") / "data" / "stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


STOPWORDS = _load_stopwords()

# Stems of the entity-expansion words, used to route extracted keywords into
# the entity list when they collide with a type word.
_ENTITY_STEMS = frozenset(
    stem(word) for words in ENTITY_EXPANSIONS.values() for word in words
)


@dataclass(frozen=True)
class NormalizedToken:
    """A lowercased surface token paired with its stem."""

    surface: str
    stem: str


@dataclass(frozen=True)
class LabelKeywords:
    """Entity and relation keyword lists derived from a relation label."""

    entity: tuple[str, ...]
    relation: tuple[str, ...]


def _surfaces(text: str) -> list[str]:
    """Lowercase and split into token surfaces, expanding hyphenated chunks."""
    out: list[str] = []
    for match in _WORD_RE.finditer(text.lower()):
        chunk = match.group()
        if "-" in chunk:
            out.extend(chunk.split("-"))
            out.append(chunk.replace("-", ""))
        else:
            out.append(chunk)
    return out


def normalize(text: str, drop_stopwords: bool) -> list[NormalizedToken]:
    """Tokenize ``text`` into (surface, stem) pairs in reading order.

    Hyphenated words contribute their parts and the hyphen-free joined form.
    No deduplication happens here: explanation streams keep their raw length.
    """
    surfaces = _surfaces(text)
    if drop_stopwords:
        surfaces = [s for s in surfaces if s not in STOPWORDS]
    stems = stem_words(surfaces)
    return [NormalizedToken(s, st) for s, st in zip(surfaces, stems)]


def normalize_keyword(keyword: str) -> list[str]:
    """Post-process one raw keyword into stored, matchable keyword strings.

    Returns stemmed, lowercase, stopword-free keywords (multi-word keywords
    as space-joined stems).  A hyphenated keyword yields both its split and
    joined variants; a keyword made only of stopwords yields nothing.
    """
    variants = [keyword.replace("-", " ")]
    if "-" in keyword:
        variants.append(keyword.replace("-", ""))
    out = []
    for variant in variants:
        stems = [t.stem for t in normalize(variant, drop_stopwords=True)]
        if stems:
            normalized = " ".join(stems)
            if normalized not in out:
                out.append(normalized)
    return out


def is_entity_keyword(normalized_keyword: str) -> bool:
    """True when a normalized keyword collides with an entity-type stem."""
    return normalized_keyword in _ENTITY_STEMS


def tokenize_label(label: RelationLabel) -> LabelKeywords:
    """Decompose a relation label into entity and relation keyword stems.

    The type prefix (the head of ``type:predicate`` labels, the first two
    path segments of ``/domain/type/predicate`` labels) expands through
    ENTITY_EXPANSIONS into entity keywords; the remaining segments become
    relation keywords.
    ``no_relation`` is special-cased: stopword removal is suspended and the
    literal phrase "no relation" is kept so the label stays matchable.
    """
    raw = label.raw
    if label.is_no_relation:
        return LabelKeywords(entity=(), relation=(stem("relation"), NO_RELATION_PHRASE))

    if ":" in raw:
        head, _, tail = raw.partition(":")
        type_segments = [head]
        rest_segments = [s for s in re.split(r"[:/_]", tail) if s]
    elif raw.startswith("/"):
        segments = [s for s in raw.split("/") if s]
        type_segments = segments[:2]
        rest_segments = [w for s in segments[2:] for w in s.split("_") if w]
    else:
        type_segments = []
        rest_segments = [s for s in re.split(r"[:/_]", raw) if s]

    entity: list[str] = []
    for segment in type_segments:
        for word in segment.lower().split("_"):
            for expanded in ENTITY_EXPANSIONS.get(word, (word,)):
                stemmed = stem(expanded)
                if stemmed and stemmed not in entity:
                    entity.append(stemmed)

    relation = _stem_segment_words(rest_segments, drop_stopwords=True)
    if not relation:
        # all content words were stopwords; keep them rather than emit nothing
        relation = _stem_segment_words(rest_segments, drop_stopwords=False)
    return LabelKeywords(entity=tuple(entity), relation=tuple(relation))


def _stem_segment_words(words: list[str], drop_stopwords: bool) -> tuple[str, ...]:
    out: list[str] = []
    for word in words:
        lowered = word.lower()
        if drop_stopwords and lowered in STOPWORDS:
            continue
        stemmed = stem(lowered)
        if stemmed and stemmed not in out:
            out.append(stemmed)
    return tuple(out)


def match_keyword(keyword: str, tokens: list[NormalizedToken]) -> bool:
    """True iff the keyword's stems appear contiguously in the token stream.

    Each keyword word matches a token whose stem equals either the word as
    stored or its stem.  Matching on both sides makes stored stems (which
    must not be re-stemmed: stem("univers") == "univer") and literal phrases
    such as "no relation" behave identically.
    """
    words = keyword.lower().split()
    if not words or not tokens:
        return False
    candidates = [(w, stem(w)) for w in words]
    stems = [t.stem for t in tokens]
    span = len(words)
    for start in range(len(stems) - span + 1):
        if all(
            stems[start + offset] in pair
            for offset, pair in enumerate(candidates)
        ):
            return True
    return False


def dedupe_keywords(keywords: list[str]) -> list[str]:
    """Drop keywords whose stem sequence was already seen, keeping first."""
    seen: set[tuple[str, ...]] = set()
    out: list[str] = []
    for keyword in keywords:
        key = tuple(stem(w) for w in keyword.lower().split())
        if key not in seen:
            seen.add(key)
            out.append(keyword)
    return out


def word_count(text: str) -> int:
    """Raw whitespace word count, the |explanation| of the length normalizer."""
    return len(text.split())
