"""Four-stage tag filtering that distills raw social tags into an emotion vocabulary.

Stages, in order: normalization and stopword removal, spell/existence
checking against an English wordlist, part-of-speech gating (adjectives
and adverbs only), multiword removal, and a curated blocklist standing in
for manual review. POS tagging is lexicon-driven: tags are isolated words
with no sentence context, so each word carries its most frequent POS.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

POS_TAGS = ("ADJ", "ADV", "NOUN", "VERB", "OTHER")
EMOTION_POS = ("ADJ", "ADV")

STAGES = ("empty", "stopword", "spelling", "pos", "multiword", "blocklist", "duplicate")

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})
_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class FilterResources:
    stopwords: frozenset[str]
    wordlist: frozenset[str]
    pos_lexicon: dict[str, str]
    blocklist: frozenset[str]


@dataclass
class FilterReport:
    """Per-stage accounting of dropped tags; counts reconcile input vs output."""

    input_count: int = 0
    kept_count: int = 0
    dropped: dict[str, str] = field(default_factory=dict)  # raw tag -> stage
    stage_counts: Counter = field(default_factory=Counter)

    def reconciles(self) -> bool:
        return self.input_count == self.kept_count + sum(self.stage_counts.values())


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise ConfigError(f"missing resource file: {path}")
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip() and not line.startswith("#")]


def load_resources(stopwords_path, wordlist_path, pos_path, blocklist_path) -> FilterResources:
    """Load the four resource files (one entry per line, pos lines are word<TAB>POS)."""
    stopwords = frozenset(w.lower() for w in _read_lines(Path(stopwords_path)))
    wordlist = frozenset(w.lower() for w in _read_lines(Path(wordlist_path)))
    blocklist = frozenset(w.lower() for w in _read_lines(Path(blocklist_path)))
    pos_lexicon: dict[str, str] = {}
    for i, line in enumerate(_read_lines(Path(pos_path)), start=1):
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in POS_TAGS:
            raise ConfigError(f"bad pos lexicon line {i} in {pos_path}: {line!r}")
        pos_lexicon[parts[0].lower()] = parts[1]
    return FilterResources(stopwords, wordlist, pos_lexicon, blocklist)


def default_resources() -> FilterResources:
    """Resources shipped with the package; the blocklist is a curated starting point."""
    data = resources.files("tagrisk").joinpath("data")
    return load_resources(
        data / "stopwords.txt",
        data / "wordlist.txt",
        data / "pos_lexicon.tsv",
        data / "blocklist.txt",
    )


def normalize(tag: str) -> str:
    """Lowercase, strip punctuation, collapse internal whitespace, trim."""
    lowered = tag.lower().translate(_PUNCT_TABLE)
    return " ".join(lowered.split())


def _edits1(word: str):
    """All strings at edit distance 1 (deletes, transposes, replaces, inserts)."""
    splits = [(word[:i], word[i:]) for i in range(len(word) + 1)]
    for left, right in splits:
        if right:
            yield left + right[1:]
            if len(right) > 1:
                yield left + right[1] + right[0] + right[2:]
            for ch in _ALPHABET:
                if ch != right[0]:
                    yield left + ch + right[1:]
        for ch in _ALPHABET:
            yield left + ch + right


def spell_correct(word: str, wordlist: frozenset[str]) -> str | None:
    """Return the word itself, its unique distance-1 wordlist neighbor, or None.

    Ambiguous corrections (two or more candidates) are dropped rather than
    guessed, biasing the vocabulary toward precision.
    """
    if word in wordlist:
        return word
    candidates = {w for w in _edits1(word) if w in wordlist}
    if len(candidates) == 1:
        return candidates.pop()
    return None


def filter_tags(tags: list[str], resources: FilterResources) -> tuple[set[str], FilterReport]:
    """Run the full filtering pipeline over raw tags.

    Multiword tags skip the spelling and POS stages (those operate on single
    words) and are dropped at the dedicated multiword stage, so the report
    attributes each drop to the stage that actually rejects it.
    """
    report = FilterReport(input_count=len(tags))
    kept: set[str] = set()
    for raw in tags:
        stage, word = _classify(normalize(raw), resources)
        if stage is None and word in kept:
            stage = "duplicate"
        if stage is None:
            kept.add(word)
            report.kept_count += 1
        else:
            report.dropped[raw] = stage
            report.stage_counts[stage] += 1
    return kept, report


def _classify(tag: str, resources: FilterResources) -> tuple[str | None, str]:
    """Return (stage the normalized tag is dropped at or None, surviving word)."""
    if not tag:
        return "empty", tag
    if tag in resources.stopwords:
        return "stopword", tag
    word = tag
    if " " not in tag:
        corrected = spell_correct(tag, resources.wordlist)
        if corrected is None:
            return "spelling", tag
        word = corrected
        if resources.pos_lexicon.get(word, "OTHER") not in EMOTION_POS:
            return "pos", word
    if " " in tag:
        return "multiword", tag
    if word in resources.blocklist:
        return "blocklist", word
    return None, word
