"""Domain types shared by every stage of the pipeline."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

K10_MIN = 10
K10_MAX = 50
AT_RISK_THRESHOLD = 29
NO_RISK_BELOW = 20
MAX_TAGS_PER_TRACK = 50

GEMS_CATEGORIES = (
    "Wonder",
    "Transcendence",
    "Tenderness",
    "Nostalgia",
    "Peacefulness",
    "Power",
    "Joyful Activation",
    "Tension",
    "Sadness",
)

UMBRELLAS = ("Sublimity", "Vitality", "Unease")


class RiskLabel(enum.Enum):
    NO_RISK = "NoRisk"
    AT_RISK = "AtRisk"
    EXCLUDED = "Excluded"

    def __str__(self) -> str:
        return self.value

    @property
    def severity(self) -> int:
        """Ordering NoRisk < Excluded < AtRisk."""
        return {"NoRisk": 0, "Excluded": 1, "AtRisk": 2}[self.value]


def classify_risk(k10: int) -> RiskLabel:
    """Map a K10 distress score onto a risk group.

    Scores of 29 and above mark the at-risk group, scores below 20 the
    no-risk group; the band in between belongs to neither and is excluded
    from all group comparisons.
    """
    if not isinstance(k10, int) or isinstance(k10, bool):
        raise ValidationError(f"k10 must be an integer, got {k10!r}")
    if not K10_MIN <= k10 <= K10_MAX:
        raise ValidationError(f"k10 must be in [{K10_MIN}, {K10_MAX}], got {k10}")
    if k10 >= AT_RISK_THRESHOLD:
        return RiskLabel.AT_RISK
    if k10 < NO_RISK_BELOW:
        return RiskLabel.NO_RISK
    return RiskLabel.EXCLUDED


@dataclass(frozen=True)
class Participant:
    user_id: str
    k10: int
    hums_healthy: float
    hums_unhealthy: float
    personality: tuple[float, float, float, float, float]  # O, C, E, A, N
    risk: RiskLabel

    def __post_init__(self):
        if not self.user_id:
            raise ValidationError("user_id must be non-empty")
        expected = classify_risk(self.k10)
        if self.risk is not expected:
            raise ValidationError(
                f"risk {self.risk} inconsistent with k10={self.k10} (expected {expected})"
            )
        if len(self.personality) != 5:
            raise ValidationError("personality must have exactly 5 trait scores")

    @classmethod
    def from_scores(cls, user_id, k10, hums_healthy, hums_unhealthy, personality) -> "Participant":
        """Build a participant, deriving the risk label from the K10 score."""
        return cls(
            user_id=user_id,
            k10=k10,
            hums_healthy=float(hums_healthy),
            hums_unhealthy=float(hums_unhealthy),
            personality=tuple(float(p) for p in personality),
            risk=classify_risk(k10),
        )


@dataclass(frozen=True)
class TagAssignment:
    tag: str
    weight: int  # times the tag was assigned to the track

    def __post_init__(self):
        if not self.tag:
            raise ValidationError("tag must be non-empty")
        if not isinstance(self.weight, int) or isinstance(self.weight, bool) or self.weight < 0:
            raise ValidationError(f"tag weight must be a non-negative integer, got {self.weight!r}")


@dataclass(frozen=True)
class TrackRecord:
    track_id: str
    artist: str
    title: str
    tags: tuple[TagAssignment, ...]

    def __post_init__(self):
        if not self.track_id:
            raise ValidationError("track_id must be non-empty")
        if len(self.tags) > MAX_TAGS_PER_TRACK:
            raise ValidationError(
                f"track {self.track_id} has {len(self.tags)} tags, limit is {MAX_TAGS_PER_TRACK}"
            )
        weights = [t.weight for t in self.tags]
        if any(a < b for a, b in zip(weights, weights[1:])):
            raise ValidationError(f"track {self.track_id} tags not sorted by descending weight")


@dataclass(frozen=True)
class Window:
    """Listening-history extraction window: center timestamp +/- months."""

    center: str  # ISO-8601 date or datetime
    half_width_months: int

    def __post_init__(self):
        if self.half_width_months < 1:
            raise ValidationError("window half-width must be >= 1 month")


@dataclass(frozen=True)
class ListeningHistory:
    user_id: str
    entries: tuple[tuple[str, int], ...]  # (track_id, playcount), playcount >= 1
    window: Window
    top_n: int

    def __post_init__(self):
        if self.top_n < 1:
            raise ValidationError("top_n must be >= 1")
        if len(self.entries) > self.top_n:
            raise ValidationError(
                f"history for {self.user_id} has {len(self.entries)} entries, top_n={self.top_n}"
            )
        seen = set()
        for track_id, playcount in self.entries:
            if playcount < 1:
                raise ValidationError(f"playcount must be >= 1, got {playcount} for {track_id}")
            if track_id in seen:
                raise ValidationError(f"duplicate track {track_id} in history for {self.user_id}")
            seen.add(track_id)

    def total_playcount(self) -> int:
        return sum(pc for _, pc in self.entries)

    def top(self, n: int) -> "ListeningHistory":
        """Restrict to the n highest-playcount entries (ties by track_id)."""
        ranked = sorted(self.entries, key=lambda e: (-e[1], e[0]))[:n]
        return ListeningHistory(self.user_id, tuple(ranked), self.window, min(n, self.top_n))


@dataclass(frozen=True)
class EmotionPoint:
    """A point in valence-arousal(-dominance) space; every axis lives in [1, 9]."""

    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) not in (2, 3):
            raise ValidationError(f"emotion point must have 2 or 3 coordinates, got {len(self.coords)}")
        for c in self.coords:
            if not math.isfinite(c) or not 1.0 <= c <= 9.0:
                raise ValidationError(f"coordinate {c} outside [1, 9]")

    @property
    def space(self) -> str:
        return "VA" if len(self.coords) == 2 else "VAD"

    def distance(self, other: "EmotionPoint") -> float:
        if len(self.coords) != len(other.coords):
            raise ValidationError(f"space mismatch: {self.space} vs {other.space}")
        return math.dist(self.coords, other.coords)


@dataclass(frozen=True)
class EmotionCategory:
    name: str
    terms: tuple[tuple[str, float], ...]  # (emotion term, factor loading)
    centroid: EmotionPoint
    umbrella: str

    def __post_init__(self):
        if self.name not in GEMS_CATEGORIES:
            raise ValidationError(f"unknown category {self.name!r}")
        if self.umbrella not in UMBRELLAS:
            raise ValidationError(f"unknown umbrella {self.umbrella!r}")
        for term, loading in self.terms:
            if not 0.0 < loading <= 1.0:
                raise ValidationError(f"loading for {term!r} must be in (0, 1], got {loading}")
        if not any(loading == 1.0 for _, loading in self.terms):
            raise ValidationError(f"category {self.name} has no defining term with loading 1.0")


@dataclass(frozen=True)
class TagVocabulary:
    """The filtered emotion-tag set and its partition into categories."""

    category_of: dict[str, str]

    @property
    def tags(self) -> set[str]:
        return set(self.category_of)

    def tags_in(self, category: str) -> set[str]:
        return {t for t, c in self.category_of.items() if c == category}

    def __len__(self) -> int:
        return len(self.category_of)


@dataclass(frozen=True)
class ScoreTable:
    """Users x classes matrix of non-negative prevalence scores."""

    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.cols)):
            raise ValidationError(
                f"score matrix shape {self.values.shape} does not match "
                f"{len(self.rows)} users x {len(self.cols)} classes"
            )
        if np.any(self.values < 0):
            raise ValidationError("prevalence scores must be non-negative")
        self.values.flags.writeable = False

    def row(self, user_id: str) -> np.ndarray:
        return self.values[self.rows.index(user_id)]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.cols.index(name)]


@dataclass(frozen=True)
class GenreCluster:
    cluster_id: int
    members: tuple[str, ...]
    label_tags: tuple[str, ...] = field(default=())

    @property
    def label(self) -> str:
        return "/".join(self.label_tags) if self.label_tags else "/".join(self.members[:1])


@dataclass(frozen=True)
class GenreClusterSet:
    clusters: tuple[GenreCluster, ...]
    unassigned: tuple[str, ...] = field(default=())

    def __post_init__(self):
        seen: set[str] = set()
        for cluster in self.clusters:
            overlap = seen.intersection(cluster.members)
            if overlap:
                raise ValidationError(f"clusters are not disjoint: {sorted(overlap)}")
            seen.update(cluster.members)
        if seen.intersection(self.unassigned):
            raise ValidationError("unassigned tags overlap a cluster")

    @property
    def assignments(self) -> dict[str, int]:
        return {tag: c.cluster_id for c in self.clusters for tag in c.members}

    def cluster_ids(self) -> tuple[int, ...]:
        return tuple(c.cluster_id for c in self.clusters)
