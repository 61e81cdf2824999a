"""GEMS emotion categories: centroids from term loadings, nearest-centroid tag mapping.

The nine first-order categories are defined by 40 emotion terms with factor
loadings. Category centroids default to the shipped table so the pipeline
runs without retraining the induction model; they can be recomputed from
any map of term points (e.g. freshly induced ones).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError, ValidationError
from .model import GEMS_CATEGORIES, EmotionCategory, EmotionPoint, TagVocabulary


@dataclass(frozen=True)
class GemsTable:
    categories: tuple[EmotionCategory, ...]
    space: str  # "VA" or "VAD"

    def __post_init__(self):
        names = tuple(c.name for c in self.categories)
        if sorted(names) != sorted(GEMS_CATEGORIES):
            raise ValidationError(f"expected the 9 GEMS categories, got {names}")

    def centroids(self) -> dict[str, EmotionPoint]:
        return {c.name: c.centroid for c in self.categories}

    def terms(self) -> list[str]:
        return [term for c in self.categories for term, _ in c.terms]


def load_gems_table(path: str | Path | None = None, space: str = "VAD") -> GemsTable:
    """Load category definitions and default centroids for the requested space."""
    if space not in ("VA", "VAD"):
        raise ConfigError(f"space must be VA or VAD, got {space!r}")
    if path is None:
        source = resources.files("tagrisk").joinpath("data/gems.json")
        raw = json.loads(source.read_text(encoding="utf-8"))
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    key = "centroid_va" if space == "VA" else "centroid_vad"
    categories = []
    for entry in raw["categories"]:
        categories.append(
            EmotionCategory(
                name=entry["name"],
                terms=tuple((t, float(l)) for t, l in entry["terms"]),
                centroid=EmotionPoint(tuple(float(v) for v in entry[key])),
                umbrella=entry["umbrella"],
            )
        )
    return GemsTable(tuple(categories), space)


def category_centroids(
    term_points: dict[str, EmotionPoint],
    gems: GemsTable,
    normalize: bool = True,
) -> dict[str, EmotionPoint]:
    """Loading-weighted mean of each category's term points.

    With normalize=True (default) the weighted sum is divided by the sum of
    loadings, which keeps centroids inside [1, 9]; the raw weighted sum is
    available for sensitivity analysis but will usually leave the valid range
    for multi-term categories.
    """
    missing = [t for t in gems.terms() if t not in term_points]
    if missing:
        raise ConfigError(f"no induced point for GEMS terms: {missing}")
    dims = {len(p.coords) for p in term_points.values()}
    if len(dims) != 1:
        raise ValidationError("term points mix VA and VAD spaces")
    dim = dims.pop()
    out: dict[str, EmotionPoint] = {}
    for category in gems.categories:
        total = [0.0] * dim
        weight = 0.0
        for term, loading in category.terms:
            point = term_points[term]
            for i, c in enumerate(point.coords):
                total[i] += loading * c
            weight += loading
        if normalize:
            total = [v / weight for v in total]
        out[category.name] = EmotionPoint(tuple(total))
    return out


def assign_category(point: EmotionPoint, centroids: dict[str, EmotionPoint]) -> str:
    """Nearest centroid by Euclidean distance; ties go to the smaller name."""
    best_name = None
    best_dist = None
    for name in sorted(centroids):
        d = point.distance(centroids[name])
        if best_dist is None or d < best_dist:
            best_name, best_dist = name, d
    return best_name


def build_vocabulary(
    tag_points: dict[str, EmotionPoint],
    centroids: dict[str, EmotionPoint],
) -> TagVocabulary:
    """Partition projected tags into categories by centroid proximity."""
    if not tag_points:
        raise ValidationError("tag_points must be nonempty")
    return TagVocabulary(
        category_of={tag: assign_category(p, centroids) for tag, p in sorted(tag_points.items())}
    )
