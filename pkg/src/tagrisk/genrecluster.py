"""Genre-tag clustering: co-occurrence similarity, Ward linkage, adaptive tree cut.

Tags become columns of a binary track x tag incidence matrix; pairwise
similarity is the product-moment coefficient of the 2x2 co-occurrence table,
D = ad / sqrt((a+b)(a+c)(b+d)(c+d)). Clustering runs Ward's minimum variance
method on the 1-D transform of that similarity via Lance-Williams updates,
always merging the globally closest pair and breaking exact ties on the
smallest node-id pair. The cut is adaptive: branches split where the jump
from a parent merge height to the heights inside its children is large
relative to the dendrogram's height range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ValidationError
from .model import GenreCluster, GenreClusterSet, TrackRecord

log = logging.getLogger(__name__)

SPLIT_THRESHOLD = 0.50  # fraction of the height range a split gap must reach
SPLIT_THRESHOLD_DEEP = 0.25
OUTLIER_THRESHOLD = 0.60  # stronger evidence required to detach a singleton


@dataclass(frozen=True)
class TermDocMatrix:
    track_ids: tuple[str, ...]
    tags: tuple[str, ...]
    matrix: np.ndarray  # tracks x tags, values in {0, 1}


@dataclass(frozen=True)
class SimilarityMatrix:
    tags: tuple[str, ...]
    values: np.ndarray
    a: np.ndarray  # (1,1) co-occurrence counts per pair
    b: np.ndarray  # (1,0)
    c: np.ndarray  # (0,1)
    d: np.ndarray  # (0,0)


@dataclass(frozen=True)
class Dendrogram:
    """Merge list over leaves 0..n-1; merge k creates node n+k."""

    leaves: tuple[str, ...]
    merges: tuple[tuple[int, int, float, int], ...]  # (left, right, height, size)

    def __post_init__(self):
        if len(self.merges) != len(self.leaves) - 1:
            raise ValidationError(
                f"{len(self.leaves)} leaves require {len(self.leaves) - 1} merges, "
                f"got {len(self.merges)}"
            )
        heights = [m[2] for m in self.merges]
        if any(b < a - 1e-9 for a, b in zip(heights, heights[1:])):
            raise ValidationError("merge heights must be non-decreasing")


def build_term_doc(tracks: list[TrackRecord], genre_tags: list[str]) -> TermDocMatrix:
    """Binary incidence of genre tags over tracks; presence means positive weight.

    Genre tags that appear on no track are dropped with a warning.
    """
    genre_order = sorted(set(genre_tags))
    track_order = sorted(tracks, key=lambda t: t.track_id)
    col = {tag: i for i, tag in enumerate(genre_order)}
    matrix = np.zeros((len(track_order), len(genre_order)), dtype=np.int8)
    for row, track in enumerate(track_order):
        for assignment in track.tags:
            j = col.get(assignment.tag)
            if j is not None and assignment.weight > 0:
                matrix[row, j] = 1
    occurs = matrix.sum(axis=0) > 0
    dropped = [t for t, keep in zip(genre_order, occurs) if not keep]
    if dropped:
        log.warning("%d genre tags occur on no track, dropped: %s", len(dropped), dropped[:10])
    kept = [t for t, keep in zip(genre_order, occurs) if keep]
    if not kept:
        raise DataError("no genre tag from the list occurs in the track corpus")
    return TermDocMatrix(
        track_ids=tuple(t.track_id for t in track_order),
        tags=tuple(kept),
        matrix=matrix[:, occurs],
    )


def similarity(tdm: TermDocMatrix) -> SimilarityMatrix:
    """Pairwise 2x2 co-occurrence similarity; 0 where the denominator vanishes."""
    if len(tdm.tags) < 2:
        raise DataError("similarity needs at least 2 genre tags")
    x = tdm.matrix.astype(np.int64)
    n_tracks = x.shape[0]
    a = x.T @ x
    occ = np.diag(a).copy()
    b = occ[:, None] - a
    c = occ[None, :] - a
    d = n_tracks - a - b - c
    denom_sq = (a + b) * (a + c) * (b + d) * (c + d)
    values = np.zeros_like(a, dtype=np.float64)
    ok = denom_sq > 0
    values[ok] = (a[ok] * d[ok]) / np.sqrt(denom_sq[ok].astype(np.float64))
    # self-similarity of an occurring tag is 1 by definition
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(tags=tdm.tags, values=values, a=a, b=b, c=c, d=d)


def ward_linkage(sim: SimilarityMatrix, transform: str = "one_minus") -> Dendrogram:
    """Agglomerative Ward clustering of tags on the dissimilarity 1 - D.

    Lance-Williams updates run on squared dissimilarities; reported heights
    are their square roots, so merging two singletons happens at exactly
    their dissimilarity. The sqrt(1 - D) transform is available as a
    monotone alternative.
    """
    n = len(sim.tags)
    if n < 2:
        raise DataError("ward_linkage needs at least 2 leaves")
    if transform == "one_minus":
        delta = 1.0 - sim.values
    elif transform == "sqrt_one_minus":
        delta = np.sqrt(np.clip(1.0 - sim.values, 0.0, None))
    else:
        raise ConfigError(f"unknown dissimilarity transform {transform!r}")
    delta = np.clip(delta, 0.0, None)

    sq = delta.astype(np.float64) ** 2
    np.fill_diagonal(sq, np.inf)
    node_id = list(range(n))
    size = np.ones(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    merges = []

    for step in range(n - 1):
        masked = np.where(alive[:, None] & alive[None, :], sq, np.inf)
        best = masked.min()
        ties = np.argwhere(masked == best)
        pair = min(
            (tuple(sorted((node_id[i], node_id[j]))), (i, j)) for i, j in ties if i != j
        )
        (left, right), (i, j) = pair
        height = float(np.sqrt(best))
        new_size = int(size[i] + size[j])
        merges.append((left, right, height, new_size))

        others = alive.copy()
        others[i] = others[j] = False
        idx = np.where(others)[0]
        if idx.size:
            total = size[i] + size[j] + size[idx]
            updated = (
                (size[i] + size[idx]) * sq[i, idx]
                + (size[j] + size[idx]) * sq[j, idx]
                - size[idx] * sq[i, j]
            ) / total
            sq[i, idx] = updated
            sq[idx, i] = updated
        alive[j] = False
        size[i] = new_size
        node_id[i] = n + step

    return Dendrogram(leaves=sim.tags, merges=tuple(merges))


def _build_tree(dendrogram: Dendrogram):
    n = len(dendrogram.leaves)
    children = {}
    height = {i: 0.0 for i in range(n)}
    for k, (left, right, h, _) in enumerate(dendrogram.merges):
        node = n + k
        children[node] = (left, right)
        height[node] = h
    return children, height


def _subtree_internal_heights(node, children, height, out):
    if node in children:
        out.append(height[node])
        left, right = children[node]
        _subtree_internal_heights(left, children, height, out)
        _subtree_internal_heights(right, children, height, out)


def _leaves_under(node, children):
    if node not in children:
        return [node]
    left, right = children[node]
    return _leaves_under(left, children) + _leaves_under(right, children)


def dynamic_cut(
    dendrogram: Dendrogram, min_cluster_size: int = 5, deep_split: bool = False
) -> GenreClusterSet:
    """Adaptive top-down decomposition of the dendrogram into clusters.

    A node splits when its merge height jumps above the typical (median)
    internal height of its children by a large fraction of the dendrogram's
    overall height range; deep_split lowers that fraction. A proposed branch
    smaller than min_cluster_size is folded back into its sibling, except
    that a single leaf detaching at an extreme height is left unassigned.
    The root is never unassigned: with nothing to split the whole tree is
    one cluster, whatever its size.
    """
    if min_cluster_size < 1:
        raise ConfigError(f"min_cluster_size must be >= 1, got {min_cluster_size}")
    children, height = _build_tree(dendrogram)
    n = len(dendrogram.leaves)
    heights = [m[2] for m in dendrogram.merges]
    span = max(heights) - min(heights)
    threshold = SPLIT_THRESHOLD_DEEP if deep_split else SPLIT_THRESHOLD

    clusters: list[list[int]] = []
    unassigned: list[int] = []

    def gap_fraction(node) -> float:
        internal: list[float] = []
        left, right = children[node]
        _subtree_internal_heights(left, children, height, internal)
        _subtree_internal_heights(right, children, height, internal)
        if not internal or span <= 0:
            return 0.0
        return (height[node] - float(np.median(internal))) / span

    def decompose(node):
        if node not in children:
            clusters.append([node])
            return
        left, right = children[node]
        frac = gap_fraction(node)
        sides = [(left, len(_leaves_under(left, children))), (right, len(_leaves_under(right, children)))]
        small = [s for s in sides if s[1] < min_cluster_size]
        if frac >= threshold and not small:
            decompose(left)
            decompose(right)
            return
        if frac >= OUTLIER_THRESHOLD and len(small) == 1 and small[0][1] == 1:
            unassigned.append(small[0][0])
            other = right if small[0][0] == left else left
            decompose(other)
            return
        clusters.append(sorted(_leaves_under(node, children)))

    decompose(n + len(dendrogram.merges) - 1)

    clusters.sort(key=lambda leaves: leaves[0])
    tag_of = dendrogram.leaves
    return GenreClusterSet(
        clusters=tuple(
            GenreCluster(cluster_id=k + 1, members=tuple(tag_of[i] for i in leaves))
            for k, leaves in enumerate(clusters)
        ),
        unassigned=tuple(tag_of[i] for i in sorted(unassigned)),
    )


def label_clusters(
    cluster_set: GenreClusterSet, sim: SimilarityMatrix, top_k: int = 5
) -> GenreClusterSet:
    """Label each cluster by its core tags: the top_k members by mean
    within-cluster similarity, in rank order."""
    index = {tag: i for i, tag in enumerate(sim.tags)}
    labeled = []
    for cluster in cluster_set.clusters:
        if len(cluster.members) == 1:
            labeled.append(
                GenreCluster(cluster.cluster_id, cluster.members, label_tags=cluster.members)
            )
            continue
        rows = [index[t] for t in cluster.members]
        sub = sim.values[np.ix_(rows, rows)]
        mean_sim = (sub.sum(axis=1) - np.diag(sub)) / (len(rows) - 1)
        ranked = sorted(zip(cluster.members, mean_sim), key=lambda r: (-r[1], r[0]))
        core = tuple(tag for tag, _ in ranked[:top_k])
        labeled.append(GenreCluster(cluster.cluster_id, cluster.members, label_tags=core))
    return GenreClusterSet(clusters=tuple(labeled), unassigned=cluster_set.unassigned)
