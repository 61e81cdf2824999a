"""Prevalence scoring: per-track associations, per-user and per-group scores.

A track's association with a class is its tag-weight share; a user's
prevalence score for a class is the playcount-weighted sum of those
associations divided by the user's total playcount. The denominator runs
over the user's whole history while the numerator only sees tracks that
carry at least one vocabulary tag, so rows sum to at most 1, not exactly 1.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import DataError
from .model import GenreClusterSet, ListeningHistory, ScoreTable, TagVocabulary, TrackRecord

log = logging.getLogger(__name__)


def tag_association(track: TrackRecord, vocab_tags: set[str]) -> dict[str, float] | None:
    """Per-tag weight shares N over the track's vocabulary tags; None if it has none."""
    in_vocab = [(a.tag, a.weight) for a in track.tags if a.tag in vocab_tags]
    total = sum(w for _, w in in_vocab)
    if total <= 0:
        return None  # track is outside V_tr, not an error
    shares: dict[str, float] = {}
    for tag, weight in in_vocab:
        shares[tag] = shares.get(tag, 0.0) + weight / total
    return shares


def track_association(track: TrackRecord, vocabulary: TagVocabulary) -> dict[str, float] | None:
    """Category-level association: tag shares summed within each category."""
    shares = tag_association(track, vocabulary.tags)
    if shares is None:
        return None
    out: dict[str, float] = {}
    for tag, share in shares.items():
        category = vocabulary.category_of[tag]
        out[category] = out.get(category, 0.0) + share
    return out


def emotion_prevalence(
    history: ListeningHistory,
    associations: dict[str, dict[str, float]],
    classes: tuple[str, ...],
) -> np.ndarray:
    """One user's prevalence row: sum of association * playcount over total playcount."""
    if not history.entries:
        raise DataError(f"history for {history.user_id} is empty")
    denom = history.total_playcount()
    if denom <= 0:
        raise DataError(f"history for {history.user_id} has zero total playcount")
    row = np.zeros(len(classes))
    index = {c: i for i, c in enumerate(classes)}
    for track_id, playcount in history.entries:
        assoc = associations.get(track_id)
        if assoc is None:
            continue
        for cls, share in assoc.items():
            row[index[cls]] += share * playcount
    return row / denom


def build_score_table(
    histories: list[ListeningHistory],
    tracks_by_id: dict[str, TrackRecord],
    vocabulary: TagVocabulary,
    classes: tuple[str, ...],
) -> ScoreTable:
    """Users x categories table, rows in sorted user order."""
    associations = {}
    for track_id, track in tracks_by_id.items():
        assoc = track_association(track, vocabulary)
        if assoc is not None:
            associations[track_id] = assoc
    ordered = sorted(histories, key=lambda h: h.user_id)
    values = np.stack([emotion_prevalence(h, associations, classes) for h in ordered])
    return ScoreTable(rows=tuple(h.user_id for h in ordered), cols=classes, values=values)


def genre_prevalence(
    history: ListeningHistory,
    tracks_by_id: dict[str, TrackRecord],
    clusters: GenreClusterSet,
    genre_tags: set[str],
    emotion_filter_tags: set[str] | None = None,
) -> dict[int, float] | None:
    """Prevalence over genre clusters, optionally restricted to tracks carrying
    a tag of one emotion category. Returns None when the restriction empties
    the history (the user is omitted from that analysis)."""
    entries = history.entries
    if emotion_filter_tags is not None:
        entries = tuple(
            (tid, pc)
            for tid, pc in entries
            if tid in tracks_by_id
            and any(a.tag in emotion_filter_tags for a in tracks_by_id[tid].tags)
        )
        if not entries:
            log.warning(
                "user %s has no tracks for the emotion filter, omitted", history.user_id
            )
            return None
    denom = sum(pc for _, pc in entries)
    scores = {c.cluster_id: 0.0 for c in clusters.clusters}
    member_sets = {c.cluster_id: set(c.members) for c in clusters.clusters}
    for track_id, playcount in entries:
        track = tracks_by_id.get(track_id)
        if track is None:
            continue
        shares = tag_association(track, genre_tags)
        if shares is None:
            continue
        for cluster_id, members in member_sets.items():
            mass = sum(share for tag, share in shares.items() if tag in members)
            if mass:
                scores[cluster_id] += mass * playcount
    return {cid: v / denom for cid, v in scores.items()}


def group_tag_scores(
    histories: list[ListeningHistory],
    tracks_by_id: dict[str, TrackRecord],
    vocabulary: TagVocabulary,
) -> dict[str, float]:
    """Group-level tag score: pooled association-playcount mass over pooled playcounts."""
    if not histories:
        raise DataError("group is empty")
    shares_by_track = {}
    for track_id, track in tracks_by_id.items():
        shares = tag_association(track, vocabulary.tags)
        if shares is not None:
            shares_by_track[track_id] = shares
    numerators: dict[str, float] = {tag: 0.0 for tag in vocabulary.tags}
    denom = 0.0
    for history in sorted(histories, key=lambda h: h.user_id):
        denom += history.total_playcount()
        for track_id, playcount in history.entries:
            shares = shares_by_track.get(track_id)
            if shares is None:
                continue
            for tag, share in shares.items():
                numerators[tag] += share * playcount
    if denom <= 0:
        raise DataError("group has zero total playcount")
    return {tag: v / denom for tag, v in numerators.items()}


def rank_tags(
    scores_a: dict[str, float],
    scores_b: dict[str, float],
    vocabulary: TagVocabulary,
    category: str,
) -> list[tuple[str, float]]:
    """Category tags ranked by |score_a - score_b| descending, ties by name."""
    rows = []
    for tag in vocabulary.tags_in(category):
        delta = abs(scores_a.get(tag, 0.0) - scores_b.get(tag, 0.0))
        rows.append((tag, delta))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows
