"""Seeded synthetic cohorts for end-to-end runs and calibration experiments.

The generator builds a small world where ground truth is known by
construction: embeddings and lexicon ratings are linked by a fixed affine
map, each synthetic tag's embedding is solved so its image lands next to one
category's anchor point, and tracks carry tags of a dominant category. A
planted cohort doubles the playcounts of sadness-dominated tracks for the
at-risk group; a null cohort treats both groups identically.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gems import assign_category, load_gems_table
from .ingest import dump_fixture
from .model import (
    EmotionPoint,
    ListeningHistory,
    Participant,
    TagAssignment,
    TrackRecord,
    Window,
)

CENTER_DATE = "2020-06-15"
JUNK_WORDS = {"guitar": "NOUN", "vocalists": "NOUN", "female": "ADJ", "nonmoody": "ADJ"}
BLOCKED_WORDS = ["nonmoody"]
GENRE_FAMILIES = ("duskwave", "ironcore", "sunfolk")
_SUFFIXES = "abcdefghijklmnop"


@dataclass
class SynthConfig:
    corpus_seed: int = 1000003
    dim: int = 16
    n_lexicon: int = 300
    tags_per_category: int = 6
    n_tracks: int = 162
    genre_tags_per_family: int = 8
    users_per_group: int = 60
    n_excluded: int = 6
    tracks_per_user: int = 30
    forced_sadness_tracks: int = 3
    sadness_boost: int = 2
    anchor_noise: float = 0.1
    target_noise: float = 0.05


@dataclass
class SynthCorpus:
    config: SynthConfig
    embeddings: dict[str, np.ndarray]
    lexicon: dict[str, tuple[float, float, float]]
    tag_category: dict[str, str]  # intended category per emotion tag word
    genre_family: dict[str, int]
    tracks: list[TrackRecord]
    track_category: dict[str, str]  # dominant category per track
    wordlist_pos: dict[str, str]
    stopwords: list[str] = field(default_factory=lambda: ["the", "a", "an", "and", "of", "in"])
    blocklist: list[str] = field(default_factory=lambda: list(BLOCKED_WORDS))


def _slug(name: str) -> str:
    return "".join(ch for ch in name.lower() if ch.isalpha())


def _null_component(a_pinv: np.ndarray, a: np.ndarray, z: np.ndarray) -> np.ndarray:
    return z - a_pinv @ (a @ z)


def make_corpus(config: SynthConfig | None = None) -> SynthCorpus:
    config = config or SynthConfig()
    rng = np.random.Generator(np.random.PCG64(config.corpus_seed))
    gems_vad = load_gems_table(space="VAD")
    gems_va = load_gems_table(space="VA")
    vad_centroids = gems_vad.centroids()
    va_centroids = gems_va.centroids()
    categories = [c.name for c in gems_vad.categories]

    a = rng.normal(size=(3, config.dim))
    a *= 1.5 / np.linalg.norm(a, axis=1, keepdims=True)
    a_pinv = np.linalg.pinv(a)
    bias = np.full(3, 5.0)

    embeddings: dict[str, np.ndarray] = {}
    lexicon: dict[str, tuple[float, float, float]] = {}
    for i in range(config.n_lexicon):
        word = f"word{i:03d}"
        vec = rng.normal(size=config.dim)
        target = np.clip(a @ vec + bias + rng.normal(0, config.target_noise, size=3), 1.0, 9.0)
        embeddings[word] = vec
        lexicon[word] = tuple(float(v) for v in target)

    tag_category: dict[str, str] = {}
    for category in categories:
        anchor = np.array(vad_centroids[category].coords)
        for k in range(config.tags_per_category):
            tag = _slug(category) + _SUFFIXES[k]
            for _ in range(50):
                eta = rng.normal(0, config.anchor_noise, size=3)
                point = np.clip(anchor + eta, 1.0, 9.0)
                vec = a_pinv @ (point - bias)
                vec = vec + 0.4 * _null_component(a_pinv, a, rng.normal(size=config.dim))
                vad_hit = assign_category(EmotionPoint(tuple(point)), vad_centroids)
                va_point = EmotionPoint(tuple(point[:2]))
                va_hit = assign_category(va_point, va_centroids)
                sad_ok = (va_hit == "Sadness") == (category == "Sadness")
                if vad_hit == category and sad_ok:
                    break
            else:
                # fall back to the exact anchor, which always maps correctly
                point = anchor
                vec = a_pinv @ (point - bias)
            embeddings[tag] = vec
            tag_category[tag] = category

    genre_family: dict[str, int] = {}
    for f, base in enumerate(GENRE_FAMILIES):
        for k in range(config.genre_tags_per_family):
            genre_family[base + _SUFFIXES[k]] = f

    wordlist_pos = {w: "ADJ" for w in lexicon}
    wordlist_pos.update({t: "ADJ" for t in tag_category})
    wordlist_pos.update(JUNK_WORDS)

    genre_by_family: dict[int, list[str]] = {}
    for tag, fam in genre_family.items():
        genre_by_family.setdefault(fam, []).append(tag)
    umbrella_family = {"Unease": 0, "Vitality": 1, "Sublimity": 2}
    umbrella_of = {c.name: c.umbrella for c in gems_vad.categories}
    tags_by_category: dict[str, list[str]] = {}
    for tag, cat in tag_category.items():
        tags_by_category.setdefault(cat, []).append(tag)

    tracks: list[TrackRecord] = []
    track_category: dict[str, str] = {}
    for i in range(config.n_tracks):
        category = categories[i % len(categories)]
        pool = tags_by_category[category]
        picks = rng.choice(len(pool), size=3, replace=False)
        pairs = [(pool[int(p)], int(rng.integers(40, 101))) for p in picks]
        other = categories[int(rng.integers(len(categories)))]
        if other != category:
            other_pool = tags_by_category[other]
            pairs.append((other_pool[int(rng.integers(len(other_pool)))], int(rng.integers(5, 21))))
        preferred = umbrella_family[umbrella_of[category]]
        family = preferred if rng.random() < 0.7 else int(rng.integers(len(GENRE_FAMILIES)))
        fam_pool = genre_by_family[family]
        for p in rng.choice(len(fam_pool), size=3, replace=False):
            pairs.append((fam_pool[int(p)], int(rng.integers(30, 91))))
        roll = rng.random()
        if roll < 0.2:
            pairs.append(("guitar", int(rng.integers(5, 15))))
        elif roll < 0.3:
            pairs.append(("female vocalists", int(rng.integers(5, 15))))
        elif roll < 0.35:
            pairs.append(("xqzw", 5))
        elif roll < 0.4:
            pairs.append(("nonmoody", int(rng.integers(5, 15))))
        merged: dict[str, int] = {}
        for tag, weight in pairs:
            merged[tag] = merged.get(tag, 0) + weight
        ranked = sorted(merged.items(), key=lambda p: (-p[1], p[0]))
        track_id = f"t{i:04d}"
        tracks.append(
            TrackRecord(
                track_id=track_id,
                artist=f"artist{i % 40:02d}",
                title=f"title {i:04d}",
                tags=tuple(TagAssignment(t, w) for t, w in ranked),
            )
        )
        track_category[track_id] = category

    return SynthCorpus(
        config=config,
        embeddings=embeddings,
        lexicon=lexicon,
        tag_category=tag_category,
        genre_family=genre_family,
        tracks=tracks,
        track_category=track_category,
        wordlist_pos=wordlist_pos,
    )


def make_cohort(
    corpus: SynthCorpus, seed: int, planted: bool = True
) -> tuple[list[Participant], list[ListeningHistory]]:
    """Draw participants and listening histories for one seeded cohort.

    With planted=True the at-risk users' sadness-dominated tracks get their
    playcounts multiplied by the configured boost; a null cohort leaves both
    groups exchangeable.
    """
    cfg = corpus.config
    rng = np.random.Generator(np.random.PCG64(seed))
    sad_tracks = [t.track_id for t in corpus.tracks if corpus.track_category[t.track_id] == "Sadness"]
    other_tracks = [t.track_id for t in corpus.tracks if corpus.track_category[t.track_id] != "Sadness"]

    participants: list[Participant] = []
    histories: list[ListeningHistory] = []
    groups = (
        [("NoRisk", i) for i in range(cfg.users_per_group)]
        + [("AtRisk", i) for i in range(cfg.users_per_group)]
        + [("Excluded", i) for i in range(cfg.n_excluded)]
    )
    for serial, (group, _) in enumerate(groups):
        user_id = f"u{serial:03d}"
        if group == "NoRisk":
            k10 = int(rng.integers(10, 20))
        elif group == "AtRisk":
            k10 = int(rng.integers(29, 51))
        else:
            k10 = int(rng.integers(20, 29))
        unhealthy = float(np.clip(8 + 0.5 * (k10 - 10) + rng.normal(0, 2), 5, 35))
        healthy = float(np.clip(rng.normal(20, 3), 8, 30))
        neuroticism = float(np.clip(1 + 4 * (k10 - 10) / 40 + rng.normal(0, 0.5), 1, 5))
        personality = tuple(
            float(np.clip(v, 1, 5)) for v in rng.uniform(1, 5, size=4)
        ) + (neuroticism,)
        participants.append(
            Participant.from_scores(user_id, k10, healthy, unhealthy, personality)
        )

        forced = [
            sad_tracks[int(i)]
            for i in rng.choice(len(sad_tracks), size=cfg.forced_sadness_tracks, replace=False)
        ]
        rest_count = cfg.tracks_per_user - cfg.forced_sadness_tracks
        rest = [
            other_tracks[int(i)]
            for i in rng.choice(len(other_tracks), size=rest_count, replace=False)
        ]
        entries = []
        for track_id in forced + rest:
            playcount = int(rng.integers(5, 50))
            if planted and group == "AtRisk" and corpus.track_category[track_id] == "Sadness":
                playcount *= cfg.sadness_boost
            entries.append((track_id, playcount))
        entries.sort()
        for months in (3, 2):
            if months == 2:
                keep = rng.random(len(entries)) < 0.8
                window_entries = tuple(e for e, k in zip(entries, keep) if k) or tuple(entries[:5])
            else:
                window_entries = tuple(entries)
            histories.append(
                ListeningHistory(
                    user_id=user_id,
                    entries=window_entries,
                    window=Window(center=CENTER_DATE, half_width_months=months),
                    top_n=500,
                )
            )
    return participants, histories


def write_world(corpus: SynthCorpus, seed: int, out_dir, planted: bool = True) -> Path:
    """Write the fixture files plus a ready-to-run pipeline config; returns the config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    participants, histories = make_cohort(corpus, seed, planted=planted)
    dump_fixture(participants, histories, corpus.tracks, out / "cohort.jsonl")

    words = sorted(corpus.embeddings)
    with open(out / "embeddings.vec", "w", encoding="utf-8") as fh:
        fh.write(f"{len(words)} {corpus.config.dim}\n")
        for word in words:
            vec = " ".join(f"{v:.6f}" for v in corpus.embeddings[word])
            fh.write(f"{word} {vec}\n")
    with open(out / "lexicon.csv", "w", encoding="utf-8") as fh:
        fh.write("word,valence,arousal,dominance\n")
        for word in sorted(corpus.lexicon):
            v, ar, d = corpus.lexicon[word]
            fh.write(f"{word},{v:.4f},{ar:.4f},{d:.4f}\n")
    (out / "genre_tags.txt").write_text(
        "\n".join(sorted(corpus.genre_family)) + "\n", encoding="utf-8"
    )
    (out / "stopwords.txt").write_text("\n".join(corpus.stopwords) + "\n", encoding="utf-8")
    (out / "wordlist.txt").write_text(
        "\n".join(sorted(corpus.wordlist_pos)) + "\n", encoding="utf-8"
    )
    (out / "pos_lexicon.tsv").write_text(
        "\n".join(f"{w}\t{p}" for w, p in sorted(corpus.wordlist_pos.items())) + "\n",
        encoding="utf-8",
    )
    (out / "blocklist.txt").write_text("\n".join(corpus.blocklist) + "\n", encoding="utf-8")

    parser = configparser.ConfigParser()
    parser["paths"] = {
        "fixture": "cohort.jsonl",
        "embeddings": "embeddings.vec",
        "lexicon": "lexicon.csv",
        "stopwords": "stopwords.txt",
        "wordlist": "wordlist.txt",
        "pos_lexicon": "pos_lexicon.tsv",
        "blocklist": "blocklist.txt",
        "genre_tags": "genre_tags.txt",
    }
    parser["params"] = {
        "seed": str(seed),
        "spaces": "VAD,VA",
        "top_n": "10,20,30",
        "window_months": "2,3",
        "iterations": "10000",
        "min_cluster_size": "4",
        "svm_c": "10.0",
        "svm_gamma": "0.05",
        "lambda": "0.02",
        "folds": "5",
        "hidden": "32,16",
        "epochs": "120",
        "lr": "0.003",
        "batch_size": "32",
        "val_fraction": "0.15",
        "patience": "15",
    }
    config_path = out / "config.ini"
    with open(config_path, "w", encoding="utf-8") as fh:
        parser.write(fh)
    return config_path
