"""Word-emotion induction: embeddings in, valence-arousal(-dominance) points out.

A small feed-forward regressor (two leaky-ReLU hidden layers, linear output,
squared-error loss, Adam updates) is trained on a rated-word lexicon and then
used to project arbitrary tags into the emotion space. Outputs are clamped to
the [1, 9] rating scale. Training is bit-deterministic given a seed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError, ValidationError
from .model import EmotionPoint

log = logging.getLogger(__name__)

POINT_MIN = 1.0
POINT_MAX = 9.0
SUBWORD_MIN_N = 3
SUBWORD_MAX_N = 6


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    subwords: dict[str, np.ndarray] | None = None

    def __contains__(self, word: str) -> bool:
        return word in self.vectors


@dataclass(frozen=True)
class LexiconNorms:
    """Word ratings on the 9-point valence/arousal/dominance scales."""

    entries: dict[str, tuple[float, float, float]]

    def __post_init__(self):
        for word, values in self.entries.items():
            if len(values) != 3 or any(not POINT_MIN <= v <= POINT_MAX for v in values):
                raise ValidationError(f"lexicon entry {word!r} outside [1, 9]: {values}")

    def __len__(self) -> int:
        return len(self.entries)


def _parse_vector_line(line: str, lineno: int, dim: int, path) -> tuple[str, np.ndarray]:
    parts = line.rstrip("\n").split(" ")
    word = parts[0]
    values = parts[1:]
    if values and values[-1] == "":  # trailing space, common in fasttext dumps
        values = values[:-1]
    if len(values) != dim:
        raise ParseError(f"{path}:{lineno}: expected {dim} floats for {word!r}, got {len(values)}")
    try:
        vec = np.array([float(v) for v in values], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from None
    return word, vec


def _load_vector_file(path) -> tuple[int, dict[str, np.ndarray]]:
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ParseError(f"{path}: empty embedding file")
        head = first.split()
        start = 2
        if len(head) == 2 and head[0].isdigit() and head[1].isdigit():
            dim = int(head[1])
        else:
            dim = len(head) - 1
            word, vec = _parse_vector_line(first, 1, dim, path)
            vectors[word] = vec
        for lineno, line in enumerate(fh, start=start):
            if not line.strip():
                continue
            word, vec = _parse_vector_line(line, lineno, dim, path)
            if word in vectors:
                log.warning("duplicate embedding for %r at %s:%d, last wins", word, path, lineno)
            vectors[word] = vec
    return dim, vectors


def load_embeddings(path, subword_path=None) -> EmbeddingTable:
    """Read a text embedding file: optional "count dim" header, then "word v1 .. vd" lines."""
    dim, vectors = _load_vector_file(path)
    subwords = None
    if subword_path is not None:
        sub_dim, subwords = _load_vector_file(subword_path)
        if sub_dim != dim:
            raise ParseError(f"subword dim {sub_dim} does not match word dim {dim}")
    return EmbeddingTable(dim=dim, vectors=vectors, subwords=subwords)


def load_lexicon(path) -> LexiconNorms:
    """CSV "word,valence,arousal,dominance", one entry per line, header optional."""
    entries: dict[str, tuple[float, float, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.lower().startswith("word,"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected word,v,a,d")
            try:
                entries[parts[0]] = (float(parts[1]), float(parts[2]), float(parts[3]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return LexiconNorms(entries)


def _char_ngrams(word: str) -> list[str]:
    wrapped = f"<{word}>"
    grams = []
    for n in range(SUBWORD_MIN_N, SUBWORD_MAX_N + 1):
        grams.extend(wrapped[i : i + n] for i in range(len(wrapped) - n + 1))
    return grams


def embed(table: EmbeddingTable, word: str) -> np.ndarray | None:
    """Exact lookup, falling back to the mean of known character 3-6 gram vectors."""
    vec = table.vectors.get(word)
    if vec is not None:
        return vec
    if table.subwords:
        found = [table.subwords[g] for g in _char_ngrams(word) if g in table.subwords]
        if found:
            return np.mean(found, axis=0)
    return None


# ---------------------------------------------------------------------------
# regressor


@dataclass
class TrainConfig:
    hidden: tuple[int, int] = (256, 128)
    out_dim: int = 3  # 3 -> VAD, 2 -> VA
    seed: int = 0
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    val_fraction: float = 0.1
    patience: int = 20
    leaky_slope: float = 0.01

    def __post_init__(self):
        if self.out_dim not in (2, 3):
            raise ValidationError(f"out_dim must be 2 or 3, got {self.out_dim}")


@dataclass
class Regressor:
    sizes: tuple[int, ...]  # [dim, h1, h2, out]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    leaky_slope: float = 0.01
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValidationError(f"layer {i} shape mismatch for sizes {self.sizes}")

    @property
    def space(self) -> str:
        return "VA" if self.sizes[-1] == 2 else "VAD"


def _forward(weights, biases, x, slope):
    """Forward pass keeping layer inputs for backprop. x is (n, dim)."""
    activations = [x]
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = activations[-1] @ w + b
        if i < len(weights) - 1:
            z = np.where(z > 0, z, slope * z)
        activations.append(z)
    return activations


def _loss_and_grads(weights, biases, x, y, slope):
    """Mean squared error and its gradients w.r.t. every weight and bias."""
    acts = _forward(weights, biases, x, slope)
    diff = acts[-1] - y
    loss = float(np.mean(diff * diff))
    delta = 2.0 * diff / diff.size  # d(mean of diff^2)/d(output)
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    for i in reversed(range(len(weights))):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            # post-activation shares the sign of the pre-activation for leaky relu
            delta = (delta @ weights[i].T) * np.where(acts[i] > 0, 1.0, slope)
    return loss, grads_w, grads_b


def _init_params(sizes, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def train_regressor(lexicon: LexiconNorms, table: EmbeddingTable, config: TrainConfig) -> Regressor:
    """Fit the regressor on lexicon words that have embeddings.

    Deterministic given config.seed. Early stopping tracks validation loss
    with the configured patience and restores the best checkpoint; per-
    dimension held-out Pearson r is reported in the returned metadata.
    """
    words = [w for w in lexicon.entries if w in table.vectors]
    if len(words) < 100:
        raise DataError(f"only {len(words)} lexicon words have embeddings; need at least 100")
    words.sort()
    x = np.stack([table.vectors[w] for w in words])
    y = np.array([lexicon.entries[w][: config.out_dim] for w in words], dtype=np.float64)

    rng = np.random.Generator(np.random.PCG64(config.seed))
    order = rng.permutation(len(words))
    n_val = max(1, int(round(len(words) * config.val_fraction)))
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    sizes = (table.dim, *config.hidden, config.out_dim)
    weights, biases = _init_params(sizes, rng)

    # Adam state
    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_val = np.inf
    best = None
    best_epoch = 0
    stale = 0
    checkpoint_losses = []

    for epoch in range(config.epochs):
        perm = rng.permutation(len(x_train))
        for start in range(0, len(x_train), config.batch_size):
            batch = perm[start : start + config.batch_size]
            _, gw, gb = _loss_and_grads(weights, biases, x_train[batch], y_train[batch], config.leaky_slope)
            step += 1
            correction = np.sqrt(1.0 - beta2**step) / (1.0 - beta1**step)
            for i in range(len(weights)):
                m_w[i] = beta1 * m_w[i] + (1 - beta1) * gw[i]
                v_w[i] = beta2 * v_w[i] + (1 - beta2) * gw[i] ** 2
                weights[i] -= config.lr * correction * m_w[i] / (np.sqrt(v_w[i]) + eps)
                m_b[i] = beta1 * m_b[i] + (1 - beta1) * gb[i]
                v_b[i] = beta2 * v_b[i] + (1 - beta2) * gb[i] ** 2
                biases[i] -= config.lr * correction * m_b[i] / (np.sqrt(v_b[i]) + eps)
        val_loss, _, _ = _loss_and_grads(weights, biases, x_val, y_val, config.leaky_slope)
        if val_loss < best_val:
            best_val = val_loss
            best = ([w.copy() for w in weights], [b.copy() for b in biases])
            best_epoch = epoch
            checkpoint_losses.append(val_loss)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    weights, biases = best
    preds = _forward(weights, biases, x_val, config.leaky_slope)[-1]
    pearson = []
    for d in range(config.out_dim):
        p, t = preds[:, d], y_val[:, d]
        denom = p.std() * t.std()
        pearson.append(float(np.mean((p - p.mean()) * (t - t.mean())) / denom) if denom > 0 else float("nan"))

    return Regressor(
        sizes=sizes,
        weights=weights,
        biases=biases,
        leaky_slope=config.leaky_slope,
        meta={
            "seed": config.seed,
            "epochs_run": best_epoch + 1,
            "val_loss": best_val,
            "val_pearson": pearson,
            "checkpoint_losses": checkpoint_losses,
            "n_train": len(train_idx),
            "n_val": n_val,
        },
    )


def predict(regressor: Regressor, vector: np.ndarray) -> EmotionPoint:
    """Forward pass for a single vector, clamped to the [1, 9] scale."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (regressor.sizes[0],):
        raise ValidationError(f"expected vector of length {regressor.sizes[0]}, got {vector.shape}")
    out = _forward(regressor.weights, regressor.biases, vector[None, :], regressor.leaky_slope)[-1][0]
    return EmotionPoint(tuple(float(v) for v in np.clip(out, POINT_MIN, POINT_MAX)))


def induce_tag_points(
    tags, table: EmbeddingTable, regressor: Regressor
) -> dict[str, EmotionPoint]:
    """Project every embeddable tag; tags without any embedding are omitted."""
    points: dict[str, EmotionPoint] = {}
    missing = []
    ordered = sorted(tags)
    vectors = []
    found = []
    for tag in ordered:
        vec = embed(table, tag)
        if vec is None:
            missing.append(tag)
        else:
            vectors.append(vec)
            found.append(tag)
    if found:
        out = _forward(regressor.weights, regressor.biases, np.stack(vectors), regressor.leaky_slope)[-1]
        out = np.clip(out, POINT_MIN, POINT_MAX)
        for tag, row in zip(found, out):
            points[tag] = EmotionPoint(tuple(float(v) for v in row))
    if missing:
        log.warning("no embedding for %d tags, omitted: %s", len(missing), ", ".join(missing[:10]))
    return points


# ---------------------------------------------------------------------------
# persistence (plain text, round-trips exactly via repr)


def save_regressor(regressor: Regressor, path) -> None:
    lines = ["tagrisk-regressor v1"]
    lines.append("meta " + json.dumps(regressor.meta, sort_keys=True))
    lines.append(f"leaky_slope {regressor.leaky_slope!r}")
    lines.append("sizes " + " ".join(str(s) for s in regressor.sizes))
    for i, (w, b) in enumerate(zip(regressor.weights, regressor.biases)):
        lines.append(f"W{i} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(repr(v) for v in row) for row in w)
        lines.append(f"b{i} {b.shape[0]}")
        lines.append(" ".join(repr(v) for v in b))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_regressor(path) -> Regressor:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "tagrisk-regressor v1":
        raise ParseError(f"{path}: not a v1 regressor file")
    meta = json.loads(lines[1].removeprefix("meta "))
    slope = float(lines[2].split()[1])
    sizes = tuple(int(s) for s in lines[3].split()[1:])
    weights, biases = [], []
    pos = 4
    for i in range(len(sizes) - 1):
        rows, cols = (int(v) for v in lines[pos].split()[1:])
        pos += 1
        w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(rows)])
        pos += rows
        if w.shape != (rows, cols):
            raise ParseError(f"{path}: weight block {i} malformed")
        n = int(lines[pos].split()[1])
        pos += 1
        b = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        if b.shape != (n,):
            raise ParseError(f"{path}: bias block {i} malformed")
        weights.append(w)
        biases.append(b)
    return Regressor(sizes=sizes, weights=weights, biases=biases, leaky_slope=slope, meta=meta)
