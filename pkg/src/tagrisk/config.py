"""Pipeline configuration: an INI file with [paths], [params] and optional [api].

CLI flags override file values; every artifact the pipeline writes is
stamped with a short hash of the resolved configuration plus the seed, and
downstream stages refuse inputs whose stamp does not match.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import ConfigError

REQUIRED_PATHS = (
    "fixture",
    "embeddings",
    "lexicon",
    "stopwords",
    "wordlist",
    "pos_lexicon",
    "blocklist",
    "genre_tags",
)
OPTIONAL_PATHS = ("subword_embeddings", "gems", "cache", "users")


@dataclass
class PipelineConfig:
    paths: dict[str, Path]
    seed: int
    spaces: tuple[str, ...] = ("VAD", "VA")
    top_n: tuple[int, ...] = (100, 200, 500)
    window_months: tuple[int, ...] = (3, 2)
    iterations: int = 10000
    bootstrap_mode: str = "permutation"
    min_cluster_size: int = 5
    deep_split: bool = False
    dissim_transform: str = "one_minus"
    centroid_mode: str = "default"  # or "recompute" from induced term points
    svm_c: float = 1.0
    svm_gamma: float = 0.1
    lam: float | None = None  # None -> inner-CV grid search
    folds: int = 5
    hidden: tuple[int, int] = (256, 128)
    epochs: int = 200
    lr: float = 1e-3
    batch_size: int = 64
    val_fraction: float = 0.1
    patience: int = 20
    api_base_url: str | None = None
    label_top_k: int = 5

    def __post_init__(self):
        for space in self.spaces:
            if space not in ("VA", "VAD"):
                raise ConfigError(f"unknown space {space!r}")
        if not self.spaces or not self.top_n or not self.window_months:
            raise ConfigError("spaces, top_n and window_months must be nonempty")
        if any(n < 1 for n in self.top_n):
            raise ConfigError("top_n values must be positive")

    def hash(self) -> str:
        blob = repr(sorted((k, str(v)) for k, v in asdict(self).items()))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _split_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Parse the INI file, apply CLI overrides, and verify referenced files exist."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    overrides = overrides or {}

    base = path.parent
    paths: dict[str, Path] = {}
    if parser.has_section("paths"):
        for key, value in parser.items("paths"):
            paths[key] = (base / value).resolve()
    missing = [k for k in REQUIRED_PATHS if k not in paths]
    if missing:
        raise ConfigError(f"config {path} is missing path keys: {', '.join(missing)}")
    unknown = [k for k in paths if k not in REQUIRED_PATHS + OPTIONAL_PATHS]
    if unknown:
        raise ConfigError(f"config {path} has unknown path keys: {', '.join(unknown)}")
    for key, p in paths.items():
        if key != "cache" and not p.is_file():
            raise ConfigError(f"path {key} does not exist: {p}")

    params: dict[str, str] = dict(parser.items("params")) if parser.has_section("params") else {}
    api_base_url = parser.get("api", "base_url", fallback=None)

    def pick(key, default=None):
        if key in overrides and overrides[key] is not None:
            return overrides[key]
        return params.get(key, default)

    seed = pick("seed")
    if seed is None:
        raise ConfigError("a seed is required (set params.seed or pass --seed)")

    try:
        lam_raw = pick("lambda", "")
        hidden = tuple(int(v) for v in _split_list(str(pick("hidden", "256,128"))))
        config = PipelineConfig(
            paths=paths,
            seed=int(seed),
            spaces=tuple(s.upper() for s in _split_list(str(pick("spaces", "VAD,VA")))),
            top_n=tuple(int(v) for v in _split_list(str(pick("top_n", "100,200,500")))),
            window_months=tuple(int(v) for v in _split_list(str(pick("window_months", "3,2")))),
            iterations=int(pick("iterations", 10000)),
            bootstrap_mode=str(pick("bootstrap_mode", "permutation")),
            min_cluster_size=int(pick("min_cluster_size", 5)),
            deep_split=str(pick("deep_split", "false")).lower() in ("1", "true", "yes"),
            dissim_transform=str(pick("dissim_transform", "one_minus")),
            centroid_mode=str(pick("centroid_mode", "default")),
            svm_c=float(pick("svm_c", 1.0)),
            svm_gamma=float(pick("svm_gamma", 0.1)),
            lam=float(lam_raw) if str(lam_raw).strip() else None,
            folds=int(pick("folds", 5)),
            hidden=hidden,
            epochs=int(pick("epochs", 200)),
            lr=float(pick("lr", 1e-3)),
            batch_size=int(pick("batch_size", 64)),
            val_fraction=float(pick("val_fraction", 0.1)),
            patience=int(pick("patience", 20)),
            api_base_url=api_base_url,
            label_top_k=int(pick("label_top_k", 5)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad parameter value in {path}: {exc}") from None
    return config
