"""Command line interface.

Exit codes: 0 success, 1 usage or configuration problems, 2 data or
validation failures, 3 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, ConvergenceError, TagriskError
from .pipeline import Engine
from .synth import SynthConfig, make_corpus, write_world

log = logging.getLogger(__name__)

CELL_COMMANDS = ("score", "test", "rank", "classify")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagrisk",
        description="Social-tag listening analytics: emotion prevalence, group tests, "
        "genre clusters and risk classification.",
    )
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, cells=False):
        p.add_argument("--config", required=True, help="pipeline config file (INI)")
        p.add_argument("--out-dir", default="out", help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="override params.seed")
        p.add_argument("--iterations", type=int, default=None, help="override bootstrap iterations")
        if cells:
            p.add_argument("--space", choices=["va", "vad"], default=None, help="restrict to one space")
            p.add_argument("--top-n", type=int, default=None, help="restrict to one n")
            p.add_argument("--window-months", type=int, default=None, help="restrict to one window")

    for name, help_text, cells in (
        ("ingest", "validate the fixture and write the cohort artifact", False),
        ("filter", "run tag filtering and write the vocabulary tag list", False),
        ("induce", "train the emotion regressor and project tags", True),
        ("map", "assign tags to GEMS categories", True),
        ("score", "compute emotion prevalence score tables", True),
        ("test", "group-difference tests plus genre prevalence correlations", True),
        ("cluster", "cluster genre tags and label the clusters", False),
        ("rank", "rank tags of flagged categories by group score difference", True),
        ("classify", "cross-validated risk classification from tag embeddings", True),
        ("pipeline", "run every stage over the full (space, window, n) grid", False),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p, cells=cells)

    p = sub.add_parser("synth", help="generate a synthetic fixture plus a ready config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--null", action="store_true", help="no planted group effect")
    p.add_argument("--users-per-group", type=int, default=60)
    return parser


def _overrides(args) -> dict:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "iterations", None) is not None:
        overrides["iterations"] = args.iterations
    if getattr(args, "space", None) is not None:
        overrides["spaces"] = args.space.upper()
    if getattr(args, "top_n", None) is not None:
        overrides["top_n"] = str(args.top_n)
    if getattr(args, "window_months", None) is not None:
        overrides["window_months"] = str(args.window_months)
    return overrides


def _cells(config):
    for space in config.spaces:
        for t in config.window_months:
            for n in config.top_n:
                yield space, t, n


def run(args) -> int:
    if args.command == "synth":
        corpus = make_corpus(SynthConfig(users_per_group=args.users_per_group))
        config_path = write_world(corpus, args.seed, args.out_dir, planted=not args.null)
        print(f"wrote synthetic fixture and config to {config_path}")
        return 0

    config = load_config(args.config, _overrides(args))
    engine = Engine(config, args.out_dir)
    if args.command == "ingest":
        manifest = engine.run_ingest()
        print(f"cohort ok: {manifest['participants']} participants, {manifest['tracks']} tracks")
    elif args.command == "filter":
        kept = engine.run_filter()
        print(f"vocabulary has {len(kept)} tags")
    elif args.command == "induce":
        for space in config.spaces:
            regressor, points = engine.run_induce(space)
            print(f"{space}: projected {len(points)} tags (val loss {regressor.meta['val_loss']:.4f})")
    elif args.command == "map":
        for space in config.spaces:
            vocabulary = engine.run_map(space)
            print(f"{space}: {len(vocabulary)} tags across 9 categories")
    elif args.command == "score":
        for space, t, n in _cells(config):
            table = engine.run_score(space, t, n)
            print(f"{space} t={t} n={n}: scored {len(table.rows)} users")
    elif args.command == "test":
        for space, t, n in _cells(config):
            results = engine.run_test(space, t, n)
            engine.run_genre_scores(space, t, n, results)
            flagged = engine.flagged(results)
            names = ", ".join(f"{r.category}({r.direction})" for r in flagged) or "none"
            print(f"{space} t={t} n={n}: flagged {names}")
    elif args.command == "cluster":
        _, dendrogram, labeled = engine.run_cluster()
        print(f"{len(labeled.clusters)} clusters, {len(labeled.unassigned)} unassigned tags")
    elif args.command == "rank":
        for space, t, n in _cells(config):
            ranked = engine.run_rank(space, t, n)
            for category, rows in ranked.items():
                print(f"{space} t={t} n={n} {category}: top tag {rows[0][0] if rows else '-'}")
    elif args.command == "classify":
        for space, t, n in _cells(config):
            cv = engine.run_classify(space, t, n)
            print(f"{space} t={t} n={n}: cv accuracy {cv.mean_accuracy:.3f}")
    elif args.command == "pipeline":
        summary = engine.run_all()
        print(f"pipeline complete: {len(summary)} flagged cells, artifacts in {Path(args.out_dir)}")
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown command {args.command}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return 0 if exit_.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except TagriskError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
