"""Artifact output: stamped delimited files and the figures rendered beside them.

Every CSV starts with a "# config_hash=... seed=..." comment line and every
JSONL with an equivalent meta record; readers verify the stamp so artifacts
from a different configuration are rejected instead of silently mixed.
Floats are written with repr so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import DataError, ParseError
from .genrecluster import Dendrogram
from .model import RiskLabel, ScoreTable

FIG_DPI = 120


def stamp(config_hash: str, seed: int) -> str:
    return f"config_hash={config_hash} seed={seed}"


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: list[str], rows: list[list], file_stamp: str) -> None:
    lines = [f"# {file_stamp}", ",".join(header)]
    lines.extend(",".join(_format(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_csv(path, expected_stamp: str | None = None) -> tuple[str, list[str], list[list[str]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ParseError(f"{path}: missing stamp header")
    file_stamp = lines[0][2:]
    if expected_stamp is not None and file_stamp != expected_stamp:
        raise DataError(
            f"{path}: stamp mismatch (file has {file_stamp!r}, expected {expected_stamp!r})"
        )
    if len(lines) < 2:
        raise ParseError(f"{path}: missing header row")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:] if line]
    return file_stamp, header, rows


def write_jsonl(path, records: list[dict], config_hash: str, seed: int) -> None:
    lines = [json.dumps({"kind": "meta", "config_hash": config_hash, "seed": seed}, sort_keys=True)]
    lines.extend(json.dumps(r, sort_keys=True) for r in records)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# figures


def scores_boxplot(table: ScoreTable, risk_of: dict[str, RiskLabel], path) -> None:
    """Per-category boxplots of prevalence scores, no-risk vs at-risk."""
    norisk = [u for u in table.rows if risk_of.get(u) is RiskLabel.NO_RISK]
    atrisk = [u for u in table.rows if risk_of.get(u) is RiskLabel.AT_RISK]
    idx = {u: i for i, u in enumerate(table.rows)}
    fig, ax = plt.subplots(figsize=(11, 4.5))
    positions, data, colors = [], [], []
    for k, category in enumerate(table.cols):
        col = table.values[:, k]
        data.append([col[idx[u]] for u in norisk])
        positions.append(3 * k)
        colors.append("#4a7fb5")
        data.append([col[idx[u]] for u in atrisk])
        positions.append(3 * k + 1)
        colors.append("#c25d5d")
    boxes = ax.boxplot(data, positions=positions, widths=0.8, patch_artist=True)
    for patch, color in zip(boxes["boxes"], colors):
        patch.set_facecolor(color)
    ax.set_xticks([3 * k + 0.5 for k in range(len(table.cols))])
    ax.set_xticklabels(table.cols, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("prevalence score")
    ax.legend([boxes["boxes"][0], boxes["boxes"][1]], ["No-Risk", "At-Risk"], loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def centroid_scatter(centroids, tag_points, path) -> None:
    """Categories (and optionally tags) in emotion space; VAD gets two panels."""
    dims = len(next(iter(centroids.values())).coords)
    pairs = [(0, 1)] if dims == 2 else [(0, 1), (0, 2)]
    names = {0: "valence", 1: "arousal", 2: "dominance"}
    fig, axes = plt.subplots(1, len(pairs), figsize=(6 * len(pairs), 5), squeeze=False)
    for ax, (i, j) in zip(axes[0], pairs):
        if tag_points:
            xs = [p.coords[i] for p in tag_points.values()]
            ys = [p.coords[j] for p in tag_points.values()]
            ax.scatter(xs, ys, s=8, color="#bbbbbb", label="tags")
        for name in sorted(centroids):
            c = centroids[name]
            ax.scatter([c.coords[i]], [c.coords[j]], s=40, color="#c25d5d")
            ax.annotate(name, (c.coords[i], c.coords[j]), fontsize=8)
        ax.set_xlim(1, 9)
        ax.set_ylim(1, 9)
        ax.set_xlabel(names[i])
        ax.set_ylabel(names[j])
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def dendrogram_figure(dendrogram: Dendrogram, path) -> None:
    """Minimal dendrogram rendering: leaves on x, merge heights on y."""
    n = len(dendrogram.leaves)
    children = {n + k: (m[0], m[1]) for k, m in enumerate(dendrogram.merges)}
    height = {i: 0.0 for i in range(n)}
    for k, m in enumerate(dendrogram.merges):
        height[n + k] = m[2]

    order: list[int] = []

    def visit(node):
        if node < n:
            order.append(node)
        else:
            left, right = children[node]
            visit(left)
            visit(right)

    visit(n + len(dendrogram.merges) - 1)
    x = {leaf: float(i) for i, leaf in enumerate(order)}

    fig, ax = plt.subplots(figsize=(max(6, n * 0.35), 4.5))
    for k, (left, right, h, _) in enumerate(dendrogram.merges):
        xl, xr = x[left], x[right]
        ax.plot([xl, xl, xr, xr], [height[left], h, h, height[right]], color="#444444", lw=1)
        x[n + k] = (xl + xr) / 2.0
    ax.set_xticks(range(n))
    ax.set_xticklabels([dendrogram.leaves[i] for i in order], rotation=90, fontsize=7)
    ax.set_ylabel("merge height")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def genre_prevalence_bars(cluster_labels, mean_norisk, mean_atrisk, path) -> None:
    """Mean genre prevalence per cluster, grouped bars per risk group."""
    k = len(cluster_labels)
    xs = np.arange(k)
    fig, ax = plt.subplots(figsize=(max(6, k * 0.8), 4.5))
    ax.bar(xs - 0.2, mean_norisk, width=0.4, label="No-Risk", color="#4a7fb5")
    ax.bar(xs + 0.2, mean_atrisk, width=0.4, label="At-Risk", color="#c25d5d")
    ax.set_xticks(xs)
    ax.set_xticklabels(cluster_labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("mean prevalence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
