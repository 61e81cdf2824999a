"""Nonparametric group tests and questionnaire validity statistics.

The Mann-Whitney U test uses midranks for ties, exact enumeration for small
untied samples and a tie- and continuity-corrected normal approximation
otherwise. Bootstrap significance follows the label-reassignment scheme:
group labels are reshuffled (sizes preserved) and the U statistic recomputed
each iteration; a with-replacement resampling mode is available behind a
flag. Iteration i draws its randomness from seed XOR i, so serial and
parallel runs agree.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .model import Participant, RiskLabel, ScoreTable

log = logging.getLogger(__name__)

EXACT_LIMIT = 16  # beyond this (or with ties) enumeration gives way to the normal approximation
P_FLOOR = 1e-300


@dataclass(frozen=True)
class MwuResult:
    u_statistic: float  # U for the first sample
    mean_rank_x: float
    mean_rank_y: float
    p_value: float
    method: str  # "exact" or "normal"


@dataclass(frozen=True)
class BootstrapResult:
    observed_u: float
    iterations: int
    seed: int
    p_value: float
    null_mean: float
    null_sd: float
    null_q025: float
    null_q500: float
    null_q975: float


@dataclass(frozen=True)
class CategoryTest:
    category: str
    mwu: MwuResult
    bootstrap: BootstrapResult | None
    direction: str  # group with the higher mean rank


def midranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks, ties sharing the mean of their rank positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _u_from_ranks(ranks: np.ndarray, n1: int) -> float:
    return float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)


def _exact_two_tailed_p(n1: int, n2: int, u_obs: float) -> float:
    """Enumerate the null U distribution by rank-sum counting (no ties)."""
    n = n1 + n2
    max_sum = n1 * n  # upper bound on a size-n1 rank sum
    counts = np.zeros((n1 + 1, max_sum + 1), dtype=np.int64)
    counts[0][0] = 1
    for rank in range(1, n + 1):
        for k in range(min(rank, n1), 0, -1):
            counts[k][rank:] += counts[k - 1][: max_sum + 1 - rank]
    dist = counts[n1]
    offset = n1 * (n1 + 1) // 2  # U = rank sum - offset
    mu = n1 * n2 / 2.0
    total = dist.sum()
    extreme = 0
    for s in range(offset, max_sum + 1):
        if dist[s] and abs((s - offset) - mu) >= abs(u_obs - mu):
            extreme += int(dist[s])
    return extreme / total


def mwu(x, y) -> MwuResult:
    """Two-tailed Mann-Whitney U test; U is reported for the first sample."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise DataError("mwu requires both samples to be nonempty")
    n1, n2 = len(x), len(y)
    pooled = np.concatenate([x, y])
    ranks = midranks(pooled)
    u1 = _u_from_ranks(ranks, n1)
    mean_rank_x = float(ranks[:n1].mean())
    mean_rank_y = float(ranks[n1:].mean())
    has_ties = len(np.unique(pooled)) < len(pooled)

    if n1 + n2 <= EXACT_LIMIT and not has_ties:
        p = _exact_two_tailed_p(n1, n2, u1)
        method = "exact"
    else:
        n = n1 + n2
        _, tie_counts = np.unique(pooled, return_counts=True)
        tie_term = float(((tie_counts**3 - tie_counts).sum()) / (n * (n - 1))) if n > 1 else 0.0
        var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
        mu = n1 * n2 / 2.0
        if var <= 0:
            p = 1.0
        else:
            z = max(0.0, abs(u1 - mu) - 0.5) / math.sqrt(var)
            p = math.erfc(z / math.sqrt(2.0))  # 2 * normal sf
        method = "normal"
    return MwuResult(u1, mean_rank_x, mean_rank_y, min(1.0, max(P_FLOOR, p)), method)


def bootstrap_p(
    x,
    y,
    iterations: int = 10000,
    seed: int = 0,
    mode: str = "permutation",
) -> BootstrapResult:
    """Bootstrap significance of the observed U under random group reassignment.

    Extremeness is two-sided distance from the null center n1*n2/2, and the
    p-value is add-one smoothed so it can never be exactly zero.
    """
    if mode not in ("permutation", "replacement"):
        raise DataError(f"unknown bootstrap mode {mode!r}")
    if iterations < 100:
        log.warning("bootstrap with %d iterations is unreliable; use >= 100", iterations)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise DataError("bootstrap requires both samples to be nonempty")
    n1, n2 = len(x), len(y)
    pooled = np.concatenate([x, y])
    ranks = midranks(pooled)
    u_obs = _u_from_ranks(ranks, n1)
    mu = n1 * n2 / 2.0
    observed_dev = abs(u_obs - mu)

    null_u = np.empty(iterations)
    extreme = 0
    for i in range(iterations):
        rng = np.random.Generator(np.random.PCG64(seed ^ i))
        if mode == "permutation":
            member = rng.permutation(n1 + n2)[:n1]
            u_star = float(ranks[member].sum() - n1 * (n1 + 1) / 2.0)
        else:
            resampled = np.concatenate(
                [rng.choice(pooled, size=n1, replace=True), rng.choice(pooled, size=n2, replace=True)]
            )
            u_star = _u_from_ranks(midranks(resampled), n1)
        null_u[i] = u_star
        if abs(u_star - mu) >= observed_dev:
            extreme += 1

    p = (1 + extreme) / (1 + iterations)
    q025, q500, q975 = np.quantile(null_u, [0.025, 0.5, 0.975])
    return BootstrapResult(
        observed_u=u_obs,
        iterations=iterations,
        seed=seed,
        p_value=float(p),
        null_mean=float(null_u.mean()),
        null_sd=float(null_u.std(ddof=1)) if iterations > 1 else 0.0,
        null_q025=float(q025),
        null_q500=float(q500),
        null_q975=float(q975),
    )


def point_biserial(scores, labels) -> float:
    """Pearson correlation between scores and a 0/1 group coding; NaN if degenerate."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise DataError("scores and labels must have the same length")
    if not (np.any(labels == 0) and np.any(labels == 1)):
        raise DataError("both label values (0 and 1) must be present")
    if np.all(labels == labels[0]):
        raise DataError("labels have no variance")
    if np.std(scores) == 0:
        return float("nan")
    sc = scores - scores.mean()
    lc = labels - labels.mean()
    return float((sc * lc).sum() / math.sqrt((sc * sc).sum() * (lc * lc).sum()))


def partial_correlation(x, y, controls) -> float:
    """Correlation of x and y after removing the least-squares fit on controls."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    controls = [np.asarray(c, dtype=np.float64) for c in controls]
    n = len(x)
    if len(y) != n or any(len(c) != n for c in controls):
        raise DataError("all vectors must have the same length")
    if n < len(controls) + 3:
        raise DataError(f"need at least {len(controls) + 3} observations, got {n}")
    design = np.column_stack([np.ones(n)] + controls)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DataError("controls are rank deficient")
    beta_x, *_ = np.linalg.lstsq(design, x, rcond=None)
    beta_y, *_ = np.linalg.lstsq(design, y, rcond=None)
    rx = x - design @ beta_x
    ry = y - design @ beta_y
    denom = math.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0:
        return float("nan")
    return float((rx * ry).sum() / denom)


def cronbach_alpha(items) -> float:
    """Internal consistency over a participants x items matrix; NaN if total variance is zero."""
    items = np.asarray(items, dtype=np.float64)
    if items.ndim != 2 or items.shape[0] < 2 or items.shape[1] < 2:
        raise DataError("need at least 2 participants and 2 items")
    k = items.shape[1]
    item_vars = items.var(axis=0, ddof=1)
    total_var = items.sum(axis=1).var(ddof=1)
    if total_var == 0:
        return float("nan")
    return float(k / (k - 1) * (1.0 - item_vars.sum() / total_var))


def group_difference_report(
    table: ScoreTable,
    participants: list[Participant],
    categories: tuple[str, ...],
    iterations: int = 10000,
    seed: int = 0,
    alpha: float = 0.05,
    mode: str = "permutation",
) -> list[CategoryTest]:
    """MWU per category between the no-risk and at-risk groups, with a bootstrap
    follow-up for every category whose MWU p falls strictly below alpha.

    The first sample is always the no-risk group. Category k derives its
    bootstrap seed as seed + k so reports are reproducible per column.
    """
    risk_of = {p.user_id: p.risk for p in participants}
    norisk_rows = [i for i, u in enumerate(table.rows) if risk_of.get(u) is RiskLabel.NO_RISK]
    atrisk_rows = [i for i, u in enumerate(table.rows) if risk_of.get(u) is RiskLabel.AT_RISK]
    if not norisk_rows or not atrisk_rows:
        raise DataError("both risk groups must be nonempty")
    results = []
    for k, category in enumerate(categories):
        col = table.values[:, table.cols.index(category)]
        x = col[norisk_rows]
        y = col[atrisk_rows]
        res = mwu(x, y)
        if res.mean_rank_x > res.mean_rank_y:
            direction = "NoRisk"
        elif res.mean_rank_y > res.mean_rank_x:
            direction = "AtRisk"
        else:
            direction = "tie"
        boot = None
        if res.p_value < alpha:
            boot = bootstrap_p(x, y, iterations=iterations, seed=seed + k, mode=mode)
        results.append(CategoryTest(category, res, boot, direction))
    return results
