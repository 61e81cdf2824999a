"""Risk-group prediction from tag information.

Each user is represented by the tag-score-weighted sum of their tags'
embedding vectors. Features are standardized, L1-regularized logistic
regression (coordinate descent with soft thresholding on an iteratively
reweighted quadratic approximation) picks the informative dimensions, and a
soft-margin RBF SVM trained by sequential minimal optimization predicts the
group. Cross-validation is stratified and seeded; selection is refit inside
every training fold so no test information leaks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DataError, ParseError, ValidationError
from .induction import EmbeddingTable, embed
from .model import ListeningHistory, TagVocabulary

log = logging.getLogger(__name__)

KKT_TOL = 1e-3
CD_TOL = 1e-6


@dataclass
class UserFeature:
    user_id: str
    vector: np.ndarray
    tag_scores: dict[str, float] = field(default_factory=dict)
    selected_dims: np.ndarray | None = None


def user_embedding(
    history: ListeningHistory,
    vocabulary: TagVocabulary,
    associations: dict[str, dict[str, float]],
    table: EmbeddingTable,
) -> UserFeature:
    """Weighted sum of tag vectors, weights being the user's per-tag scores.

    The per-tag score is the association-times-playcount mass of the tag over
    the user's total playcount. Users whose tags have no embeddings get a
    zero vector and a warning.
    """
    denom = history.total_playcount()
    ts: dict[str, float] = {}
    for track_id, playcount in history.entries:
        shares = associations.get(track_id)
        if shares is None:
            continue
        for tag, share in shares.items():
            ts[tag] = ts.get(tag, 0.0) + share * playcount / denom
    vector = np.zeros(table.dim)
    embedded = 0
    for tag in sorted(ts):
        vec = embed(table, tag)
        if vec is not None:
            vector = vector + ts[tag] * vec
            embedded += 1
    if ts and embedded == 0:
        log.warning("user %s has no embeddable tags, feature is the zero vector", history.user_id)
    if not ts:
        log.warning("user %s has no vocabulary tags at all, feature is the zero vector", history.user_id)
    return UserFeature(user_id=history.user_id, vector=vector, tag_scores=ts)


# ---------------------------------------------------------------------------
# L1-regularized logistic regression (coordinate descent)


@dataclass
class L1SelectResult:
    coefficients: np.ndarray  # original feature scale
    intercept: float
    selected_dims: np.ndarray
    lam: float
    n_iter: int


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0, 1.0, std)
    return (x - mean) / std, mean, std


def _soft_threshold(value: float, cut: float) -> float:
    if value > cut:
        return value - cut
    if value < -cut:
        return value + cut
    return 0.0


def l1_logistic_select(
    features: np.ndarray,
    labels: np.ndarray,
    lam: float,
    tol: float = CD_TOL,
    max_outer: int = 200,
) -> L1SelectResult:
    """Minimize mean logistic loss + lam * ||w||_1 by coordinate descent.

    Features are standardized internally; the returned coefficients are on
    the original scale, and selected_dims are the indices whose coefficient
    survived the soft threshold. The intercept is never penalized.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or len(y) != x.shape[0]:
        raise DataError("features must be 2-d with one label per row")
    if len(np.unique(y)) < 2:
        raise DataError("both classes must be present")
    if lam < 0:
        raise DataError(f"lambda must be >= 0, got {lam}")
    y01 = (y == y.max()).astype(np.float64)

    xs, mean, std = _standardize(x)
    n, p = xs.shape
    w = np.zeros(p)
    b = float(np.log(y01.mean() / (1.0 - y01.mean()))) if 0 < y01.mean() < 1 else 0.0

    eta = xs @ w + b
    n_iter = 0
    for n_iter in range(1, max_outer + 1):
        prob = 1.0 / (1.0 + np.exp(-eta))
        s = np.clip(prob * (1.0 - prob), 1e-5, None)
        z = eta + (y01 - prob) / s  # working response of the quadratic approximation
        max_delta = 0.0
        for _ in range(100):
            inner_delta = 0.0
            for j in range(p):
                xj = xs[:, j]
                resid = z - eta
                rho = float((s * xj * (resid + w[j] * xj)).mean())
                denom = float((s * xj * xj).mean())
                if denom <= 0:
                    new_wj = 0.0
                else:
                    new_wj = _soft_threshold(rho, lam) / denom
                if new_wj != w[j]:
                    eta = eta + (new_wj - w[j]) * xj
                    inner_delta = max(inner_delta, abs(new_wj - w[j]))
                    w[j] = new_wj
            new_b = b + float((s * (z - eta)).sum() / s.sum())
            if new_b != b:
                eta = eta + (new_b - b)
                inner_delta = max(inner_delta, abs(new_b - b))
                b = new_b
            max_delta = max(max_delta, inner_delta)
            if inner_delta < tol:
                break
        if max_delta < tol:
            break
    else:
        log.warning("l1 coordinate descent hit max_outer=%d before tolerance", max_outer)

    selected = np.flatnonzero(w != 0.0)
    coef = w / std
    intercept = b - float((w * mean / std).sum())
    return L1SelectResult(coef, intercept, selected, lam, n_iter)


def lambda_grid(features: np.ndarray, labels: np.ndarray, count: int = 10) -> np.ndarray:
    """Logarithmic grid from the all-zero lambda down three decades."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    y01 = (y == y.max()).astype(np.float64)
    xs, _, _ = _standardize(x)
    lam_max = float(np.abs(xs.T @ (y01 - y01.mean())).max() / len(y01))
    lam_max = max(lam_max, 1e-6)
    return lam_max * np.logspace(0, -3, count)


# ---------------------------------------------------------------------------
# RBF-kernel SVM trained with sequential minimal optimization


@dataclass
class SvmModel:
    gamma: float
    C: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i for the support vectors
    bias: float
    classes: tuple  # (negative label, positive label)
    kkt_tol: float = KKT_TOL
    objective_trace: list[float] = field(default_factory=list)
    train_alphas: np.ndarray | None = None  # full alpha vector; not persisted


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """K(x, z) = exp(-gamma * ||x - z||^2)."""
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    sq = np.clip(aa + bb - 2.0 * (a @ b.T), 0.0, None)
    return np.exp(-gamma * sq)


class _Smo:
    """Platt's SMO on the dual soft-margin problem with an RBF kernel."""

    def __init__(self, x, y, C, gamma, tol, record_objective=False):
        self.x = x
        self.y = y
        self.C = C
        self.tol = tol
        self.K = rbf_kernel(x, x, gamma)
        self.n = len(y)
        self.alphas = np.zeros(self.n)
        self.b = 0.0
        self.errors = -y.astype(np.float64)  # f(x) = 0 initially
        self.record = record_objective
        self.trace: list[float] = []

    def objective(self) -> float:
        ay = self.alphas * self.y
        return float(self.alphas.sum() - 0.5 * ay @ self.K @ ay)

    def _update_f(self):
        ay = self.alphas * self.y
        self.errors = self.K @ ay + self.b - self.y

    def take_step(self, i1, i2) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alphas[i1], self.alphas[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            low, high = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            low, high = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if low >= high:
            return False
        k11, k12, k22 = self.K[i1, i1], self.K[i1, i2], self.K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(high, max(low, a2_new))
        else:
            # degenerate direction: evaluate the objective at both ends, with
            # the paired alpha moved along the constraint as well
            self.alphas[i1], self.alphas[i2] = a1 + s * (a2 - low), low
            obj_low = self.objective()
            self.alphas[i1], self.alphas[i2] = a1 + s * (a2 - high), high
            obj_high = self.objective()
            self.alphas[i1], self.alphas[i2] = a1, a2
            if obj_low > obj_high + 1e-12:
                a2_new = low
            elif obj_high > obj_low + 1e-12:
                a2_new = high
            else:
                return False
        if abs(a2_new - a2) < 1e-8 * (a2_new + a2 + 1e-8):
            return False
        a1_new = a1 + s * (a2 - a2_new)

        b1 = self.b - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12
        b2 = self.b - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22
        if 0 < a1_new < self.C:
            new_b = b1
        elif 0 < a2_new < self.C:
            new_b = b2
        else:
            new_b = (b1 + b2) / 2.0
        delta1 = y1 * (a1_new - a1)
        delta2 = y2 * (a2_new - a2)
        self.errors += delta1 * self.K[i1] + delta2 * self.K[i2] + (new_b - self.b)
        self.alphas[i1] = a1_new
        self.alphas[i2] = a2_new
        self.b = new_b
        if self.record:
            self.trace.append(self.objective())
        return True

    def examine(self, i2) -> bool:
        y2, a2, e2 = self.y[i2], self.alphas[i2], self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        non_bound = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C))
        if len(non_bound) > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.errors[non_bound] - e2))])
            if self.take_step(i1, i2):
                return True
        # second choice heuristics; deterministic sweep start instead of Platt's random one
        if len(non_bound):
            for i1 in np.roll(non_bound, i2 % len(non_bound)):
                if self.take_step(int(i1), i2):
                    return True
        for i1 in np.roll(np.arange(self.n), i2):
            if self.take_step(int(i1), i2):
                return True
        return False

    def max_violation(self) -> float:
        r = self.errors * self.y
        worst = 0.0
        for i in range(self.n):
            if self.alphas[i] < self.C:
                worst = max(worst, -r[i])
            if self.alphas[i] > 0:
                worst = max(worst, r[i])
        return worst

    def solve(self, max_sweeps=2000):
        examine_all = True
        for _ in range(max_sweeps):
            if examine_all:
                self._update_f()  # shed accumulated error-cache drift
                if self.max_violation() <= self.tol:
                    return
            changed = 0
            if examine_all:
                targets = range(self.n)
            else:
                targets = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C))
            for i in targets:
                changed += self.examine(int(i))
            if examine_all:
                if changed == 0:
                    return
                examine_all = False
            elif changed == 0:
                examine_all = True
        self._update_f()
        if self.max_violation() <= self.tol:
            return
        raise ConvergenceError(f"SMO did not converge within {max_sweeps} sweeps")


def svm_train(
    features: np.ndarray,
    labels: np.ndarray,
    C: float,
    gamma: float,
    tol: float = KKT_TOL,
    record_objective: bool = False,
) -> SvmModel:
    """Train the soft-margin RBF SVM until every KKT violation is below tol."""
    x = np.asarray(features, dtype=np.float64)
    y_raw = np.asarray(labels)
    if not np.all(np.isfinite(x)):
        raise DataError("features contain non-finite values")
    classes = tuple(sorted(np.unique(y_raw).tolist()))
    if len(classes) != 2:
        raise DataError(f"need exactly 2 classes, got {classes}")
    y = np.where(y_raw == classes[1], 1.0, -1.0)
    smo = _Smo(x, y, float(C), float(gamma), tol, record_objective=record_objective)
    smo.solve()
    sv = smo.alphas > 0
    return SvmModel(
        gamma=float(gamma),
        C=float(C),
        support_vectors=x[sv],
        dual_coef=(smo.alphas * y)[sv],
        bias=float(smo.b),
        classes=classes,
        kkt_tol=tol,
        objective_trace=smo.trace,
        train_alphas=smo.alphas,
    )


def svm_decision(model: SvmModel, features: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != model.support_vectors.shape[1]:
        raise ValidationError(
            f"expected {model.support_vectors.shape[1]}-dim features, got {x.shape[1]}"
        )
    k = rbf_kernel(x, model.support_vectors, model.gamma)
    return k @ model.dual_coef + model.bias


def svm_predict(model: SvmModel, feature: np.ndarray):
    """Label and decision value; a decision of exactly 0 goes to the positive class."""
    value = float(svm_decision(model, np.atleast_2d(feature))[0])
    label = model.classes[1] if value >= 0 else model.classes[0]
    return label, value


def kkt_violations(model: SvmModel, features, labels) -> float:
    """Largest KKT violation of the trained model over its training set."""
    if model.train_alphas is None:
        raise DataError("KKT check needs the in-memory training alphas")
    x = np.asarray(features, dtype=np.float64)
    y = np.where(np.asarray(labels) == model.classes[1], 1.0, -1.0)
    margins = y * svm_decision(model, x)
    worst = 0.0
    for a, m in zip(model.train_alphas, margins):
        if a <= 0:
            worst = max(worst, 1.0 - m)  # should have margin >= 1
        elif a >= model.C:
            worst = max(worst, m - 1.0)  # should have margin <= 1
        else:
            worst = max(worst, abs(m - 1.0))
    return float(worst)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class CvReport:
    mean_accuracy: float
    fold_accuracies: list[float]
    fold_selected: list[int]
    lam_used: list[float]


def stratified_folds(labels: np.ndarray, folds: int, seed: int, ids=None) -> list[np.ndarray]:
    """Deterministic stratified fold assignment given (seed, id order)."""
    y = np.asarray(labels)
    order = np.arange(len(y)) if ids is None else np.argsort(np.asarray(ids, dtype=object))
    rng = np.random.Generator(np.random.PCG64(seed))
    buckets: list[list[int]] = [[] for _ in range(folds)]
    position = 0
    for cls in sorted(np.unique(y).tolist()):
        members = [int(i) for i in order if y[i] == cls]
        members = [members[i] for i in rng.permutation(len(members))]
        for idx in members:
            buckets[position % folds].append(idx)
            position += 1
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _fit_predict(x_train, y_train, x_test, C, gamma, lam) -> tuple[np.ndarray, int]:
    xs, mean, std = _standardize(x_train)
    selection = l1_logistic_select(xs, y_train, lam)
    dims = selection.selected_dims
    if dims.size == 0:
        majority = sorted(np.unique(y_train).tolist(), key=lambda c: (-(y_train == c).sum(), c))[0]
        return np.full(len(x_test), majority), 0
    model = svm_train(xs[:, dims], y_train, C=C, gamma=gamma)
    xt = (x_test - mean) / std
    decisions = svm_decision(model, xt[:, dims])
    predictions = np.where(decisions >= 0, model.classes[1], model.classes[0])
    return predictions, int(dims.size)


def _pick_lambda(x_train, y_train, grid, seed) -> float:
    """Inner 3-fold selection: best mean logistic accuracy, ties to the sparser lambda."""
    folds = stratified_folds(y_train, 3, seed)
    hi, lo = y_train.max(), y_train.min()
    best_lam, best_acc = float(grid[0]), -1.0
    for lam in sorted(grid, reverse=True):  # sparser models first so ties stay sparse
        scores = []
        for k in range(3):
            test_idx = folds[k]
            train_idx = np.setdiff1d(np.arange(len(y_train)), test_idx)
            fit = l1_logistic_select(x_train[train_idx], y_train[train_idx], float(lam))
            eta = x_train[test_idx] @ fit.coefficients + fit.intercept
            predicted = np.where(eta >= 0, hi, lo)
            scores.append(float((predicted == y_train[test_idx]).mean()))
        acc = float(np.mean(scores))
        if acc > best_acc + 1e-12:
            best_acc, best_lam = acc, float(lam)
    return best_lam


def cross_validate(
    features: np.ndarray,
    labels: np.ndarray,
    folds: int = 5,
    seed: int = 0,
    C: float = 1.0,
    gamma: float = 0.1,
    lam: float | None = None,
    ids=None,
) -> CvReport:
    """Stratified k-fold accuracy of the select-then-SVM pipeline.

    With lam=None the penalty is chosen per training fold by an inner 3-fold
    search over a logarithmic grid; selection and standardization are always
    fit on the training fold only.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) != 2:
        raise DataError(f"need exactly 2 classes, got {classes.tolist()}")
    if counts.min() < folds:
        raise DataError(f"need at least {folds} samples per class, got {counts.min()}")
    assignment = stratified_folds(y, folds, seed, ids=ids)
    accuracies, selected_counts, lams = [], [], []
    for k in range(folds):
        test_idx = assignment[k]
        train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
        x_train, y_train = x[train_idx], y[train_idx]
        fold_lam = lam
        if fold_lam is None:
            grid = lambda_grid(x_train, y_train)
            fold_lam = _pick_lambda(x_train, y_train, grid, seed * 31 + k)
        predictions, n_selected = _fit_predict(x_train, y_train, x[test_idx], C, gamma, fold_lam)
        accuracies.append(float((predictions == y[test_idx]).mean()))
        selected_counts.append(n_selected)
        lams.append(float(fold_lam))
    return CvReport(
        mean_accuracy=float(np.mean(accuracies)),
        fold_accuracies=accuracies,
        fold_selected=selected_counts,
        lam_used=lams,
    )


# ---------------------------------------------------------------------------
# persistence


def save_svm(model: SvmModel, path) -> None:
    lines = ["tagrisk-svm v1"]
    lines.append(f"gamma {model.gamma!r}")
    lines.append(f"C {model.C!r}")
    lines.append(f"bias {model.bias!r}")
    lines.append(f"classes {model.classes[0]!r} {model.classes[1]!r}")
    lines.append(f"support {model.support_vectors.shape[0]} {model.support_vectors.shape[1]}")
    lines.extend(" ".join(repr(v) for v in row) for row in model.support_vectors)
    lines.append("dual_coef")
    lines.append(" ".join(repr(v) for v in model.dual_coef))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_svm(path) -> SvmModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "tagrisk-svm v1":
        raise ParseError(f"{path}: not a v1 svm file")
    gamma = float(lines[1].split()[1])
    C = float(lines[2].split()[1])
    bias = float(lines[3].split()[1])
    classes = tuple(int(v) for v in lines[4].split()[1:])
    rows, cols = (int(v) for v in lines[5].split()[1:])
    sv = np.array([[float(v) for v in lines[6 + r].split()] for r in range(rows)])
    if sv.shape != (rows, cols):
        raise ParseError(f"{path}: support vector block malformed")
    dual = np.array([float(v) for v in lines[7 + rows].split()])
    return SvmModel(
        gamma=gamma, C=C, support_vectors=sv, dual_coef=dual, bias=bias, classes=classes
    )
