"""Independent reference implementations used to check the library.

Everything here is deliberately naive: plain dict/loop arithmetic, brute
enumeration, closed-form recomputation, or an external solver. None of it
shares code paths with the package.
"""

import itertools

import numpy as np


def prevalence_oracle(entries, track_tags, category_of):
    """Literal double-loop evaluation of the per-user prevalence formula.

    entries: list of (track_id, playcount); track_tags: track_id -> list of
    (tag, weight); category_of: tag -> category. Returns dict category -> S.
    """
    scores = {}
    denom = sum(pc for _, pc in entries)
    for track_id, playcount in entries:
        tags = track_tags.get(track_id, [])
        vocab_weight = sum(w for t, w in tags if t in category_of)
        if vocab_weight == 0:
            continue
        for tag, weight in tags:
            if tag in category_of:
                c = category_of[tag]
                scores[c] = scores.get(c, 0.0) + (weight / vocab_weight) * playcount
    return {c: v / denom for c, v in scores.items()}


def mwu_exact_oracle(x, y):
    """Two-tailed exact MWU p by enumerating every labeling (no ties allowed)."""
    pooled = list(x) + list(y)
    n1, n = len(x), len(pooled)
    rank = {v: r for r, v in enumerate(sorted(pooled), start=1)}
    mu = n1 * (n - n1) / 2.0
    u_obs = sum(rank[v] for v in x) - n1 * (n1 + 1) / 2.0
    extreme = total = 0
    for combo in itertools.combinations(range(n), n1):
        u = sum(rank[pooled[i]] for i in combo) - n1 * (n1 + 1) / 2.0
        total += 1
        if abs(u - mu) >= abs(u_obs - mu):
            extreme += 1
    return extreme / total


def ward_naive(delta):
    """Closed-form Ward linkage recomputed from scratch at every step.

    Cluster distances come straight from the original squared dissimilarities
    via the centroid-distance identity, so no Lance-Williams updates are
    involved. Ties break on the smallest (node id, node id) pair.
    """
    n = delta.shape[0]
    sq = delta.astype(float) ** 2
    clusters = [(i, [i]) for i in range(n)]
    merges = []
    next_id = n
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                ida, A = clusters[a]
                idb, B = clusters[b]
                cross = sq[np.ix_(A, B)].sum() / (len(A) * len(B))
                within_a = sq[np.ix_(A, A)].sum() / (2 * len(A) ** 2)
                within_b = sq[np.ix_(B, B)].sum() / (2 * len(B) ** 2)
                d2 = 2 * len(A) * len(B) / (len(A) + len(B)) * (cross - within_a - within_b)
                key = (d2, tuple(sorted((ida, idb))))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (d2, (ida, idb)), a, b = best
        A, B = clusters[a][1], clusters[b][1]
        merges.append((ida, idb, float(np.sqrt(max(d2, 0.0))), len(A) + len(B)))
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)]
        clusters.append((next_id, sorted(A + B)))
        next_id += 1
    return merges


def svm_dual_qp(kernel, y, C):
    """Optimal dual objective of the soft-margin SVM via a QP solver."""
    import cvxopt

    cvxopt.solvers.options["show_progress"] = False
    cvxopt.solvers.options["abstol"] = 1e-10
    cvxopt.solvers.options["reltol"] = 1e-10
    n = len(y)
    q = np.outer(y, y) * kernel
    sol = cvxopt.solvers.qp(
        cvxopt.matrix(q),
        cvxopt.matrix(-np.ones(n)),
        cvxopt.matrix(np.vstack([-np.eye(n), np.eye(n)])),
        cvxopt.matrix(np.concatenate([np.zeros(n), C * np.ones(n)])),
        cvxopt.matrix(y.reshape(1, -1)),
        cvxopt.matrix(0.0),
    )
    alpha = np.array(sol["x"]).ravel()
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def logistic_ml_oracle(x, y):
    """Unregularized maximum-likelihood logistic fit (BFGS on the mean log loss)."""
    from scipy.optimize import minimize

    x = np.asarray(x, dtype=float)
    y01 = (np.asarray(y) == np.asarray(y).max()).astype(float)

    def nll(params):
        w, b = params[:-1], params[-1]
        eta = x @ w + b
        return float(np.mean(np.log1p(np.exp(-np.abs(eta))) + np.maximum(eta, 0) - y01 * eta))

    res = minimize(nll, np.zeros(x.shape[1] + 1), method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
    return res.x[:-1], res.x[-1]


def pearson(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ac = a - a.mean()
    bc = b - b.mean()
    return float((ac * bc).sum() / np.sqrt((ac * ac).sum() * (bc * bc).sum()))


def edit_distance(a, b):
    """Plain DP Levenshtein distance."""
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]
