"""OSPA error and cardinality statistics."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def _positions(points):
    a = np.asarray(points, dtype=float)
    if a.size == 0:
        return np.zeros((0, 2))
    return np.atleast_2d(a)[:, :2]


def ospa(x_set, y_set, c=100.0, p=2.0):
    """OSPA distance on positions; returns (total, localization, cardinality).

    The two components satisfy total^p = loc^p + card^p.
    """
    if c <= 0 or p < 1:
        raise ValueError("need c > 0 and p >= 1")
    X, Y = _positions(x_set), _positions(y_set)
    m, n = sorted((len(X), len(Y)))
    if n == 0:
        return 0.0, 0.0, 0.0
    if m == 0:
        return float(c), 0.0, float(c)
    d = np.minimum(np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1), c) ** p
    rows, cols = linear_sum_assignment(d)
    loc = d[rows, cols].sum() / n
    card = c ** p * (n - m) / n
    return float((loc + card) ** (1 / p)), float(loc ** (1 / p)), float(card ** (1 / p))


def cardinality_stats(estimates, truth):
    """Per-step mean estimated and true counts across trials.

    ``estimates`` and ``truth`` are (trials, steps) arrays of counts, or
    lists of per-step sequences for one trial.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape != tru.shape:
        raise ValueError(f"estimate and truth shapes differ: {est.shape} vs {tru.shape}")
    mean_est = est.mean(axis=0)
    mean_true = tru.mean(axis=0)
    return mean_est, mean_true, mean_est - mean_true
