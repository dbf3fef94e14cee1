"""Gaussian mixtures over the 4-D kinematic state [px, py, vx, vy].

Mixtures are stored as stacked arrays (weights (n,), means (n, 4),
covariances (n, 4, 4)); ``GaussianComponent`` is the per-component view.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 4
LOG_2PI = np.log(2.0 * np.pi)


class NumericError(ArithmeticError):
    """A covariance stayed non positive-definite after regularisation."""


@dataclass(frozen=True)
class GMParams:
    """Housekeeping thresholds for GM-PHD style mixtures."""

    truncation: float = 1e-4
    pruning: float = 1e-5
    merge: float = 4.0
    max_components: int = 150
    # how fusion estimates the GCI normalizer: "pairwise" sums the pairwise
    # component masses; "importance" samples the exact integrand
    normalizer: str = "pairwise"
    # mixture power used by fusion: "componentwise" raises each component on
    # its own; "corrected" rescales each by the ratio of the whole mixture to
    # that component at its mean
    power: str = "componentwise"
    # rounds of weight refitting of fused components at their means (0: off)
    refit: int = 0

    def __post_init__(self):
        if self.normalizer not in ("pairwise", "importance"):
            raise ValueError(f"unknown normalizer {self.normalizer!r}")
        if self.power not in ("componentwise", "corrected"):
            raise ValueError(f"unknown power rule {self.power!r}")


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("component weight must be nonnegative")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", symmetrize(np.asarray(self.cov, dtype=float)))


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        n = w.size
        d = STATE_DIM
        if n:
            d = np.asarray(self.means).reshape(n, -1).shape[1]
        m = np.asarray(self.means, dtype=float).reshape(n, d)
        P = np.asarray(self.covs, dtype=float).reshape(n, d, d)
        if np.any(w < 0):
            raise ValueError("mixture weights must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", P)

    def __len__(self):
        return self.weights.size

    @property
    def components(self):
        return [GaussianComponent(w, m, P) for w, m, P in zip(self.weights, self.means, self.covs)]

    @property
    def total_weight(self):
        return float(self.weights.sum())

    @classmethod
    def empty(cls, dim=STATE_DIM):
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)))

    @classmethod
    def from_components(cls, components):
        components = list(components)
        if not components:
            return cls.empty()
        return cls(np.array([c.weight for c in components]),
                   np.stack([c.mean for c in components]),
                   np.stack([c.cov for c in components]))

    def take(self, idx):
        idx = np.asarray(idx)
        return GaussianMixture(self.weights[idx], self.means[idx], self.covs[idx])

    def with_weights(self, weights):
        return GaussianMixture(weights, self.means, self.covs)

    def is_normalized(self, tol=1e-9):
        return abs(self.total_weight - 1.0) <= tol


def concat(*mixtures):
    mixtures = [m for m in mixtures if len(m)]
    if not mixtures:
        return GaussianMixture.empty()
    return GaussianMixture(np.concatenate([m.weights for m in mixtures]),
                           np.concatenate([m.means for m in mixtures]),
                           np.concatenate([m.covs for m in mixtures]))


def symmetrize(P):
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def safe_cholesky(P):
    """Batched lower Cholesky factor with one jitter retry.

    Jitter is 1e-9 * trace(P)/d on the diagonal, applied only to matrices
    whose plain factorisation fails.
    """
    P = symmetrize(np.asarray(P, dtype=float))
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    single = P.ndim == 2
    Pb = P.reshape(-1, *P.shape[-2:]).copy()
    out = np.empty_like(Pb)
    d = Pb.shape[-1]
    for i, Pi in enumerate(Pb):
        try:
            out[i] = np.linalg.cholesky(Pi)
        except np.linalg.LinAlgError:
            jitter = 1e-9 * max(np.trace(Pi), 0.0) / d
            try:
                out[i] = np.linalg.cholesky(Pi + jitter * np.eye(d))
            except np.linalg.LinAlgError as exc:
                raise NumericError("covariance not positive-definite after jitter") from exc
    return out[0] if single else out.reshape(P.shape)


def log_gauss(x, means, covs):
    """log N(x; m_j, P_j) for every point/component pair, shape (k, n)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    L = safe_cholesky(covs)
    d = means.shape[1]
    diff = x[:, None, :] - means[None, :, :]  # (k, n, d)
    # triangular solves through the batched general solver on L
    sol = np.linalg.solve(L[None, :, :, :], diff[..., None])[..., 0]
    maha = np.sum(sol ** 2, axis=-1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (maha + logdet[None, :] + d * LOG_2PI)


def log_gauss_many(x, means, covs):
    """Same as ``log_gauss`` for many points, via one matrix product.

    Expands (x-m)ᵀΛ(x-m) around a common centre, which keeps the cancellation
    small for points and means on the same scale.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = means.shape
    c = x.mean(axis=0)
    xc, mc = x - c, means - c
    L = safe_cholesky(covs)
    Linv = np.linalg.inv(L)
    prec = np.swapaxes(Linv, 1, 2) @ Linv                       # (n, d, d)
    pm = np.einsum("nij,nj->ni", prec, mc)                        # Λ m
    quad = (xc @ prec.transpose(1, 0, 2).reshape(d, n * d)).reshape(-1, n, d)
    maha = (np.einsum("kni,ki->kn", quad, xc) - 2.0 * xc @ pm.T
            + np.einsum("ni,ni->n", pm, mc)[None])
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (np.maximum(maha, 0.0) + logdet[None] + d * LOG_2PI)


def gm_evaluate(mixture, x):
    """Σ_j w_j N(x; m_j, P_j) at one point (returns float) or at rows of x."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    if len(mixture) == 0:
        return 0.0 if scalar else np.zeros(np.atleast_2d(x).shape[0])
    vals = np.exp(log_gauss(x, mixture.means, mixture.covs)) @ mixture.weights
    return float(vals[0]) if scalar else vals


def _merge_groups(means, covs, weights, threshold):
    """Greedy Vo-Ma clustering; returns list of index arrays, leaders first."""
    n = weights.size
    order = np.argsort(-weights, kind="stable")
    alive = np.ones(n, dtype=bool)
    L = safe_cholesky(covs)
    # d2[j, k]: squared distance of m_k from m_j in the metric of P_j
    diff = means[None, :, :] - means[:, None, :]
    sol = np.linalg.solve(L, np.swapaxes(diff, 1, 2))
    near = np.sum(sol ** 2, axis=1) <= threshold
    groups = []
    for j in order:
        if not alive[j]:
            continue
        members = np.flatnonzero(alive & near[j])
        alive[members] = False
        groups.append(members)
    return groups


def merge_moments(weights, means, covs):
    """Moment-preserving collapse of weighted Gaussians into one."""
    W = weights.sum()
    if W <= 0:
        return 0.0, means.mean(axis=0), covs.mean(axis=0)
    mu = weights @ means / W
    diff = means - mu
    P = (np.einsum("n,nij->ij", weights, covs) + np.einsum("n,ni,nj->ij", weights, diff, diff)) / W
    return W, mu, symmetrize(P)


def gm_prune_merge(mixture, truncation_threshold, merge_threshold, max_components):
    """Truncate, merge and cap a mixture.

    Components below ``truncation_threshold`` are discarded (their weight is
    not redistributed). Components within squared Mahalanobis distance
    ``merge_threshold`` of the heaviest remaining one, measured with its
    covariance, are merged preserving weight, mean and second moment. At most
    ``max_components`` of the heaviest survive.
    """
    if truncation_threshold < 0 or merge_threshold < 0:
        raise ValueError("thresholds must be nonnegative")
    if len(mixture) == 0:
        return mixture
    keep = np.flatnonzero(mixture.weights >= truncation_threshold)
    if keep.size == 0:
        return GaussianMixture.empty(mixture.means.shape[1])
    w, m, P = mixture.weights[keep], mixture.means[keep], mixture.covs[keep]
    if merge_threshold > 0 and w.size > 1:
        groups = _merge_groups(m, P, w, merge_threshold)
        if len(groups) < w.size:
            merged = [merge_moments(w[g], m[g], P[g]) if g.size > 1 else (w[g[0]], m[g[0]], P[g[0]])
                      for g in groups]
            w = np.array([g[0] for g in merged])
            m = np.stack([g[1] for g in merged])
            P = np.stack([g[2] for g in merged])
    if w.size > max_components:
        top = np.sort(np.argsort(-w, kind="stable")[:max_components])
        w, m, P = w[top], m[top], P[top]
    return GaussianMixture(w, m, P)
