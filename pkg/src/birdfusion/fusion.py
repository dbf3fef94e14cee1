"""GCI fusion of GM-Poisson posteriors and the BIRD rule for limited FoVs.

BIRD splits each agent's posterior into the part on the common FoV and the
part on its exclusive FoV. Only the common parts are GCI-fused; the exclusive
parts enter with unit weight (the other agent's density there is
uninformative and drops out), and the three Poisson pieces are joined by
disjoint union.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .geometry import (EMPTY, contains, memoized, support_masses, region_bounds, region_intersect,
                       region_union, region_volume)
from .gm import (LOG_2PI, GaussianMixture, GMParams, NumericError, log_gauss_many,
                 safe_cholesky)
from .poisson import (DEFAULT_SAMPLES, PoissonPosterior, disjoint_union, prune_posterior,
                      split)


@dataclass(frozen=True)
class FusionWeights:
    omega_a: float
    omega_b: float

    def __post_init__(self):
        if not (0.0 <= self.omega_a <= 1.0 and 0.0 <= self.omega_b <= 1.0):
            raise ValueError("fusion weights must lie in [0, 1]")
        if abs(self.omega_a + self.omega_b - 1.0) > 1e-12:
            raise ValueError("fusion weights must sum to 1")

    @classmethod
    def of(cls, omega_a):
        return cls(float(omega_a), 1.0 - float(omega_a))

    def swapped(self):
        return FusionWeights(self.omega_b, self.omega_a)


def _logdet(P):
    L = safe_cholesky(P)
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)


def log_kappa(covs, omega):
    """log κ(P, ω) with κ = sqrt(det[2πP/ω] det[2πP]^-ω)."""
    d = covs.shape[-1]
    ld = _logdet(covs)
    return 0.5 * ((d * LOG_2PI - d * np.log(omega) + ld) - omega * (d * LOG_2PI + ld))


def gm_power(mixture, omega):
    """Component-wise power of a mixture: (α, m, P) -> (α^ω κ(P, ω), m, P/ω).

    Exact for a single component; for mixtures it assumes well separated
    components, so callers merge first.
    """
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")
    if omega == 1.0 or len(mixture) == 0:
        return mixture
    with np.errstate(divide="ignore"):
        logw = omega * np.log(mixture.weights) + log_kappa(mixture.covs, omega)
    return GaussianMixture(np.exp(logw), mixture.means, mixture.covs / omega)


def log_power_correction(mixture, omega):
    """log r_j with r_j = [p(m_j) / (α_j N_j(m_j))]^(ω-1).

    Multiplying the component-wise power by r_j makes it match p^ω at every
    component mean; r_j = 1 for well separated components, and the result is
    exact for identical ones.
    """
    if omega == 1.0 or len(mixture) < 2:
        return np.zeros(len(mixture))
    with np.errstate(divide="ignore"):
        lw = np.log(mixture.weights)
    lg = log_gauss_many(mixture.means, mixture.means, mixture.covs)   # (at m_i, comp j)
    lp = logsumexp(lg + lw[None, :], axis=1)
    own = lw + np.diagonal(lg)
    return (omega - 1.0) * np.where(np.isfinite(own), lp - own, 0.0)


def _pairwise(a, b, w, lam_scale, prune_below, corrected=False):
    """Products of every component pair of two weighted GMs raised to ω_a, ω_b.

    Returns (log weights, means, covs, index pairs) for pairs whose expected
    count ``lam_scale * weight`` reaches ``prune_below``.
    """
    oa, ob = w.omega_a, w.omega_b
    A, B = a.location, b.location
    na, nb = len(A), len(B)
    with np.errstate(divide="ignore"):
        la = oa * np.log(A.weights) + log_kappa(A.covs, oa)
        lb = ob * np.log(B.weights) + log_kappa(B.covs, ob)
    if corrected:
        la = la + log_power_correction(A, oa)
        lb = lb + log_power_correction(B, ob)
    # N(m_a - m_b; 0, P_a/ω_a + P_b/ω_b) for every pair
    S = A.covs[:, None] / oa + B.covs[None, :] / ob
    diff = A.means[:, None, :] - B.means[None, :, :]
    L = safe_cholesky(S.reshape(-1, *S.shape[-2:]))
    sol = np.linalg.solve(L, diff.reshape(-1, diff.shape[-1], 1))[..., 0]
    d = diff.shape[-1]
    lnorm = -0.5 * (np.sum(sol ** 2, axis=-1)
                    + 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
                    + d * LOG_2PI)
    logw = (la[:, None] + lb[None, :]).reshape(-1) + lnorm
    ia, ib = np.divmod(np.arange(na * nb), nb)
    keep = np.flatnonzero(np.log(lam_scale) + logw >= np.log(prune_below)) if prune_below > 0 \
        else np.flatnonzero(np.isfinite(logw))
    if keep.size == 0:
        return logw[:0], None, None, (ia[:0], ib[:0])
    ia, ib, logw = ia[keep], ib[keep], logw[keep]
    Ia = np.linalg.inv(A.covs[ia]) * oa
    Ib = np.linalg.inv(B.covs[ib]) * ob
    info = Ia + Ib
    try:
        Lp = np.linalg.cholesky(0.5 * (info + np.swapaxes(info, -1, -2)))
    except np.linalg.LinAlgError as exc:
        raise NumericError("information sum is not positive-definite") from exc
    eye = np.broadcast_to(np.eye(d), info.shape)
    Linv = np.linalg.solve(Lp, eye)
    P = np.swapaxes(Linv, -1, -2) @ Linv
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    rhs = (Ia @ A.means[ia][..., None] + Ib @ B.means[ib][..., None])[..., 0]
    mean = (P @ rhs[..., None])[..., 0]
    return logw, mean, P, (ia, ib)


def _gci(a, b, w, domain, rng, samples, params):
    """Poisson GCI of two posteriors; fused supports are S_a ∩ S_b."""
    if w.omega_b == 0.0:
        return a
    if w.omega_a == 0.0:
        return b
    if a.lam == 0 or b.lam == 0 or len(a) == 0 or len(b) == 0:
        return PoissonPosterior.empty(domain)
    lam_scale = a.lam ** w.omega_a * b.lam ** w.omega_b
    logw, means, covs, (ia, ib) = _pairwise(a, b, w, lam_scale, params.pruning,
                                            params.power == "corrected")
    if logw.size == 0:
        return PoissonPosterior.empty(domain)
    done = {}
    supports = []
    for i, j in zip(ia, ib):
        key = (a.supports[i], b.supports[j])
        r = done.get(key)
        if r is None:
            r = done[key] = region_intersect(key[0], key[1], domain)
        supports.append(r)
    c = support_masses(means, covs, supports, samples, rng)
    alpha = np.exp(logw)
    K = float(alpha @ c)
    keep = np.flatnonzero(c > 1e-12)
    if K <= 0 or keep.size == 0:
        return PoissonPosterior.empty(domain)
    fused = PoissonPosterior(lam_scale * K,
                             GaussianMixture(alpha[keep] / K, means[keep], covs[keep]),
                             domain, tuple(supports[j] for j in keep), c[keep])
    out = prune_posterior(fused, params)
    if params.refit > 0 and out.lam > 0:
        out = _refit(a, b, w, out, lam_scale, params.refit)
    if params.normalizer == "importance" and out.lam > 0:
        ratio = _normalizer_ratio(a, b, w, out, domain, rng, samples)
        out = PoissonPosterior(out.lam * ratio, out.location, out.domain, out.supports, out.masses)
    return out


def _refit(a, b, w, fused, lam_scale, iters):
    """Reweight the fused components to match p_a^ω_a p_b^ω_b at their means.

    Multiplicative updates β_k <- β_k t(m_k) / u(m_k), where t is the exact
    geometric mean and u the current mixture, both on the fused support.
    Means outside their own support keep their weight.
    """
    loc = fused.location
    m = loc.means
    t = np.exp(w.omega_a * _log_truncated(a, m) + w.omega_b * _log_truncated(b, m))
    t = np.where(contains(fused.domain, m[:, :2]), t, 0.0)
    G = np.exp(log_gauss_many(m, m, loc.covs))              # G[k, j] = N_j(m_k)
    inside = {}
    for s in fused.supports:
        if s not in inside:
            inside[s] = contains(s, m[:, :2])
    G = G * np.stack([inside[s] for s in fused.supports], axis=1)
    own = np.diagonal(G) > 0
    beta = loc.weights * (fused.lam / lam_scale)
    for _ in range(iters):
        u = G @ beta
        ratio = np.where(own & (u > 0), t / np.where(u > 0, u, 1.0), 1.0)
        beta = beta * ratio
    K = float(beta @ fused.masses)
    if K <= 0:
        return PoissonPosterior.empty(fused.domain)
    return PoissonPosterior(lam_scale * K, loc.with_weights(beta / K), fused.domain,
                            fused.supports, fused.masses)


def _log_truncated(post, x):
    """log of the truncated location density of ``post`` at 4-D points x."""
    loc = post.location
    lg = log_gauss_many(x, loc.means, loc.covs)
    with np.errstate(divide="ignore"):
        lg = lg + np.log(loc.weights)
    inside = {}
    for j, s in enumerate(post.supports):
        if s not in inside:
            inside[s] = contains(s, x[:, :2])
    mask = np.stack([inside[s] for s in post.supports], axis=1)
    return logsumexp(np.where(mask, lg, -np.inf), axis=1)


def _normalizer_ratio(a, b, w, fused, domain, rng, samples):
    """Exact GCI normalizer over the pairwise one, by importance sampling.

    The untruncated fused mixture h is the proposal; the integrand is
    p_a^ω_a p_b^ω_b on the domain. Returns ∫ p_a^ω_a p_b^ω_b / (λ/scale).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    loc = fused.location
    k = rng.choice(len(loc), size=samples, p=loc.weights / loc.weights.sum())
    L = safe_cholesky(loc.covs)
    x = loc.means[k] + np.einsum("mij,mj->mi", L[k], rng.standard_normal((samples, loc.means.shape[1])))
    lh = logsumexp(log_gauss_many(x, loc.means, loc.covs)
                   + np.log(loc.weights / loc.weights.sum()), axis=1)
    lf = w.omega_a * _log_truncated(a, x) + w.omega_b * _log_truncated(b, x)
    lf = np.where(contains(domain, x[:, :2]), lf, -np.inf)
    exact = float(np.mean(np.exp(lf - lh)))
    lam_scale = a.lam ** w.omega_a * b.lam ** w.omega_b
    return exact * lam_scale / fused.lam


def gci_fuse_common(a, b, w, common, rng=None, samples=DEFAULT_SAMPLES, params=GMParams()):
    """GCI fusion of two posteriors that both live on the region ``common``.

    lam = lam_a^ω_a lam_b^ω_b K, with K = Σ α_jj' c_jj'(common) the mass of
    the pairwise fused components inside ``common``. The result is pruned
    and merged with ``params``.
    """
    for p in (a, b):
        if p.lam > 0 and p.domain != common:
            raise ValueError("both posteriors must be defined on the common region")
    return _gci(a, b, w, common, rng, samples, params)


def standard_gci(a, b, w, rng=None, samples=DEFAULT_SAMPLES, params=GMParams()):
    """Plain GCI over the joint domain, without any FoV decomposition.

    A posterior is zero outside its own domain, so the fused intensity
    vanishes wherever either input does.
    """
    return _gci(a, b, w, region_union(a.domain, b.domain), rng, samples, params)


def bird_fuse_pair(a, fov_a, b, fov_b, w, rng=None, samples=DEFAULT_SAMPLES,
                   params=GMParams(), check=False):
    """BIRD fusion of two posteriors defined on their own FoVs.

    Returns the fused posterior and its domain fov_a ∪ fov_b. The expected
    count satisfies lam = lam_co + lam_a,nc + lam_b,nc.
    """
    return memoized(("bird", id(a), fov_a, id(b), fov_b, w, samples, params, check),
                    lambda: _bird(a, fov_a, b, fov_b, w, rng, samples, params, check), a, b)


def _bird(a, fov_a, b, fov_b, w, rng, samples, params, check):
    common = region_intersect(fov_a, fov_b)
    a_co, a_nc = split(a, common, rng, samples)
    b_co, b_nc = split(b, common, rng, samples)
    if common == EMPTY:
        fused_co = PoissonPosterior.empty(EMPTY)
    else:
        fused_co = _gci(a_co, b_co, w, common, rng, samples, params)
    out = disjoint_union(disjoint_union(fused_co, a_nc, check=check), b_nc, check=check)
    fov = region_union(fov_a, fov_b)
    total = fused_co.lam + a_nc.lam + b_nc.lam
    assert abs(out.lam - total) <= 1e-12 * max(1.0, total)
    return PoissonPosterior(out.lam, out.location, fov, out.supports, out.masses), fov


def running_average(j):
    """Weight of the accumulated posterior when folding in agent j (1-based)."""
    return FusionWeights((j - 1) / j, 1.0 / j)


def sequential_bird(items, weight_schedule="running", rng=None, samples=DEFAULT_SAMPLES,
                    params=GMParams(), pair=None):
    """Fold ``bird_fuse_pair`` over [(posterior, fov), ...] left to right.

    ``weight_schedule`` is "running" (ω_new = 1/j at step j), a float giving
    the fixed weight of the accumulator, or a callable j -> FusionWeights.
    ``pair`` swaps in a different pairwise rule with the same signature.
    """
    items = list(items)
    if not items:
        raise ValueError("nothing to fuse")
    fuse = pair or bird_fuse_pair
    acc, fov = items[0]
    for j, (post, f) in enumerate(items[1:], start=2):
        w = _schedule(weight_schedule, j)
        acc, fov = fuse(acc, fov, post, f, w, rng=rng, samples=samples, params=params)
    return acc, fov


def gci_pair(a, fov_a, b, fov_b, w, rng=None, samples=DEFAULT_SAMPLES, params=GMParams()):
    """Standard GCI with the pairwise signature of ``bird_fuse_pair``."""
    fov = region_union(fov_a, fov_b)
    fused = standard_gci(a, b, w, rng, samples, params)
    return PoissonPosterior(fused.lam, fused.location, fused.domain if fused.lam else fov,
                            fused.supports, fused.masses), fov


def _schedule(schedule, j):
    if schedule == "running":
        return running_average(j)
    if callable(schedule):
        return schedule(j)
    return FusionWeights.of(float(schedule))


@dataclass(frozen=True)
class UninformativeDescriptor:
    """Uniform i.i.d. cluster process on a bounded region (documentation only)."""

    volume: float
    volume_stderr: float
    region: object

    @property
    def density(self):
        return 1.0 / self.volume

    def cardinality(self, n_max):
        from math import factorial
        terms = np.array([self.volume ** n / factorial(n) for n in range(n_max + 1)])
        return terms / terms.sum()


def uninformative_poisson(region, bounding_box=None, rng=None, samples=100_000):
    """Volume and uniform location density of the uninformative density on a region."""
    if region == EMPTY:
        raise ValueError("uninformative density needs a nonempty region")
    bbox = region_bounds(region) if bounding_box is None else bounding_box
    if not np.all(np.isfinite(bbox)):
        raise ValueError("uninformative density needs a bounded region")
    v, se = region_volume(region, bbox, samples, rng)
    if v <= 0:
        raise ValueError("uninformative density needs a region of positive area")
    return UninformativeDescriptor(v, se, region)
