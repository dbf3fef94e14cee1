"""Poisson RFS posteriors with truncated Gaussian-mixture location densities.

A posterior is the pair (lam, p) on a domain region. The location density is

    p(x) = Σ_j α_j N(x; m_j, P_j) 1_{S_j}(x)

where each component carries its own support S_j ⊆ domain and its in-support
mass c_j = ∫_{S_j} N_j. The weights satisfy Σ_j α_j c_j = 1. Gaussians are
never re-fitted to their truncation; restriction only narrows supports and
rescales weights, so the intensity lam * p is unchanged pointwise inside the
restricted domain.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (ALL, EMPTY, contains, mass_fractions, memoized, region_difference,
                       region_intersect, region_union)
from .gm import GaussianMixture, GMParams, log_gauss, merge_moments, _merge_groups

DEFAULT_SAMPLES = 1000
DEAD_MASS = 1e-12
INTERIOR_GAP = 1e-9


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PoissonPosterior:
    lam: float
    location: GaussianMixture
    domain: object = ALL
    supports: tuple = None
    masses: np.ndarray = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        n = len(self.location)
        if self.supports is None:
            object.__setattr__(self, "supports", (self.domain,) * n)
        if self.masses is None:
            if any(s != ALL for s in self.supports):
                raise ValueError("masses are required for truncated components")
            object.__setattr__(self, "masses", np.ones(n))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "masses", np.asarray(self.masses, dtype=float).reshape(n))
        object.__setattr__(self, "supports", tuple(self.supports))
        if len(self.supports) != n:
            raise ValueError("one support region per component")

    def __len__(self):
        return len(self.location)

    @property
    def weights(self):
        return self.location.weights

    @property
    def total_mass(self):
        """Σ α_j c_j; 1 for a well-formed posterior with components."""
        return float(self.location.weights @ self.masses)

    def component_intensity(self):
        """Expected object count carried by each component, lam α_j c_j."""
        return self.lam * self.location.weights * self.masses

    @classmethod
    def empty(cls, domain=ALL):
        return cls(0.0, GaussianMixture.empty(), domain, (), np.zeros(0))

    @classmethod
    def from_intensity(cls, intensity, domain=ALL, rng=None, samples=DEFAULT_SAMPLES):
        """Posterior whose intensity is the given GM restricted to ``domain``."""
        lam = intensity.total_weight
        if lam <= 0 or len(intensity) == 0:
            return cls.empty(domain)
        post = cls(lam, intensity.with_weights(intensity.weights / lam), ALL)
        if domain == ALL:
            return post
        return restrict(post, domain, rng, samples)

    @classmethod
    def truncated(cls, lam, location, domain, rng=None, samples=DEFAULT_SAMPLES):
        """Posterior with expected count ``lam`` whose location density is the
        mixture truncated to ``domain`` and renormalised."""
        base = cls(1.0, location, ALL)
        r = restrict(base, domain, rng, samples)
        if r.lam == 0:
            return cls.empty(domain)
        return cls(lam, r.location, r.domain, r.supports, r.masses)


def to_intensity(post):
    """Plain GM intensity with the same per-component expected counts.

    Truncation indicators are dropped; used when a fused posterior is fed
    back into GM-PHD filtering.
    """
    if len(post) == 0 or post.lam == 0:
        return GaussianMixture.empty()
    return post.location.with_weights(post.component_intensity())


def poisson_intensity(post, x):
    """lam Σ α_j N(x; m_j, P_j) 1_{S_j}(x) 1_domain(x), at a point or rows of x."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    xs = np.atleast_2d(x)
    out = np.zeros(xs.shape[0])
    if post.lam > 0 and len(post):
        dens = np.exp(log_gauss(xs, post.location.means, post.location.covs))
        for sup in set(post.supports):
            idx = [j for j, s in enumerate(post.supports) if s == sup]
            vals = dens[:, idx] @ post.location.weights[idx]
            out += np.where(contains(sup, xs), vals, 0.0)
        out *= post.lam * contains(post.domain, xs)
    return float(out[0]) if scalar else out


def _parts(post, region, rng, samples, want_out):
    if len(post) == 0 or post.lam == 0:
        empty_in = PoissonPosterior.empty(region_intersect(post.domain, region))
        empty_out = PoissonPosterior.empty(region_difference(post.domain, region))
        return empty_in, empty_out
    loc = post.location
    f = mass_fractions(loc.means, loc.covs, post.supports, region, samples, rng)
    total = post.total_mass
    c_in = post.masses * f
    k_in = float(loc.weights @ c_in) / total
    lam_in = post.lam * k_in
    inside = _make_part(post, region_intersect(post.domain, region),
                        _per_support(post.supports, region, region_intersect),
                        c_in, k_in * total, lam_in)
    if not want_out:
        return inside, None
    c_out = post.masses * (1.0 - f)
    k_out = 1.0 - k_in
    outside = _make_part(post, region_difference(post.domain, region),
                         _per_support(post.supports, region, region_difference),
                         c_out, k_out * total, post.lam * k_out)
    return inside, outside


def _per_support(supports, region, op):
    done = {}
    out = []
    for s in supports:
        r = done.get(s)
        if r is None:
            r = done[s] = op(s, region)
        out.append(r)
    return out


def _make_part(post, domain, supports, masses, norm, lam):
    keep = np.flatnonzero(masses > DEAD_MASS)
    if keep.size == 0 or norm <= 0 or lam <= 0:
        return PoissonPosterior.empty(domain)
    loc = post.location.take(keep)
    loc = loc.with_weights(loc.weights / norm)
    return PoissonPosterior(lam, loc, domain, tuple(supports[j] for j in keep), masses[keep])


def restrict(post, region, rng=None, samples=DEFAULT_SAMPLES):
    """Marginal of the posterior on ``region`` (Poisson with lam*K_W, p_W).

    K_W = Σ α_j c_j(S_j ∩ W) is estimated per component with
    ``mass_fractions``. If K_W is zero the result is the empty posterior on
    domain ∩ region.
    """
    return memoized(("restrict", id(post), region, samples),
                    lambda: _parts(post, region, rng, samples, want_out=False)[0], post)


def split(post, region, rng=None, samples=DEFAULT_SAMPLES):
    """(inside, outside) factorisation of the posterior by ``region``.

    Both parts come from one set of mass fractions, so lam_in + lam_out =
    lam and each component's mass splits exactly.
    """
    return memoized(("split", id(post), region, samples),
                    lambda: _parts(post, region, rng, samples, want_out=True), post)


def _coalesce(loc, supports, masses):
    """Rejoin pieces of one Gaussian that were split over disjoint supports."""
    seen = {}
    keep = []
    w = loc.weights.copy()
    c = masses.copy()
    sup = list(supports)
    for j in range(len(loc)):
        key = (loc.means[j].tobytes(), loc.covs[j].tobytes())
        i = seen.get(key)
        if i is not None and abs(w[i] - w[j]) <= 1e-12 * max(w[i], w[j]):
            c[i] += c[j]
            sup[i] = region_union(sup[i], sup[j])
            continue
        seen.setdefault(key, j)
        keep.append(j)
    if len(keep) == len(loc):
        return loc, tuple(supports), masses
    keep = np.asarray(keep)
    return loc.take(keep).with_weights(w[keep]), tuple(sup[j] for j in keep), c[keep]


def _check_disjoint(a, b, per_component=32):
    rng = np.random.default_rng(0)
    for p, other in ((a, b), (b, a)):
        if len(p) == 0:
            continue
        L = np.linalg.cholesky(p.location.covs[:, :2, :2])
        z = rng.standard_normal((per_component, 2))
        pts = (p.location.means[:, None, :2] + np.einsum("nij,mj->nmi", L, z)).reshape(-1, 2)
        both = contains(p.domain, pts) & contains(other.domain, pts)
        if both.any():
            raise PreconditionError(
                f"domains overlap near {pts[np.argmax(both)].round(3).tolist()}")


def disjoint_union(a, b, check=True):
    """Union of independent Poisson posteriors on disjoint domains.

    lam = lam_a + lam_b and p = (lam_a/lam) p_a + (lam_b/lam) p_b. Pieces of
    one Gaussian with equal effective weight (as produced by ``split``) are
    rejoined. With ``check`` the disjointness precondition is asserted by
    sampling from both mixtures.
    """
    domain = region_union(a.domain, b.domain)
    if check:
        _check_disjoint(a, b)
    lam = a.lam + b.lam
    parts = [p for p in (a, b) if p.lam > 0 and len(p)]
    if lam <= 0 or not parts:
        return PoissonPosterior.empty(domain)
    w = np.concatenate([p.location.weights * (p.lam / lam) for p in parts])
    loc = GaussianMixture(w, np.concatenate([p.location.means for p in parts]),
                          np.concatenate([p.location.covs for p in parts]))
    supports = tuple(s for p in parts for s in p.supports)
    masses = np.concatenate([p.masses for p in parts])
    if len(parts) == 2:
        loc, supports, masses = _coalesce(loc, supports, masses)
    return PoissonPosterior(lam, loc, domain, supports, masses)


def prune_posterior(post, params=GMParams(), truncation=None):
    """GM-PHD housekeeping on a posterior, thresholds on expected counts.

    Truncation drops components whose expected count lam α_j c_j is below
    the threshold (the count is discarded, lowering lam). Merging only
    combines components sharing a support (after interior components are
    moved onto the domain); the merged weight and mass keep Σ α c unchanged.
    """
    if len(post) == 0 or post.lam == 0:
        return post
    thr = params.truncation if truncation is None else truncation
    counts = post.component_intensity()
    keep = np.flatnonzero(counts >= thr)
    if keep.size == 0:
        return PoissonPosterior.empty(post.domain)
    loc = post.location
    alpha, means, covs = loc.weights[keep], loc.means[keep], loc.covs[keep]
    masses = post.masses[keep]
    supports = [post.supports[j] for j in keep]
    # a component with all but INTERIOR_GAP of its mass inside its support is
    # treated as untruncated on the domain, so it can merge with neighbours
    # whose supports differ only far out in the tails
    inner = masses >= 1.0 - INTERIOR_GAP
    if inner.any():
        masses = np.where(inner, 1.0, masses)
        supports = [post.domain if inner[j] else s for j, s in enumerate(supports)]

    new_a, new_m, new_P, new_c, new_s = [], [], [], [], []
    order = {}
    for j, s in enumerate(supports):
        order.setdefault(s, []).append(j)
    for s, idx in order.items():
        idx = np.asarray(idx)
        eff = alpha[idx] * masses[idx]
        groups = (_merge_groups(means[idx], covs[idx], eff, params.merge)
                  if params.merge > 0 and idx.size > 1 else [np.array([k]) for k in range(idx.size)])
        for g in groups:
            gi = idx[g]
            if gi.size == 1:
                k = gi[0]
                new_a.append(alpha[k]); new_m.append(means[k]); new_P.append(covs[k])
                new_c.append(masses[k]); new_s.append(s)
                continue
            e, mu, P = merge_moments(alpha[gi] * masses[gi], means[gi], covs[gi])
            a_sum = alpha[gi].sum()
            new_a.append(a_sum); new_m.append(mu); new_P.append(P)
            new_c.append(e / a_sum); new_s.append(s)
    new_a = np.array(new_a)
    new_c = np.array(new_c)
    if new_a.size > params.max_components:
        top = np.sort(np.argsort(-(new_a * new_c), kind="stable")[:params.max_components])
    else:
        top = np.arange(new_a.size)
    a, c = new_a[top], new_c[top]
    total = post.total_mass
    kept = float(a @ c)
    lam = post.lam * kept / total
    mix = GaussianMixture(a / kept, np.stack(new_m)[top], np.stack(new_P)[top])
    return PoissonPosterior(lam, mix, post.domain, tuple(new_s[j] for j in top), c)


def expected_count(post, region, rng=None, samples=DEFAULT_SAMPLES):
    return restrict(post, region, rng, samples).lam


__all__ = ["PoissonPosterior", "PreconditionError", "poisson_intensity", "restrict", "split",
           "disjoint_union", "prune_posterior", "to_intensity", "expected_count"]
