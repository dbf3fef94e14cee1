"""Exact multi-object densities on a finite grid of cells.

A density assigns a value to every subset X of the cells with |X| <= n_max.
The set integral of f is Σ_X f(X) v^|X|, where v is the cell volume; the
1/n! of the continuous set integral cancels against the n! orderings of an
unordered subset. Tables are sparse: missing subsets have density 0.

Everything here is brute force and meant for grids of at most 12 cells.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

MAX_CELLS = 12
MAX_CARD = 4


class DegenerateDensity(ValueError):
    """A normalizer vanished."""


def subsets(cells, n_max):
    cells = tuple(sorted(cells))
    for k in range(min(n_max, len(cells)) + 1):
        for c in combinations(cells, k):
            yield frozenset(c)


@dataclass(frozen=True, eq=False)
class FiniteRfsDensity:
    cells: tuple
    v: float
    n_max: int
    table: dict

    def __post_init__(self):
        cells = tuple(sorted(self.cells))
        if len(set(cells)) != len(cells):
            raise ValueError("duplicate cells")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        object.__setattr__(self, "cells", cells)
        known = set(cells)
        table = {}
        for X, val in self.table.items():
            X = frozenset(X)
            if not X <= known or len(X) > self.n_max:
                raise ValueError(f"subset {sorted(X)} is outside the grid or above n_max")
            if val < 0:
                raise ValueError("density values must be nonnegative")
            if val > 0:
                table[X] = float(val)
        object.__setattr__(self, "table", table)

    def __call__(self, X):
        return self.table.get(frozenset(X), 0.0)

    def items(self):
        return self.table.items()


def set_integral(d):
    return float(sum(val * d.v ** len(X) for X, val in d.items()))


def normalized(d):
    z = set_integral(d)
    if z <= 0:
        raise DegenerateDensity("density integrates to zero")
    return FiniteRfsDensity(d.cells, d.v, d.n_max, {X: val / z for X, val in d.items()})


def _same_space(a, b):
    if a.cells != b.cells or a.v != b.v:
        raise ValueError("densities live on different grids")


def bayes_op(a, b):
    """a ⊕ b: pointwise product, normalized."""
    _same_space(a, b)
    n = min(a.n_max, b.n_max)
    prod = {X: val * b(X) for X, val in a.items() if len(X) <= n}
    return normalized(FiniteRfsDensity(a.cells, a.v, n, prod))


def power_op(a, omega):
    """ω ⊙ a: pointwise power, normalized."""
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")
    return normalized(FiniteRfsDensity(a.cells, a.v, a.n_max,
                                       {X: val ** omega for X, val in a.items()}))


def gci_fuse_exact(weighted):
    """Normalized geometric mean Π a_i^ω_i. Zero-weight inputs drop out."""
    weighted = [(d, float(w)) for d, w in weighted]
    if abs(sum(w for _, w in weighted) - 1.0) > 1e-12:
        raise ValueError("fusion weights must sum to 1")
    active = [(d, w) for d, w in weighted if w > 0]
    if len(active) == 1 and active[0][1] == 1.0:
        return normalized(active[0][0])
    base, _ = active[0]
    for d, _ in active[1:]:
        _same_space(base, d)
    n = min(d.n_max for d, _ in active)
    out = {}
    for X in base.table:
        if len(X) > n:
            continue
        val = 1.0
        for d, w in active:
            val *= d(X) ** w
        out[X] = val
    return normalized(FiniteRfsDensity(base.cells, base.v, n, out))


def marginalize(d, w_cells):
    """π_W(X) = Σ_{X' ⊆ V} π(X ∪ X') v^|X'| for X ⊆ W, as a density on W."""
    W = frozenset(w_cells)
    if not W <= set(d.cells):
        raise ValueError("marginal cells must be grid cells")
    out = {}
    for X, val in d.items():
        key = X & W
        out[key] = out.get(key, 0.0) + val * d.v ** len(X - W)
    return FiniteRfsDensity(tuple(W), d.v, min(d.n_max, len(W)), out)


def condition(d, w_cells, given):
    """π_V(X' | given) = π(X' ∪ given) / π_W(given) on V = cells \\ W.

    If π_W(given) = 0 the result is 1 on every admissible X'.
    """
    W = frozenset(w_cells)
    given = frozenset(given)
    if not given <= W:
        raise ValueError("conditioning set must lie in W")
    V = tuple(c for c in d.cells if c not in W)
    cap = max(d.n_max - len(given), 0)
    if len(given) > d.n_max:
        return FiniteRfsDensity(V, d.v, 0, {})
    pw = marginalize(d, W)(given)
    if pw == 0:
        return FiniteRfsDensity(V, d.v, min(cap, len(V)), {X: 1.0 for X in subsets(V, cap)})
    out = {X - given: val / pw for X, val in d.items() if X & W == given}
    return FiniteRfsDensity(V, d.v, min(cap, len(V)), out)


def uninformative_exact(cells, v, n_max):
    """Constant density on all subsets with |X| <= n_max.

    The constant is 1 / Σ_k C(N, k) v^k, the grid set integral of 1 over N
    distinct cells.
    """
    cells = tuple(sorted(cells))
    n = min(n_max, len(cells))
    z = sum(comb(len(cells), k) * v ** k for k in range(n + 1))
    return FiniteRfsDensity(cells, v, n, {X: 1.0 / z for X in subsets(cells, n)})


def product_density(parts, v):
    """Independent superposition of densities on disjoint cell sets."""
    cells = tuple(c for p in parts for c in p.cells)
    if len(set(cells)) != len(cells):
        raise ValueError("parts must have disjoint cells")
    table = {frozenset(): 1.0}
    for p in parts:
        if p.v != v:
            raise ValueError("cell volumes differ")
        table = {X | Y: a * b for X, a in table.items() for Y, b in p.items()}
    return FiniteRfsDensity(cells, v, sum(p.n_max for p in parts), table)


def bird_fuse_exact(a, b, omega_a, path="invariance"):
    """BIRD fusion of a (on its FoV cells) and b (on its FoV cells).

    ``path="invariance"`` builds the result as the GCI of the common
    marginals times the two exclusive conditionals. ``path="explicit"``
    raises each full posterior, extended by an uninformative density over
    the other agent's exclusive cells, to the per-region exponents and
    normalizes. The two must agree.
    """
    if a.v != b.v:
        raise ValueError("cell volumes differ")
    omega_b = 1.0 - omega_a
    A, B = frozenset(a.cells), frozenset(b.cells)
    C = A & B
    G = tuple(sorted(A | B))
    n_out = min(len(G), a.n_max + b.n_max)
    a_co, b_co = marginalize(a, C), marginalize(b, C)
    if omega_a in (0.0, 1.0):
        fused_co = normalized(a_co if omega_a == 1.0 else b_co)
    else:
        fused_co = gci_fuse_exact([(a_co, omega_a), (b_co, omega_b)])

    out = {}
    if path == "invariance":
        for Xc, fc in fused_co.items():
            ca = condition(a, C, Xc)
            cb = condition(b, C, Xc)
            for Xa, pa in ca.items():
                for Xb, pb in cb.items():
                    out[Xc | Xa | Xb] = fc * pa * pb
        return FiniteRfsDensity(G, a.v, n_out, out)
    if path != "explicit":
        raise ValueError(f"unknown path {path!r}")
    # a_co^ω_a a_nc = a(X∩A) a_co^(ω_a-1) and likewise for b; the
    # uninformative factors are constant and vanish in the normalization
    ua = uninformative_exact(tuple(B - C), a.v, len(B - C))
    ub = uninformative_exact(tuple(A - C), a.v, len(A - C))
    for X in subsets(G, n_out):
        xa, xb, xc = X & A, X & B, X & C
        va, vb = a(xa), b(xb)
        if va == 0 or vb == 0:
            continue
        ac, bc = a_co(xc), b_co(xc)
        out[X] = (va * ac ** (omega_a - 1.0) * ub(X & (A - C))
                  * vb * bc ** (omega_b - 1.0) * ua(X & (B - C)))
    return normalized(FiniteRfsDensity(G, a.v, n_out, out))


def yes_probability(d, region_cells):
    """Probability that at least one object lies in ``region_cells``."""
    return 1.0 - marginalize(d, region_cells)(frozenset())


def cardinality(d):
    rho = np.zeros(d.n_max + 1)
    for X, val in d.items():
        rho[len(X)] += val * d.v ** len(X)
    return rho


def kld(q, p):
    """Set-integral Kullback-Leibler divergence KL(q || p)."""
    total = 0.0
    for X, val in q.items():
        pv = p(X)
        if pv == 0:
            return np.inf
        total += val * q.v ** len(X) * np.log(val / pv)
    return float(total)


def max_abs_diff(a, b):
    keys = set(a.table) | set(b.table)
    return max((abs(a(X) - b(X)) for X in keys), default=0.0)


# ---------------------------------------------------------------- generators

def random_density(cells, v, n_max, rng, zero_fraction=0.0):
    """Random normalized density; each subset is zeroed with ``zero_fraction``."""
    subs = list(subsets(cells, n_max))
    mass = rng.gamma(1.0, size=len(subs))
    if zero_fraction > 0:
        mass[rng.random(len(subs)) < zero_fraction] = 0.0
        if not mass.any():
            mass[0] = 1.0
    mass /= mass.sum()
    return FiniteRfsDensity(cells, v, n_max,
                            {X: m / v ** len(X) for X, m in zip(subs, mass)})


def poisson_grid(intensity, v):
    """Product-Bernoulli density with per-cell intensity f: π(X) = Π_X f / Π(1 + f v).

    This is the grid analogue of a Poisson RFS with intensity f, and keeps
    its closure under marginals and geometric means exactly.
    """
    cells = tuple(sorted(intensity))
    z = float(np.prod([1.0 + intensity[c] * v for c in cells]))
    table = {}
    for X in subsets(cells, len(cells)):
        table[X] = float(np.prod([intensity[c] for c in X])) / z if X else 1.0 / z
    return FiniteRfsDensity(cells, v, len(cells), table)


def form1_density(inside, outside_cells, eps):
    """Extend ``inside`` to more cells with yes-probability ``eps`` outside.

    The outside mass is spread over singletons of ``outside_cells``.
    """
    outside_cells = tuple(sorted(outside_cells))
    v = inside.v
    table = {frozenset(): 1.0 - eps}
    for c in outside_cells:
        table[frozenset([c])] = eps / (len(outside_cells) * v)
    out = FiniteRfsDensity(outside_cells, v, 1, table)
    return product_density([inside, out], v)



# ---------------------------------------------------------------- property suite

def reassemble(d, w_cells):
    """π_W(X ∩ W) · π_V(X ∩ V | X ∩ W) over every admissible X."""
    W = frozenset(w_cells)
    pw = marginalize(d, W)
    out = {}
    for X in subsets(d.cells, d.n_max):
        xw = X & W
        val = pw(xw) * condition(d, W, xw)(X - W)
        if val:
            out[X] = val
    return FiniteRfsDensity(d.cells, d.v, d.n_max, out)


def _case(rng, cells, n_max):
    k = int(rng.integers(1, cells + 1))
    v = float(rng.uniform(0.2, 2.0))
    return tuple(range(k)), v, min(n_max, k)


def check_invariances(rng, cells=8, n_max=4, cases=200):
    """Largest deviation of d ⊕ π_ui from d and of ω ⊙ π_ui from π_ui."""
    worst = 0.0
    for _ in range(cases):
        cs, v, n = _case(rng, cells, n_max)
        d = random_density(cs, v, n, rng, zero_fraction=float(rng.uniform(0, 0.5)))
        ui = uninformative_exact(cs, v, n)
        worst = max(worst, max_abs_diff(bayes_op(d, ui), d),
                    max_abs_diff(power_op(ui, float(rng.uniform(0.05, 1.0))), ui))
    return worst


def check_reconstruction(rng, cells=8, n_max=4, cases=200):
    """Largest deviation of the marginal-times-conditional reassembly."""
    worst = 0.0
    for _ in range(cases):
        cs, v, n = _case(rng, cells, n_max)
        d = random_density(cs, v, n, rng, zero_fraction=float(rng.uniform(0, 0.5)))
        W = [c for c in cs if rng.random() < 0.5]
        worst = max(worst, max_abs_diff(reassemble(d, W), d))
    return worst


def two_agent_case(rng, cells, n_max):
    """Random overlapping FoVs A, B (both non-empty, C = A ∩ B non-empty)."""
    cells = max(cells, 3)
    while True:
        tag = rng.integers(0, 3, size=cells)  # 0: A only, 1: both, 2: B only
        if (tag == 1).any() and (tag != 2).sum() >= 1 and (tag != 0).sum() >= 1:
            break
    A = tuple(int(c) for c in np.flatnonzero(tag <= 1))
    B = tuple(int(c) for c in np.flatnonzero(tag >= 1))
    v = float(rng.uniform(0.2, 2.0))
    a = random_density(A, v, min(n_max, len(A)), rng)
    b = random_density(B, v, min(n_max, len(B)), rng)
    return a, b


def check_dual_path(rng, cells=8, n_max=3, cases=100):
    """Largest gap between the explicit and invariance-reduced BIRD results."""
    worst = 0.0
    for _ in range(cases):
        a, b = two_agent_case(rng, cells, n_max)
        w = float(rng.uniform(0.05, 0.95))
        worst = max(worst, max_abs_diff(bird_fuse_exact(a, b, w, "explicit"),
                                        bird_fuse_exact(a, b, w, "invariance")))
    return worst


def pathology_curve(a_in, b_in, omega_a, eps_values):
    """Standard-GCI yes-probability outside the common cells for Form-I inputs.

    Each agent's density is extended over the other's exclusive cells with
    yes-probability ε there.
    """
    A, B = set(a_in.cells), set(b_in.cells)
    outside = sorted((A | B) - (A & B))
    out = []
    for eps in eps_values:
        a = form1_density(a_in, sorted(B - A), eps)
        b = form1_density(b_in, sorted(A - B), eps)
        fused = gci_fuse_exact([(a, omega_a), (b, 1.0 - omega_a)])
        out.append(yes_probability(fused, outside))
    return np.array(out)


def check_pathology(rng, cells=8, n_max=3, cases=50, eps_values=(1e-3, 1e-4, 1e-6)):
    """(all curves decreasing, all below 10 ε^min(ω)) over random cases."""
    eps = np.asarray(eps_values)
    decreasing = bounded = True
    for _ in range(cases):
        a, b = two_agent_case(rng, cells, n_max)
        if set(a.cells) == set(b.cells):
            continue
        w = float(rng.uniform(0.2, 0.8))
        p = pathology_curve(a, b, w, eps)
        decreasing &= bool(np.all(np.diff(p) < 0))
        bounded &= bool(np.all(p < 10 * eps ** min(w, 1 - w)))
    return decreasing, bounded


def run_suite(cells=8, n_max=3, cases=100, seed=0):
    """Every oracle property; returns {name: (passed, detail)}."""
    if cells > MAX_CELLS:
        raise ValueError(f"at most {MAX_CELLS} cells")
    if not 0 <= n_max <= MAX_CARD:
        raise ValueError(f"n_max must lie in [0, {MAX_CARD}]")
    rng = np.random.default_rng(seed)
    res = {}
    e = check_invariances(rng, cells, n_max, cases)
    res["invariances"] = (e <= 1e-12, f"max deviation {e:.2e}")
    e = check_reconstruction(rng, cells, n_max, cases)
    res["reconstruction"] = (e <= 1e-12, f"max deviation {e:.2e}")
    if n_max >= 1 and cells >= 3:
        dec, bnd = check_pathology(rng, cells, n_max, max(cases // 4, 1))
        res["pathology"] = (dec and bnd, f"decreasing={dec} bounded={bnd}")
    e = check_dual_path(rng, cells, n_max, cases) if cells >= 3 else 0.0
    res["dual_path"] = (e <= 1e-12, f"max deviation {e:.2e}")
    return res
