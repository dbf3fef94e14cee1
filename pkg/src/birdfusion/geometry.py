"""Fields of view as regions of the position plane.

Primitives are axis-aligned rectangles and discs, plus the empty set and the
whole plane. Union, intersection and difference return regions in a
canonical Boolean normal form: the sorted tuple of primitives a region
depends on, together with the set of "atoms" (in/out patterns over those
primitives) that belong to it. Membership then costs one test per
primitive, however many set operations produced the region, and the
same set built in different orders compares and hashes equal. Atoms that are provably empty (for
example inside two disjoint rectangles) are dropped, so disjoint FoVs
intersect to EMPTY.

Membership and box classification are vectorised over point/box arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import ndtr

IN, OUT, MIXED = 1, 0, -1

# half-width, in standard deviations, of the box used to decide that a
# Gaussian lies entirely inside or outside a region (tail mass < 1e-16)
BOX_SIGMAS = 8.5

# atoms are enumerated explicitly, 2**MAX_PRIMITIVES of them at most
MAX_PRIMITIVES = 16


class Region:
    """Base class; use the module-level constructors to build regions."""

    def contains(self, points):
        return contains(self, points)

    @cached_property
    def _hash(self):
        return hash(self._key())

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        return (type(self) is type(other) and self._hash == other._hash
                and self._key() == other._key())


@dataclass(frozen=True, eq=False)
class Rect(Region):
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def _key(self):
        return ("rect", self.xmin, self.xmax, self.ymin, self.ymax)


@dataclass(frozen=True, eq=False)
class Disc(Region):
    cx: float
    cy: float
    radius: float

    def _key(self):
        return ("disc", self.cx, self.cy, self.radius)


@dataclass(frozen=True, eq=False)
class EmptyRegion(Region):
    def _key(self):
        return ("empty",)


@dataclass(frozen=True, eq=False)
class AllRegion(Region):
    def _key(self):
        return ("all",)


@dataclass(frozen=True, eq=False)
class Boolean(Region):
    """Union of the atoms set in ``mask`` over the primitives ``prims``.

    Atom a contains the points that lie inside prims[i] exactly for the bits
    i set in a.
    """

    prims: tuple
    mask: int

    def _key(self):
        return ("bool", self.prims, self.mask)

    @cached_property
    def table(self):
        return _unpack(self.mask, len(self.prims))

    def atoms(self):
        return np.flatnonzero(self.table)


EMPTY = EmptyRegion()
ALL = AllRegion()
PRIMITIVES = (Rect, Disc)


def rect(xmin, xmax, ymin, ymax):
    if xmin > xmax or ymin > ymax:
        raise ValueError(f"inverted rectangle bounds: {(xmin, xmax, ymin, ymax)}")
    return Rect(float(xmin), float(xmax), float(ymin), float(ymax))


def disc(center, radius):
    if radius < 0:
        raise ValueError("disc radius must be nonnegative")
    return Disc(float(center[0]), float(center[1]), float(radius))


def _unpack(mask, k):
    n = 1 << k
    raw = np.frombuffer(mask.to_bytes((n + 7) // 8, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")[:n].astype(bool)


def _pack(table):
    return int.from_bytes(np.packbits(table, bitorder="little").tobytes(), "little")


def _lift(r):
    """(prims, table) view of any region."""
    if isinstance(r, Boolean):
        return r.prims, r.table
    if isinstance(r, PRIMITIVES):
        return (r,), np.array([False, True])
    if isinstance(r, AllRegion):
        return (), np.array([True])
    if isinstance(r, EmptyRegion):
        return (), np.array([False])
    raise TypeError(f"not a region: {r!r}")


def _prim_bounds(p):
    if isinstance(p, Rect):
        return (p.xmin, p.xmax, p.ymin, p.ymax)
    return (p.cx - p.radius, p.cx + p.radius, p.cy - p.radius, p.cy + p.radius)


def _intersect_bounds(bounds):
    xmin = max(b[0] for b in bounds)
    xmax = min(b[1] for b in bounds)
    ymin = max(b[2] for b in bounds)
    ymax = min(b[3] for b in bounds)
    if xmin > xmax or ymin > ymax:
        return None
    return (xmin, xmax, ymin, ymax)


def _box_inside(p, b):
    c = _classify_prim(p, *(np.array([v]) for v in b))
    return c[0] == IN


@lru_cache(maxsize=4096)
def _feasible(prims):
    """Atoms that are not provably empty.

    An atom is dropped when the primitives it lies inside have disjoint
    bounds (or two discs are apart), or when the bound of that
    intersection, or one of its discs, lies inside a primitive the atom
    lies outside. The test is conservative, so two constructions of the
    same set can still differ structurally when emptiness is not provable
    this way; membership is exact either way.
    """
    k = len(prims)
    ok = np.ones(1 << k, dtype=bool)
    bounds = [_prim_bounds(p) for p in prims]
    for a in range(1, 1 << k):
        inside = [i for i in range(k) if a >> i & 1]
        b = _intersect_bounds([bounds[i] for i in inside])
        if b is None:
            ok[a] = False
            continue
        discs = [prims[i] for i in inside if isinstance(prims[i], Disc)]
        if any((d.cx - e.cx) ** 2 + (d.cy - e.cy) ** 2 > (d.radius + e.radius) ** 2
               for n, d in enumerate(discs) for e in discs[n + 1:]):
            ok[a] = False
            continue
        outside = [prims[j] for j in range(k) if not a >> j & 1]
        if any(_box_inside(q, b) for q in outside):
            ok[a] = False
            continue
        # a disc inside another disc the atom lies outside
        if any(isinstance(q, Disc) and np.hypot(d.cx - q.cx, d.cy - q.cy) + d.radius <= q.radius
               for d in discs for q in outside):
            ok[a] = False
    return ok


def _remap(table, sub_idx, k):
    """Evaluate a table over sub-primitives on the atoms of k primitives."""
    atoms = np.arange(1 << k)
    sub = np.zeros(atoms.size, dtype=np.int64)
    for j, i in enumerate(sub_idx):
        sub |= ((atoms >> i) & 1) << j
    return table[sub]


def _reduce(prims, table, ok):
    """Drop primitives the region does not depend on (on feasible atoms)."""
    changed = True
    while changed and prims:
        changed = False
        k = len(prims)
        atoms = np.arange(1 << k)
        for i in range(k):
            lo = atoms[(atoms >> i & 1) == 0]
            hi = lo | (1 << i)
            both = ok[lo] & ok[hi]
            if np.all(table[lo][both] == table[hi][both]):
                keep = [j for j in range(k) if j != i]
                new = (table[lo] & ok[lo]) | (table[hi] & ok[hi])
                # index the reduced table by the remaining bits
                red_atoms = np.arange(1 << (k - 1))
                full = np.zeros(red_atoms.size, dtype=np.int64)
                for n, j in enumerate(keep):
                    full |= ((red_atoms >> n) & 1) << j
                pos = {int(a): m for m, a in enumerate(lo)}
                table = np.array([new[pos[int(f)]] for f in full], dtype=bool)
                prims = tuple(prims[j] for j in keep)
                ok = _feasible(prims)
                table = table & ok
                changed = True
                break
    return prims, table, ok


def _canonical(prims, table):
    ok = _feasible(prims)
    table = table & ok
    prims, table, ok = _reduce(prims, table, ok)
    if not table.any():
        return EMPTY
    if np.array_equal(table, ok):
        return ALL
    k = len(prims)
    full = (1 << k) - 1
    if np.count_nonzero(table) == 1 and table[full]:
        if k == 1:
            return prims[0]
        if all(isinstance(p, Rect) for p in prims):
            b = _intersect_bounds([_prim_bounds(p) for p in prims])
            return Rect(*b)
    return Boolean(prims, _pack(table))


@lru_cache(maxsize=65536)
def _combine(op, a, b):
    pa, ta = _lift(a)
    pb, tb = _lift(b)
    prims = tuple(sorted(set(pa) | set(pb), key=lambda p: p._key()))
    if len(prims) > MAX_PRIMITIVES:
        raise ValueError(f"region depends on more than {MAX_PRIMITIVES} primitives")
    k = len(prims)
    pos = {p: i for i, p in enumerate(prims)}
    va = _remap(ta, [pos[p] for p in pa], k)
    vb = _remap(tb, [pos[p] for p in pb], k)
    if op == "or":
        t = va | vb
    elif op == "and":
        t = va & vb
    else:
        t = va & ~vb
    return _canonical(prims, t)


def region_union(*regions):
    out = EMPTY
    for r in regions:
        if out == ALL or r == ALL:
            return ALL
        out = r if out == EMPTY else (out if r == EMPTY else _combine("or", out, r))
    return out


def region_intersect(*regions):
    out = ALL
    for r in regions:
        if out == EMPTY or r == EMPTY:
            return EMPTY
        out = r if out == ALL else (out if r == ALL or r == out else _combine("and", out, r))
    return out


def region_difference(a, b):
    if b == EMPTY:
        return a
    if a == EMPTY or b == ALL or a == b:
        return EMPTY
    return _combine("diff", a, b)


def as_rect(region):
    """Bounds if the region is an axis-aligned (possibly infinite) rectangle.

    Returns None when the region is not a rectangle; EMPTY maps to None as
    well and callers check for it first.
    """
    if isinstance(region, Rect):
        return _prim_bounds(region)
    if isinstance(region, AllRegion):
        return (-np.inf, np.inf, -np.inf, np.inf)
    return None


def _prim_contains(p, x, y):
    if isinstance(p, Rect):
        return (x >= p.xmin) & (x <= p.xmax) & (y >= p.ymin) & (y <= p.ymax)
    return (x - p.cx) ** 2 + (y - p.cy) ** 2 <= p.radius ** 2


def contains(region, points):
    """Membership of each row of ``points`` (k, >=2) in the region.

    Only the first two coordinates (position) are used. Boundary points of
    rectangles and discs are inside.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = _contains(region, pts[:, 0], pts[:, 1])
    return bool(out[0]) if scalar else out


def _contains(r, x, y):
    if isinstance(r, PRIMITIVES):
        return _prim_contains(r, x, y)
    if isinstance(r, AllRegion):
        return np.ones(x.shape, dtype=bool)
    if isinstance(r, EmptyRegion):
        return np.zeros(x.shape, dtype=bool)
    atom = np.zeros(x.shape, dtype=np.int64)
    for i, p in enumerate(r.prims):
        atom |= _prim_contains(p, x, y).astype(np.int64) << i
    return r.table[atom]


def _classify_prim(p, x0, x1, y0, y1):
    if isinstance(p, Rect):
        inside = (x0 >= p.xmin) & (x1 <= p.xmax) & (y0 >= p.ymin) & (y1 <= p.ymax)
        outside = (x1 < p.xmin) | (x0 > p.xmax) | (y1 < p.ymin) | (y0 > p.ymax)
        return np.where(inside, IN, np.where(outside, OUT, MIXED))
    # nearest and farthest box points from the centre
    nx = np.clip(p.cx, x0, x1) - p.cx
    ny = np.clip(p.cy, y0, y1) - p.cy
    fx = np.maximum(np.abs(x0 - p.cx), np.abs(x1 - p.cx))
    fy = np.maximum(np.abs(y0 - p.cy), np.abs(y1 - p.cy))
    r2 = p.radius ** 2
    inside = fx ** 2 + fy ** 2 <= r2
    outside = nx ** 2 + ny ** 2 > r2
    return np.where(inside, IN, np.where(outside, OUT, MIXED))


def classify_boxes(region, boxes):
    """Classify axis-aligned boxes (k, 4: xmin, xmax, ymin, ymax).

    Returns an int array with IN (box inside region), OUT (disjoint) or
    MIXED. MIXED is conservative: it may be returned for boxes that are in
    fact fully in or out.
    """
    b = np.atleast_2d(np.asarray(boxes, dtype=float))
    x0, x1, y0, y1 = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    n = x0.shape[0]
    if isinstance(region, AllRegion):
        return np.full(n, IN)
    if isinstance(region, EmptyRegion):
        return np.full(n, OUT)
    if isinstance(region, PRIMITIVES):
        return _classify_prim(region, x0, x1, y0, y1)
    fixed = np.zeros(n, dtype=np.int64)
    free = np.zeros(n, dtype=np.int64)
    for i, p in enumerate(region.prims):
        c = _classify_prim(p, x0, x1, y0, y1)
        fixed |= (c == IN).astype(np.int64) << i
        free |= (c == MIXED).astype(np.int64) << i
    table = region.table
    ok = _feasible(region.prims)
    out = np.full(n, MIXED)
    for pattern in np.unique(free):
        rows = np.flatnonzero(free == pattern)
        bits = [i for i in range(len(region.prims)) if pattern >> i & 1]
        combos = np.zeros(1, dtype=np.int64)
        for i in bits:
            combos = np.concatenate([combos, combos | (1 << i)])
        atoms = fixed[rows, None] | combos[None, :]
        live = ok[atoms]
        vals = table[atoms]
        all_in = np.all(vals | ~live, axis=1)
        all_out = ~np.any(vals & live, axis=1)
        out[rows] = np.where(all_out, OUT, np.where(all_in, IN, MIXED))
    return out


def region_bounds(region):
    """Conservative (xmin, xmax, ymin, ymax); may be infinite."""
    inf = np.inf
    if isinstance(region, PRIMITIVES):
        return _prim_bounds(region)
    if isinstance(region, EmptyRegion):
        return (0.0, 0.0, 0.0, 0.0)
    if isinstance(region, AllRegion):
        return (-inf, inf, -inf, inf)
    bounds = [_prim_bounds(p) for p in region.prims]
    boxes = []
    for a in region.atoms():
        inside = [bounds[i] for i in range(len(bounds)) if a >> i & 1]
        if not inside:
            return (-inf, inf, -inf, inf)
        b = _intersect_bounds(inside)
        if b is not None:
            boxes.append(b)
    if not boxes:
        return (0.0, 0.0, 0.0, 0.0)
    return (min(b[0] for b in boxes), max(b[1] for b in boxes),
            min(b[2] for b in boxes), max(b[3] for b in boxes))


def to_tree(region):
    """Region as nested (op, children) tuples over primitives, for serialization.

    Booleans expand to a union over their atoms of intersections of the
    primitives (or their complements).
    """
    if not isinstance(region, Boolean):
        return region
    terms = []
    for a in region.atoms():
        ins = [p for i, p in enumerate(region.prims) if a >> i & 1]
        outs = [p for i, p in enumerate(region.prims) if not a >> i & 1]
        terms.append(("intersect", tuple(ins) + tuple(("diff", (ALL, o)) for o in outs)))
    return ("union", tuple(terms))


# ---------------------------------------------------------------------------
# Gaussian mass over regions


def _position_block(mean, cov):
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    return mean[..., :2], cov[..., :2, :2]


def _chol2(c):
    """Batched lower Cholesky factor of 2x2 matrices (n, 2, 2)."""
    a = np.sqrt(c[:, 0, 0])
    b = c[:, 1, 0] / a
    d = np.sqrt(np.maximum(c[:, 1, 1] - b * b, 0.0))
    L = np.zeros_like(c)
    L[:, 0, 0] = a
    L[:, 1, 0] = b
    L[:, 1, 1] = d
    return L


def sigma_boxes(means2, covs2, k=BOX_SIGMAS):
    sx = np.sqrt(covs2[:, 0, 0])
    sy = np.sqrt(covs2[:, 1, 1])
    return np.stack([means2[:, 0] - k * sx, means2[:, 0] + k * sx,
                     means2[:, 1] - k * sy, means2[:, 1] + k * sy], axis=1)


def _rect_only(region):
    if isinstance(region, (Rect, AllRegion)):
        return True
    return isinstance(region, Boolean) and all(isinstance(p, Rect) for p in region.prims)


def _grid_mass(m, sx, sy, region):
    """Exact Gaussian mass of a union of rectangle cells (diagonal covariance).

    The plane is cut at every rectangle edge; each grid cell lies wholly in or
    out of the region up to its boundary, which has zero mass.
    """
    if isinstance(region, AllRegion):
        return np.ones(m.shape[0])
    prims = (region,) if isinstance(region, Rect) else region.prims
    xs = np.unique([v for p in prims for v in (p.xmin, p.xmax)])
    ys = np.unique([v for p in prims for v in (p.ymin, p.ymax)])
    xe = np.concatenate([[-np.inf], xs, [np.inf]])
    ye = np.concatenate([[-np.inf], ys, [np.inf]])
    cx = _midpoints(xe)
    cy = _midpoints(ye)
    gx, gy = np.meshgrid(cx, cy, indexing="ij")
    inside = _contains(region, gx.ravel(), gy.ravel()).reshape(gx.shape).astype(float)
    px = np.diff(ndtr((xe[None, :] - m[:, :1]) / sx[:, None]), axis=1)
    py = np.diff(ndtr((ye[None, :] - m[:, 1:2]) / sy[:, None]), axis=1)
    return np.einsum("ni,ij,nj->n", px, inside, py)


def _grid_area(region):
    xs = np.unique([v for p in region.prims for v in (p.xmin, p.xmax)])
    ys = np.unique([v for p in region.prims for v in (p.ymin, p.ymax)])
    gx, gy = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]), indexing="ij")
    inside = _contains(region, gx.ravel(), gy.ravel()).reshape(gx.shape)
    return float(np.diff(xs) @ inside @ np.diff(ys))


def _midpoints(edges):
    mid = 0.5 * (edges[:-1] + edges[1:])
    mid[0] = edges[1] - 1.0
    mid[-1] = edges[-2] + 1.0
    return mid


class StepCache:
    """Scoped memo for mass fractions and repeated fusion work.

    Active only inside ``with StepCache():``; a simulation opens one per
    time step so results never depend on earlier trials. Entries keyed by
    object identity hold a reference to the object, so ids stay valid.
    """

    _active = None

    def __init__(self):
        self.store = {}

    def __enter__(self):
        self._prev = StepCache._active
        StepCache._active = self
        return self

    def __exit__(self, *exc):
        StepCache._active = self._prev
        return False


def memoized(key, compute, *pin):
    """compute() through the active StepCache, if any; ``pin`` keeps key objects alive."""
    cache = StepCache._active
    if cache is None:
        return compute()
    hit = cache.store.get(key)
    if hit is None:
        hit = (compute(), pin)
        cache.store[key] = hit
    return hit[0]


def mass_fractions(means, covs, supports, region, samples=1000, rng=None, base=None):
    """Fraction of each component's in-support mass that lies in ``region``.

    For component j with Gaussian N_j and support S_j this is
    c_j(S_j ∩ R) / c_j(S_j). With S_j = ALL it is the plain Gaussian mass of
    R. Complementary regions can be handled with ``1 - fraction``, which is
    the common-random-numbers identity used by splitting.

    Paths, in order: trivial regions, the BOX_SIGMAS box test, an exact
    grid-CDF ratio when S_j and R are built from rectangles only and the
    position covariance is diagonal, and Monte Carlo otherwise. The Monte
    Carlo path reuses one set of standard-normal draws ``base`` (samples, 2)
    for every component in the call.
    """
    m2, c2 = _position_block(means, covs)
    m2 = np.atleast_2d(m2)
    c2 = c2.reshape(-1, 2, 2)
    n = m2.shape[0]
    if supports is None:
        supports = (ALL,) * n
    frac = np.full(n, np.nan)
    if n == 0:
        return frac
    if region == ALL:
        frac[:] = 1.0
        return frac
    if region == EMPTY:
        frac[:] = 0.0
        return frac

    cls = classify_boxes(region, sigma_boxes(m2, c2))
    frac[cls == IN] = 1.0
    frac[cls == OUT] = 0.0
    todo = np.flatnonzero(cls == MIXED)
    if todo.size == 0:
        return frac

    cache = StepCache._active
    keys = None
    if cache is not None:
        keys = {}
        left = []
        for j in todo:
            key = (m2[j].tobytes(), c2[j].tobytes(), supports[j], region)
            hit = cache.store.get(key)
            if hit is None:
                keys[j] = key
                left.append(j)
            else:
                frac[j] = hit
        todo = np.asarray(left, dtype=int)
        if todo.size == 0:
            return frac

    sx = np.sqrt(c2[:, 0, 0])
    sy = np.sqrt(c2[:, 1, 1])
    diag = np.abs(c2[:, 0, 1]) <= 1e-12 * sx * sy
    mc = []
    groups = {}
    for j in todo:
        groups.setdefault(supports[j], []).append(j)
    for sup, idx in groups.items():
        idx = np.asarray(idx)
        exact = idx[diag[idx]] if (_rect_only(sup) and _rect_only(region)) else idx[:0]
        if exact.size:
            inter = region_intersect(sup, region)
            den = _grid_mass(m2[exact], sx[exact], sy[exact], sup)
            num = np.zeros(exact.size) if inter == EMPTY else _grid_mass(
                m2[exact], sx[exact], sy[exact], inter)
            with np.errstate(invalid="ignore", divide="ignore"):
                f = np.where(den > 0, np.minimum(num / np.where(den > 0, den, 1.0), 1.0), np.nan)
            frac[exact] = f
        rest = np.setdiff1d(idx, exact, assume_unique=True)
        if rest.size:
            mc.append((sup, rest))

    if mc:
        if base is None:
            if rng is None:
                raise ValueError("Monte Carlo mass estimate needs an rng")
            base = rng.standard_normal((samples, 2))
        for sup, idx in mc:
            L = _chol2(c2[idx])
            pts = m2[idx, None, :] + base[None] @ np.swapaxes(L, 1, 2)
            x, y = pts[..., 0].ravel(), pts[..., 1].ravel()
            in_r = _contains(region, x, y).reshape(idx.size, -1)
            if sup == ALL:
                ns = np.full(idx.size, base.shape[0])
                nr = in_r.sum(axis=1)
            else:
                in_s = _contains(sup, x, y).reshape(idx.size, -1)
                ns = in_s.sum(axis=1)
                nr = (in_s & in_r).sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                frac[idx] = np.where(ns > 0, nr / np.maximum(ns, 1), np.nan)

    # a component with no in-support draws: decide by its mean
    bad = np.isnan(frac)
    if bad.any():
        frac[bad] = _contains(region, m2[bad, 0], m2[bad, 1]).astype(float)
    if keys:
        for j, key in keys.items():
            cache.store[key] = frac[j]
    return frac


def support_masses(means, covs, supports, samples=1000, rng=None, base=None):
    """Plain Gaussian mass c_j(S_j) of each component on its own support."""
    n = len(supports)
    out = np.ones(n)
    groups = {}
    for j, s in enumerate(supports):
        groups.setdefault(s, []).append(j)
    for sup, idx in groups.items():
        if sup == ALL:
            continue
        idx = np.asarray(idx)
        if base is None and rng is not None:
            base = rng.standard_normal((samples, 2))
        out[idx] = mass_fractions(means[idx], covs[idx], None, sup, samples, rng, base)
    return out


def gaussian_mass(mean, cov, region, samples=1000, rng=None):
    """Mass of N(mean, cov) (position marginal) inside ``region``.

    Returns ``(estimate, standard_error)``; the error is zero whenever an
    exact path was taken.
    """
    m2, c2 = _position_block(mean, cov)
    m2 = m2.reshape(1, 2)
    c2 = c2.reshape(1, 2, 2)
    if region == ALL:
        return 1.0, 0.0
    if region == EMPTY:
        return 0.0, 0.0
    cls = classify_boxes(region, sigma_boxes(m2, c2))[0]
    if cls != MIXED:
        return float(cls == IN), 0.0
    sx, sy = np.sqrt(c2[0, 0, 0]), np.sqrt(c2[0, 1, 1])
    if _rect_only(region) and abs(c2[0, 0, 1]) <= 1e-12 * sx * sy:
        return float(_grid_mass(m2, np.array([sx]), np.array([sy]), region)[0]), 0.0
    if rng is None:
        raise ValueError("Monte Carlo mass estimate needs an rng")
    pts = m2 + rng.standard_normal((samples, 2)) @ _chol2(c2)[0].T
    c = float(np.mean(contains(region, pts)))
    return c, float(np.sqrt(c * (1.0 - c) / samples))


def region_volume(region, bounding_box=None, samples=100_000, rng=None):
    """Area of the region in m², as ``(estimate, standard_error)``.

    Closed form for rectangle-reducible regions and single discs; otherwise
    uniform Monte Carlo inside ``bounding_box``.
    """
    if region == EMPTY:
        return 0.0, 0.0
    if isinstance(region, Disc):
        return float(np.pi * region.radius ** 2), 0.0
    b = as_rect(region)
    if b is not None:
        if not np.all(np.isfinite(b)):
            raise ValueError("unbounded region has no finite volume")
        return float((b[1] - b[0]) * (b[3] - b[2])), 0.0
    if isinstance(region, Boolean) and _rect_only(region) and np.all(np.isfinite(region_bounds(region))):
        return _grid_area(region), 0.0
    if bounding_box is None:
        bounding_box = region_bounds(region)
    if isinstance(bounding_box, Rect):
        bounding_box = _prim_bounds(bounding_box)
    xmin, xmax, ymin, ymax = bounding_box
    if not np.all(np.isfinite(bounding_box)):
        raise ValueError("region volume needs a finite bounding box")
    if rng is None:
        raise ValueError("Monte Carlo volume estimate needs an rng")
    area = (xmax - xmin) * (ymax - ymin)
    pts = np.column_stack([rng.uniform(xmin, xmax, samples), rng.uniform(ymin, ymax, samples)])
    f = float(np.mean(contains(region, pts)))
    return area * f, area * float(np.sqrt(f * (1 - f) / samples))
