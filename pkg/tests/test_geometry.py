import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from birdfusion.geometry import (ALL, EMPTY, Boolean, StepCache, as_rect, contains, disc,
                                 gaussian_mass, mass_fractions, memoized, rect, region_bounds,
                                 region_difference, region_intersect, region_union,
                                 region_volume, support_masses, to_tree)

# ---------------------------------------------------------------- oracle

# expression trees evaluated naively, independent of the normal form
coord = st.integers(0, 10).map(float)


@st.composite
def prim_tree(draw):
    if draw(st.booleans()):
        x0, x1 = sorted((draw(coord), draw(coord)))
        y0, y1 = sorted((draw(coord), draw(coord)))
        return ("rect", x0, x1, y0, y1)
    return ("disc", draw(coord), draw(coord), float(draw(st.integers(0, 5))))


trees = st.recursive(
    prim_tree() | st.just(("all",)) | st.just(("empty",)),
    lambda kids: st.tuples(st.sampled_from(["union", "intersect", "diff"]), kids, kids),
    max_leaves=6,
)


def build(t):
    kind = t[0]
    if kind == "rect":
        return rect(*t[1:])
    if kind == "disc":
        return disc(t[1:3], t[3])
    if kind == "all":
        return ALL
    if kind == "empty":
        return EMPTY
    a, b = build(t[1]), build(t[2])
    return {"union": region_union, "intersect": region_intersect,
            "diff": region_difference}[kind](a, b)


def naive(t, x, y):
    kind = t[0]
    if kind == "rect":
        return (x >= t[1]) & (x <= t[2]) & (y >= t[3]) & (y <= t[4])
    if kind == "disc":
        return (x - t[1]) ** 2 + (y - t[2]) ** 2 <= t[3] ** 2
    if kind == "all":
        return np.ones(x.shape, bool)
    if kind == "empty":
        return np.zeros(x.shape, bool)
    a, b = naive(t[1], x, y), naive(t[2], x, y)
    return {"union": a | b, "intersect": a & b, "diff": a & ~b}[kind]


def probe_points(seed=0):
    rng = np.random.default_rng(seed)
    grid = np.stack(np.meshgrid(np.arange(-1, 12, 0.5), np.arange(-1, 12, 0.5)), -1).reshape(-1, 2)
    return np.vstack([grid, rng.uniform(-1, 12, (2000, 2))])


PTS = probe_points()


@settings(max_examples=300, deadline=None)
@given(trees)
def test_membership_matches_naive_tree(t):
    r = build(t)
    assert np.array_equal(contains(r, PTS), naive(t, PTS[:, 0], PTS[:, 1]))


@settings(max_examples=150, deadline=None)
@given(trees)
def test_serialized_tree_rebuilds_same_region(t):
    r = build(t)
    assert rebuild(to_tree(r)) == r


def rebuild(node):
    if not isinstance(node, tuple):
        return node
    op, kids = node
    kids = [rebuild(k) for k in kids]
    if op == "diff":
        return region_difference(*kids)
    if not kids:
        return EMPTY if op == "union" else ALL
    return (region_union if op == "union" else region_intersect)(*kids)


@settings(max_examples=100, deadline=None)
@given(trees, trees)
def test_algebra_laws(t1, t2):
    a, b = build(t1), build(t2)
    assert region_union(a, b) == region_union(b, a)
    assert region_intersect(a, b) == region_intersect(b, a)
    assert region_union(a, a) == a
    assert region_difference(a, a) == EMPTY
    x, y = PTS[:, 0], PTS[:, 1]
    lhs = contains(region_union(region_difference(a, b), region_intersect(a, b)), PTS)
    assert np.array_equal(lhs, naive(t1, x, y))


@settings(max_examples=100, deadline=None)
@given(trees)
def test_bounds_cover_region(t):
    r = build(t)
    inside = PTS[contains(r, PTS)]
    x0, x1, y0, y1 = region_bounds(r)
    assert np.all((inside[:, 0] >= x0) & (inside[:, 0] <= x1))
    assert np.all((inside[:, 1] >= y0) & (inside[:, 1] <= y1))


def test_trivial_identities():
    r = rect(0, 1, 0, 1)
    assert region_union(r, EMPTY) == r
    assert region_intersect(r, ALL) == r
    assert region_union(r, ALL) == ALL
    assert region_intersect(r, EMPTY) == EMPTY
    assert region_difference(ALL, ALL) == EMPTY
    assert region_difference(r, r) == EMPTY


def test_rect_intersection_collapses_to_rect():
    r = region_intersect(rect(0, 10, 0, 10), rect(5, 20, -5, 5))
    assert as_rect(r) == (5.0, 10.0, 0.0, 5.0)


def test_disjoint_intersection_is_empty():
    assert region_intersect(rect(0, 1, 0, 1), rect(2, 3, 2, 3)) == EMPTY
    assert region_intersect(disc((0, 0), 1), disc((5, 0), 1)) == EMPTY


def test_constructor_validation():
    with pytest.raises(ValueError):
        rect(1, 0, 0, 1)
    with pytest.raises(ValueError):
        disc((0, 0), -1)


def test_scalar_membership():
    assert contains(rect(0, 1, 0, 1), np.array([0.5, 0.5])) is True
    assert contains(rect(0, 1, 0, 1), [1.0, 1.0]) is True  # closed boundary
    assert contains(disc((0, 0), 1), [1.0, 0.1]) is False


def test_membership_ignores_velocity_columns():
    pts = np.array([[0.5, 0.5, 100.0, -100.0]])
    assert contains(rect(0, 1, 0, 1), pts)[0]


def test_primitive_cap():
    regs = [rect(i, i + 0.5, 0, 1) for i in range(17)]
    with pytest.raises(ValueError):
        region_union(*regs)


# ---------------------------------------------------------------- volume

def rect_union_area(rects):
    # inclusion-exclusion over all subsets
    from itertools import combinations
    total = 0.0
    for k in range(1, len(rects) + 1):
        for sub in combinations(rects, k):
            x0 = max(r[0] for r in sub); x1 = min(r[1] for r in sub)
            y0 = max(r[2] for r in sub); y1 = min(r[3] for r in sub)
            if x1 > x0 and y1 > y0:
                total += (-1) ** (k + 1) * (x1 - x0) * (y1 - y0)
    return total


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(coord, coord, coord, coord), min_size=1, max_size=4))
def test_union_of_rects_area_is_exact(raw):
    rects = [(min(a, b), max(a, b), min(c, d), max(c, d)) for a, b, c, d in raw]
    r = region_union(*(rect(*q) for q in rects))
    area, se = region_volume(r)
    assert se == 0.0
    assert area == pytest.approx(rect_union_area(rects), abs=1e-9)


def test_disc_area_and_monte_carlo_volume():
    assert region_volume(disc((0, 0), 2))[0] == pytest.approx(4 * np.pi)
    r = region_difference(rect(-2, 2, -2, 2), disc((0, 0), 1))
    est, se = region_volume(r, samples=200_000, rng=np.random.default_rng(0))
    assert se > 0
    assert abs(est - (16 - np.pi)) < 4 * se


def test_volume_errors():
    with pytest.raises(ValueError):
        region_volume(ALL)
    with pytest.raises(ValueError):
        region_volume(region_union(disc((0, 0), 1), disc((1, 0), 1)))  # needs rng


# ---------------------------------------------------------------- Gaussian mass

def bvn_rect(m, P, b):
    mvn = multivariate_normal(m, P)
    x0, x1, y0, y1 = b
    return (mvn.cdf([x1, y1]) - mvn.cdf([x0, y1]) - mvn.cdf([x1, y0]) + mvn.cdf([x0, y0]))


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 15), st.floats(-5, 15), st.floats(0.5, 5), st.floats(0.5, 5))
def test_rect_mass_matches_bivariate_cdf(mx, my, sx, sy):
    b = (0.0, 10.0, 2.0, 8.0)
    P = np.diag([sx ** 2, sy ** 2])
    est, se = gaussian_mass(np.array([mx, my]), P, rect(*b))
    assert se == 0.0
    assert est == pytest.approx(bvn_rect([mx, my], P, b), abs=1e-6)


def test_rect_difference_mass_is_exact():
    outer, inner = (0.0, 10.0, 0.0, 10.0), (3.0, 6.0, 3.0, 6.0)
    r = region_difference(rect(*outer), rect(*inner))
    m, P = np.array([4.0, 5.0]), np.diag([4.0, 9.0])
    est, se = gaussian_mass(m, P, r)
    assert se == 0.0
    assert est == pytest.approx(bvn_rect(m, P, outer) - bvn_rect(m, P, inner), abs=1e-6)


def test_correlated_mass_monte_carlo_within_error():
    m, P = np.array([5.0, 5.0]), np.array([[4.0, 3.0], [3.0, 4.0]])
    b = (3.0, 8.0, 2.0, 6.0)
    est, se = gaussian_mass(m, P, rect(*b), samples=100_000, rng=np.random.default_rng(1))
    assert abs(est - bvn_rect(m, P, b)) < 4 * se


def test_far_component_uses_box_shortcut():
    est, se = gaussian_mass(np.array([100.0, 100.0]), np.eye(2), disc((0, 0), 1))
    assert (est, se) == (0.0, 0.0)
    est, se = gaussian_mass(np.array([0.0, 0.0]), np.eye(2), rect(-50, 50, -50, 50))
    assert (est, se) == (1.0, 0.0)


def test_mass_fractions_are_ratios_on_support():
    means = np.array([[5.0, 5.0, 0, 0]])
    covs = np.diag([4.0, 4.0, 1.0, 1.0])[None]
    S, R = rect(0, 10, 0, 10), rect(0, 5, 0, 10)
    frac = mass_fractions(means, covs, [S], R)
    assert frac[0] == pytest.approx(0.5, abs=1e-12)
    c = support_masses(means, covs, [S])
    assert c[0] == pytest.approx(bvn_rect([5, 5], np.eye(2) * 4, (0, 10, 0, 10)), abs=1e-6)


def test_step_cache_scopes_memo():
    calls = []

    def compute():
        calls.append(1)
        return len(calls)

    assert memoized("k", compute) == 1          # no cache active
    assert memoized("k", compute) == 2
    with StepCache():
        assert memoized("k", compute) == 3
        assert memoized("k", compute) == 3
    assert memoized("k", compute) == 4


# ---------------------------------------------------------------- worked examples

def test_membership_examples():
    sq = rect(0, 10, 0, 10)
    assert contains(sq, [5, 5])
    assert not contains(region_difference(ALL, sq), [5, 5])
    assert contains(region_intersect(disc((0, 0), 5), sq), [3, 3])


def test_unit_square_mass_against_erf():
    from math import erf, sqrt
    phi = lambda t: 0.5 * (1 + erf(t / sqrt(2)))
    est, se = gaussian_mass(np.zeros(2), np.eye(2), rect(0, 1, 0, 1))
    assert est == pytest.approx((phi(1) - phi(0)) ** 2, abs=1e-12)
    assert gaussian_mass(np.zeros(2), np.eye(2), ALL) == (1.0, 0.0)


def test_half_plane_mass_by_monte_carlo():
    # the far disc keeps the region off the exact rectangle path
    half = region_difference(ALL, rect(-1e9, 0, -1e9, 1e9))
    est, se = gaussian_mass(np.zeros(2), np.eye(2), region_union(half, disc((-50, 5), 0.1)),
                            samples=20_000, rng=np.random.default_rng(0))
    assert abs(est - 0.5) < 3 * se


def test_volume_examples():
    assert region_volume(rect(0, 10, 0, 20)) == (200.0, 0.0)
    assert region_volume(EMPTY) == (0.0, 0.0)
    est, se = region_volume(region_union(rect(0, 1, 0, 1), rect(3, 4, 0, 1)))
    assert est == pytest.approx(2.0, abs=3 * se + 1e-12)
