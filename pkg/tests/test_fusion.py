import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from birdfusion.fusion import (FusionWeights, bird_fuse_pair, gci_fuse_common, gci_pair,
                               gm_power, log_kappa, sequential_bird, standard_gci,
                               uninformative_poisson)
from birdfusion.geometry import ALL, EMPTY, contains, disc, rect, region_union
from birdfusion.gm import GaussianMixture, GMParams, gm_evaluate
from birdfusion.poisson import (PoissonPosterior, expected_count, poisson_intensity,
                                restrict, split)

HALF = FusionWeights(0.5, 0.5)


def single(lam, mean, P, domain=ALL, rng=None):
    post = PoissonPosterior(lam, GaussianMixture([1.0], np.asarray(mean, float)[None], P[None]))
    return post if domain == ALL else restrict(post, domain, rng or np.random.default_rng(0))


def mixture_post(lam, means, s=20.0, domain=ALL, seed=0):
    means = np.asarray(means, dtype=float)
    n = len(means)
    P = np.diag([s * s, s * s, 25.0, 25.0])
    post = PoissonPosterior(lam, GaussianMixture(np.full(n, 1.0 / n), means,
                                                 np.broadcast_to(P, (n, 4, 4)).copy()))
    return post if domain == ALL else restrict(post, domain, np.random.default_rng(seed))


def sample_points(region_box, n=400, seed=3):
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = region_box
    pts = np.zeros((n, 4))
    pts[:, 0] = rng.uniform(x0, x1, n)
    pts[:, 1] = rng.uniform(y0, y1, n)
    pts[:, 2:] = rng.normal(0, 3, (n, 2))
    return pts


# ------------------------------------------------------------- weights, power

def test_weights_validated():
    with pytest.raises(ValueError):
        FusionWeights(0.7, 0.7)
    with pytest.raises(ValueError):
        FusionWeights(-0.1, 1.1)
    assert FusionWeights.of(0.25).swapped() == FusionWeights(0.75, 0.25)


def test_kappa_of_identity_at_one_half():
    assert np.exp(log_kappa(np.eye(4)[None], 0.5))[0] == pytest.approx(8 * np.pi, rel=1e-12)


def test_power_of_single_gaussian_is_exact():
    # (N(x; m, P))^ω = κ N(x; m, P/ω) pointwise
    P = np.diag([4.0, 9.0, 1.0, 2.0])
    g = GaussianMixture([0.7], np.zeros((1, 4)), P[None])
    p = gm_power(g, 0.3)
    x = np.array([[1.0, -2.0, 0.5, 0.1], [0.0, 0.0, 0.0, 0.0]])
    assert np.allclose(gm_evaluate(p, x), gm_evaluate(g, x) ** 0.3, rtol=1e-12)
    assert gm_power(g, 1.0) is g
    with pytest.raises(ValueError):
        gm_power(g, 0.0)


# ------------------------------------------------------------- closed forms

@pytest.mark.parametrize("refit", [0, 3])
def test_equal_covariance_fusion_mean_and_covariance(refit):
    P = np.diag([100.0, 64.0, 4.0, 9.0])
    ma, mb = np.array([10.0, -5.0, 1.0, 0.0]), np.array([16.0, 3.0, -1.0, 2.0])
    a, b = single(2.0, ma, P), single(3.0, mb, P)
    f = standard_gci(a, b, HALF, params=GMParams(merge=0.0, refit=refit))
    assert len(f) == 1
    assert np.allclose(f.location.means[0], (ma + mb) / 2, rtol=0, atol=1e-9)
    assert np.allclose(f.location.covs[0], P, rtol=0, atol=1e-9)
    # Bhattacharyya coefficient of two equal-covariance Gaussians
    d = ma - mb
    bc = np.exp(-d @ np.linalg.solve(P, d) / 8)
    assert f.lam == pytest.approx(np.sqrt(6.0) * bc, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.5, 5.0), st.floats(0.5, 5.0))
def test_unequal_weights_geometric_mean_of_counts(omega, la, lb):
    P = np.diag([50.0, 50.0, 4.0, 4.0])
    m = np.array([5.0, 5.0, 0.0, 0.0])
    f = standard_gci(single(la, m, P), single(lb, m, P), FusionWeights.of(omega))
    assert f.lam == pytest.approx(la ** omega * lb ** (1 - omega), rel=1e-12)


def test_count_geometric_mean_on_bounded_domain():
    # MC support masses: λ within 3 standard errors of sqrt(λa λb) K̄
    F = disc((0.0, 0.0), 60.0)
    P = np.diag([900.0, 900.0, 4.0, 4.0])
    rng = np.random.default_rng(11)
    a = single(2.0, [5.0, 0, 0, 0], P, F, rng)
    b = single(8.0, [-5.0, 0, 0, 0], P, F, rng)
    samples = 20_000
    f = gci_fuse_common(a, b, HALF, F, rng, samples, GMParams(merge=0.0))
    lam_scale = np.sqrt(a.lam * b.lam)
    kbar = f.lam / lam_scale
    # exact K̄ for the untruncated product is bc * c_fused(F); the components sit
    # well inside a 2σ disc, so compare against an independent MC of c_fused
    d = np.array([10.0, 0, 0, 0])
    bc = np.exp(-d @ np.linalg.solve(P, d) / 8)
    pts = np.random.default_rng(5).multivariate_normal([0, 0], P[:2, :2], 400_000)
    c_fused = contains(F, pts).mean()
    pa = np.random.default_rng(6).multivariate_normal([5, 0], P[:2, :2], 400_000)
    pb = np.random.default_rng(7).multivariate_normal([-5, 0], P[:2, :2], 400_000)
    ca, cb = contains(F, pa).mean(), contains(F, pb).mean()
    ref = bc * c_fused / np.sqrt(ca * cb)
    se = np.sqrt(ref * (1 - min(ref, 1)) / samples) + 1e-3
    assert abs(kbar - ref) < 3 * se


def test_fusing_identical_posteriors_is_identity():
    post = mixture_post(3.0, [[100, 100, 0, 0], [400, 300, 1, 1]])
    f = standard_gci(post, post, FusionWeights.of(0.3))
    assert f.lam == pytest.approx(3.0, rel=1e-9)
    x = sample_points((0, 500, 0, 400))
    assert np.allclose(poisson_intensity(f, x), poisson_intensity(post, x), rtol=1e-6, atol=1e-18)


def test_zero_weight_returns_other_input():
    a, b = mixture_post(1.0, [[0, 0, 0, 0]]), mixture_post(2.0, [[5, 5, 0, 0]])
    assert standard_gci(a, b, FusionWeights(1.0, 0.0)) is a
    assert standard_gci(a, b, FusionWeights(0.0, 1.0)) is b


def test_empty_input_gives_empty_fusion():
    a = mixture_post(1.0, [[0, 0, 0, 0]])
    f = standard_gci(a, PoissonPosterior.empty(), HALF)
    assert f.lam == 0.0


# ------------------------------------------------------------- BIRD identities

A, B = rect(0, 500, 0, 500), rect(600, 1100, 0, 500)


def test_disjoint_fovs_add_counts_and_keep_intensities():
    a = mixture_post(1.7, [[200, 250, 0, 0], [450, 100, 0, 0]], domain=A)
    b = mixture_post(2.3, [[800, 250, 0, 0]], domain=B, seed=1)
    f, fov = bird_fuse_pair(a, A, b, B, HALF, np.random.default_rng(0))
    assert fov == region_union(A, B)
    assert f.lam == a.lam + b.lam
    xa, xb = sample_points((0, 500, 0, 500)), sample_points((600, 1100, 0, 500))
    assert np.allclose(poisson_intensity(f, xa), poisson_intensity(a, xa), rtol=1e-12, atol=0)
    assert np.allclose(poisson_intensity(f, xb), poisson_intensity(b, xb), rtol=1e-12, atol=0)


@pytest.mark.parametrize("fov", [rect(0, 800, 0, 600), disc((400, 300), 350)])
def test_identical_fovs_reduce_to_common_gci(fov):
    rng = np.random.default_rng(4)
    a = mixture_post(2.0, [[300, 300, 0, 0], [500, 200, 0, 0]], domain=fov, seed=2)
    b = mixture_post(2.5, [[310, 290, 0, 0], [480, 220, 0, 0]], domain=fov, seed=3)
    f, _ = bird_fuse_pair(a, fov, b, fov, HALF, np.random.default_rng(9))
    g = gci_fuse_common(a, b, HALF, fov, np.random.default_rng(9))
    x = sample_points((0, 800, 0, 600))
    assert f.lam == pytest.approx(g.lam, rel=1e-9)
    assert np.allclose(poisson_intensity(f, x), poisson_intensity(g, x), rtol=1e-9, atol=1e-30)


def test_bird_count_decomposition_with_overlap():
    FA, FB = rect(0, 700, 0, 500), rect(400, 1100, 0, 500)
    a = mixture_post(2.0, [[200, 250, 0, 0], [550, 250, 0, 0]], s=40.0, domain=FA)
    b = mixture_post(2.0, [[560, 240, 0, 0], [900, 250, 0, 0]], s=40.0, domain=FB, seed=1)
    f, fov = bird_fuse_pair(a, FA, b, FB, HALF, np.random.default_rng(0))
    # exclusive pieces pass through: intensity far from the overlap is unchanged
    xa = sample_points((0, 300, 0, 500))
    xb = sample_points((800, 1100, 0, 500))
    assert np.allclose(poisson_intensity(f, xa), poisson_intensity(a, xa), rtol=1e-9, atol=1e-30)
    assert np.allclose(poisson_intensity(f, xb), poisson_intensity(b, xb), rtol=1e-9, atol=1e-30)
    # λ = λ_a,nc + λ_b,nc + λ_co, with the shared object shrunk by its Bhattacharyya factor
    common = rect(400, 700, 0, 500)
    a_co, a_nc = split(a, common, np.random.default_rng(0))
    b_co, b_nc = split(b, common, np.random.default_rng(0))
    co = gci_fuse_common(a_co, b_co, HALF, common, np.random.default_rng(0))
    assert f.lam == pytest.approx(a_nc.lam + b_nc.lam + co.lam, rel=1e-12)
    assert co.lam == pytest.approx(np.exp(-200 / 1600 / 8), rel=2e-2)


def test_swapping_inputs_and_weights_is_symmetric():
    FA, FB = rect(0, 700, 0, 500), rect(400, 1100, 0, 500)
    a = mixture_post(2.0, [[200, 250, 0, 0], [550, 250, 0, 0]], s=40.0, domain=FA)
    b = mixture_post(2.0, [[560, 240, 0, 0], [900, 250, 0, 0]], s=40.0, domain=FB, seed=1)
    w = FusionWeights.of(0.3)
    f, _ = bird_fuse_pair(a, FA, b, FB, w, np.random.default_rng(0))
    g, _ = bird_fuse_pair(b, FB, a, FA, w.swapped(), np.random.default_rng(0))
    assert f.lam == pytest.approx(g.lam, rel=1e-9)
    x = sample_points((0, 1100, 0, 500))
    assert np.allclose(poisson_intensity(f, x), poisson_intensity(g, x), rtol=1e-9, atol=1e-30)


def test_standard_gci_loses_exclusive_objects():
    # GCI pair with restricted domains: intensity vanishes outside the overlap
    a = mixture_post(1.0, [[200, 250, 0, 0]], domain=A)
    b = mixture_post(1.0, [[800, 250, 0, 0]], domain=B, seed=1)
    f, fov = gci_pair(a, A, b, B, HALF)
    assert f.lam == 0.0 and fov == region_union(A, B)


def test_sequential_fold_of_disjoint_agents():
    fovs = [rect(0, 300, 0, 300), rect(400, 700, 0, 300), rect(800, 1100, 0, 300)]
    posts = [mixture_post(1.0 + k, [[150 + 400 * k, 150, 0, 0]], domain=f, seed=k)
             for k, f in enumerate(fovs)]
    acc, fov = sequential_bird(zip(posts, fovs), rng=np.random.default_rng(0))
    assert acc.lam == pytest.approx(sum(p.lam for p in posts), rel=1e-12)
    assert fov == region_union(*fovs)
    with pytest.raises(ValueError):
        sequential_bird([])


def test_fusion_options_validated():
    with pytest.raises(ValueError):
        GMParams(power="other")


@pytest.mark.parametrize("params", [GMParams(refit=3), GMParams(power="corrected"),
                                    GMParams(normalizer="importance")])
def test_variants_agree_on_separated_components(params):
    # well separated components: every variant reduces to the same fusion
    post = mixture_post(2.0, [[0, 0, 0, 0], [2000, 0, 0, 0]])
    other = mixture_post(2.0, [[5, 0, 0, 0], [2005, 0, 0, 0]])
    base = standard_gci(post, other, HALF, np.random.default_rng(1), 20_000, GMParams())
    f = standard_gci(post, other, HALF, np.random.default_rng(1), 20_000, params)
    assert f.lam == pytest.approx(base.lam, rel=2e-2)


def test_uninformative_descriptor():
    u = uninformative_poisson(rect(0, 10, 0, 20))
    assert u.volume == 200.0 and u.density == pytest.approx(1 / 200)
    pmf = u.cardinality(3)
    assert pmf.sum() == pytest.approx(1.0) and np.argmax(pmf) == 3
    with pytest.raises(ValueError):
        uninformative_poisson(EMPTY)
    with pytest.raises(ValueError):
        uninformative_poisson(ALL)


# ------------------------------------------------------------- worked examples

def test_geometric_mean_of_one_and_four():
    P = np.diag([100.0, 100.0, 4.0, 4.0])
    f = standard_gci(single(1.0, [0, 0, 0, 0], P), single(4.0, [0, 0, 0, 0], P), HALF)
    assert f.lam == pytest.approx(2.0, rel=1e-12)


def test_omega_one_returns_first_input():
    a, b = mixture_post(1.0, [[0, 0, 0, 0]]), mixture_post(2.0, [[5, 5, 0, 0]])
    assert standard_gci(a, b, FusionWeights(1.0, 0.0)) is a


def test_sequential_single_input_unchanged():
    a = mixture_post(1.0, [[0, 0, 0, 0]])
    acc, fov = sequential_bird([(a, ALL)])
    assert acc is a and fov == ALL


def test_three_identical_fovs_give_cube_root_of_counts():
    F = rect(-500, 500, -500, 500)
    posts = [single(lam, [0, 0, 0, 0], np.diag([400.0, 400.0, 4.0, 4.0]), F)
             for lam in (1.0, 2.0, 4.0)]
    acc, fov = sequential_bird([(p, F) for p in posts], rng=np.random.default_rng(0))
    assert fov == F
    assert acc.lam == pytest.approx(2.0, rel=1e-9)


def test_example_layout_covers_global_fov():
    # three overlapping FoVs cut the plane into six pieces; the fold covers them all
    fovs = [rect(0, 600, 0, 600), rect(400, 1000, 0, 600), disc((500, 700), 300)]
    posts = [mixture_post(1.0, [[300 + 100 * k, 300, 0, 0]], domain=f, seed=k)
             for k, f in enumerate(fovs)]
    acc, fov = sequential_bird(zip(posts, fovs), rng=np.random.default_rng(0))
    assert fov == region_union(*fovs) and acc.domain == fov
    pts = np.random.default_rng(1).uniform(-100, 1100, (10_000, 2))
    assert np.array_equal(contains(acc.domain, pts), contains(region_union(*fovs), pts))


def test_zero_factor_kills_exclusive_intensity():
    # Form-I shape: b is zero on a's exclusive area, so the geometric mean is zero there
    FA = rect(0, 600, 0, 500)
    a = mixture_post(1.0, [[200, 250, 0, 0]])
    b = restrict(mixture_post(1.0, [[550, 250, 0, 0]]), rect(500, 1100, 0, 500),
                 np.random.default_rng(0))
    f = standard_gci(a, b, HALF)
    x = sample_points((0, 499, 0, 500))
    assert np.all(poisson_intensity(f, x) == 0.0)


def _form1_pair(eps):
    # each agent is sure of the object in its own exclusive area and holds ε at
    # the other agent's object, which lies outside its FoV
    P = np.diag([400.0, 400.0, 25.0, 25.0])
    comps = np.array([[150.0, 250.0, 0, 0], [950.0, 250.0, 0, 0]])
    covs = np.stack([P, P])
    a = PoissonPosterior(1 + eps, GaussianMixture([1 / (1 + eps), eps / (1 + eps)], comps, covs))
    b = PoissonPosterior(1 + eps, GaussianMixture([eps / (1 + eps), 1 / (1 + eps)], comps, covs))
    return a, b


def test_standard_gci_count_outside_common_region_vanishes():
    outside = region_union(rect(0, 400, 0, 500), rect(700, 1100, 0, 500))
    counts = []
    for eps in (1e-3, 1e-4, 1e-6):
        a, b = _form1_pair(eps)
        f = standard_gci(a, b, HALF)
        counts.append(expected_count(f, outside, np.random.default_rng(0)))
        # two objects, each kept with about sqrt(ε)
        assert counts[-1] < 10 * eps ** 0.5
    assert np.all(np.diff(counts) < 0)


def test_bird_keeps_exclusive_objects():
    FA, FB = rect(0, 700, 0, 500), rect(400, 1100, 0, 500)
    a, b = _form1_pair(1e-4)
    g, _ = bird_fuse_pair(restrict(a, FA, np.random.default_rng(0)), FA,
                          restrict(b, FB, np.random.default_rng(0)), FB, HALF,
                          np.random.default_rng(0))
    assert g.lam == pytest.approx(2.0, abs=1e-2)
