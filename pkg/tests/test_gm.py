import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from birdfusion.gm import (GaussianComponent, GaussianMixture, GMParams, NumericError, concat,
                           gm_evaluate, gm_prune_merge, merge_moments, safe_cholesky)


def random_mixture(rng, n, spread=10.0):
    A = rng.normal(size=(n, 4, 4))
    covs = A @ np.swapaxes(A, 1, 2) + 0.5 * np.eye(4)
    return GaussianMixture(rng.uniform(0.01, 1.0, n), rng.normal(0, spread, (n, 4)), covs)


def test_peak_value():
    g = GaussianMixture([1.0], np.zeros((1, 4)), np.eye(4)[None])
    assert gm_evaluate(g, np.zeros(4)) == pytest.approx((2 * np.pi) ** -2, rel=1e-12)


def test_empty_mixture_evaluates_to_zero():
    assert gm_evaluate(GaussianMixture.empty(), np.ones(4)) == 0.0


def test_split_component_evaluates_like_whole():
    one = GaussianMixture([1.0], np.zeros((1, 4)), np.eye(4)[None])
    two = GaussianMixture([0.5, 0.5], np.zeros((2, 4)), np.stack([np.eye(4)] * 2))
    x = np.array([0.3, -1.0, 2.0, 0.1])
    assert gm_evaluate(two, x) == pytest.approx(gm_evaluate(one, x), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_evaluate_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    g = random_mixture(rng, 3, spread=1.0)
    x = rng.normal(size=(5, 4))
    ref = sum(w * multivariate_normal(m, P).pdf(x) for w, m, P in zip(g.weights, g.means, g.covs))
    got = gm_evaluate(g, x)
    assert np.all(got >= 0)
    assert np.allclose(got, ref, rtol=1e-9, atol=1e-300)


def test_identical_components_merge():
    P = np.eye(4) * 2
    g = GaussianMixture([0.3, 0.3], np.ones((2, 4)), np.stack([P, P]))
    out = gm_prune_merge(g, 1e-4, 4.0, 150)
    assert len(out) == 1
    assert out.weights[0] == pytest.approx(0.6)
    assert np.allclose(out.means[0], 1.0) and np.allclose(out.covs[0], P)


def test_truncation_drops_small_weight():
    g = GaussianMixture([0.5, 1e-6], np.array([[0.0] * 4, [100.0] * 4]), np.stack([np.eye(4)] * 2))
    assert len(gm_prune_merge(g, 1e-4, 4.0, 150)) == 1


def test_cap_keeps_heaviest():
    n = 200
    means = np.zeros((n, 4))
    means[:, 0] = np.arange(n) * 1000.0
    w = np.linspace(0.01, 1.0, n)
    g = GaussianMixture(w, means, np.stack([np.eye(4)] * n))
    out = gm_prune_merge(g, 0.0, 4.0, 150)
    assert len(out) == 150
    assert np.allclose(np.sort(out.weights), np.sort(w)[-150:])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_merge_only_preserves_weight_and_moments(seed, n):
    rng = np.random.default_rng(seed)
    g = random_mixture(rng, n, spread=1.0)
    out = gm_prune_merge(g, 0.0, 1e6, 1000)  # everything merges
    assert len(out) == 1
    assert out.total_weight == pytest.approx(g.total_weight, abs=1e-12)
    W = g.weights.sum()
    mu = g.weights @ g.means / W
    second = (np.einsum("n,nij->ij", g.weights, g.covs)
              + np.einsum("n,ni,nj->ij", g.weights, g.means, g.means)) / W
    assert np.allclose(out.means[0], mu, rtol=1e-9, atol=1e-12)
    got = out.covs[0] + np.outer(out.means[0], out.means[0])
    assert np.allclose(got, second, rtol=1e-9, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 20), st.floats(0.5, 50.0))
def test_merging_never_changes_total_weight(seed, n, thr):
    g = random_mixture(np.random.default_rng(seed), n)
    out = gm_prune_merge(g, 0.0, thr, 1000)
    assert out.total_weight == pytest.approx(g.total_weight, abs=1e-12)
    assert len(out) <= n


def test_merge_moments_of_two():
    w, mu, P = merge_moments(np.array([1.0, 1.0]), np.array([[-1.0, 0], [1.0, 0]]),
                             np.stack([np.eye(2)] * 2))
    assert w == 2.0
    assert np.allclose(mu, 0) and np.allclose(P, np.diag([2.0, 1.0]))


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        gm_prune_merge(GaussianMixture.empty(), -1.0, 4.0, 10)


def test_cholesky_jitter_and_failure():
    P = np.diag([1.0, 1.0, 1.0, 0.0])  # singular, jitter rescues
    L = safe_cholesky(P)
    assert np.all(np.isfinite(L))
    with pytest.raises(NumericError):
        safe_cholesky(np.diag([1.0, 1.0, 1.0, -1.0]))


def test_constructors():
    with pytest.raises(ValueError):
        GaussianMixture([-0.1], np.zeros((1, 4)), np.eye(4)[None])
    with pytest.raises(ValueError):
        GaussianComponent(-1.0, np.zeros(4), np.eye(4))
    c = GaussianComponent(0.5, np.zeros(4), np.eye(4))
    g = GaussianMixture.from_components([c, c])
    assert len(g) == 2 and g.total_weight == 1.0 and g.is_normalized()
    assert len(concat(g, GaussianMixture.empty(), g)) == 4
    assert len(g.components) == 2
    with pytest.raises(ValueError):
        GMParams(normalizer="other")
