"""Local GM-PHD filtering with FoV-dependent survival and detection.

Filtering runs on plain intensity mixtures (weights are expected counts).
The ``phd_*`` wrappers accept and return ``PoissonPosterior`` values and
convert at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ALL, contains, region_volume
from .gm import GaussianMixture, GMParams, concat, gm_prune_merge, safe_cholesky, symmetrize
from .poisson import DEFAULT_SAMPLES, PoissonPosterior, restrict, to_intensity


@dataclass(frozen=True, eq=False)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    dt: float = 1.0

    @classmethod
    def constant_velocity(cls, dt=1.0, sigma_w=5.0):
        """Nearly constant velocity model.

        The off-diagonal block uses dt^3/3, which reproduces the published
        matrix [[1/4, 1/3], [1/3, 1]] sigma_w^2 at dt = 1.
        """
        I2 = np.eye(2)
        Z2 = np.zeros((2, 2))
        F = np.block([[I2, dt * I2], [Z2, I2]])
        Q = sigma_w ** 2 * np.block([[dt ** 4 / 4 * I2, dt ** 3 / 3 * I2],
                                     [dt ** 3 / 3 * I2, dt ** 2 * I2]])
        return cls(F, Q, dt)


@dataclass(frozen=True, eq=False)
class SensorModel:
    fov: object
    H: np.ndarray = field(default_factory=lambda: np.hstack([np.eye(2), np.zeros((2, 2))]))
    R: np.ndarray = field(default_factory=lambda: 100.0 * np.eye(2))
    detect_inside: float = 0.98
    detect_outside: float = 0.98
    clutter_rate: float = 10.0
    clutter_region: object = None

    def __post_init__(self):
        for p in (self.detect_inside, self.detect_outside):
            if not 0.0 <= p <= 1.0:
                raise ValueError("detection probabilities must lie in [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter rate must be nonnegative")
        if self.clutter_region is None:
            object.__setattr__(self, "clutter_region", self.fov)

    def detection(self, positions):
        return np.where(contains(self.fov, positions), self.detect_inside, self.detect_outside)

    def clutter_density(self, z):
        if self.clutter_rate == 0:
            return np.zeros(len(z))
        area = _area(self.clutter_region)
        return np.where(contains(self.clutter_region, z), self.clutter_rate / area, 0.0)


_AREAS = {}


def _area(region):
    a = _AREAS.get(region)
    if a is None:
        a = region_volume(region, None, 200_000, np.random.default_rng(0))[0]
        _AREAS[region] = a
    return a


@dataclass(frozen=True, eq=False)
class SurvivalProfile:
    inside: float = 0.98
    outside: float = 0.98
    region: object = ALL

    def __post_init__(self):
        if not (0.0 <= self.inside <= 1.0 and 0.0 <= self.outside <= 1.0):
            raise ValueError("survival probabilities must lie in [0, 1]")

    def at(self, positions):
        return np.where(contains(self.region, positions), self.inside, self.outside)


@dataclass(frozen=True)
class BirthParams:
    weight: float = 0.05
    position_var: float = 100.0
    velocity_std: float = 10.0


def predict_intensity(intensity, motion, survival, birth=None):
    if len(intensity):
        m = intensity.means @ motion.F.T
        P = symmetrize(motion.F @ intensity.covs @ motion.F.T + motion.Q)
        w = intensity.weights * survival.at(m[:, :2])
        pred = GaussianMixture(w, m, P)
    else:
        pred = intensity
    return concat(pred, birth) if birth is not None else pred


def update_intensity(prior, measurements, sensor, params=GMParams()):
    """GM-PHD corrector followed by truncation, merging and capping."""
    if len(prior) == 0:
        return prior
    z = np.asarray(measurements, dtype=float).reshape(-1, 2)
    pd = sensor.detection(prior.means[:, :2])
    missed = prior.with_weights(prior.weights * (1.0 - pd))
    if z.shape[0] == 0 or not np.any(pd > 0):
        out = missed
    else:
        H, R = sensor.H, sensor.R
        S = symmetrize(H @ prior.covs @ H.T + R)
        L = safe_cholesky(S)
        Sinv = np.linalg.inv(S)
        K = prior.covs @ H.T @ Sinv
        Pu = symmetrize((np.eye(prior.means.shape[1]) - K @ H) @ prior.covs)
        eta = prior.means @ H.T
        diff = z[:, None, :] - eta[None, :, :]  # (nz, n, 2)
        sol = np.linalg.solve(L[None], diff[..., None])[..., 0]
        logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
        lik = np.exp(-0.5 * (np.sum(sol ** 2, -1) + logdet[None] + 2 * np.log(2 * np.pi)))
        num = (prior.weights * pd)[None, :] * lik
        den = sensor.clutter_density(z) + num.sum(axis=1)
        w = np.where(den[:, None] > 0, num / np.where(den > 0, den, 1.0)[:, None], 0.0)
        m = prior.means[None] + np.einsum("nij,znj->zni", K, diff)
        n, nz = len(prior), z.shape[0]
        det = GaussianMixture(w.reshape(-1), m.reshape(nz * n, -1),
                              np.broadcast_to(Pu, (nz, *Pu.shape)).reshape(nz * n, *Pu.shape[1:]))
        out = concat(missed, det)
    return gm_prune_merge(out, params.truncation, params.merge, params.max_components)


def phd_predict(post, motion, survival, birth=None):
    birth_i = None if birth is None else to_intensity(birth)
    pred = predict_intensity(to_intensity(post), motion, survival, birth_i)
    return _as_posterior(pred)


def phd_update(prior, measurements, sensor, params=GMParams()):
    return _as_posterior(update_intensity(to_intensity(prior), measurements, sensor, params))


def _as_posterior(intensity):
    lam = intensity.total_weight
    if lam <= 0:
        return PoissonPosterior.empty()
    return PoissonPosterior(lam, intensity.with_weights(intensity.weights / lam))


def adaptive_birth(measurements, params=BirthParams()):
    """Birth posterior with one zero-velocity component per measurement."""
    return _as_posterior(birth_intensity(measurements, params))


def birth_intensity(measurements, params=BirthParams()):
    z = np.asarray(measurements, dtype=float).reshape(-1, 2)
    n = z.shape[0]
    if n == 0:
        return GaussianMixture.empty()
    means = np.hstack([z, np.zeros((n, 2))])
    cov = np.diag([params.position_var] * 2 + [params.velocity_std ** 2] * 2)
    return GaussianMixture(np.full(n, params.weight), means, np.broadcast_to(cov, (n, 4, 4)))


def marginalize_to_fov(post, fov, rng=None, samples=DEFAULT_SAMPLES):
    return restrict(post, fov, rng, samples)


def extract_estimates(post_or_intensity, min_weight=0.5):
    """Means of the round(lam) heaviest components with expected count > ``min_weight``."""
    if isinstance(post_or_intensity, PoissonPosterior):
        mix = to_intensity(post_or_intensity)
    else:
        mix = post_or_intensity
    if len(mix) == 0:
        return np.zeros((0, 4))
    n = min(int(np.round(mix.total_weight)), len(mix))
    order = np.argsort(-mix.weights, kind="stable")[:n]
    order = order[mix.weights[order] > min_weight]
    return mix.means[order].copy()
