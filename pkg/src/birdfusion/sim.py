"""Scenario definition, truth and measurement synthesis, and M1/M2/M3 runs.

Modes: M1 stand-alone filtering, M2 consensus fusion with L rounds, M3
sequential fusion at a centre with feedback to every node. Forms describe
what a local filter believes outside its FoV: I (detection assumed
everywhere), II (no detection outside, pure prediction), III (Form-I
filtering, marginalized to the FoV before BIRD fusion).

Random streams are keyed by (trial, node, step, purpose) under one master
seed, so measurements are identical across modes and forms.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .fusion import bird_fuse_pair, gci_pair, sequential_bird
from .geometry import ALL, StepCache, contains, disc, rect, region_bounds, region_union
from .gm import GMParams, concat, gm_prune_merge
from .metrics import ospa
from .network import NetworkGraph, run_consensus
from .phd import (BirthParams, MotionModel, SensorModel, SurvivalProfile, birth_intensity,
                  extract_estimates, predict_intensity, update_intensity)
from .poisson import PoissonPosterior, restrict, to_intensity

MODES = ("m1", "m2", "m3")
FORMS = (1, 2, 3)

# purposes in the stream key
_MEAS, _FUSE, _TRUTH = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrackSpec:
    birth: int
    death: int
    x0: tuple

    def __post_init__(self):
        if self.death <= self.birth:
            raise ConfigError(f"track death {self.death} must follow birth {self.birth}")
        if len(self.x0) != 4:
            raise ConfigError("initial state must have 4 entries")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    fovs: dict                    # node id -> Region
    edges: tuple                  # (i, j): j receives from i
    tracks: tuple
    bounding_box: tuple = (0.0, 2000.0, 0.0, 2000.0)
    duration: int = 100
    dt: float = 1.0
    sigma_w: float = 5.0
    truth_sigma_w: float = 0.0
    sigma_v: float = 10.0
    p_s: float = 0.98
    p_d: float = 0.98
    clutter_rate: float = 10.0
    consensus_steps: int = 3
    samples: int = 1000
    gm: GMParams = field(default_factory=lambda: GMParams(refit=3))
    birth: BirthParams = field(default_factory=BirthParams)
    ospa_c: float = 100.0
    ospa_p: float = 2.0
    steady_start: int = 10
    m3_feedback: bool = True
    extract_threshold: float = 0.5

    def __post_init__(self):
        if not self.fovs:
            raise ConfigError("scenario needs at least one sensor")
        x0, x1, y0, y1 = self.bounding_box
        for node, fov in self.fovs.items():
            b = region_bounds(fov)
            if b[0] < x0 or b[1] > x1 or b[2] < y0 or b[3] > y1:
                raise ConfigError(f"fov of node {node} leaves the bounding box")
        if self.duration < 1:
            raise ConfigError("duration must be at least one step")

    @property
    def nodes(self):
        return tuple(sorted(self.fovs))

    def graph(self):
        return NetworkGraph.undirected(self.nodes, self.edges)

    def motion(self):
        return MotionModel.constant_velocity(self.dt, self.sigma_w)

    def global_fov(self):
        return region_union(*self.fovs.values())


def paper_fig6():
    """Five-sensor, six-object reconstruction of the published layout.

    FoV geometry and track waypoints were not published; these are a
    declared reconstruction that honors the listed birth and death times.
    """
    fovs = {
        1: rect(0, 1000, 0, 1000),
        2: rect(800, 2000, 0, 1000),
        3: rect(0, 1000, 800, 2000),
        4: rect(800, 2000, 800, 2000),
        5: disc((1000, 1000), 500),
    }
    edges = ((1, 2), (2, 4), (4, 3), (3, 1), (5, 2), (5, 3))
    tracks = (
        TrackSpec(0, 58, (200.0, 400.0, 12.0, 8.0)),
        TrackSpec(0, 50, (1800.0, 300.0, -12.0, 6.0)),
        TrackSpec(15, 70, (300.0, 1700.0, 10.0, -8.0)),
        TrackSpec(15, 70, (1700.0, 1800.0, -9.0, -12.0)),
        TrackSpec(33, 85, (1000.0, 200.0, 3.0, 14.0)),
        TrackSpec(43, 100, (300.0, 1000.0, 14.0, 2.0)),
    )
    return ScenarioConfig("paper-fig6", fovs, edges, tracks)


def two_agent():
    """Two overlapping sensors and one object crossing both FoVs."""
    fovs = {1: rect(0, 1200, 0, 1000), 2: rect(800, 2000, 0, 1000)}
    tracks = (TrackSpec(0, 100, (100.0, 500.0, 18.0, 0.0)),)
    return ScenarioConfig("two-agent", fovs, ((1, 2),), tracks,
                          bounding_box=(0.0, 2000.0, 0.0, 1000.0))


BUILTIN = {"paper-fig6": paper_fig6, "two-agent": two_agent}


def stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


# ------------------------------------------------------------------ truth

def alive(track, k, duration):
    return track.birth <= k <= min(track.death, duration - 1)


def generate_truth(cfg, rng=None):
    """Per-step arrays of true states, shape (n_alive, 4), and track ids."""
    F = cfg.motion().F
    Q = MotionModel.constant_velocity(cfg.dt, cfg.truth_sigma_w).Q
    states, ids = [[] for _ in range(cfg.duration)], [[] for _ in range(cfg.duration)]
    for n, t in enumerate(cfg.tracks):
        x = np.asarray(t.x0, dtype=float)
        for k in range(t.birth, min(t.death, cfg.duration - 1) + 1):
            if k > t.birth:
                x = F @ x
                if cfg.truth_sigma_w > 0:
                    x = x + rng.multivariate_normal(np.zeros(4), Q)
            states[k].append(x.copy())
            ids[k].append(n)
    return [np.array(s).reshape(-1, 4) for s in states], [np.array(i, dtype=int) for i in ids]


def sample_uniform(region, n, bbox, rng):
    """Rejection sampling of ``n`` uniform points of ``region`` inside ``bbox``."""
    out = np.zeros((0, 2))
    lo = np.array([bbox[0], bbox[2]])
    hi = np.array([bbox[1], bbox[3]])
    while out.shape[0] < n:
        need = n - out.shape[0]
        pts = lo + (hi - lo) * rng.random((max(2 * need, 16), 2))
        out = np.vstack([out, pts[contains(region, pts)][:need]])
    return out


def generate_measurements(states, sensor, rng, bbox, sigma_v):
    """Detections of in-FoV objects plus Poisson clutter uniform on the FoV.

    Returns (measurements, origin) where origin is the truth index or -1.
    """
    states = np.asarray(states).reshape(-1, 4)
    inside = contains(sensor.fov, states[:, :2]) if len(states) else np.zeros(0, bool)
    hit = inside & (rng.random(len(states)) < sensor.detect_inside)
    det = states[hit, :2] + sigma_v * rng.standard_normal((int(hit.sum()), 2))
    n_c = rng.poisson(sensor.clutter_rate)
    clutter = sample_uniform(sensor.clutter_region, n_c, bbox, rng)
    z = np.vstack([det, clutter])
    origin = np.concatenate([np.flatnonzero(hit), -np.ones(n_c, dtype=int)])
    return z, origin


# --------------------------------------------------------------- filtering

def sensors_for(cfg, form):
    """(SensorModel, SurvivalProfile) per node for a given form."""
    out = {}
    R = cfg.sigma_v ** 2 * np.eye(2)
    for node, fov in cfg.fovs.items():
        outside = 0.0 if form == 2 else cfg.p_d
        s = SensorModel(fov=fov, R=R, detect_inside=cfg.p_d, detect_outside=outside,
                        clutter_rate=cfg.clutter_rate)
        out[node] = (s, SurvivalProfile(cfg.p_s, cfg.p_s, ALL))
    return out


def check_combination(mode, form, fusion):
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if form not in FORMS:
        raise ConfigError(f"unknown form {form!r}")
    if fusion not in ("bird", "gci"):
        raise ConfigError(f"unknown fusion {fusion!r}")
    if mode != "m1":
        if form == 3 and fusion != "bird":
            raise ConfigError("form 3 requires bird fusion")
        if form in (1, 2) and fusion != "gci":
            raise ConfigError(f"form {form} pairs with standard gci fusion")


@dataclass
class TrialResult:
    nodes: tuple
    truth: list
    estimates: dict               # node -> list of (n, 4) arrays
    ospa: np.ndarray              # (nodes, steps, 3)
    card: np.ndarray              # (nodes, steps) extracted counts
    lam: np.ndarray               # (nodes, steps) expected counts

    @property
    def card_true(self):
        return np.array([len(t) for t in self.truth])


def _to_posterior(intensity, domain, rng, samples):
    post = PoissonPosterior.from_intensity(intensity, ALL)
    if domain == ALL:
        return post
    return restrict(post, domain, rng, samples)


def _fuse_step(cfg, mode, form, pair, graph, intensity, rng):
    """Fuse the local intensities; returns the reported intensity per node.

    ``intensity`` is updated in place with the fed-back posteriors.
    """
    nodes = cfg.nodes
    fov_of = (lambda n: cfg.fovs[n]) if form == 3 else (lambda n: ALL)
    states = {n: (_to_posterior(intensity[n], fov_of(n), rng, cfg.samples), fov_of(n))
              for n in nodes}
    if mode == "m2":
        fused = run_consensus(states, graph, cfg.consensus_steps, "running", rng,
                              cfg.samples, cfg.gm, pair)
    else:
        post, fov = sequential_bird([states[n] for n in nodes], "running", rng,
                                    cfg.samples, cfg.gm, pair=pair)
        fused = {n: (post, fov) for n in nodes}
    reported = {}
    for n in nodes:
        post = fused[n][0]
        reported[n] = _flatten(post, cfg.gm)
        if mode == "m3" and not cfg.m3_feedback:
            continue
        if form == 3:
            post = restrict(post, cfg.fovs[n], rng, cfg.samples)
        intensity[n] = _flatten(post, cfg.gm)
    return reported


def _flatten(post, params):
    """Plain intensity of a fused posterior, with truncated pieces merged."""
    return gm_prune_merge(to_intensity(post), params.truncation, params.merge,
                          params.max_components)


def run_trial(cfg, mode, form, trial, seed, fusion=None):
    """One Monte Carlo trial; returns a ``TrialResult``."""
    fusion = fusion or ("bird" if form == 3 else "gci")
    check_combination(mode, form, fusion)
    nodes = cfg.nodes
    truth, _ = generate_truth(cfg, stream(seed, trial, 0, 0, _TRUTH))
    models = sensors_for(cfg, form)
    motion = cfg.motion()
    graph = cfg.graph()
    pair = bird_fuse_pair if fusion == "bird" else gci_pair
    steps = cfg.duration

    intensity = {n: None for n in nodes}
    last_z = {n: np.zeros((0, 2)) for n in nodes}
    est = {n: [] for n in nodes}
    card = np.zeros((len(nodes), steps))
    lam = np.zeros((len(nodes), steps))
    score = np.zeros((len(nodes), steps, 3))

    for k in range(steps):
        scans = {}
        for n in nodes:
            sensor, survival = models[n]
            z, _ = generate_measurements(truth[k], sensor, stream(seed, trial, n, k, _MEAS),
                                         cfg.bounding_box, cfg.sigma_v)
            scans[n] = z
            born = birth_intensity(last_z[n], cfg.birth)
            prior = born if intensity[n] is None else concat(intensity[n], born)
            pred = predict_intensity(prior, motion, survival)
            intensity[n] = update_intensity(pred, z, sensor, cfg.gm)
            last_z[n] = z

        if mode == "m1":
            reported = dict(intensity)
        else:
            with StepCache():
                reported = _fuse_step(cfg, mode, form, pair, graph, intensity,
                                      stream(seed, trial, 0, k, _FUSE))

        for i, n in enumerate(nodes):
            e = extract_estimates(reported[n], cfg.extract_threshold)
            est[n].append(e)
            card[i, k] = len(e)
            lam[i, k] = reported[n].total_weight
            score[i, k] = ospa(e, truth[k], cfg.ospa_c, cfg.ospa_p)
    return TrialResult(nodes, truth, est, score, card, lam)


# ---------------------------------------------------------------- batches

@dataclass
class Aggregate:
    mode: str
    form: int
    nodes: tuple
    ospa: np.ndarray              # (nodes, steps, 3), mean over trials
    card: np.ndarray              # (nodes, steps)
    lam: np.ndarray
    card_true: np.ndarray         # (steps,)
    runs: int
    trials: list = field(default_factory=list, repr=False)

    def steady_ospa(self, start):
        return self.ospa[:, start:, 0].mean(axis=1)


def _threads():
    try:
        return max(1, int(os.environ.get("BIRD_THREADS", "1")))
    except ValueError:
        return 1


def monte_carlo(cfg, mode, form, runs, seed, fusion=None, keep_trials=False, n_jobs=None):
    """Mean per-step, per-node metrics over ``runs`` independently seeded trials."""
    if runs < 1:
        raise ConfigError("runs must be at least 1")
    jobs = n_jobs or _threads()
    if jobs > 1:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=jobs)(delayed(run_trial)(cfg, mode, form, t, seed, fusion)
                                        for t in range(runs))
    else:
        results = [run_trial(cfg, mode, form, t, seed, fusion) for t in range(runs)]
    agg = Aggregate(mode, form, cfg.nodes,
                    np.mean([r.ospa for r in results], axis=0),
                    np.mean([r.card for r in results], axis=0),
                    np.mean([r.lam for r in results], axis=0),
                    results[0].card_true, runs)
    if keep_trials:
        agg.trials = results
    return agg


def population(cfg):
    """True object count per step from the birth/death intervals."""
    return np.array([sum(alive(t, k, cfg.duration) for t in cfg.tracks)
                     for k in range(cfg.duration)])


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
