"""Read ``ospa.csv`` back and score the M1/M2/M3 ordering properties."""
from __future__ import annotations

import csv

import numpy as np

from .geometry import contains
from .sim import generate_truth


def read_ospa_csv(path):
    """{mode: {"nodes", "ospa" (nodes, steps), "card" (nodes, steps), "card_true" (steps,)}}."""
    rows = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(r["mode"], []).append(r)
    out = {}
    for mode, rs in rows.items():
        nodes = sorted({int(r["node"]) for r in rs})
        steps = max(int(r["step"]) for r in rs) + 1
        ospa = np.full((len(nodes), steps), np.nan)
        card = np.full((len(nodes), steps), np.nan)
        true = np.zeros(steps)
        for r in rs:
            i, k = nodes.index(int(r["node"])), int(r["step"])
            ospa[i, k] = _num(r["ospa_total"])
            card[i, k] = _num(r["card_est_mean"])
            true[k] = float(r["card_true"])
        out[mode] = {"nodes": nodes, "ospa": ospa, "card": card, "card_true": true}
    return out


def _num(s):
    return float.fromhex(s) if s.startswith(("0x", "-0x")) else float(s)


def nodes_missing_objects(cfg):
    """Nodes whose FoV misses at least one live object at some step."""
    truth, _ = generate_truth(cfg)
    out = []
    for n, fov in sorted(cfg.fovs.items()):
        if any(len(t) and not contains(fov, t[:, :2]).all() for t in truth):
            out.append(n)
    return out


def ordering_checks(data, cfg, start=None, m1_margin=0.25, gap=0.20, card_tol=0.5):
    """The three desk-run properties; returns {name: (passed, detail)}.

    Steady state is steps >= ``start``. Cardinality tracking uses the mean
    absolute deviation of the trial-averaged extracted count from the truth
    over steady-state steps.
    """
    start = cfg.steady_start if start is None else start
    s = {m: d["ospa"][:, start:].mean(axis=1) for m, d in data.items()}
    m1, m2, m3 = s["m1"], s["m2"], s["m3"]
    nodes = data["m1"]["nodes"]
    blind = [nodes.index(n) for n in nodes_missing_objects(cfg)]
    order = bool(np.all(m3 <= m2) and np.all(m2 <= m1))
    margin = bool(np.all(m1[blind] >= (1 + m1_margin) * m2[blind]))
    rel = np.abs(m2 - m3) / m3
    res = {
        "ordering": (order and margin,
                     f"M1 {np.round(m1, 2).tolist()} M2 {np.round(m2, 2).tolist()} "
                     f"M3 {np.round(m3, 2).tolist()}; M1/M2 on nodes missing objects "
                     f"{np.round(m1[blind] / m2[blind], 2).tolist()}"),
        "gap": (bool(np.all(rel <= gap)), f"|M2-M3|/M3 max {rel.max():.3f}"),
    }
    dev = {m: np.abs(d["card"][:, start:] - d["card_true"][start:]) for m, d in data.items()}
    fused = max(dev["m2"].mean(axis=1).max(), dev["m3"].mean(axis=1).max())
    m1_worst = dev["m1"].max()
    res["cardinality"] = (bool(fused <= card_tol and m1_worst >= 1.0),
                          f"M2/M3 mean |card error| max {fused:.3f}; "
                          f"M1 worst step error {m1_worst:.2f}")
    return res
