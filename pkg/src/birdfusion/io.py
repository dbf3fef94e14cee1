"""Serialization: regions, posteriors (JSON and binary wire format), scenarios.

Binary posterior layout, all little-endian:

    magic b"BIRD", u16 version
    f64 lambda, region domain
    u32 n, then per component:
        f64 w, f64 mass, f64 mean[4], f64 cov[16] row-major, region support

A region is a u8 tag followed by its payload: rect 4 f64, disc 3 f64,
union/intersect u32 count and children, diff two children, all/empty none.
Composite regions are written as a union of atom intersections, so reading
them back rebuilds the same normal form.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from io import BytesIO

import numpy as np

from .geometry import (ALL, EMPTY, AllRegion, Boolean, Disc, EmptyRegion, Rect, disc, rect,
                       region_difference, region_intersect, region_union, to_tree)
from .gm import GaussianMixture, GMParams
from .phd import BirthParams
from .poisson import PoissonPosterior
from .sim import ConfigError, ScenarioConfig, TrackSpec

MAGIC = b"BIRD"
WIRE_VERSION = 1
SCENARIO_VERSION = 1

_TAGS = {"empty": 0, "all": 1, "rect": 2, "disc": 3, "union": 4, "intersect": 5, "diff": 6}
_NAMES = {v: k for k, v in _TAGS.items()}


class WireError(ValueError):
    """Malformed serialized data."""


# ---------------------------------------------------------------- regions

def region_to_obj(region):
    return _node_to_obj(to_tree(region))


def _node_to_obj(node):
    if isinstance(node, tuple):
        op, kids = node
        if op == "diff":
            return {"type": "diff", "a": _node_to_obj(kids[0]), "b": _node_to_obj(kids[1])}
        return {"type": op, "of": [_node_to_obj(k) for k in kids]}
    if isinstance(node, Rect):
        return {"type": "rect", "xmin": node.xmin, "xmax": node.xmax,
                "ymin": node.ymin, "ymax": node.ymax}
    if isinstance(node, Disc):
        return {"type": "disc", "center": [node.cx, node.cy], "radius": node.radius}
    if isinstance(node, AllRegion):
        return {"type": "all"}
    if isinstance(node, EmptyRegion):
        return {"type": "empty"}
    raise TypeError(f"cannot serialize {type(node).__name__}")


def region_from_obj(obj, where="region"):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ConfigError(f"{where}: expected an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "rect":
            return rect(*(float(obj[k]) for k in ("xmin", "xmax", "ymin", "ymax")))
        if kind == "disc":
            cx, cy = obj["center"]
            return disc((float(cx), float(cy)), float(obj["radius"]))
        if kind == "all":
            return ALL
        if kind == "empty":
            return EMPTY
        if kind in ("union", "intersect"):
            kids = [region_from_obj(k, f"{where}.of[{i}]") for i, k in enumerate(obj["of"])]
            if not kids:
                return EMPTY if kind == "union" else ALL
            return (region_union if kind == "union" else region_intersect)(*kids)
        if kind == "diff":
            return region_difference(region_from_obj(obj["a"], f"{where}.a"),
                                     region_from_obj(obj["b"], f"{where}.b"))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: bad {kind} ({e})") from None
    raise ConfigError(f"{where}: unknown region type {kind!r}")


def _write_region(buf, node):
    if isinstance(node, tuple):
        op, kids = node
        buf.write(struct.pack("<B", _TAGS[op]))
        if op != "diff":
            buf.write(struct.pack("<I", len(kids)))
        for k in kids:
            _write_region(buf, k)
    elif isinstance(node, Rect):
        buf.write(struct.pack("<B4d", _TAGS["rect"], node.xmin, node.xmax, node.ymin, node.ymax))
    elif isinstance(node, Disc):
        buf.write(struct.pack("<B3d", _TAGS["disc"], node.cx, node.cy, node.radius))
    elif isinstance(node, AllRegion):
        buf.write(struct.pack("<B", _TAGS["all"]))
    elif isinstance(node, EmptyRegion):
        buf.write(struct.pack("<B", _TAGS["empty"]))
    else:
        raise TypeError(f"cannot serialize {type(node).__name__}")


def _read(buf, fmt):
    size = struct.calcsize(fmt)
    raw = buf.read(size)
    if len(raw) != size:
        raise WireError("truncated record")
    return struct.unpack(fmt, raw)


def _read_region(buf):
    (tag,) = _read(buf, "<B")
    kind = _NAMES.get(tag)
    if kind == "rect":
        return rect(*_read(buf, "<4d"))
    if kind == "disc":
        cx, cy, r = _read(buf, "<3d")
        return disc((cx, cy), r)
    if kind == "all":
        return ALL
    if kind == "empty":
        return EMPTY
    if kind == "diff":
        return region_difference(_read_region(buf), _read_region(buf))
    if kind in ("union", "intersect"):
        (n,) = _read(buf, "<I")
        kids = [_read_region(buf) for _ in range(n)]
        if kind == "union":
            return region_union(*kids) if kids else EMPTY
        return region_intersect(*kids) if kids else ALL
    raise WireError(f"unknown region tag {tag}")


# ---------------------------------------------------------------- posteriors

def posterior_to_bytes(post):
    buf = BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", WIRE_VERSION))
    buf.write(struct.pack("<d", post.lam))
    _write_region(buf, to_tree(post.domain))
    loc = post.location
    buf.write(struct.pack("<I", len(loc)))
    for j in range(len(loc)):
        buf.write(struct.pack("<2d", loc.weights[j], post.masses[j]))
        buf.write(np.ascontiguousarray(loc.means[j], dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(loc.covs[j], dtype="<f8").tobytes())
        _write_region(buf, to_tree(post.supports[j]))
    return buf.getvalue()


def posterior_from_bytes(data):
    buf = BytesIO(data)
    if buf.read(4) != MAGIC:
        raise WireError("not a posterior record (bad magic)")
    (version,) = _read(buf, "<H")
    if version != WIRE_VERSION:
        raise WireError(f"unsupported wire version {version}")
    (lam,) = _read(buf, "<d")
    domain = _read_region(buf)
    (n,) = _read(buf, "<I")
    w, c, means, covs, supports = [], [], [], [], []
    for _ in range(n):
        wj, cj = _read(buf, "<2d")
        w.append(wj)
        c.append(cj)
        means.append(np.frombuffer(buf.read(32), dtype="<f8"))
        covs.append(np.frombuffer(buf.read(128), dtype="<f8").reshape(4, 4))
        if means[-1].size != 4 or covs[-1].size != 16:
            raise WireError("truncated record")
        supports.append(_read_region(buf))
    if buf.read(1):
        raise WireError("trailing bytes after record")
    return _assemble(lam, domain, w, c, means, covs, supports)


def _assemble(lam, domain, w, c, means, covs, supports):
    n = len(w)
    loc = GaussianMixture(np.array(w, dtype=float).reshape(n),
                          np.array(means, dtype=float).reshape(n, 4),
                          np.array(covs, dtype=float).reshape(n, 4, 4))
    return PoissonPosterior(lam, loc, domain, tuple(supports), np.array(c, dtype=float))


def posterior_to_obj(post):
    loc = post.location
    return {
        "version": WIRE_VERSION,
        "lambda": post.lam,
        "domain": region_to_obj(post.domain),
        "components": [
            {"w": float(loc.weights[j]), "mass": float(post.masses[j]),
             "mean": loc.means[j].tolist(), "cov": loc.covs[j].reshape(-1).tolist(),
             "support": region_to_obj(post.supports[j])}
            for j in range(len(loc))
        ],
    }


def posterior_from_obj(obj):
    if obj.get("version") != WIRE_VERSION:
        raise WireError(f"unsupported wire version {obj.get('version')!r}")
    comps = obj["components"]
    return _assemble(
        float(obj["lambda"]), region_from_obj(obj["domain"], "domain"),
        [c["w"] for c in comps], [c.get("mass", 1.0) for c in comps],
        [c["mean"] for c in comps], [c["cov"] for c in comps],
        [region_from_obj(c.get("support", obj["domain"]), "support") for c in comps])


def posterior_to_json(post):
    return json.dumps(posterior_to_obj(post))


def posterior_from_json(text):
    return posterior_from_obj(json.loads(text))


# ---------------------------------------------------------------- scenarios

_SCALARS = {f.name: f for f in dataclasses.fields(ScenarioConfig)
            if f.name not in ("name", "fovs", "edges", "tracks", "gm", "birth", "bounding_box")}


def scenario_to_obj(cfg):
    out = {"version": SCENARIO_VERSION, "name": cfg.name,
           "fovs": {str(k): region_to_obj(v) for k, v in sorted(cfg.fovs.items())},
           "edges": [list(e) for e in cfg.edges],
           "tracks": [{"birth": t.birth, "death": t.death, "x0": list(t.x0)} for t in cfg.tracks],
           "bounding_box": list(cfg.bounding_box),
           "gm": dataclasses.asdict(cfg.gm), "birth": dataclasses.asdict(cfg.birth)}
    for name in _SCALARS:
        out[name] = getattr(cfg, name)
    return out


def _params(cls, obj, where):
    if obj is None:
        return cls()
    known = {f.name for f in dataclasses.fields(cls)}
    for k in obj:
        if k not in known:
            raise ConfigError(f"{where}.{k}: unknown field")
    return cls(**obj)


def scenario_from_obj(obj):
    if not isinstance(obj, dict):
        raise ConfigError("scenario: expected a JSON object")
    if obj.get("version") != SCENARIO_VERSION:
        raise ConfigError(f"version: expected {SCENARIO_VERSION}, got {obj.get('version')!r}")
    known = {"version", "name", "fovs", "edges", "tracks", "bounding_box", "gm", "birth", *_SCALARS}
    for k in obj:
        if k not in known:
            raise ConfigError(f"{k}: unknown field")
    for k in ("fovs", "tracks"):
        if k not in obj:
            raise ConfigError(f"{k}: missing")
    try:
        fovs = {int(k): region_from_obj(v, f"fovs.{k}") for k, v in obj["fovs"].items()}
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("fovs: node ids must be integers") from None
    edges = []
    for i, e in enumerate(obj.get("edges", [])):
        if len(e) != 2 or any(int(n) not in fovs for n in e):
            raise ConfigError(f"edges[{i}]: must join two declared nodes")
        edges.append((int(e[0]), int(e[1])))
    tracks = []
    for i, t in enumerate(obj["tracks"]):
        try:
            tracks.append(TrackSpec(int(t["birth"]), int(t["death"]),
                                    tuple(float(v) for v in t["x0"])))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"tracks[{i}]: {e}") from None
    kw = {}
    for name, f in _SCALARS.items():
        if name in obj:
            kind = type(f.default)
            val = obj[name]
            if kind is bool and not isinstance(val, bool):
                raise ConfigError(f"{name}: expected true or false")
            try:
                kw[name] = kind(val)
            except (TypeError, ValueError):
                raise ConfigError(f"{name}: expected {kind.__name__}") from None
            if kind is int and (isinstance(val, bool) or kw[name] != val):
                raise ConfigError(f"{name}: expected an integer")
    if "bounding_box" in obj:
        bb = obj["bounding_box"]
        if len(bb) != 4:
            raise ConfigError("bounding_box: expected [xmin, xmax, ymin, ymax]")
        kw["bounding_box"] = tuple(float(v) for v in bb)
    try:
        kw["gm"] = _params(GMParams, obj.get("gm"), "gm")
        kw["birth"] = _params(BirthParams, obj.get("birth"), "birth")
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    return ScenarioConfig(str(obj.get("name", "scenario")), fovs, tuple(edges), tuple(tracks), **kw)


def load_scenario(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return scenario_from_obj(obj)


def scenario_hash(cfg):
    import hashlib
    text = json.dumps(scenario_to_obj(cfg), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]
