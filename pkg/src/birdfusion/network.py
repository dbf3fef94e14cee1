"""Directed sensor network and synchronous consensus rounds of BIRD fusion."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .fusion import bird_fuse_pair, sequential_bird
from .gm import GMParams
from .poisson import DEFAULT_SAMPLES


@dataclass(frozen=True)
class NetworkGraph:
    """Edges (i, j) mean j receives from i. Self-loops are always present."""

    node_ids: tuple
    edges: frozenset

    def __init__(self, node_ids, edges=()):
        nodes = tuple(sorted(node_ids))
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        known = set(nodes)
        e = set()
        for i, j in edges:
            if i not in known or j not in known:
                raise KeyError(f"edge ({i}, {j}) names an unknown node")
            e.add((i, j))
        e.update((n, n) for n in nodes)
        object.__setattr__(self, "node_ids", nodes)
        object.__setattr__(self, "edges", frozenset(e))

    @classmethod
    def undirected(cls, node_ids, pairs):
        return cls(node_ids, [(i, j) for i, j in pairs] + [(j, i) for i, j in pairs])

    @classmethod
    def ring(cls, n, directed=True):
        nodes = list(range(1, n + 1))
        pairs = [(k, k % n + 1) for k in nodes]
        return cls(nodes, pairs) if directed else cls.undirected(nodes, pairs)

    @classmethod
    def fully_connected(cls, n):
        nodes = list(range(1, n + 1))
        return cls(nodes, [(i, j) for i in nodes for j in nodes])

    def in_neighbors(self, j):
        if j not in self.node_ids:
            raise KeyError(f"unknown node {j}")
        return sorted(i for i, k in self.edges if k == j)

    def out_neighbors(self, i):
        return sorted(k for j, k in self.edges if j == i)

    def distances_from(self, source):
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self.out_neighbors(u):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def diameter(self):
        """Longest shortest directed path; inf if some node is unreachable."""
        worst = 0
        for s in self.node_ids:
            d = self.distances_from(s)
            if len(d) < len(self.node_ids):
                return float("inf")
            worst = max(worst, max(d.values()))
        return worst


def _node_rng(rng, k):
    if rng is None:
        return None
    return rng.spawn(k)


def consensus_round(states, g, weight_schedule="running", rng=None, samples=DEFAULT_SAMPLES,
                    params=GMParams(), pair=bird_fuse_pair):
    """One synchronous round: every node folds its in-neighbours' states.

    ``states`` maps node id -> (posterior, fov). All reads use the states
    passed in; the returned dict holds the new states.
    """
    rngs = _node_rng(rng, len(g.node_ids))
    new = {}
    for k, node in enumerate(g.node_ids):
        items = [states[i] for i in g.in_neighbors(node)]
        r = None if rngs is None else rngs[k]
        new[node] = sequential_bird(items, weight_schedule, r, samples, params, pair=pair)
    return new


def run_consensus(states, g, rounds, weight_schedule="running", rng=None,
                  samples=DEFAULT_SAMPLES, params=GMParams(), pair=bird_fuse_pair):
    if rounds < 0:
        raise ValueError("number of rounds must be nonnegative")
    out = dict(states)
    for _ in range(rounds):
        out = consensus_round(out, g, weight_schedule, rng, samples, params, pair)
    return out


def reachable_union(g, node, rounds):
    """Nodes whose information reaches ``node`` within ``rounds`` hops."""
    return sorted(i for i in g.node_ids if g.distances_from(i).get(node, np.inf) <= rounds)
