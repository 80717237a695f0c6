"""Weighted scale-free exchange network and subsystem carving.

Preferential attachment (repeated-node list, so attachment probability is
proportional to current degree); link weights start at zero and accumulate
currency from exchanges, so node strength realizes the sum of the weights of
an agent's economic connections.  Networks are undirected with no self-loops
and are structurally frozen after generation — only weights change.
"""

import os
import tempfile
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import ParameterError, StateError


@dataclass
class WeightedNetwork:
    """Edge-list representation: edge k joins eu[k] < ev[k] with weight w[k]."""
    eu: np.ndarray
    ev: np.ndarray
    weights: np.ndarray
    n_nodes: int

    @property
    def n_edges(self):
        return len(self.eu)

    def adjacency(self):
        """Per-node list of (neighbor, edge index)."""
        adj = [[] for _ in range(self.n_nodes)]
        for k, (a, b) in enumerate(zip(self.eu, self.ev)):
            adj[a].append((b, k))
            adj[b].append((a, k))
        return adj

    def degrees(self):
        d = np.zeros(self.n_nodes, dtype=np.int64)
        np.add.at(d, self.eu, 1)
        np.add.at(d, self.ev, 1)
        return d

    def strengths(self):
        s = np.zeros(self.n_nodes)
        np.add.at(s, self.eu, self.weights)
        np.add.at(s, self.ev, self.weights)
        return s

    def export_edgelist(self, path):
        """One line per edge: `i j weight`, 0-based ids, full double precision."""
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)))
        try:
            with os.fdopen(fd, "w") as fh:
                for a, b, w in zip(self.eu, self.ev, self.weights):
                    fh.write(f"{a} {b} {float(w)!r}\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class Selection(Enum):
    RANDOM_FRACTION = "RandomFraction"
    BREADTH_FIRST_BALL = "BreadthFirstBall"


@dataclass
class SubsystemSpec:
    selection: Selection
    fraction: float
    member_ids: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not (0.0 < self.fraction < 1.0):
            raise ParameterError(f"fraction must be in (0,1), got {self.fraction}")


def generate_scale_free(n, m, seed):
    """Preferential-attachment graph: seed clique K_{m+1}, then each newcomer
    attaches to m distinct existing nodes with probability ~ degree."""
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if n <= m:
        raise ParameterError(f"need n >= m+1, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    src, dst, targets = [], [], []
    for u in range(m + 1):
        for v in range(u + 1, m + 1):
            src.append(u)
            dst.append(v)
            targets += [u, v]
    for u in range(m + 1, n):
        chosen = set()
        while len(chosen) < m:
            chosen.add(targets[rng.integers(len(targets))])
        for v in sorted(chosen):
            src.append(v)
            dst.append(u)
            targets += [u, v]
    eu = np.array(src, dtype=np.int64)
    ev = np.array(dst, dtype=np.int64)
    return WeightedNetwork(eu=eu, ev=ev, weights=np.zeros(len(eu)), n_nodes=n)


def carve_subsystem(network, spec, seed):
    """Pick the government subsystem S: either a uniform sample of nodes or a
    breadth-first ball grown from a random root (a contiguous perimeter)."""
    rng = np.random.default_rng(seed)
    n = network.n_nodes
    k = int(np.ceil(spec.fraction * n))
    k = max(1, min(k, n - 1))  # never empty, never the whole system
    if spec.selection is Selection.RANDOM_FRACTION:
        members = rng.choice(n, size=k, replace=False)
        return set(int(i) for i in members)
    if spec.selection is Selection.BREADTH_FIRST_BALL:
        adj = network.adjacency()
        root = int(rng.integers(n))
        seen = {root}
        order = [root]
        q = deque([root])
        while q and len(order) < k:
            u = q.popleft()
            for v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    order.append(v)
                    q.append(v)
                    if len(order) >= k:
                        break
        if len(order) < k:
            raise StateError(
                f"component exhausted at {len(order)} nodes, wanted {k}")
        return set(order[:k])
    raise ParameterError(f"unknown selection {spec.selection}")
