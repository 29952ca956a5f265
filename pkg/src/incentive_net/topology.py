"""Undirected interaction graphs and their generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

TOPOLOGY_KINDS = ("ring", "star", "scale_free", "random", "empty", "circulant")


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """An undirected simple graph on agents ``0..n-1``.

    Edges are stored as a sorted tuple of pairs ``(i, j)`` with ``i < j``.
    Every undirected edge yields two directed arcs ``i->j`` and ``j->i``;
    per-arc arrays throughout the package follow the order of ``arcs``.
    """

    n: int
    edges: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"agent count must be >= 1, got {self.n}")
        clean = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise TopologyError(f"self-loop at agent {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise TopologyError(f"edge ({i}, {j}) outside 0..{self.n - 1}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(clean)))

    @classmethod
    def from_adjacency(cls, adj) -> "Topology":
        a = np.asarray(adj, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise TopologyError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise TopologyError("adjacency must be symmetric")
        if a.diagonal().any():
            raise TopologyError("adjacency has self-loops")
        iu, ju = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], tuple(zip(iu.tolist(), ju.tolist())))

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return tuple(tuple(sorted(x)) for x in nb)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(x) for x in self.neighbors], dtype=np.int64)

    @cached_property
    def arcs(self) -> np.ndarray:
        """Directed arcs as an ``(E, 2)`` array of (sender, receiver), sorted."""
        out = [(i, j) for i in range(self.n) for j in self.neighbors[i]]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    @property
    def n_arcs(self) -> int:
        return 2 * len(self.edges)

    @cached_property
    def arc_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): k for k, (i, j) in enumerate(self.arcs)}

    @cached_property
    def src(self) -> np.ndarray:
        return self.arcs[:, 0].copy()

    @cached_property
    def dst(self) -> np.ndarray:
        return self.arcs[:, 1].copy()

    @cached_property
    def inbound_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(ptr, arc_ids)``: arcs entering agent i are ``arc_ids[ptr[i]:ptr[i+1]]``,
        ordered by ascending sender id."""
        order = np.lexsort((self.src, self.dst))
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.dst, minlength=self.n), out=ptr[1:])
        return ptr, order.astype(np.int64)

    def inbound_arcs(self, i: int) -> np.ndarray:
        ptr, ids = self.inbound_csr
        return ids[ptr[i]:ptr[i + 1]]

    def outbound_arcs(self, i: int) -> np.ndarray:
        # arcs are sorted by sender, so outbound arcs are contiguous
        lo = np.searchsorted(self.src, i, side="left")
        hi = np.searchsorted(self.src, i, side="right")
        return np.arange(lo, hi, dtype=np.int64)

    def add_agent(self, links) -> "Topology":
        """Return a new topology with one extra agent joined to ``links``."""
        new = self.n
        return Topology(self.n + 1, self.edges + tuple((int(j), new) for j in links))

    def to_edge_list(self) -> str:
        lines = [f"n={self.n}"] + [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "Topology":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or not lines[0].startswith("n="):
            raise TopologyError("edge list must start with a header line 'n=<count>'")
        n = int(lines[0][2:])
        edges = []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 2:
                raise TopologyError(f"bad edge line: {ln!r}")
            edges.append((int(parts[0]), int(parts[1])))
        return cls(n, tuple(edges))

    @classmethod
    def read(cls, path) -> "Topology":
        return cls.from_edge_list(Path(path).read_text(encoding="utf-8"))

    def write(self, path) -> None:
        Path(path).write_text(self.to_edge_list(), encoding="utf-8")


def max_degree(t: Topology) -> int:
    return int(t.degrees.max()) if t.n > 0 and len(t.edges) else 0


def is_connected(t: Topology) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in t.neighbors[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == t.n


def _ring(n: int) -> list[tuple[int, int]]:
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def _circulant(n: int, k: int) -> list[tuple[int, int]]:
    if k < 1 or 2 * k >= n:
        raise TopologyError(f"circulant needs 1 <= k < n/2, got k={k}, n={n}")
    return [(i, (i + s) % n) for i in range(n) for s in range(1, k + 1)]


def _scale_free(n: int, exponent: float, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Preferential attachment with initial attractiveness.

    A newcomer attaches to ``m`` distinct agents chosen with probability
    proportional to ``degree + A``; the degree tail then decays with exponent
    ``3 + A/m``, so ``A = m * (exponent - 3)``.
    """
    if exponent <= 2.0:
        raise TopologyError("scale-free exponent must exceed 2")
    if m < 1:
        raise TopologyError("attachment count m must be >= 1")
    attract = attachment_shift(exponent, m)
    core = min(n, m + 1)
    edges = [(i, j) for i in range(core) for j in range(i + 1, core)]
    deg = np.zeros(n, dtype=np.float64)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    for v in range(core, n):
        w = deg[:v] + attract
        w = np.clip(w, 1e-12, None)
        picks = rng.choice(v, size=min(m, v), replace=False, p=w / w.sum())
        for u in sorted(int(x) for x in picks):
            edges.append((u, v))
            deg[u] += 1
            deg[v] += 1
    return edges


def gen_topology(kind: str, n: int, params: dict | None = None, seed: int = 0) -> Topology:
    """Build a topology of the given kind.

    ``scale_free`` reads ``exponent`` (the power-law parameter, > 2) and the
    optional attachment count ``m`` (default 2); ``random`` reads the link
    probability ``p``; ``circulant`` reads ``k`` neighbours per side.
    """
    params = dict(params or {})
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise TopologyError(f"agent count must be a positive integer, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    if kind == "ring":
        edges = _ring(n)
    elif kind == "star":
        edges = [(0, j) for j in range(1, n)]
    elif kind == "empty":
        edges = []
    elif kind == "circulant":
        edges = _circulant(n, int(params.get("k", 1)))
    elif kind == "random":
        p = float(params.get("p", 0.5))
        if not 0.0 <= p <= 1.0:
            raise TopologyError(f"link probability must be in [0, 1], got {p}")
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(iu.size) < p
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    elif kind == "scale_free":
        exponent = float(params.get("exponent", 3.0))
        edges = _scale_free(n, exponent, int(params.get("m", 2)), rng)
    else:
        raise TopologyError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    return Topology(n, tuple(edges))


def random_connected(n: int, p: float, rng: np.random.Generator, max_tries: int = 1000) -> Topology:
    """Rejection-sample a connected G(n, p) graph."""
    for _ in range(max_tries):
        t = gen_topology("random", n, {"p": p}, seed=int(rng.integers(2**63)))
        if is_connected(t):
            return t
    raise TopologyError("could not sample a connected graph")


def attachment_shift(exponent: float, m: int) -> float:
    """Initial attractiveness used by the scale-free generator."""
    return m * (exponent - 3.0)


def fit_power_law_exponent(degrees, k_min: int | None = None, shift: float = 0.0,
                           min_count: int = 10) -> float:
    """Estimate the tail exponent from a log-log fit of the degree CCDF.

    Preferential attachment with initial attractiveness ``A`` produces a
    degree law in ``k + A``; pass ``shift=A`` to fit in that variable.
    Points backed by fewer than ``min_count`` agents are dropped.
    """
    d = np.asarray(degrees, dtype=np.float64)
    d = d[d > 0]
    if k_min is None:
        k_min = int(d.min())
    d = d[d >= k_min]
    ks = np.unique(d)
    ccdf = np.array([(d >= k).mean() for k in ks])
    keep = ccdf * d.size >= min_count
    if keep.sum() < 2:
        raise ValueError("too few distinct degrees to fit a power law")
    slope, _ = np.polyfit(np.log(ks[keep] + shift), np.log(ccdf[keep]), 1)
    return 1.0 - slope
