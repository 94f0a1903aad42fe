"""Bipartite graph sampling and intersection-graph distances.

The intersection graph is never materialized: two vertices are adjacent
iff they share an object, so intersection distance is half the bipartite
distance and one alternating BFS per query suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import ModelParams, validate_params
from .seeding import derive_seed

INF = math.inf


def sample_subset(
    rng: np.random.Generator, size: int, universe: int, buf: np.ndarray | None = None
) -> np.ndarray:
    """Uniform `size`-subset of range(universe) by partial Fisher-Yates.

    `buf` may hold any permutation of range(universe) and is left
    permuted; passing it back in amortizes allocation without biasing
    the draw, since every step samples uniformly from the unchosen
    suffix.  This is the one audited subset primitive shared by the
    graph sampler and the coincidence Monte Carlo.
    """
    if buf is None:
        buf = np.arange(universe, dtype=np.int64)
    out = np.empty(size, dtype=np.int64)
    for t in range(size):
        r = int(rng.integers(t, universe))
        buf[t], buf[r] = buf[r], buf[t]
        out[t] = buf[t]
    return out


@dataclass
class BipartiteGraph:
    """Sampled vertex-object adjacency.

    Vertices and objects use global 0-based ids; `vertex_type_of` /
    `object_type_of` recover the per-type split.
    """

    params: ModelParams
    vertex_adj: list[np.ndarray]
    object_adj: list[np.ndarray]
    vertex_offsets: np.ndarray = field(repr=False)
    object_offsets: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_adj)

    @property
    def n_objects(self) -> int:
        return len(self.object_adj)

    def vertex_id(self, k: int, idx: int) -> int:
        return int(self.vertex_offsets[k]) + idx

    def vertex_type_of(self, v: int) -> int:
        return int(np.searchsorted(self.vertex_offsets, v, side="right")) - 1

    def object_type_of(self, o: int) -> int:
        return int(np.searchsorted(self.object_offsets, o, side="right")) - 1

    def edge_count(self) -> int:
        return sum(len(a) for a in self.vertex_adj)


@dataclass
class DistanceLaw:
    """Defective distance distribution: finite histogram plus mass at
    infinity."""

    counts: dict[int, int]
    infinite_count: int
    total: int

    def __post_init__(self):
        if sum(self.counts.values()) + self.infinite_count != self.total:
            raise ValidationError("distance law counts do not sum to total")

    def prob_greater(self, d: int) -> float:
        """P[D > d], counting infinite distances."""
        finite = sum(c for dd, c in self.counts.items() if dd > d)
        return (finite + self.infinite_count) / self.total

    def prob_infinite(self) -> float:
        return self.infinite_count / self.total

    @classmethod
    def from_samples(cls, samples) -> "DistanceLaw":
        counts: dict[int, int] = {}
        inf_count = 0
        for d in samples:
            if d == INF:
                inf_count += 1
            else:
                counts[int(d)] = counts.get(int(d), 0) + 1
        return cls(counts=counts, infinite_count=inf_count, total=len(samples))

    def to_rows(self) -> list[tuple[str, int]]:
        rows = [(str(d), c) for d, c in sorted(self.counts.items())]
        rows.append(("inf", self.infinite_count))
        return rows

    @classmethod
    def from_rows(cls, rows) -> "DistanceLaw":
        counts: dict[int, int] = {}
        inf_count = 0
        for d, c in rows:
            if str(d) == "inf":
                inf_count += int(c)
            else:
                counts[int(d)] = counts.get(int(d), 0) + int(c)
        return cls(counts, inf_count, sum(counts.values()) + inf_count)


def sample_bipartite(p: ModelParams, seed: int) -> BipartiteGraph:
    """Sample the typed bipartite graph with independent (v,u) edges.

    Per vertex and object class, a Binomial(m_j, p_kj) degree is drawn
    and that many distinct objects are chosen uniformly; equivalent in
    law to per-pair Bernoulli trials but linear in the edge count.
    """
    validate_params(p)
    rng = np.random.default_rng(seed)
    n_tot, m_tot = p.n_total, p.m_total
    v_off = np.concatenate([[0], np.cumsum(p.n)])
    o_off = np.concatenate([[0], np.cumsum(p.m)])

    vertex_edges: list[list[np.ndarray]] = [[] for _ in range(n_tot)]
    object_edges: list[list[np.ndarray]] = [[] for _ in range(m_tot)]

    for k in range(p.K):
        base_v = int(v_off[k])
        for j in range(p.J):
            prob = float(p.P[k, j])
            if prob == 0.0:
                continue
            m_j = int(p.m[j])
            base_o = int(o_off[j])
            degs = rng.binomial(m_j, prob, size=int(p.n[k]))
            total = int(degs.sum())
            if total == 0:
                continue
            if prob == 1.0:
                full = np.arange(base_o, base_o + m_j, dtype=np.int64)
                for v_local in range(int(p.n[k])):
                    vertex_edges[base_v + v_local].append(full)
                continue
            # partial Fisher-Yates per vertex on a shared buffer,
            # positions drawn from one pre-generated uniform block
            u = rng.random(total)
            buf = np.arange(m_j, dtype=np.int64)
            pos = 0
            for v_local, deg in enumerate(degs):
                deg = int(deg)
                if deg == 0:
                    continue
                chosen = np.empty(deg, dtype=np.int64)
                for t in range(deg):
                    r = t + int(u[pos] * (m_j - t))
                    pos += 1
                    buf[t], buf[r] = buf[r], buf[t]
                    chosen[t] = buf[t]
                vertex_edges[base_v + v_local].append(chosen + base_o)

    empty = np.empty(0, dtype=np.int64)
    vertex_adj = [
        np.concatenate(e) if e else empty.copy() for e in vertex_edges
    ]
    for v, objs in enumerate(vertex_adj):
        for o in objs:
            object_edges[int(o)].append(v)
    object_adj = [
        np.asarray(e, dtype=np.int64) if e else empty.copy() for e in object_edges
    ]
    return BipartiteGraph(
        params=p,
        vertex_adj=vertex_adj,
        object_adj=object_adj,
        vertex_offsets=v_off,
        object_offsets=o_off,
    )


def pair_distance(g: BipartiteGraph, a: int, b: int):
    """Intersection-graph distance between vertices a and b.

    Half the bipartite distance, found by alternating BFS; 0 iff a == b,
    inf iff the vertices are in different components.
    """
    n_v, n_o = g.n_vertices, g.n_objects
    for v in (a, b):
        if not 0 <= v < n_v:
            raise ValidationError(f"invalid vertex id {v}")
    if a == b:
        return 0
    seen_v = np.zeros(n_v, dtype=bool)
    seen_o = np.zeros(n_o, dtype=bool)
    seen_v[a] = True
    frontier = [a]
    dist = 0
    while frontier:
        dist += 1
        next_objects = []
        for v in frontier:
            for o in g.vertex_adj[v]:
                if not seen_o[o]:
                    seen_o[o] = True
                    next_objects.append(o)
        next_vertices = []
        for o in next_objects:
            for v in g.object_adj[o]:
                if not seen_v[v]:
                    seen_v[v] = True
                    next_vertices.append(v)
        if seen_v[b]:
            return dist
        frontier = next_vertices
    return INF


def sample_pair_distance(
    p: ModelParams, k1: int, k2: int, seed: int
):
    """One replicate: fresh graph, uniform ordered pair of distinct
    typed vertices, one BFS."""
    g = sample_bipartite(p, seed)
    rng = np.random.default_rng(derive_seed(seed, "pair"))
    off1 = int(g.vertex_offsets[k1])
    off2 = int(g.vertex_offsets[k2])
    a = off1 + int(rng.integers(0, int(p.n[k1])))
    if k1 == k2:
        b = off2 + int(rng.integers(0, int(p.n[k2]) - 1))
        if b >= a:
            b += 1
    else:
        b = off2 + int(rng.integers(0, int(p.n[k2])))
    return pair_distance(g, a, b)


def empirical_distance_law(
    p: ModelParams,
    k1: int,
    k2: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> DistanceLaw:
    """Monte Carlo distance law between a type-k1 and a type-k2 vertex.

    Each replicate samples a fresh graph and one uniform ordered pair of
    distinct vertices; replicate r uses the substream (seed, "graph", r),
    so the histogram is identical for any worker count.
    """
    validate_params(p)
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    for k in (k1, k2):
        if not 0 <= k < p.K:
            raise ValidationError(f"invalid vertex type {k}")
    if k1 == k2 and p.n[k1] < 2:
        raise ValidationError(
            f"insufficient vertices of requested type {k1 + 1}"
        )
    seeds = [derive_seed(seed, "graph", r) for r in range(reps)]
    if workers > 1:
        from .runner import parallel_map

        dists = parallel_map(
            _distance_task, [(p, k1, k2, s) for s in seeds], workers
        )
    else:
        dists = [sample_pair_distance(p, k1, k2, s) for s in seeds]
    return DistanceLaw.from_samples(dists)


def _distance_task(args):
    p, k1, k2, s = args
    return sample_pair_distance(p, k1, k2, s)
