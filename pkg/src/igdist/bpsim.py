"""Bipartite multitype branching process: trajectories, martingale
limits, extinction, and the labeled coupling with ghost bookkeeping.

Generations alternate vertex side and object side.  A type-k vertex
spawns objects per class j as Binomial(m_j, p_kj); a type-j object
spawns vertices per class k as Binomial(n_k, p_kj).  Aggregated counts
use binomial additivity (the sum of X iid Bi(m, p) draws is
Bi(m*X, p)), which is the exact offspring law of the whole generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PopulationCapError, SimulationError, ValidationError
from .model import ModelParams, SpectralData, validate_params
from .seeding import derive_seed

DEFAULT_POP_CAP = 100_000_000


@dataclass
class Trajectory:
    """Per-generation type counts of one run: X over 0..I, Y over 1..I."""

    X: list[np.ndarray]
    Y: list[np.ndarray]
    start: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.X) - 1


@dataclass(frozen=True)
class WSample:
    """One truncated martingale value tau^-I * nu @ X(I)."""

    value: float
    horizon: int
    survived: bool


@dataclass
class GenerationRecord:
    """One labeled generation: parallel arrays over individuals.

    classes: 1 = kept, 0 = ghost, 2 = ghost whose index was first
    claimed in its own generation (these still carry one edge).
    parent_rows point into the previous generation's arrays (-1 = root).
    """

    side: str  # "X" (vertices) or "Y" (objects)
    types: np.ndarray
    indices: np.ndarray
    classes: np.ndarray
    parent_rows: np.ndarray

    def size(self) -> int:
        return len(self.types)


@dataclass
class LabeledForest:
    """Labeled two-rooted growth with ghost tallies and induced edges.

    edges_v/edges_o pair a vertex index-node with an object index-node;
    together they form the realized bipartite index graph, whose halved
    distances are intersection-graph distances.
    """

    params: ModelParams
    depth: int
    generations: list[GenerationRecord]
    ghost_x: np.ndarray  # (depth+1, K), ghosts in vertex generation i
    ghost_y: np.ndarray  # (depth+1, J), ghosts in object generation i (row 0 unused)
    edges_v: np.ndarray
    edges_o: np.ndarray
    root_a: int
    root_b: int
    pruned: bool = False
    _adj: dict | None = field(default=None, repr=False)

    def _adjacency(self) -> dict:
        if self._adj is None:
            adj: dict[int, list[int]] = {self.root_a: [], self.root_b: []}
            n_tot = self.params.n_total
            for v, o in zip(self.edges_v, self.edges_o):
                adj.setdefault(int(v), []).append(int(o) + n_tot)
                adj.setdefault(int(o) + n_tot, []).append(int(v))
            self._adj = adj
        return self._adj

    def distance(self):
        """Intersection-graph distance between the two roots (half the
        index-graph distance); inf when not connected within depth."""
        adj = self._adjacency()
        a, b = self.root_a, self.root_b
        if a == b:
            return 0
        seen = {a}
        frontier = [a]
        steps = 0
        while frontier:
            steps += 1
            nxt = []
            for u in frontier:
                for w in adj.get(u, ()):
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            if b in seen:
                return steps // 2
            frontier = nxt
        return math.inf

    def intersection_edges(self) -> set[tuple[int, int]]:
        """Vertex pairs joined through a shared object index-node."""
        by_object: dict[int, list[int]] = {}
        for v, o in zip(self.edges_v, self.edges_o):
            by_object.setdefault(int(o), []).append(int(v))
        out = set()
        for verts in by_object.values():
            verts = sorted(set(verts))
            for i in range(len(verts)):
                for j in range(i + 1, len(verts)):
                    out.add((verts[i], verts[j]))
        return out


def _check_cap(count: int, cap: int, generation: int) -> None:
    if count > cap:
        raise PopulationCapError(generation, count, cap)


def _step_to_objects(rng, p: ModelParams, X: np.ndarray) -> np.ndarray:
    """One aggregated vertex->object generation."""
    Y = np.zeros(p.J, dtype=np.int64)
    for k in range(p.K):
        if X[k] == 0:
            continue
        Y += rng.binomial(p.m * int(X[k]), p.P[k])
    return Y


def _step_to_vertices(rng, p: ModelParams, Y: np.ndarray) -> np.ndarray:
    """One aggregated object->vertex generation."""
    X = np.zeros(p.K, dtype=np.int64)
    for j in range(p.J):
        if Y[j] == 0:
            continue
        X += rng.binomial(p.n * int(Y[j]), p.P[:, j])
    return X


def _start_vector(p: ModelParams, start) -> np.ndarray:
    """Either a single 0-based type id or a length-K count vector."""
    if isinstance(start, (int, np.integer)):
        if not 0 <= int(start) < p.K:
            raise ValidationError(f"invalid start type {start}")
        x0 = np.zeros(p.K, dtype=np.int64)
        x0[int(start)] = 1
    else:
        x0 = np.asarray(start, dtype=np.int64)
        if x0.shape != (p.K,):
            raise ValidationError(
                "start must be a type id or a length-K count vector"
            )
    if x0.sum() == 0:
        raise ValidationError("start must be nonempty")
    if (x0 < 0).any():
        raise ValidationError("start counts must be nonnegative")
    if (x0 > p.n).any():
        raise ValidationError("X(0) exceeds available vertices of some type")
    return x0


def simulate(
    p: ModelParams,
    start,
    generations: int,
    seed: int,
    population_cap: int = DEFAULT_POP_CAP,
) -> Trajectory:
    """Run the aggregated process for `generations` vertex generations.

    `start` is a single 0-based vertex type or a length-K count vector.
    Deterministic given the seed.
    """
    validate_params(p)
    if generations < 0:
        raise ValidationError("generations must be >= 0")
    x0 = _start_vector(p, start)
    rng = np.random.default_rng(seed)
    X = [x0]
    Y = []
    for i in range(1, generations + 1):
        y = _step_to_objects(rng, p, X[-1])
        _check_cap(int(y.sum()), population_cap, i)
        x = _step_to_vertices(rng, p, y)
        _check_cap(int(x.sum()), population_cap, i)
        Y.append(y)
        X.append(x)
    return Trajectory(X=X, Y=Y, start=x0)


def simulate_batch(
    p: ModelParams,
    start,
    generations: int,
    reps: int,
    seed: int,
    population_cap: int = DEFAULT_POP_CAP,
) -> tuple[np.ndarray, np.ndarray]:
    """Many independent runs at once, vectorized across replicates.

    Returns (X, Y) with shapes (reps, generations+1, K) and
    (reps, generations, J).  Replicates occupy slots of one shared
    stream, so the batch is deterministic given (seed, reps); use
    `simulate` when each replicate must own a substream.
    """
    validate_params(p)
    if generations < 0:
        raise ValidationError("generations must be >= 0")
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    x0 = _start_vector(p, start)
    rng = np.random.default_rng(seed)
    X = np.empty((reps, generations + 1, p.K), dtype=np.int64)
    Y = np.empty((reps, generations, p.J), dtype=np.int64)
    X[:, 0, :] = x0
    cur = np.broadcast_to(x0, (reps, p.K)).copy()
    for i in range(1, generations + 1):
        y = np.zeros((reps, p.J), dtype=np.int64)
        for k in range(p.K):
            for j in range(p.J):
                if p.P[k, j] > 0.0:
                    y[:, j] += rng.binomial(p.m[j] * cur[:, k], p.P[k, j])
        _check_cap(int(y.sum(axis=1).max(initial=0)), population_cap, i)
        x = np.zeros((reps, p.K), dtype=np.int64)
        for j in range(p.J):
            for k in range(p.K):
                if p.P[k, j] > 0.0:
                    x[:, k] += rng.binomial(p.n[k] * y[:, j], p.P[k, j])
        _check_cap(int(x.sum(axis=1).max(initial=0)), population_cap, i)
        Y[:, i - 1, :] = y
        X[:, i, :] = x
        cur = x
    return X, Y


def w_sample(
    p: ModelParams,
    spec: SpectralData,
    start_type: int,
    horizon: int,
    seed: int,
    population_cap: int = DEFAULT_POP_CAP,
) -> WSample:
    """One draw of the truncated martingale from a single type-k vertex."""
    if spec.tau <= 1.0:
        raise ValidationError("tau <= 1: supercritical regime required")
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    traj = simulate(p, start_type, horizon, seed, population_cap)
    x_final = traj.X[-1]
    value = float(spec.nu @ x_final) * spec.tau**-horizon
    return WSample(value=value, horizon=horizon, survived=bool(x_final.any()))


def survival_prob(p: ModelParams, tol: float = 1e-12, max_iter: int = 1_000_000):
    """P_k[W > 0] per start type, from the extinction fixed point.

    q is the minimal fixed point in [0,1]^K of the one-vertex-generation
    extinction map f_k(s) = prod_j (1 - p_kj + p_kj g_j(s))^{m_j} with
    g_j(s) = prod_l (1 - p_lj + p_lj s_l)^{n_l}; survival is identified
    with {W > 0} (almost-sure positivity on non-extinction).
    """
    validate_params(p)
    P = p.P
    s = np.zeros(p.K)
    for _ in range(max_iter):
        g = np.prod((1.0 - P + P * s[:, None]) ** p.n[:, None], axis=0)
        f = np.prod((1.0 - P + P * g[None, :]) ** p.m[None, :], axis=1)
        if np.abs(f - s).max() < tol:
            s = f
            break
        s = f
    return 1.0 - s


def extinction_frequency(
    p: ModelParams,
    start_type: int,
    horizon: int,
    reps: int,
    seed: int,
    verdict_cutoff: int = 100_000,
) -> float:
    """Monte Carlo fraction of runs extinct by `horizon` generations.

    A population above `verdict_cutoff` is declared surviving: dying
    out from N individuals has probability at most q^N, which is far
    below Monte Carlo resolution, and simulating the remaining
    generations exactly would overflow any budget.
    """
    validate_params(p)
    extinct = 0
    for r in range(reps):
        rng = np.random.default_rng(derive_seed(seed, "extinction", r))
        X = np.zeros(p.K, dtype=np.int64)
        X[start_type] = 1
        for _ in range(horizon):
            y = _step_to_objects(rng, p, X)
            X = _step_to_vertices(rng, p, y)
            total = int(X.sum())
            if total == 0:
                extinct += 1
                break
            if total > verdict_cutoff:
                break
    return extinct / reps


def conditioned_w_pool(
    p: ModelParams,
    spec: SpectralData,
    start_type: int,
    horizon: int,
    pool_size: int,
    seed: int,
    population_cap: int = DEFAULT_POP_CAP,
) -> np.ndarray:
    """Positive truncated-martingale values conditioned on survival.

    Attempts are indexed substreams of the seed, so the pool is
    reproducible regardless of batching.  Raises when the acceptance
    rate falls below 1e-4.
    """
    if pool_size < 1:
        raise ValidationError("pool_size must be >= 1")
    values = []
    attempts = 0
    while len(values) < pool_size:
        ws = w_sample(
            p, spec, start_type, horizon, derive_seed(seed, "w", attempts),
            population_cap,
        )
        attempts += 1
        if ws.survived:
            values.append(ws.value)
        if attempts >= 10_000 and len(values) < attempts * 1e-4:
            raise SimulationError(
                f"survival too rare: {len(values)}/{attempts} accepted"
            )
    return np.asarray(values)


def _assign_indices(rng, fam: np.ndarray, universe: int) -> np.ndarray:
    """Uniform distinct indices within each family, batched.

    Each pending slot redraws uniformly until free; earlier slots win
    intra-round ties.  Conditional on the accepted set, every accepted
    value is uniform over its family's unused indices, so the family's
    final index set is a uniform subset, exactly as if filled one draw
    at a time.
    """
    total = len(fam)
    vals = np.empty(total, dtype=np.int64)
    pending = np.arange(total)
    accepted_keys = np.empty(0, dtype=np.int64)
    while pending.size:
        cand = rng.integers(0, universe, size=pending.size)
        key = fam[pending] * universe + cand
        dup_old = np.isin(key, accepted_keys)
        first = np.zeros(pending.size, dtype=bool)
        _, first_pos = np.unique(key, return_index=True)
        first[first_pos] = True
        keep = first & ~dup_old
        vals[pending[keep]] = cand[keep]
        accepted_keys = np.concatenate([accepted_keys, key[keep]])
        pending = pending[~keep]
    return vals


def labeled_growth(
    p: ModelParams,
    k1: int,
    k2: int,
    depth: int,
    seed: int,
    prune_ghosts: bool = False,
    population_cap: int = DEFAULT_POP_CAP,
) -> LabeledForest:
    """Grow the two-rooted labeled process for 2*depth generations.

    Indices are assigned per family as uniform distinct subsets of the
    type's index range.  Individuals are classified generation by
    generation in ascending (type, parent, sibling) order: a child of a
    ghost is a ghost; a child whose index was already claimed by a kept
    individual of the same type is a ghost, flagged 2 when the claim
    happened in its own generation; everything else is kept (class 1).
    Edges arise only from kept parents to children of class 1 or 2.

    With prune_ghosts=True ghosts get no offspring; the induced edge set
    and distances are unchanged in law, but deep ghost tallies then only
    count ghosts fathered by kept individuals.
    """
    validate_params(p)
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    for k in (k1, k2):
        if not 0 <= k < p.K:
            raise ValidationError(f"invalid vertex type {k}")
    if k1 == k2 and p.n[k1] < 2:
        raise ValidationError(f"insufficient vertices of requested type {k1 + 1}")

    rng = np.random.default_rng(seed)
    v_off = np.concatenate([[0], np.cumsum(p.n)])
    o_off = np.concatenate([[0], np.cumsum(p.m)])

    # generation of first class-1 claim per (side, type, index); -1 = never
    first_gen_x = [np.full(int(c), -1, dtype=np.int64) for c in p.n]
    first_gen_y = [np.full(int(c), -1, dtype=np.int64) for c in p.m]

    ix_b = 1 if k1 == k2 else 0
    roots = GenerationRecord(
        side="X",
        types=np.asarray([k1, k2], dtype=np.int64),
        indices=np.asarray([0, ix_b], dtype=np.int64),
        classes=np.asarray([1, 1], dtype=np.int8),
        parent_rows=np.asarray([-1, -1], dtype=np.int64),
    )
    first_gen_x[k1][0] = 0
    first_gen_x[k2][ix_b] = 0

    generations = [roots]
    ghost_x = np.zeros((depth + 1, p.K), dtype=np.int64)
    ghost_y = np.zeros((depth + 1, p.J), dtype=np.int64)
    edges_v: list[np.ndarray] = []
    edges_o: list[np.ndarray] = []

    for g in range(1, 2 * depth + 1):
        parent_rec = generations[-1]
        to_objects = parent_rec.side == "X"
        child_side = "Y" if to_objects else "X"
        n_child_types = p.J if to_objects else p.K
        sizes = p.m if to_objects else p.n
        first_gen = first_gen_y if to_objects else first_gen_x
        x_gen = (g + 1) // 2  # vertex/object generation index i

        if prune_ghosts:
            parent_sel = np.flatnonzero(parent_rec.classes == 1)
        else:
            parent_sel = np.arange(parent_rec.size())
        if parent_sel.size == 0:
            break
        par_types = parent_rec.types[parent_sel]
        par_classes = parent_rec.classes[parent_sel]
        par_indices = parent_rec.indices[parent_sel]

        types_parts, ix_parts, cls_parts, prow_parts = [], [], [], []
        for b in range(n_child_types):
            universe = int(sizes[b])
            pvals = p.P[par_types, b] if to_objects else p.P[b, par_types]
            counts = rng.binomial(universe, pvals)
            total = int(counts.sum())
            if total == 0:
                continue
            fam = np.repeat(np.arange(parent_sel.size), counts)
            ix = _assign_indices(rng, fam, universe)
            pcls = par_classes[fam]

            cls = np.zeros(total, dtype=np.int8)
            elig = np.flatnonzero(pcls == 1)
            if elig.size:
                fg = first_gen[b]
                e_ix = ix[elig]
                fresh = fg[e_ix] < 0
                f_slots = elig[fresh]
                if f_slots.size:
                    f_ix = ix[f_slots]
                    win = np.zeros(f_slots.size, dtype=bool)
                    _, first_pos = np.unique(f_ix, return_index=True)
                    win[first_pos] = True
                    cls[f_slots[win]] = 1
                    cls[f_slots[~win]] = 2
                    fg[f_ix[win]] = g
                # indices claimed in an earlier generation stay plain ghosts

            emask = (pcls == 1) & (cls != 0)
            if emask.any():
                child_nodes = (o_off[b] if to_objects else v_off[b]) + ix[emask]
                par_t = par_types[fam[emask]]
                par_nodes = (
                    v_off[par_t] if to_objects else o_off[par_t]
                ) + par_indices[fam[emask]]
                if to_objects:
                    edges_v.append(par_nodes)
                    edges_o.append(child_nodes)
                else:
                    edges_v.append(child_nodes)
                    edges_o.append(par_nodes)

            ghosts = int(np.count_nonzero(cls != 1))
            if to_objects:
                ghost_y[x_gen, b] += ghosts
            else:
                ghost_x[x_gen, b] += ghosts

            types_parts.append(np.full(total, b, dtype=np.int64))
            ix_parts.append(ix)
            cls_parts.append(cls)
            prow_parts.append(parent_sel[fam])

        if not types_parts:
            break
        rec = GenerationRecord(
            side=child_side,
            types=np.concatenate(types_parts),
            indices=np.concatenate(ix_parts),
            classes=np.concatenate(cls_parts),
            parent_rows=np.concatenate(prow_parts),
        )
        _check_cap(rec.size(), population_cap, g)
        generations.append(rec)

    empty = np.empty(0, dtype=np.int64)
    return LabeledForest(
        params=p,
        depth=depth,
        generations=generations,
        ghost_x=ghost_x,
        ghost_y=ghost_y,
        edges_v=np.concatenate(edges_v) if edges_v else empty,
        edges_o=np.concatenate(edges_o) if edges_o else empty,
        root_a=int(v_off[k1]) + 0,
        root_b=int(v_off[k2]) + ix_b,
        pruned=prune_ghosts,
    )


def ghost_scaling(
    p: ModelParams,
    spec: SpectralData,
    depth: int,
    reps: int,
    seed: int,
    k1: int = 0,
    k2: int = 0,
    workers: int = 1,
) -> list[dict]:
    """Monte Carlo ghost means per generation with their scaling ratios.

    ratio_x divides the mean vertex-side ghost count at generation i by
    tau^{2i} e(m,n)^4; ratio_y divides the object-side mean by
    sqrt(m/n) tau^{2(i-1)} e(m,n)^4.  Non-growing ratios are the
    empirical signature of the uniform ghost-mean bound.
    """
    if spec.tau <= 1.0:
        raise ValidationError("tau <= 1: supercritical regime required")
    tasks = [
        (p, k1, k2, depth, derive_seed(seed, "ghost", r)) for r in range(reps)
    ]
    if workers > 1:
        from .runner import parallel_map

        tallies = parallel_map(_ghost_task, tasks, workers)
    else:
        tallies = [_ghost_task(t) for t in tasks]
    gx = np.mean([t[0] for t in tallies], axis=0)
    gy = np.mean([t[1] for t in tallies], axis=0)
    e4 = spec.e_mn**4
    ratio_scale_y = math.sqrt(p.m_total / p.n_total)
    rows = []
    for i in range(1, depth + 1):
        gxi = float(gx[i].sum())
        gyi = float(gy[i].sum())
        rows.append(
            {
                "i": i,
                "ghostX_mean": gxi,
                "ghostY_mean": gyi,
                "ratioX": gxi / (spec.tau ** (2 * i) * e4),
                "ratioY": gyi
                / (ratio_scale_y * spec.tau ** (2 * (i - 1)) * e4),
            }
        )
    return rows


def _ghost_task(args):
    p, k1, k2, depth, s = args
    f = labeled_growth(p, k1, k2, depth, s)
    return f.ghost_x, f.ghost_y
