"""Seed selection and realized spread over observed temporal edges.

Spread is deterministic time-respecting reachability: an edge in period
``t`` carries influence from an endpoint reached at or before ``t`` to the
other endpoint, including chains of edges inside the same period.  Seeds
count as reached from the start.
"""

from __future__ import annotations

import csv
import io
import warnings
from collections import defaultdict, deque
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph import DEFAULT_RELS, RelationKind, TemporalMultiGraph
from .ipp import LabelSet

__all__ = [
    "SeedSet",
    "SpreadReport",
    "SPREAD_RELS",
    "network_scale",
    "reached_by_time",
    "hop_limited_spread",
    "spread_report",
    "one_neighbor_ratio",
    "select_seeds",
    "cooldown_filter",
    "ic_spread",
    "DEGREE_BUCKETS",
]

# realized propagation follows invitation/adoption edges
SPREAD_RELS = frozenset({RelationKind.STRONG})

DEGREE_BUCKETS = (("<=1", 0, 1), ("2-3", 2, 3), ("4+", 4, None))


@dataclass(frozen=True)
class SeedSet:
    seeds: tuple
    K: int
    strategy: str

    def __post_init__(self):
        if len(set(self.seeds)) != self.K:
            raise ValueError("seed set size does not match K")


@dataclass
class SpreadReport:
    seeds: list
    t_end: int
    max_hops: int
    reached_per_t: list = field(default_factory=list)
    observed_per_t: list = field(default_factory=list)
    normalized_per_t: list = field(default_factory=list)
    hop_counts: list = field(default_factory=list)
    cold_start_breakdown: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "index", "value"])
        for t, (r, z) in enumerate(zip(self.reached_per_t, self.normalized_per_t)):
            w.writerow(["reached", t, r])
            w.writerow(["normalized", t, repr(z)])
        for h, c in enumerate(self.hop_counts):
            w.writerow(["hop", h, c])
        return buf.getvalue()


def _rels(rels, use_cold_edges: bool):
    rels = set(SPREAD_RELS if rels is None else rels)
    if use_cold_edges:
        rels.add(int(RelationKind.COLD))
    else:
        rels.discard(int(RelationKind.COLD))
    return frozenset(rels)


def _check_seeds(graph: TemporalMultiGraph, seeds) -> np.ndarray:
    s = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if s.size and (s[0] < 0 or s[-1] >= graph.num_nodes):
        raise ValueError("seed outside node registry")
    return s


def _sweep(n: int, src, dst, t, seeds: np.ndarray, t_end: int) -> tuple[np.ndarray, list[int]]:
    reached = np.zeros(n, dtype=bool)
    reached[seeds] = True
    per_t = []
    for tt in range(t_end + 1):
        k = t == tt
        if np.any(k):
            a = coo_matrix((np.ones(int(k.sum())), (src[k], dst[k])), shape=(n, n))
            _, lab = connected_components(a, directed=False)
            reached |= np.isin(lab, np.unique(lab[reached]))
        per_t.append(int(reached.sum()))
    return reached, per_t


def reached_by_time(graph: TemporalMultiGraph, seeds, t_end: int, rels=None,
                    use_cold_edges: bool = False) -> tuple[np.ndarray, list[int]]:
    """Sweep periods ``0..t_end``; return the reached mask and reach count per period."""
    graph._check_t(t_end)
    rels = _rels(rels, use_cold_edges)
    m = np.isin(graph.rel, list(rels))
    return _sweep(graph.num_nodes, graph.src[m], graph.dst[m], graph.t[m],
                  _check_seeds(graph, seeds), t_end)


def network_scale(graph: TemporalMultiGraph, seeds, t_end: int, rels=None,
                  use_cold_edges: bool = False, mode: str = "reach") -> int:
    """Distinct nodes reached from `seeds` through period `t_end`.

    ``mode="union"`` instead returns the literal size of the union of all
    node sets through `t_end` (no reachability restriction).
    """
    if mode == "union":
        graph._check_t(t_end)
        rels = _rels(DEFAULT_RELS if rels is None else rels, use_cold_edges)
        m = (graph.t <= t_end) & np.isin(graph.rel, list(rels))
        return int(np.unique(np.concatenate([graph.src[m], graph.dst[m]])).size)
    if mode != "reach":
        raise ValueError(f"unknown mode {mode!r}")
    return int(reached_by_time(graph, seeds, t_end, rels, use_cold_edges)[0].sum())


def _arrivals(graph, seeds, t_end, rels, max_hops):
    """Earliest arrival period per node using at most h edges, for h = 0..max_hops."""
    m = (graph.t <= t_end) & np.isin(graph.rel, list(rels))
    u = np.concatenate([graph.src[m], graph.dst[m]])
    v = np.concatenate([graph.dst[m], graph.src[m]])
    t = np.concatenate([graph.t[m], graph.t[m]])
    big = np.iinfo(np.int64).max
    arr = np.full(graph.num_nodes, big, dtype=np.int64)
    arr[_check_seeds(graph, seeds)] = -1
    layers = [arr]
    for _ in range(max_hops):
        ok = arr[u] <= t
        new = arr.copy()
        np.minimum.at(new, v[ok], t[ok])
        layers.append(new)
        if np.array_equal(new, arr):
            # fixpoint: remaining layers are identical
            layers.extend([new] * (max_hops + 1 - len(layers)))
            break
        arr = new
    return layers


def hop_limited_spread(graph: TemporalMultiGraph, seeds, t_end: int, max_hops: int = 3,
                       rels=None, use_cold_edges: bool = False) -> list[int]:
    """Cumulative reached counts for hop limits ``0..max_hops`` (seeds are hop 0)."""
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    graph._check_t(t_end)
    rels = _rels(rels, use_cold_edges)
    big = np.iinfo(np.int64).max
    return [int(np.sum(a < big)) for a in _arrivals(graph, seeds, t_end, rels, max_hops)]


def _first_seen(graph: TemporalMultiGraph) -> np.ndarray:
    m = np.isin(graph.rel, list(DEFAULT_RELS))
    first = np.full(graph.num_nodes, graph.T, dtype=np.int64)
    np.minimum.at(first, graph.src[m], graph.t[m])
    np.minimum.at(first, graph.dst[m], graph.t[m])
    return first


def spread_report(graph: TemporalMultiGraph, seeds, t_end: int, max_hops: int = 3,
                  rels=None, use_cold_edges: bool = False) -> SpreadReport:
    """Per-period reach, node-count-normalized spread, hop curve and degree buckets.

    The normalizer is the number of distinct nodes observed (weak or strong
    edges) through each period.
    """
    seeds = _check_seeds(graph, seeds)
    reached, per_t = reached_by_time(graph, seeds, t_end, rels, use_cold_edges)
    first = _first_seen(graph)
    observed = [int(np.sum(first <= t)) for t in range(t_end + 1)]
    norm = [r / o if o else 0.0 for r, o in zip(per_t, observed)]
    hops = hop_limited_spread(graph, seeds, t_end, max_hops, rels, use_cold_edges)

    newcomers = np.flatnonzero(reached)
    newcomers = newcomers[~np.isin(newcomers, seeds)]
    buckets = {name: 0 for name, _, _ in DEGREE_BUCKETS}
    for v in newcomers.tolist():
        t0 = int(first[v])
        d = graph.degree(v, t0, DEFAULT_RELS) if t0 < graph.T else 0
        for name, lo, hi in DEGREE_BUCKETS:
            if d >= lo and (hi is None or d <= hi):
                buckets[name] += 1
                break
    return SpreadReport(seeds=seeds.tolist(), t_end=t_end, max_hops=max_hops,
                        reached_per_t=per_t, observed_per_t=observed, normalized_per_t=norm,
                        hop_counts=hops, cold_start_breakdown=buckets)


def one_neighbor_ratio(graph: TemporalMultiGraph, t: int, rels=DEFAULT_RELS) -> float:
    """Fraction of nodes present at `t` that have exactly one neighbor."""
    nodes = graph.nodes_at(t, rels)
    if nodes.size == 0:
        warnings.warn(f"no nodes at timestamp {t}; ratio defined as 0", RuntimeWarning)
        return 0.0
    deg = graph.degrees_at(t, rels)
    return float(np.sum(deg[nodes] == 1)) / nodes.size


def select_seeds(graph: TemporalMultiGraph, strategy: str, K: int, rng_seed: int = 0,
                 labels: LabelSet | None = None, explicit: Sequence[int] | None = None) -> SeedSet:
    """Pick `K` seeds among the strong nodes of period 0.

    Strategies: ``random`` (seeded), ``degree`` (strong degree at t=0),
    ``ipp-frequency`` (IPP counts from `labels`) and ``file`` (`explicit`).
    Ties are broken by node ID.
    """
    pool = graph.strong_nodes_at(0) if graph.T else np.zeros(0, np.int64)
    if K < 0 or K > pool.size:
        raise ValueError(f"K={K} exceeds the {pool.size} strong nodes at t=0")
    if strategy == "random":
        rng = np.random.default_rng(rng_seed)
        chosen = rng.choice(pool, size=K, replace=False).tolist()
    elif strategy == "degree":
        deg = graph.degrees_at(0, {RelationKind.STRONG})[pool]
        chosen = pool[np.lexsort((pool, -deg))][:K].tolist()
    elif strategy == "ipp-frequency":
        if labels is None:
            raise ValueError("ipp-frequency strategy needs a LabelSet")
        score = np.array([labels.counts.get(int(v), 0) for v in pool], dtype=np.int64)
        chosen = pool[np.lexsort((pool, -score))][:K].tolist()
    elif strategy == "file":
        if explicit is None:
            raise ValueError("file strategy needs an explicit seed list")
        chosen = [int(x) for x in explicit]
        if len(set(chosen)) != K:
            raise ValueError(f"explicit list has {len(set(chosen))} distinct seeds, expected {K}")
        outside = sorted(set(chosen) - set(pool.tolist()))
        if outside:
            raise ValueError(f"seeds not strong at t=0: {outside}")
    else:
        raise ValueError(f"unknown seed strategy {strategy!r}")
    return SeedSet(tuple(sorted(chosen)), K, strategy)


def cooldown_filter(events: Iterable, limit: int = 10, horizon: float = 1.0):
    """Drop recommendation events to targets that are cooling down.

    `events` are ``(time, target, ...)`` tuples in nondecreasing time order.
    An event passes iff its target received fewer than `limit` passed events
    in the window ``(time - horizon, time]``; otherwise it is dropped.

    Returns ``(passed, dropped)`` lists.
    """
    if limit < 1 or horizon <= 0:
        raise ValueError("limit must be >= 1 and horizon > 0")
    recent: dict = defaultdict(deque)
    passed, dropped = [], []
    last = None
    for ev in events:
        time, target = ev[0], ev[1]
        if last is not None and time < last:
            raise ValueError(f"events out of order at time {time}")
        last = time
        q = recent[target]
        while q and q[0] <= time - horizon:
            q.popleft()
        if len(q) >= limit:
            dropped.append(ev)
            continue
        q.append(time)
        passed.append(ev)
    return passed, dropped


def ic_spread(graph: TemporalMultiGraph, seeds, t_end: int, p: float, trials: int = 100,
              rng_seed: int = 0, rels=None, use_cold_edges: bool = False) -> tuple[float, float]:
    """Monte Carlo independent-cascade variant (what-if studies only).

    Each edge is live with probability `p` per trial; spread is the
    time-respecting reach over live edges.  Returns ``(mean, std)``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    graph._check_t(t_end)
    rels = _rels(rels, use_cold_edges)
    seeds = _check_seeds(graph, seeds)
    m = np.isin(graph.rel, list(rels))
    src, dst, t = graph.src[m], graph.dst[m], graph.t[m]
    rng = np.random.default_rng(rng_seed)
    out = np.empty(trials)
    for i in range(trials):
        live = rng.random(src.size) < p
        out[i] = _sweep(graph.num_nodes, src[live], dst[live], t[live], seeds, t_end)[0].sum()
    return float(out.mean()), float(out.std())
