"""Influence-propagation-path (IPP) mining.

A 2-hop IPP is a wedge ``v0 -(t0)- v1 -(t1)- v2`` with ``t0 <= t1`` where
``v0`` is already a known strong node at ``t0`` and neither ``v1`` nor ``v2``
is.  Mining enumerates every wedge around each middle node and filters it in a
single vectorized pass.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .graph import DEFAULT_RELS, RelationKind, TemporalMultiGraph, _rel_mask

__all__ = [
    "IPP",
    "LabelSet",
    "FilterStats",
    "enumerate_two_hop_motifs",
    "filter_ipps",
    "mine_ipps",
    "brute_force_ipps",
    "validate_ipp",
    "active_members",
    "write_ipps_jsonl",
    "read_ipps_jsonl",
    "BRUTE_FORCE_EDGE_LIMIT",
]

BRUTE_FORCE_EDGE_LIMIT = 10_000


class IPP(NamedTuple):
    v0: int
    v1: int
    v2: int
    t0: int
    t1: int

    def sort_key(self):
        return (self.t0, self.t1, self.v0, self.v1, self.v2)


@dataclass
class FilterStats:
    """Instrumentation: one condition evaluation per candidate."""
    candidates: int = 0
    evaluations: int = 0
    kept: int = 0


@dataclass
class LabelSet:
    counts: dict = field(default_factory=dict)

    @property
    def members(self) -> set[int]:
        return set(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def to_json(self) -> str:
        return json.dumps({str(k): v for k, v in sorted(self.counts.items())}, sort_keys=False)


def _incidence(graph: TemporalMultiGraph, rels):
    """Distinct (middle, other, t) half-edges, grouped by middle node."""
    m = _rel_mask(graph.rel, rels)
    s, d, t = graph.src[m], graph.dst[m], graph.t[m]
    half = np.stack([np.concatenate([s, d]), np.concatenate([d, s]), np.concatenate([t, t])], axis=1)
    if half.size:
        half = np.unique(half, axis=0)  # collapses parallel relations
    else:
        half = half.reshape(0, 3)
    mids, starts = np.unique(half[:, 0], return_index=True)
    bounds = np.append(starts, half.shape[0])
    return half, mids, bounds


def _wedges(half, lo, hi) -> np.ndarray:
    """All ordered pairs of distinct-endpoint incident edges of one middle node."""
    other, ts = half[lo:hi, 1], half[lo:hi, 2]
    k = hi - lo
    i, j = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    i, j = i.ravel(), j.ravel()
    keep = other[i] != other[j]
    i, j = i[keep], j[keep]
    v1 = np.full(i.size, half[lo, 0], dtype=np.int64)
    return np.stack([other[i], v1, other[j], ts[i], ts[j]], axis=1)


def _motif_blocks(graph: TemporalMultiGraph, rels) -> Iterator[np.ndarray]:
    half, mids, bounds = _incidence(graph, rels)
    for n in range(mids.size):
        blk = _wedges(half, bounds[n], bounds[n + 1])
        if blk.size:
            yield blk


def enumerate_two_hop_motifs(graph: TemporalMultiGraph,
                             rels=DEFAULT_RELS) -> Iterator[tuple[int, int, int, int, int]]:
    """Yield every candidate ``(v0, v1, v2, t0, t1)`` wedge exactly once, unfiltered."""
    for blk in _motif_blocks(graph, rels):
        for row in blk.tolist():
            yield tuple(row)


def _filter_block(graph: TemporalMultiGraph, blk: np.ndarray, stats: FilterStats) -> np.ndarray:
    if graph.T == 0 or blk.size == 0:
        return blk.reshape(0, 5)
    hw = graph.max_strong_id[blk[:, 3]]
    ok = (blk[:, 3] <= blk[:, 4]) & (blk[:, 0] <= hw) & (blk[:, 1] > hw) & (blk[:, 2] > hw)
    stats.candidates += blk.shape[0]
    stats.evaluations += ok.size
    return blk[ok]


def _canonical(arr: np.ndarray) -> list[IPP]:
    if arr.size == 0:
        return []
    arr = np.unique(arr, axis=0)
    order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0], arr[:, 4], arr[:, 3]))
    return [IPP(*r) for r in arr[order].tolist()]


def filter_ipps(graph: TemporalMultiGraph, candidates: Iterable,
                stats: FilterStats | None = None) -> list[IPP]:
    """Keep candidates meeting the edge and node conditions.

    Output is deduplicated and sorted by ``(t0, t1, v0, v1, v2)``.
    """
    stats = stats if stats is not None else FilterStats()
    if isinstance(candidates, np.ndarray):
        blocks = [candidates.reshape(-1, 5)]
    else:
        blocks = [np.asarray(list(candidates), dtype=np.int64).reshape(-1, 5)]
    kept = [_filter_block(graph, b.astype(np.int64), stats) for b in blocks]
    out = _canonical(np.concatenate(kept) if kept else np.zeros((0, 5), np.int64))
    stats.kept = len(out)
    return out


def mine_ipps(graph: TemporalMultiGraph, rels=DEFAULT_RELS, threads: int = 1,
              stats: FilterStats | None = None) -> list[IPP]:
    """Enumerate wedges and filter them into IPPs.

    Work is partitioned by middle node; the canonical sort makes the result
    independent of `threads`.
    """
    stats = stats if stats is not None else FilterStats()
    half, mids, bounds = _incidence(graph, rels)

    def work(chunk):
        local = FilterStats()
        parts = [_filter_block(graph, _wedges(half, bounds[n], bounds[n + 1]), local) for n in chunk]
        return local, parts

    idx = np.arange(mids.size)
    if threads > 1 and mids.size > 1:
        chunks = np.array_split(idx, threads)
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(work, chunks))
    else:
        results = [work(idx)]
    parts = []
    for local, p in results:
        stats.candidates += local.candidates
        stats.evaluations += local.evaluations
        parts.extend(p)
    out = _canonical(np.concatenate(parts) if parts else np.zeros((0, 5), np.int64))
    stats.kept = len(out)
    for ipp in out:
        validate_ipp(graph, ipp)
    return out


def validate_ipp(graph: TemporalMultiGraph, ipp: IPP) -> None:
    """Raise ``ValueError`` unless `ipp` satisfies every IPP invariant."""
    v0, v1, v2, t0, t1 = ipp
    if len({v0, v1, v2}) != 3:
        raise ValueError(f"{ipp}: nodes not distinct")
    if t0 > t1:
        raise ValueError(f"{ipp}: t0 > t1")
    if not graph.strong_membership(v0, t0):
        raise ValueError(f"{ipp}: v0 not strong at t0")
    if graph.strong_membership(v1, t0) or graph.strong_membership(v2, t0):
        raise ValueError(f"{ipp}: v1 or v2 already strong at t0")


def brute_force_ipps(graph: TemporalMultiGraph, rels=DEFAULT_RELS) -> list[IPP]:
    """Definitional reference: nested scans over explicit adjacency and strong sets."""
    if graph.num_edges > BRUTE_FORCE_EDGE_LIMIT:
        raise RuntimeError(f"brute force refused: {graph.num_edges} edges > {BRUTE_FORCE_EDGE_LIMIT}")
    adj = [dict() for _ in range(graph.T)]
    strong_at = [set() for _ in range(graph.T)]
    for e in graph.edges():
        if e.rel == RelationKind.STRONG:
            strong_at[e.t].update((e.src, e.dst))
        if e.rel in rels:
            adj[e.t].setdefault(e.src, set()).add(e.dst)
            adj[e.t].setdefault(e.dst, set()).add(e.src)
    known, cumulative = set(), []
    for t in range(graph.T):
        known = known | strong_at[t]
        cumulative.append(known)
    out = set()
    for t0 in range(graph.T):
        S = cumulative[t0]
        for v1, nb0 in adj[t0].items():
            if v1 in S:
                continue
            for v0 in nb0:
                if v0 not in S:
                    continue
                for t1 in range(t0, graph.T):
                    for v2 in adj[t1].get(v1, ()):
                        if v2 != v0 and v2 not in S:
                            out.add(IPP(v0, v1, v2, t0, t1))
    return sorted(out, key=IPP.sort_key)


def active_members(ipps: Iterable[IPP]) -> LabelSet:
    return LabelSet(dict(sorted(Counter(ipp.v0 for ipp in ipps).items())))


def write_ipps_jsonl(ipps: Iterable[IPP], fh) -> None:
    for ipp in ipps:
        fh.write(json.dumps(ipp._asdict()) + "\n")


def read_ipps_jsonl(fh) -> list[IPP]:
    out = []
    for line in fh:
        line = line.strip()
        if line:
            d = json.loads(line)
            out.append(IPP(d["v0"], d["v1"], d["v2"], d["t0"], d["t1"]))
    return out
