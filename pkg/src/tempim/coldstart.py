"""Cold-start neighbor retrieval over a prefix tree of IPP strings.

All IPP strings go into a (path-compressed) trie; its pre-order traversal
with ordered children yields the PTT sequence, in which strings sharing long
prefixes sit next to each other.  For every query IPP we look at a window of
the sequence around the query's position, keep strings similar enough to the
query, and link the query's end node to a seeded sample of the nodes behind
those strings with relation-2 edges.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .graph import ALL_RELS, RelationKind, TemporalEdge, TemporalMultiGraph
from .serialize import IStrRecord, sim

__all__ = [
    "Trie",
    "PTTIndex",
    "RetrievalParams",
    "build_ptt",
    "locate",
    "neighbor_retrieval",
    "sample_candidates",
    "write_edges_csv",
]


class _Node:
    __slots__ = ("label", "children", "keys", "carriers", "count")

    def __init__(self, label: str = ""):
        self.label = label
        self.children: dict[str, _Node] = {}
        self.keys: list[str] | None = None  # sorted child keys once frozen
        self.carriers: set[int] | None = None  # set on terminals
        self.count = 0  # terminals in subtree


class Trie:
    """Path-compressed prefix tree over fixed-length strings.

    Terminals hold the set of graph nodes carried by the string ending there.
    """

    def __init__(self, length: int | None = None):
        self.root = _Node()
        self.length = length
        self._frozen = False

    def insert(self, key: str, carriers: Iterable[int] = ()) -> None:
        if self._frozen:
            raise RuntimeError("trie is frozen")
        if self.length is None:
            self.length = len(key)
        elif len(key) != self.length:
            raise ValueError(f"string length {len(key)} != {self.length}: {key!r}")
        node, rest = self.root, key
        while rest:
            child = node.children.get(rest[0])
            if child is None:
                leaf = _Node(rest)
                node.children[rest[0]] = leaf
                node, rest = leaf, ""
                break
            lab = child.label
            n = _common_prefix(lab, rest)
            if n < len(lab):
                mid = _Node(lab[:n])
                child.label = lab[n:]
                mid.children[child.label[0]] = child
                node.children[rest[0]] = mid
                child = mid
            node, rest = child, rest[n:]
        if node.carriers is None:
            node.carriers = set()
        node.carriers.update(carriers)

    def freeze(self) -> None:
        """Order children and compute subtree counts (iteratively)."""
        stack = [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                node.count = (node.carriers is not None) + sum(c.count for c in node.children.values())
                continue
            node.keys = sorted(node.children)
            stack.append((node, True))
            stack.extend((c, False) for c in node.children.values())
        self._frozen = True

    def preorder(self) -> list[tuple[str, set[int]]]:
        """Terminal strings in pre-order with ascending child order."""
        if not self._frozen:
            self.freeze()
        out = []
        stack = [(self.root, "")]
        while stack:
            node, prefix = stack.pop()
            s = prefix + node.label
            if node.carriers is not None:
                out.append((s, node.carriers))
            for k in reversed(node.keys):
                stack.append((node.children[k], s))
        return out

    def rank(self, key: str) -> int:
        """Number of stored strings lexicographically smaller than `key`."""
        if not self._frozen:
            self.freeze()
        node, rest, pos = self.root, key, 0
        while rest:
            if node.carriers is not None:
                pos += 1  # a stored proper prefix sorts first
            child = None
            for k in node.keys:
                if k < rest[0]:
                    pos += node.children[k].count
                elif k == rest[0]:
                    child = node.children[k]
                    break
                else:
                    break
            if child is None:
                return pos
            lab = child.label
            n = _common_prefix(lab, rest)
            if n == len(lab):
                node, rest = child, rest[n:]
                continue
            if n == len(rest) or rest[n] < lab[n]:
                return pos
            return pos + child.count
        return pos


def _common_prefix(a: str, b: str) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


@dataclass
class PTTIndex:
    sequence: list[str]
    position: dict[str, int]
    nodes: dict[str, frozenset]
    trie: Trie

    def __len__(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class RetrievalParams:
    window: int = 5
    min_sim: int = 17
    sample_k: int = 3
    seed: int = 0
    legacy_threshold: bool = False
    strict: bool = False

    def __post_init__(self):
        if self.window < 0 or self.min_sim < 0 or self.sample_k < 0:
            raise ValueError("window, min_sim and sample_k must be non-negative")


def build_ptt(corpus: Iterable, length: int | None = None) -> PTTIndex:
    """Build the PTT index from ``IStrRecord``/``(istr, v2, ...)`` rows or bare strings."""
    trie = Trie(length)
    for item in corpus:
        if isinstance(item, str):
            trie.insert(item)
        else:
            trie.insert(item[0], (int(item[1]),))
    trie.freeze()
    seq, nodes = [], {}
    for s, carriers in trie.preorder():
        seq.append(s)
        nodes[s] = frozenset(carriers)
    return PTTIndex(seq, {s: i for i, s in enumerate(seq)}, nodes, trie)


def locate(ptt: PTTIndex, istr: str) -> int:
    """Cached position if present, else the lexicographic insertion point."""
    pos = ptt.position.get(istr)
    if pos is not None:
        return pos
    return ptt.trie.rank(istr)


def sample_candidates(candidates: Sequence[int], k: int, seed: int, index: int) -> list[int]:
    """Uniform sample without replacement; the stream is keyed by (seed, query index)."""
    cand = np.asarray(sorted(candidates), dtype=np.int64)
    if cand.size <= k:
        return cand.tolist()
    rng = np.random.default_rng([seed, index])
    return sorted(rng.choice(cand, size=k, replace=False).tolist())


def _retrieve_one(i: int, q: IStrRecord, ptt: PTTIndex, params: RetrievalParams,
                  graph: TemporalMultiGraph | None, digits: int) -> list[TemporalEdge]:
    if q.istr not in ptt.position and params.strict:
        raise KeyError(f"IStr not present in PTT: {q.istr!r}")
    pos = locate(ptt, q.istr)
    lo, hi = max(0, pos - params.window), min(len(ptt), pos + params.window + 1)
    pool: set[int] = set()
    for s in ptt.sequence[lo:hi]:
        score = sim(q.istr, s, digits)
        passed = score < params.min_sim if params.legacy_threshold else score >= params.min_sim
        if passed:
            pool.update(ptt.nodes[s])
    pool.discard(q.v2)
    if graph is not None and 0 <= q.t1 < graph.T:
        pool.difference_update(graph.neighbors(q.v2, q.t1, ALL_RELS))
    chosen = sample_candidates(pool, params.sample_k, params.seed, i)
    return [TemporalEdge(min(q.v2, u), max(q.v2, u), q.t1, int(RelationKind.COLD)) for u in chosen]


def neighbor_retrieval(queries: Sequence, ptt: PTTIndex, params: RetrievalParams,
                       graph: TemporalMultiGraph | None = None, only_cold: bool = False,
                       cold_C: int = 1, digits: int = 2, threads: int = 1) -> list[TemporalEdge]:
    """Generate relation-2 edges for every query IPP.

    Parameters
    ----------
    queries : sequence of IStrRecord
        ``(istr, v2, t1)`` per IPP; the query index seeds its sampler so
        serial and threaded runs agree.
    graph : TemporalMultiGraph, optional
        Used to drop candidates already adjacent to ``v2`` at ``t1`` and for
        the `only_cold` restriction.

    Returns
    -------
    list of TemporalEdge
        Deduplicated, normalized ``src < dst``, sorted.
    """
    queries = [IStrRecord(*q) for q in queries]
    if len(ptt) == 0:
        return []
    if only_cold:
        if graph is None:
            raise ValueError("only_cold requires the graph")
        cold = {t: graph.cold_start_nodes(t, cold_C) for t in {q.t1 for q in queries}}
        work = [(i, q) for i, q in enumerate(queries) if q.v2 in cold[q.t1]]
    else:
        work = list(enumerate(queries))

    def run(chunk):
        return [e for i, q in chunk for e in _retrieve_one(i, q, ptt, params, graph, digits)]

    if threads > 1 and len(work) > 1:
        size = -(-len(work) // threads)
        chunks = [work[j:j + size] for j in range(0, len(work), size)]
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(work)]
    return sorted({e for p in parts for e in p})


def write_edges_csv(edges: Iterable[TemporalEdge], fh, node_keys: Sequence[str] | None = None) -> None:
    w = csv.writer(fh, lineterminator="\n")
    for e in edges:
        if node_keys is None:
            w.writerow((e.src, e.dst, e.t, e.rel))
        else:
            w.writerow((node_keys[e.src], node_keys[e.dst], e.t, e.rel))
