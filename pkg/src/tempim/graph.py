"""Temporal multi-relational graphs.

Edges are undirected, timestamped with an integer period index, and carry a
relation code (0 weak/exposure, 1 strong/invitation, 2 cold-start
augmentation).  Node IDs are dense and assigned strong-first, in order of
first appearance in the strong graph, so that "is v a known strong node by
period t" reduces to ``v <= max_strong_id[t]``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "RelationKind",
    "TemporalEdge",
    "IngestSummary",
    "TemporalMultiGraph",
    "ParseError",
    "ALL_RELS",
    "DEFAULT_RELS",
    "ingest_edges",
    "derive_strong_by_quantile",
]


class RelationKind(enum.IntEnum):
    WEAK = 0
    STRONG = 1
    COLD = 2

    @classmethod
    def parse(cls, code) -> "RelationKind":
        try:
            return cls(int(code))
        except (ValueError, TypeError):
            raise ValueError(f"unknown relation code {code!r}") from None


ALL_RELS = frozenset({0, 1, 2})
DEFAULT_RELS = frozenset({0, 1})


class ParseError(ValueError):
    """Malformed ingestion input; ``line`` is 1-based."""

    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    t: int
    rel: int


@dataclass
class IngestSummary:
    rows_read: int = 0
    duplicates: int = 0
    self_loops: list = field(default_factory=list)  # (line, key)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "duplicates": self.duplicates,
            "self_loops": [list(x) for x in self.self_loops],
        }


def _rel_mask(rel: np.ndarray, rels) -> np.ndarray:
    if rels is None:
        return np.ones(rel.shape, dtype=bool)
    return np.isin(rel, np.fromiter(rels, dtype=np.int64))


class TemporalMultiGraph:
    """Immutable temporal multigraph over dense node IDs.

    Parameters
    ----------
    src, dst, t, rel : array_like of int
        Edge columns.  They are normalized (``src < dst``), deduplicated on
        ``(src, dst, t, rel)`` and sorted.
    node_keys : sequence of str
        Raw key of every node; ``len(node_keys)`` is the node count.
    num_timestamps : int, optional
        Defaults to ``max(t) + 1``.
    max_strong_id : array_like, optional
        Per-period strong high-water ID.  Recomputed from the edges when not
        given; when given it must agree with the edges.
    """

    def __init__(self, src, dst, t, rel, node_keys: Sequence[str],
                 num_timestamps: int | None = None, max_strong_id=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        rel = np.asarray(rel, dtype=np.int64)
        if not (src.shape == dst.shape == t.shape == rel.shape):
            raise ValueError("edge columns must have equal length")
        n = len(node_keys)
        if src.size:
            if np.any(src == dst):
                raise ValueError("self-loops are not allowed")
            if np.any(t < 0):
                raise ValueError("timestamps must be non-negative")
            if min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n:
                raise ValueError("edge endpoint outside node registry")
            if not np.all(np.isin(rel, [0, 1, 2])):
                raise ValueError("relation codes must be in {0,1,2}")
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        cols = np.unique(np.stack([t, lo, hi, rel], axis=1), axis=0) if src.size \
            else np.zeros((0, 4), dtype=np.int64)
        self.t, self.src, self.dst, self.rel = (np.ascontiguousarray(cols[:, i]) for i in range(4))
        for a in (self.src, self.dst, self.t, self.rel):
            a.flags.writeable = False
        self.node_keys: tuple[str, ...] = tuple(node_keys)
        tmax = int(self.t.max()) + 1 if self.t.size else 0
        if num_timestamps is None:
            num_timestamps = tmax
        if num_timestamps < tmax:
            raise ValueError("num_timestamps smaller than largest edge timestamp")
        self.T = int(num_timestamps)
        computed = self._compute_max_strong_id()
        if max_strong_id is not None:
            given = np.asarray(max_strong_id, dtype=np.int64)
            if not np.array_equal(given, computed):
                raise ValueError("max_strong_id inconsistent with edges and ID order")
        self.max_strong_id = computed
        self.max_strong_id.flags.writeable = False

        # half-edge index sorted by (t, u) for O(log E) neighbor lookup
        hu = np.concatenate([self.src, self.dst])
        hv = np.concatenate([self.dst, self.src])
        ht = np.concatenate([self.t, self.t])
        hr = np.concatenate([self.rel, self.rel])
        order = np.lexsort((hv, hu, ht))
        self._hu, self._hv, self._ht, self._hr = hu[order], hv[order], ht[order], hr[order]
        self._hkey = self._ht * max(n, 1) + self._hu
        self._deg_cache: dict = {}

    # ---- basic properties -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.node_keys)

    @property
    def num_edges(self) -> int:
        return int(self.src.size)

    def edges(self) -> Iterator[TemporalEdge]:
        for row in zip(self.src.tolist(), self.dst.tolist(), self.t.tolist(), self.rel.tolist()):
            yield TemporalEdge(*row)

    def relation_counts(self) -> dict[int, int]:
        return {k: int(np.sum(self.rel == k)) for k in (0, 1, 2)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemporalMultiGraph):
            return NotImplemented
        return (self.T == other.T and self.node_keys == other.node_keys
                and all(np.array_equal(getattr(self, a), getattr(other, a))
                        for a in ("src", "dst", "t", "rel", "max_strong_id")))

    __hash__ = None

    def __repr__(self) -> str:
        return (f"TemporalMultiGraph(nodes={self.num_nodes}, edges={self.num_edges}, "
                f"T={self.T}, rels={self.relation_counts()})")

    def _compute_max_strong_id(self) -> np.ndarray:
        out = np.full(self.T, -1, dtype=np.int64)
        strong = self.rel == RelationKind.STRONG
        if np.any(strong):
            hi = np.zeros(self.T, dtype=np.int64) - 1
            np.maximum.at(hi, self.t[strong], self.dst[strong])  # dst > src after normalization
            out = np.maximum.accumulate(hi)
            # the ID trick only works if strong nodes were numbered in order of first appearance
            first = np.full(self.num_nodes, self.T, dtype=np.int64)
            np.minimum.at(first, self.src[strong], self.t[strong])
            np.minimum.at(first, self.dst[strong], self.t[strong])
            ids = np.flatnonzero(first < self.T)
            if ids.size and (ids[-1] != ids.size - 1 or np.any(np.diff(first[ids]) < 0)):
                raise ValueError("node IDs are not ordered by first strong appearance")
        return out

    def _check_t(self, t: int) -> None:
        if not 0 <= t < self.T:
            raise IndexError(f"timestamp {t} out of range [0, {self.T})")

    # ---- queries ------------------------------------------------------------

    def strong_membership(self, v: int, t: int) -> bool:
        """True iff `v` belongs to the cumulative strong node set through `t`."""
        self._check_t(t)
        return bool(v <= self.max_strong_id[t])

    def strong_nodes_at(self, t: int) -> np.ndarray:
        """Nodes incident to a strong edge in period `t` (not cumulative)."""
        self._check_t(t)
        m = (self.t == t) & (self.rel == RelationKind.STRONG)
        return np.unique(np.concatenate([self.src[m], self.dst[m]]))

    def nodes_at(self, t: int, rels=None) -> np.ndarray:
        self._check_t(t)
        m = (self.t == t) & _rel_mask(self.rel, rels)
        return np.unique(np.concatenate([self.src[m], self.dst[m]]))

    def neighbor_array(self, v: int, t: int, rels=None) -> np.ndarray:
        self._check_t(t)
        key = t * max(self.num_nodes, 1) + v
        lo, hi = np.searchsorted(self._hkey, [key, key + 1])
        nb = self._hv[lo:hi]
        if rels is not None:
            nb = nb[_rel_mask(self._hr[lo:hi], rels)]
        return np.unique(nb)

    def neighbors(self, v: int, t: int, rels=None) -> set[int]:
        return set(self.neighbor_array(v, t, rels).tolist())

    def degree(self, v: int, t: int, rels=None) -> int:
        return int(self.neighbor_array(v, t, rels).size)

    def degrees_at(self, t: int, rels=None) -> np.ndarray:
        """Degree of every node in period `t` (distinct neighbors)."""
        self._check_t(t)
        key = (t, None if rels is None else frozenset(rels))
        deg = self._deg_cache.get(key)
        if deg is None:
            m = (self.t == t) & _rel_mask(self.rel, rels)
            pairs = np.unique(np.stack([self.src[m], self.dst[m]], axis=1), axis=0)
            deg = np.bincount(pairs.reshape(-1), minlength=self.num_nodes).astype(np.int64)
            deg.flags.writeable = False
            self._deg_cache[key] = deg
        return deg

    def cold_start_nodes(self, t: int, C: int = 1) -> set[int]:
        """Strong nodes at `t` having at most `C` strong neighbors at `t`."""
        if C < 0:
            raise ValueError("C must be non-negative")
        strong = self.strong_nodes_at(t)
        deg = self.degrees_at(t, {RelationKind.STRONG})
        return set(strong[deg[strong] <= C].tolist())

    def augment(self, edges: Iterable[TemporalEdge]) -> "TemporalMultiGraph":
        """Return a new graph with relation-2 `edges` added."""
        edges = list(edges)
        bad = [e for e in edges
               if not (0 <= e.src < self.num_nodes and 0 <= e.dst < self.num_nodes)]
        if bad:
            raise ValueError(f"augmentation edges with unknown endpoints: {bad}")
        wrong = [e for e in edges if e.rel != RelationKind.COLD]
        if wrong:
            raise ValueError(f"augmentation edges must have rel=2: {wrong}")
        if not edges:
            return self
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 4)
        T = max(self.T, int(arr[:, 2].max()) + 1)
        return TemporalMultiGraph(
            np.concatenate([self.src, arr[:, 0]]), np.concatenate([self.dst, arr[:, 1]]),
            np.concatenate([self.t, arr[:, 2]]), np.concatenate([self.rel, arr[:, 3]]),
            self.node_keys, num_timestamps=T,
        )

    def without_relation(self, rel: int) -> "TemporalMultiGraph":
        m = self.rel != rel
        return TemporalMultiGraph(self.src[m], self.dst[m], self.t[m], self.rel[m],
                                  self.node_keys, num_timestamps=self.T)

    # ---- persistence --------------------------------------------------------

    def save(self, path: str | os.PathLike) -> None:
        """Write ``<path>.npz``, ``<path>.json`` sidecar and ``<path>.ids.json``."""
        path = os.fspath(path)
        with open(path + ".npz", "wb") as fh:
            np.savez(fh, src=self.src, dst=self.dst, t=self.t, rel=self.rel)
        id_path = path + ".ids.json"
        with open(id_path, "w", encoding="utf-8") as fh:
            json.dump(list(self.node_keys), fh, ensure_ascii=False)
        meta = {
            "T": self.T,
            "node_count": self.num_nodes,
            "edge_count": self.num_edges,
            "id_map": os.path.basename(id_path),
            "max_strong_id": self.max_strong_id.tolist(),
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TemporalMultiGraph":
        path = os.fspath(path)
        if path.endswith(".json") and not path.endswith(".ids.json"):
            path = path[: -len(".json")]
        with open(path + ".json", encoding="utf-8") as fh:
            meta = json.load(fh)
        with open(os.path.join(os.path.dirname(path), meta["id_map"]), encoding="utf-8") as fh:
            keys = json.load(fh)
        if len(keys) != meta["node_count"]:
            raise ValueError("ID map size does not match node_count")
        with np.load(path + ".npz") as z:
            return cls(z["src"], z["dst"], z["t"], z["rel"], keys,
                       num_timestamps=meta["T"], max_strong_id=meta["max_strong_id"])


def _iter_rows(stream, header: bool) -> Iterator[tuple[int, list[str]]]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(line for line in stream)
    first = True
    for row in reader:
        lineno = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        if first and header:
            first = False
            continue
        first = False
        yield lineno, [c.strip() for c in row]


def ingest_edges(stream, header: bool = False, bucket: int | None = None,
                 origin: int | None = None) -> tuple[TemporalMultiGraph, IngestSummary]:
    """Parse ``src,dst,timestamp,relation`` rows into a graph.

    Parameters
    ----------
    stream : str or iterable of str
        CSV text or lines.  ``#`` comment lines and blank lines are skipped.
    header : bool
        Skip the first data row.
    bucket : int, optional
        Divide raw timestamps into periods of this width, counted from
        `origin` (defaults to the smallest timestamp).

    Returns
    -------
    graph, summary
        Self-loop rows are reported in ``summary`` rather than raising.
    """
    summary = IngestSummary()
    rows = []
    for lineno, row in _iter_rows(stream, header):
        if len(row) != 4:
            raise ParseError(lineno, f"expected 4 fields, got {len(row)}")
        a, b, ts, rc = row
        if not a or not b:
            raise ParseError(lineno, "empty node key")
        try:
            ts_i = int(ts)
        except ValueError:
            raise ParseError(lineno, f"timestamp {ts!r} is not an integer") from None
        if ts_i < 0:
            raise ParseError(lineno, f"negative timestamp {ts_i}")
        try:
            rel = int(RelationKind.parse(rc))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        summary.rows_read += 1
        if a == b:
            summary.self_loops.append((lineno, a))
            continue
        rows.append((a, b, ts_i, rel))
    return _build(rows, summary, bucket, origin)


def _build(rows, summary, bucket, origin):
    if bucket is not None:
        if bucket <= 0:
            raise ValueError("bucket width must be positive")
        if rows:
            base = min(r[2] for r in rows) if origin is None else origin
            rows = [(a, b, (ts - base) // bucket, rel) for a, b, ts, rel in rows]
            if any(r[2] < 0 for r in rows):
                raise ValueError("timestamp earlier than bucketing origin")

    # strong-first ID assignment; python sort is stable so input order breaks ties
    ids: dict[str, int] = {}
    for a, b, _, _ in sorted((r for r in rows if r[3] == RelationKind.STRONG), key=lambda r: r[2]):
        for k in (a, b):
            if k not in ids:
                ids[k] = len(ids)
    for a, b, _, _ in sorted(rows, key=lambda r: r[2]):
        for k in (a, b):
            if k not in ids:
                ids[k] = len(ids)
    keys = [None] * len(ids)
    for k, i in ids.items():
        keys[i] = k
    if rows:
        arr = np.array([(ids[a], ids[b], ts, rel) for a, b, ts, rel in rows], dtype=np.int64)
    else:
        arr = np.zeros((0, 4), dtype=np.int64)
    g = TemporalMultiGraph(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], keys)
    summary.duplicates = len(rows) - g.num_edges
    return g, summary


def derive_strong_by_quantile(stream, quantile: float = 0.3, bucket: int | None = None,
                              header: bool = False) -> list[str]:
    """Turn weighted ``src,dst,weight,time[,...]`` rows into relation-coded rows.

    Weights are accumulated per undirected pair and period; pairs whose
    accumulated weight is at or above the `quantile` of all accumulated
    weights become strong (1), the rest weak (0).  Returns CSV lines suitable
    for :func:`ingest_edges` (timestamps already bucketed).
    """
    recs = []
    for lineno, row in _iter_rows(stream, header):
        if len(row) < 4:
            raise ParseError(lineno, f"expected at least 4 fields, got {len(row)}")
        try:
            w, ts = float(row[2]), int(float(row[3]))
        except ValueError:
            raise ParseError(lineno, "weight/time not numeric") from None
        recs.append((row[0], row[1], w, ts))
    if not recs:
        return []
    base = min(r[3] for r in recs)
    acc: dict[tuple, float] = {}
    for a, b, w, ts in recs:
        p = (ts - base) // bucket if bucket else ts
        key = (min(a, b), max(a, b), p)
        acc[key] = acc.get(key, 0.0) + w
    cut = float(np.quantile(np.fromiter(acc.values(), dtype=float), quantile))
    return [f"{a},{b},{p},{1 if w >= cut else 0}" for (a, b, p), w in acc.items()]
