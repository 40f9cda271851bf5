"""Fixed-width numeric serialization of IPP neighborhoods.

Each node at a period becomes ``[degree][deg-value][count]*top_k``: its own
degree followed by the most frequent neighbor degrees with their counts
(count descending, smaller degree first on ties), every number clipped to
``max_value`` and zero-padded to ``digits`` characters.  An IPP string is
the concatenation of the blocks for ``v2@t1``, ``v1@t1`` and ``v0@t0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .graph import DEFAULT_RELS, TemporalMultiGraph
from .ipp import IPP

__all__ = [
    "SerializationConfig",
    "IStrRecord",
    "Serializer",
    "degree_count",
    "decode",
    "encode",
    "sim",
    "write_corpus_jsonl",
    "read_corpus_jsonl",
]


@dataclass(frozen=True)
class SerializationConfig:
    max_value: int = 99
    digits: int = 2
    top_k: int = 3
    rels: frozenset = DEFAULT_RELS

    def __post_init__(self):
        if self.digits < 1 or self.top_k < 0:
            raise ValueError("digits must be >= 1 and top_k >= 0")
        if not 0 <= self.max_value < 10 ** self.digits:
            raise ValueError(f"max_value {self.max_value} does not fit in {self.digits} digits")
        object.__setattr__(self, "rels", frozenset(self.rels))

    @property
    def node_width(self) -> int:
        return self.digits * (1 + 2 * self.top_k)

    @property
    def length(self) -> int:
        return 3 * self.node_width

    @property
    def n_numbers(self) -> int:
        return self.length // self.digits


class IStrRecord(NamedTuple):
    """One serialized IPP: the string, its end node and the period it ends in."""
    istr: str
    v2: int
    t1: int


def degree_count(graph: TemporalMultiGraph, v: int, k: int, t: int, rels=DEFAULT_RELS) -> int:
    """Number of neighbors of `v` at `t` whose own degree at `t` equals `k`."""
    if k < 0:
        raise ValueError("k must be non-negative")
    deg = graph.degrees_at(t, rels)
    nb = graph.neighbor_array(v, t, rels)
    return int(np.sum(deg[nb] == k))


def encode(numbers: Iterable[int], digits: int = 2) -> str:
    out = []
    for x in numbers:
        x = int(x)
        if not 0 <= x < 10 ** digits:
            raise ValueError(f"{x} does not fit in {digits} digits")
        out.append(str(x).zfill(digits))
    return "".join(out)


def decode(istr: str, digits: int = 2) -> list[int]:
    if len(istr) % digits or (istr and not (istr.isascii() and istr.isdigit())):
        raise ValueError(f"not a {digits}-digit numeric string: {istr!r}")
    return [int(istr[i:i + digits]) for i in range(0, len(istr), digits)]


def sim(a: str, b: str, digits: int = 2) -> int:
    """Count positions where the two strings hold the same number."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    return sum(a[i:i + digits] == b[i:i + digits] for i in range(0, len(a), digits))


class Serializer:
    """Serialize nodes and IPPs of one graph; caches per-period degree tables."""

    def __init__(self, graph: TemporalMultiGraph, cfg: SerializationConfig | None = None):
        self.graph = graph
        self.cfg = cfg or SerializationConfig()

    def numbers(self, v: int, t: int) -> list[int]:
        cfg = self.cfg
        deg = self.graph.degrees_at(t, cfg.rels)
        nb = self.graph.neighbor_array(v, t, cfg.rels)
        vals, counts = np.unique(deg[nb], return_counts=True)
        order = np.lexsort((vals, -counts))[: cfg.top_k]
        out = [nb.size]
        for i in order:
            out.extend((int(vals[i]), int(counts[i])))
        out.extend([0] * (2 * (cfg.top_k - order.size)))
        return [min(x, cfg.max_value) for x in out]

    def node(self, v: int, t: int) -> str:
        if not 0 <= v < self.graph.num_nodes:
            raise ValueError(f"node {v} not in graph")
        return encode(self.numbers(v, t), self.cfg.digits)

    def ipp(self, ipp: IPP) -> str:
        return self.node(ipp.v2, ipp.t1) + self.node(ipp.v1, ipp.t1) + self.node(ipp.v0, ipp.t0)

    def corpus(self, ipps: Iterable[IPP]) -> list[IStrRecord]:
        return [IStrRecord(self.ipp(p), p.v2, p.t1) for p in ipps]


def write_corpus_jsonl(records: Iterable[IStrRecord], fh) -> None:
    for r in records:
        fh.write(json.dumps({"istr": r.istr, "v2": r.v2, "t1": r.t1}) + "\n")


def read_corpus_jsonl(fh) -> list[IStrRecord]:
    out = []
    for line in fh:
        line = line.strip()
        if line:
            d = json.loads(line)
            out.append(IStrRecord(d["istr"], int(d["v2"]), int(d["t1"])))
    return out
