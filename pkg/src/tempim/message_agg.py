"""Batched latest-message aggregation and node memory updates.

The tensorized path aggregates a whole batch with sorts and segment
reductions and updates every touched memory row at once.  The loop path
walks events one by one with a dictionary, the way a generic aggregator
does, and serves as the correctness oracle and the benchmark baseline.
"""

from __future__ import annotations

import json
import os
import time as _time
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "Message",
    "Feed",
    "GRUWeights",
    "MemoryStore",
    "StaleMessageError",
    "aggregate",
    "aggregate_arrays",
    "update_memory",
    "process_feed_batched",
    "process_feed_loop",
    "random_feed",
    "read_feed_csv",
    "write_feed_csv",
    "bench",
]

MODES = ("lm", "mm")
RULES = ("replace", "ema", "gru")


class StaleMessageError(ValueError):
    pass


class Message(NamedTuple):
    node: int
    event_time: float
    vec: np.ndarray
    batch_pos: int = 0


@dataclass
class Feed:
    """Time-ordered message feed in columnar form."""
    node: np.ndarray
    time: np.ndarray
    vecs: np.ndarray

    def __post_init__(self):
        self.node = np.asarray(self.node, dtype=np.int64)
        self.time = np.asarray(self.time, dtype=np.float64)
        self.vecs = np.asarray(self.vecs, dtype=np.float64)
        if self.vecs.ndim != 2 or not (self.node.shape[0] == self.time.shape[0] == self.vecs.shape[0]):
            raise ValueError("feed columns must align and vecs must be 2-D")
        if np.any(self.time < 0):
            raise ValueError("event times must be non-negative")
        if np.any(np.diff(self.time) < 0):
            raise ValueError("feed is not time-ordered")

    def __len__(self) -> int:
        return int(self.node.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vecs.shape[1])


def random_feed(n_events: int, n_nodes: int, dim: int, seed: int = 0) -> Feed:
    """Feed with strictly increasing times and uniform [-1, 1) vectors."""
    rng = np.random.default_rng(seed)
    times = np.cumsum(rng.integers(1, 4, size=n_events)).astype(np.float64)
    return Feed(rng.integers(0, n_nodes, size=n_events), times,
                rng.uniform(-1.0, 1.0, size=(n_events, dim)))


def read_feed_csv(path: str | os.PathLike) -> Feed:
    """Read ``node,event_time,v_0..v_{d-1}`` rows (``#`` comments allowed)."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] < 3:
        raise ValueError("feed rows need node, event_time and at least one component")
    return Feed(data[:, 0].astype(np.int64), data[:, 1], data[:, 2:])


def write_feed_csv(feed: Feed, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for n, t, v in zip(feed.node.tolist(), feed.time.tolist(), feed.vecs):
            fh.write(",".join([str(n), repr(t)] + [repr(float(x)) for x in v]) + "\n")


# ---- aggregation -----------------------------------------------------------

def aggregate_arrays(node: np.ndarray, time: np.ndarray, vecs: np.ndarray, mode: str = "lm"):
    """Reduce one batch to a single message per node.

    Returns ``(nodes, times, vecs)`` with `nodes` ascending.  ``lm`` keeps the
    message with the largest time (later batch position on ties); ``mm``
    averages all of a node's messages and stamps the largest time.
    """
    if mode not in MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if node.size == 0:
        return node, time, vecs
    pos = np.arange(node.size)
    if mode == "lm":
        order = np.lexsort((pos, time, node))
        sn = node[order]
        last = np.flatnonzero(np.append(sn[1:] != sn[:-1], True))
        pick = order[last]
        return node[pick], time[pick], vecs[pick]
    order = np.argsort(node, kind="stable")
    sn = node[order]
    starts = np.flatnonzero(np.insert(sn[1:] != sn[:-1], 0, True))
    counts = np.diff(np.append(starts, sn.size))
    sums = np.add.reduceat(vecs[order], starts, axis=0)
    tmax = np.maximum.reduceat(time[order], starts)
    return sn[starts], tmax, sums / counts[:, None]


def aggregate(batch: Iterable[Message], mode: str = "lm") -> dict[int, Message]:
    batch = list(batch)
    if not batch:
        return {}
    dims = {np.shape(m.vec) for m in batch}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValueError(f"message vectors must share one 1-D shape, got {sorted(dims)}")
    node = np.array([m.node for m in batch], dtype=np.int64)
    time = np.array([m.event_time for m in batch], dtype=np.float64)
    vecs = np.stack([np.asarray(m.vec, dtype=np.float64) for m in batch])
    # batch_pos decides LM ties; reorder so array position matches it
    order = np.argsort([m.batch_pos for m in batch], kind="stable")
    n, t, v = aggregate_arrays(node[order], time[order], vecs[order], mode)
    if mode == "lm":
        pos_of = {}
        for m in batch:
            key = (m.node, m.event_time)
            pos_of[key] = max(pos_of.get(key, m.batch_pos), m.batch_pos)
        return {int(a): Message(int(a), float(b), c, pos_of[(int(a), float(b))])
                for a, b, c in zip(n, t, v)}
    return {int(a): Message(int(a), float(b), c, -1) for a, b, c in zip(n, t, v)}


# ---- memory ----------------------------------------------------------------

@dataclass
class GRUWeights:
    """Fixed GRU cell: gates stacked as (update, reset, candidate)."""
    w_in: np.ndarray   # (3m, d)
    w_hid: np.ndarray  # (3m, m)
    bias: np.ndarray   # (3m,)

    def __post_init__(self):
        self.w_in = np.asarray(self.w_in, dtype=np.float64)
        self.w_hid = np.asarray(self.w_hid, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        m3 = self.w_in.shape[0]
        if m3 % 3 or self.w_hid.shape != (m3, m3 // 3) or self.bias.shape != (m3,):
            raise ValueError("inconsistent GRU weight shapes")

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]

    @property
    def memory_dim(self) -> int:
        return self.w_hid.shape[1]

    @classmethod
    def toy(cls, input_dim: int, memory_dim: int, seed: int = 0, scale: float = 0.3) -> "GRUWeights":
        rng = np.random.default_rng(seed)
        m3 = 3 * memory_dim
        return cls(rng.normal(0, scale, (m3, input_dim)), rng.normal(0, scale, (m3, memory_dim)),
                   rng.normal(0, scale, m3))

    def save(self, path: str | os.PathLike) -> None:
        """JSON header line, then float64 little-endian row-major w_in, w_hid, bias."""
        header = {"input_dim": self.input_dim, "memory_dim": self.memory_dim,
                  "dtype": "<f8", "order": ["w_in", "w_hid", "bias"], "gates": ["z", "r", "n"]}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
            for a in (self.w_in, self.w_hid, self.bias):
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GRUWeights":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            raw = np.frombuffer(fh.read(), dtype=header.get("dtype", "<f8"))
        d, m = header["input_dim"], header["memory_dim"]
        sizes = [3 * m * d, 3 * m * m, 3 * m]
        if raw.size != sum(sizes):
            raise ValueError(f"weight file holds {raw.size} values, expected {sum(sizes)}")
        a, b = sizes[0], sizes[0] + sizes[1]
        return cls(raw[:a].reshape(3 * m, d), raw[a:b].reshape(3 * m, m), raw[b:])

    def step(self, x: np.ndarray, h: np.ndarray) -> np.ndarray:
        """One update for row-stacked inputs ``x (k, d)`` and states ``h (k, m)``."""
        # gates are always evaluated in float64; only the stored state takes h's dtype
        m = self.memory_dim
        h64 = h.astype(np.float64, copy=False)
        gi = x.astype(np.float64, copy=False) @ self.w_in.T
        gh = h64 @ self.w_hid.T
        b = self.bias
        z = _sigmoid(gi[:, :m] + gh[:, :m] + b[:m])
        r = _sigmoid(gi[:, m:2 * m] + gh[:, m:2 * m] + b[m:2 * m])
        n = np.tanh(gi[:, 2 * m:] + r * gh[:, 2 * m:] + b[2 * m:])
        return ((1 - z) * n + z * h64).astype(h.dtype, copy=False)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class MemoryStore:
    """Per-node state vectors with last-update times.

    Rows are created lazily (zero state, last update ``-inf``) the first time
    a node is touched.  ``strict=True`` raises on messages older than a
    node's last update; otherwise they are dropped and counted in ``stale``.
    """

    def __init__(self, memory_dim: int, rule: str = "replace", alpha: float = 0.5,
                 gru: GRUWeights | None = None, dtype=np.float64, strict: bool = True,
                 capacity: int = 0):
        if rule not in RULES:
            raise ValueError(f"unknown update rule {rule!r}")
        if rule == "gru":
            if gru is None:
                raise ValueError("gru rule needs weights")
            if gru.memory_dim != memory_dim:
                raise ValueError("GRU memory dim does not match store")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.memory_dim = memory_dim
        self.rule = rule
        self.alpha = alpha
        self.gru = gru
        self.dtype = np.dtype(dtype)
        self.strict = strict
        self.stale = 0
        self.state = np.zeros((capacity, memory_dim), dtype=self.dtype)
        self.last_update = np.full(capacity, -np.inf)

    def copy(self) -> "MemoryStore":
        out = MemoryStore(self.memory_dim, self.rule, self.alpha, self.gru, self.dtype, self.strict)
        out.state, out.last_update, out.stale = self.state.copy(), self.last_update.copy(), self.stale
        return out

    def reserve(self, n: int) -> None:
        cur = self.state.shape[0]
        if n > cur:
            new = max(n, 2 * cur)
            self.state = np.vstack([self.state, np.zeros((new - cur, self.memory_dim), self.dtype)])
            self.last_update = np.concatenate([self.last_update, np.full(new - cur, -np.inf)])

    def _project(self, vecs: np.ndarray) -> np.ndarray:
        d, m = vecs.shape[1], self.memory_dim
        if d >= m:
            return vecs[:, :m]
        return np.hstack([vecs, np.zeros((vecs.shape[0], m - d), vecs.dtype)])

    def apply(self, nodes: np.ndarray, times: np.ndarray, vecs: np.ndarray) -> None:
        """Vectorized update for distinct `nodes`."""
        if nodes.size == 0:
            return
        self.reserve(int(nodes.max()) + 1)
        stale = times < self.last_update[nodes]
        if np.any(stale):
            if self.strict:
                i = int(np.flatnonzero(stale)[0])
                raise StaleMessageError(
                    f"message for node {nodes[i]} at {times[i]} older than {self.last_update[nodes[i]]}")
            self.stale += int(stale.sum())
            keep = ~stale
            nodes, times, vecs = nodes[keep], times[keep], vecs[keep]
        x = vecs.astype(self.dtype, copy=False)
        if self.rule == "replace":
            self.state[nodes] = self._project(x)
        elif self.rule == "ema":
            a = self.dtype.type(self.alpha)
            self.state[nodes] = (1 - a) * self.state[nodes] + a * self._project(x)
        else:
            self.state[nodes] = self.gru.step(x, self.state[nodes])
        self.last_update[nodes] = times

    def apply_one(self, node: int, t: float, vec: np.ndarray) -> None:
        """Single-row update used by the loop path."""
        if node >= self.state.shape[0]:
            self.reserve(node + 1)
        if t < self.last_update[node]:
            if self.strict:
                raise StaleMessageError(
                    f"message for node {node} at {t} older than {self.last_update[node]}")
            self.stale += 1
            return
        x = np.asarray(vec, dtype=self.dtype)
        if self.rule == "gru":
            self.state[node] = self.gru.step(x[None, :], self.state[node][None, :])[0]
        else:
            d, m = x.shape[0], self.memory_dim
            if d != m:
                x = x[:m] if d > m else np.concatenate([x, np.zeros(m - d, self.dtype)])
            if self.rule == "replace":
                self.state[node] = x
            else:
                a = self.dtype.type(self.alpha)
                self.state[node] = (1 - a) * self.state[node] + a * x
        self.last_update[node] = t

    def as_dict(self) -> dict:
        return {"state": self.state, "last_update": self.last_update}


def update_memory(store: MemoryStore, aggregated: dict[int, Message]) -> MemoryStore:
    """Apply aggregated messages to `store` in place and return it."""
    if aggregated:
        nodes = np.array(sorted(aggregated), dtype=np.int64)
        times = np.array([aggregated[n].event_time for n in nodes.tolist()], dtype=np.float64)
        vecs = np.stack([np.asarray(aggregated[n].vec) for n in nodes.tolist()])
        store.apply(nodes, times, vecs)
    return store


def process_feed_batched(feed: Feed, batch_size: int, mode: str, store: MemoryStore) -> MemoryStore:
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    vecs = feed.vecs.astype(store.dtype, copy=False)
    for lo in range(0, len(feed), batch_size):
        hi = lo + batch_size
        n, t, v = aggregate_arrays(feed.node[lo:hi], feed.time[lo:hi], vecs[lo:hi], mode)
        store.apply(n, t, v)
    return store


def process_feed_loop(feed: Feed, batch_size: int, mode: str, store: MemoryStore) -> MemoryStore:
    """Per-event reference: dictionary aggregation and one row update per node."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if mode not in MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    nodes, times, vecs = feed.node.tolist(), feed.time.tolist(), feed.vecs
    for lo in range(0, len(feed), batch_size):
        hi = min(lo + batch_size, len(feed))
        if mode == "lm":
            latest: dict = {}
            for i in range(lo, hi):
                cur = latest.get(nodes[i])
                if cur is None or times[i] >= times[cur]:
                    latest[nodes[i]] = i
            for n in sorted(latest):
                i = latest[n]
                store.apply_one(n, times[i], vecs[i])
        else:
            acc: dict = {}
            for i in range(lo, hi):
                s = acc.get(nodes[i])
                if s is None:
                    acc[nodes[i]] = [vecs[i].copy(), 1, times[i]]
                else:
                    s[0] += vecs[i]
                    s[1] += 1
                    s[2] = max(s[2], times[i])
            for n in sorted(acc):
                total, c, t = acc[n]
                store.apply_one(n, t, total / c)
    return store


def bench(feed_sizes=(100_000,), batch_sizes=(256, 1024, 4096), runs: int = 5,
          mode: str = "lm", rule: str = "replace", dim: int = 32, n_nodes: int = 2000,
          seed: int = 0, dtype=np.float32) -> dict:
    """Median wall-clock of loop vs batched paths at the same dtype; returns a JSON-ready report."""
    gru = GRUWeights.toy(dim, dim, seed) if rule == "gru" else None
    rows = []
    for n in feed_sizes:
        feed = random_feed(n, n_nodes, dim, seed)
        for b in batch_sizes:
            timings = {}
            for name, fn in (("loop", process_feed_loop), ("batched", process_feed_batched)):
                ts = []
                for _ in range(runs):
                    store = MemoryStore(dim, rule, gru=gru, dtype=dtype, capacity=n_nodes)
                    t0 = _time.perf_counter()
                    fn(feed, b, mode, store)
                    ts.append(_time.perf_counter() - t0)
                timings[name] = float(np.median(ts))
            rows.append({"events": n, "batch": b, "loop_s": timings["loop"],
                         "batched_s": timings["batched"],
                         "speedup": timings["loop"] / timings["batched"]})
    return {"mode": mode, "rule": rule, "dim": dim, "nodes": n_nodes, "runs": runs,
            "dtype": np.dtype(dtype).name,
            "seed": seed, "results": rows}
