"""Command-line pipeline: ingest, mine, serialize, coldstart, simulate, stats,
aggregate, bench, cooldown and plot.

Every command writes into ``--out-dir`` and leaves a ``<command>.meta.json``
sidecar with the config hash, seed, library versions and input/output digests.

Exit codes:
  0  success
  1  unexpected internal error
  2  usage error (bad flags)
  3  missing input file
  4  malformed input / schema violation
  5  guard violation (size limits, invalid parameters)
  6  stale message in strict memory mode
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from importlib import metadata

import numpy as np

from . import __version__
from .coldstart import RetrievalParams, build_ptt, neighbor_retrieval, write_edges_csv
from .diffusion import (cooldown_filter, network_scale, one_neighbor_ratio, select_seeds,
                        spread_report)
from .graph import (ParseError, RelationKind, TemporalEdge, TemporalMultiGraph,
                    derive_strong_by_quantile, ingest_edges)
from .ipp import (FilterStats, active_members, mine_ipps, read_ipps_jsonl, write_ipps_jsonl,
                  LabelSet)
from .message_agg import (GRUWeights, MemoryStore, StaleMessageError, bench,
                          process_feed_batched, read_feed_csv)
from .serialize import (SerializationConfig, Serializer, read_corpus_jsonl,
                        write_corpus_jsonl)

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_MISSING, EXIT_SCHEMA, EXIT_GUARD, EXIT_STALE = range(7)


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


def _rels(text: str) -> frozenset:
    try:
        out = frozenset(int(RelationKind.parse(x)) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    return out


def _need(path: str) -> str:
    if not path or not os.path.exists(path):
        raise CLIError(EXIT_MISSING, "missing_input", f"input not found: {path}")
    return path


def _graph_prefix(path: str) -> str:
    if path.endswith(".json"):
        path = path[:-5]
    _need(path + ".json")
    return path


def _load_graph(path: str) -> TemporalMultiGraph:
    try:
        return TemporalMultiGraph.load(_graph_prefix(path))
    except (KeyError, ValueError) as exc:
        raise CLIError(EXIT_SCHEMA, "schema", f"bad graph container {path}: {exc}")


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


PATH_ARGS = ("edges", "graph", "ipps", "corpus", "labels", "seeds_file", "cold_edges", "feed",
             "gru_weights", "report", "events")


def _input_file(path: str) -> str | None:
    for cand in (path, path + ".npz"):
        if os.path.isfile(cand):
            return cand
    return None


def _params(args) -> dict:
    """Flag values with input paths reduced to basenames, so the hash is location-free."""
    skip = {"func", "config", "out_dir", "threads"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if k in PATH_ARGS and isinstance(v, str):
            v = os.path.basename(v)
        out[k] = sorted(v) if isinstance(v, (set, frozenset)) else v
    return out


def _inputs(args) -> dict:
    out = {}
    for k in PATH_ARGS:
        v = getattr(args, k, None)
        f = _input_file(v) if isinstance(v, str) else None
        if f:
            out[os.path.basename(f)] = _sha256(f)
    return out


def _versions() -> dict:
    out = {"tempim": __version__, "numpy": np.__version__}
    try:
        out["scipy"] = metadata.version("scipy")
    except metadata.PackageNotFoundError:
        pass
    return out


def _write_meta(args, outputs: list[str]) -> None:
    params = _params(args)
    blob = json.dumps(params, sort_keys=True, default=str)
    meta = {
        "command": args.command,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "seed": args.seed,
        "params": json.loads(blob),
        "inputs": _inputs(args),
        "versions": _versions(),
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    with open(_out(args, f"{args.command}.meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---- commands ----------------------------------------------------------------

def cmd_ingest(args) -> list[str]:
    with open(_need(args.edges), encoding="utf-8") as fh:
        try:
            if args.strong_quantile is not None:
                lines = derive_strong_by_quantile(fh, args.strong_quantile, args.bucket, args.header)
                graph, summary = ingest_edges(lines)
            else:
                graph, summary = ingest_edges(fh, header=args.header, bucket=args.bucket)
        except ParseError as exc:
            raise CLIError(EXIT_SCHEMA, "parse_error", str(exc))
    prefix = _out(args, "graph")
    graph.save(prefix)
    summ = _out(args, "ingest_summary.json")
    _dump_json({**summary.to_dict(), "nodes": graph.num_nodes, "edges": graph.num_edges,
                "T": graph.T, "relations": graph.relation_counts()}, summ)
    return [prefix + ".npz", prefix + ".json", prefix + ".ids.json", summ]


def cmd_mine(args) -> list[str]:
    graph = _load_graph(args.graph)
    stats = FilterStats()
    ipps = mine_ipps(graph, rels=args.rels, threads=args.threads, stats=stats)
    p1, p2 = _out(args, "ipps.jsonl"), _out(args, "labels.json")
    with open(p1, "w", encoding="utf-8") as fh:
        write_ipps_jsonl(ipps, fh)
    with open(p2, "w", encoding="utf-8") as fh:
        fh.write(active_members(ipps).to_json() + "\n")
    p3 = _out(args, "mine_stats.json")
    _dump_json({"candidates": stats.candidates, "evaluations": stats.evaluations,
                "ipps": len(ipps), "active_members": len(active_members(ipps))}, p3)
    return [p1, p2, p3]


def _read_ipps(path):
    with open(_need(path), encoding="utf-8") as fh:
        try:
            return read_ipps_jsonl(fh)
        except (KeyError, ValueError) as exc:
            raise CLIError(EXIT_SCHEMA, "schema", f"bad IPP file {path}: {exc}")


def _serial_cfg(args) -> SerializationConfig:
    try:
        return SerializationConfig(max_value=args.max_value, digits=args.digits,
                                   top_k=args.top_k, rels=args.rels)
    except ValueError as exc:
        raise CLIError(EXIT_GUARD, "invalid_config", str(exc))


def cmd_serialize(args) -> list[str]:
    graph = _load_graph(args.graph)
    ipps = _read_ipps(args.ipps)
    try:
        corpus = Serializer(graph, _serial_cfg(args)).corpus(ipps)
    except (ValueError, IndexError) as exc:
        raise CLIError(EXIT_SCHEMA, "schema", str(exc))
    p = _out(args, "istr.jsonl")
    with open(p, "w", encoding="utf-8") as fh:
        write_corpus_jsonl(corpus, fh)
    return [p]


def cmd_coldstart(args) -> list[str]:
    graph = _load_graph(args.graph)
    if args.corpus:
        with open(_need(args.corpus), encoding="utf-8") as fh:
            corpus = read_corpus_jsonl(fh)
    else:
        corpus = Serializer(graph, _serial_cfg(args)).corpus(_read_ipps(args.ipps))
    try:
        params = RetrievalParams(window=args.window, min_sim=args.min_sim, sample_k=args.sample_k,
                                 seed=args.seed, legacy_threshold=args.legacy_threshold,
                                 strict=args.strict)
        ptt = build_ptt(corpus)
        edges = neighbor_retrieval(corpus, ptt, params, graph=graph, only_cold=args.only_cold,
                                   cold_C=args.cold_c, digits=args.digits, threads=args.threads)
    except KeyError as exc:
        raise CLIError(EXIT_SCHEMA, "unresolvable_istr", str(exc))
    except ValueError as exc:
        raise CLIError(EXIT_GUARD, "invalid_params", str(exc))
    p = _out(args, "cold_edges.csv")
    with open(p, "w", encoding="utf-8", newline="") as fh:
        write_edges_csv(edges, fh)
    outs = [p]
    if args.write_augmented:
        prefix = _out(args, "augmented")
        graph.augment(edges).save(prefix)
        outs += [prefix + ".npz", prefix + ".json", prefix + ".ids.json"]
    return outs


def _read_edge_ids(path: str) -> list[TemporalEdge]:
    out = []
    with open(_need(path), encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                a, b, t, r = (int(x) for x in line.split(","))
            except ValueError:
                raise CLIError(EXIT_SCHEMA, "parse_error", f"{path} line {n}: expected 4 integers")
            out.append(TemporalEdge(min(a, b), max(a, b), t, r))
    return out


def cmd_simulate(args) -> list[str]:
    graph = _load_graph(args.graph)
    if args.cold_edges:
        try:
            graph = graph.augment(_read_edge_ids(args.cold_edges))
        except ValueError as exc:
            raise CLIError(EXIT_SCHEMA, "schema", str(exc))
    labels, explicit = None, None
    if args.strategy == "ipp-frequency":
        with open(_need(args.labels), encoding="utf-8") as fh:
            labels = LabelSet({int(k): int(v) for k, v in json.load(fh).items()})
    if args.strategy == "file":
        with open(_need(args.seeds_file), encoding="utf-8") as fh:
            explicit = [int(x) for x in fh.read().replace(",", " ").split()]
    t_end = graph.T - 1 if args.t_end is None else args.t_end
    try:
        seeds = select_seeds(graph, args.strategy, args.k, args.seed, labels, explicit)
        report = spread_report(graph, seeds.seeds, t_end, args.max_hops,
                               use_cold_edges=args.use_cold_edges)
        union = network_scale(graph, seeds.seeds, t_end, mode="union",
                              use_cold_edges=args.use_cold_edges)
    except (ValueError, IndexError) as exc:
        raise CLIError(EXIT_GUARD, "invalid_params", str(exc))
    p = _out(args, "spread.json")
    _dump_json({"strategy": seeds.strategy, "K": seeds.K, "seed": args.seed,
                "use_cold_edges": args.use_cold_edges, "union_scale": union,
                **report.to_dict()}, p)
    p2 = _out(args, "spread.csv")
    with open(p2, "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
    return [p, p2]


def cmd_stats(args) -> list[str]:
    graph = _load_graph(args.graph)
    per_t = []
    for t in range(graph.T):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            ratio = one_neighbor_ratio(graph, t, args.rels)
        per_t.append({
            "t": t,
            "nodes": int(graph.nodes_at(t, args.rels).size),
            "strong_nodes": int(graph.strong_nodes_at(t).size),
            "max_strong_id": int(graph.max_strong_id[t]),
            "one_neighbor_ratio": ratio,
            "cold_start_nodes": len(graph.cold_start_nodes(t, args.cold_c)),
        })
    p = _out(args, "stats.json")
    _dump_json({"nodes": graph.num_nodes, "edges": graph.num_edges, "T": graph.T,
                "relations": {str(k): v for k, v in graph.relation_counts().items()},
                "strong_nodes_total": int(graph.max_strong_id[-1] + 1) if graph.T else 0,
                "cold_c": args.cold_c, "per_timestamp": per_t}, p)
    return [p]


def _store_for(args, dim: int) -> MemoryStore:
    gru = None
    if args.rule == "gru":
        gru = GRUWeights.load(_need(args.gru_weights)) if args.gru_weights \
            else GRUWeights.toy(dim, args.memory_dim or dim, args.seed)
    return MemoryStore(args.memory_dim or dim, args.rule, alpha=args.alpha, gru=gru,
                       dtype=np.float32 if args.float32 else np.float64, strict=not args.lenient)


def cmd_aggregate(args) -> list[str]:
    try:
        feed = read_feed_csv(_need(args.feed))
    except ValueError as exc:
        raise CLIError(EXIT_SCHEMA, "schema", str(exc))
    try:
        store = _store_for(args, feed.dim)
        process_feed_batched(feed, args.batch, args.mode, store)
    except StaleMessageError as exc:
        raise CLIError(EXIT_STALE, "stale_message", str(exc))
    except ValueError as exc:
        raise CLIError(EXIT_GUARD, "invalid_params", str(exc))
    p = _out(args, "memory.npz")
    with open(p, "wb") as fh:
        np.savez(fh, state=store.state, last_update=store.last_update)
    p2 = _out(args, "memory_summary.json")
    _dump_json({"nodes": int(np.isfinite(store.last_update).sum()), "stale_dropped": store.stale,
                "mode": args.mode, "rule": args.rule, "batch": args.batch}, p2)
    return [p, p2]


def cmd_bench(args) -> list[str]:
    report = bench(feed_sizes=args.events, batch_sizes=args.batch_sizes, runs=args.runs,
                   mode=args.mode, rule=args.rule, dim=args.dim, n_nodes=args.nodes, seed=args.seed)
    p = _out(args, "bench.json")
    _dump_json(report, p)
    return [p]


def cmd_cooldown(args) -> list[str]:
    events = []
    with open(_need(args.events), encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                events.append((float(parts[0]), parts[1].strip()))
            except (ValueError, IndexError):
                raise CLIError(EXIT_SCHEMA, "parse_error", f"{args.events} line {n}: expected time,target")
    try:
        passed, dropped = cooldown_filter(events, args.limit, args.horizon)
    except ValueError as exc:
        raise CLIError(EXIT_SCHEMA, "schema", str(exc))
    p = _out(args, "cooldown.csv")
    with open(p, "w", encoding="utf-8") as fh:
        for t, target in passed:
            fh.write(f"{t!r},{target}\n")
    p2 = _out(args, "cooldown_summary.json")
    _dump_json({"passed": len(passed), "dropped": len(dropped)}, p2)
    return [p, p2]


def cmd_plot(args) -> list[str]:
    with open(_need(args.report), encoding="utf-8") as fh:
        rep = json.load(fh)
    if args.format == "csv":
        p = _out(args, "curves.csv")
        with open(p, "w", encoding="utf-8") as fh:
            fh.write("kind,index,value\n")
            for t, v in enumerate(rep["normalized_per_t"]):
                fh.write(f"spread,{t},{v!r}\n")
            for h, c in enumerate(rep["hop_counts"]):
                fh.write(f"hop,{h},{c}\n")
        return [p]
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise CLIError(EXIT_GUARD, "missing_dependency", "SVG output needs matplotlib; use --format csv")
    plt.rcParams["svg.hashsalt"] = "tempim"
    fig, (a, b) = plt.subplots(1, 2, figsize=(8, 3))
    a.plot(rep["normalized_per_t"], marker="o")
    a.set_xlabel("period")
    a.set_ylabel("spread")
    b.plot(rep["hop_counts"], marker="s")
    b.set_xlabel("hop")
    b.set_ylabel("reached")
    fig.tight_layout()
    p = _out(args, "curves.svg")
    fig.savefig(p, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return [p]


# ---- parser ----------------------------------------------------------------------

def _add_serial_flags(p):
    p.add_argument("--max-value", type=int, default=99)
    p.add_argument("--digits", type=int, default=2)
    p.add_argument("--top-k", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; keys are flag names (flags win)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out-dir", default="out")

    parser = argparse.ArgumentParser(
        prog="tempim", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="CSV edges -> graph container")
    p.add_argument("--edges", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--bucket", type=int, help="period width for raw timestamps (e.g. 5184000 = 60 days)")
    p.add_argument("--strong-quantile", type=float,
                   help="input is src,dst,weight,time; derive strong edges by accumulated-weight quantile")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mine", parents=[common], help="mine 2-hop IPPs and active members")
    p.add_argument("--graph", required=True)
    p.add_argument("--rels", type=_rels, default=frozenset({0, 1}))
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("serialize", parents=[common], help="IPPs -> IStr corpus")
    p.add_argument("--graph", required=True)
    p.add_argument("--ipps", required=True)
    p.add_argument("--rels", type=_rels, default=frozenset({0, 1}))
    _add_serial_flags(p)
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("coldstart", parents=[common], help="trie retrieval of cold-start edges")
    p.add_argument("--graph", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ipps")
    src.add_argument("--corpus")
    p.add_argument("--rels", type=_rels, default=frozenset({0, 1}))
    _add_serial_flags(p)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-sim", type=int, default=17)
    p.add_argument("--sample-k", type=int, default=3)
    p.add_argument("--only-cold", action="store_true")
    p.add_argument("--cold-c", type=int, default=1)
    p.add_argument("--legacy-threshold", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--write-augmented", action="store_true")
    p.set_defaults(func=cmd_coldstart)

    p = sub.add_parser("simulate", parents=[common], help="seed selection and spread report")
    p.add_argument("--graph", required=True)
    p.add_argument("--strategy", choices=["random", "degree", "ipp-frequency", "file"], default="degree")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--labels")
    p.add_argument("--seeds-file")
    p.add_argument("--t-end", type=int)
    p.add_argument("--max-hops", type=int, default=3)
    p.add_argument("--cold-edges", help="augmentation CSV (node IDs) from coldstart")
    p.add_argument("--use-cold-edges", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", parents=[common], help="per-period graph and cold-start statistics")
    p.add_argument("--graph", required=True)
    p.add_argument("--rels", type=_rels, default=frozenset({0, 1}))
    p.add_argument("--cold-c", type=int, default=1)
    p.set_defaults(func=cmd_stats)

    def _agg_flags(p):
        p.add_argument("--mode", choices=["lm", "mm"], default="lm")
        p.add_argument("--rule", choices=["replace", "ema", "gru"], default="replace")

    p = sub.add_parser("aggregate", parents=[common], help="batched memory update over a feed")
    p.add_argument("--feed", required=True)
    _agg_flags(p)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--memory-dim", type=int)
    p.add_argument("--gru-weights")
    p.add_argument("--float32", action="store_true")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("bench", parents=[common], help="loop vs batched timing (not byte-stable)")
    _agg_flags(p)
    p.add_argument("--events", type=int, nargs="+", default=[100_000])
    p.add_argument("--batch-sizes", type=int, nargs="+", default=[256, 1024, 4096])
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--nodes", type=int, default=2000)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cooldown", parents=[common], help="apply the invitation cool-down rule")
    p.add_argument("--events", required=True, help="CSV time,target (time-ordered)")
    p.add_argument("--limit", type=int, default=10)
    p.add_argument("--horizon", type=float, default=1.0)
    p.set_defaults(func=cmd_cooldown)

    p = sub.add_parser("plot", parents=[common], help="curves from a spread report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["csv", "svg"], default="csv")
    p.set_defaults(func=cmd_plot)
    return parser


def _apply_config(parser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    with open(_need(args.config), encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CLIError(EXIT_SCHEMA, "schema", f"bad config: {exc}")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise CLIError(EXIT_SCHEMA, "schema", f"unknown config keys: {unknown}")
    for a in sub._actions:
        if a.dest in cfg and a.type is not None and isinstance(cfg[a.dest], str):
            cfg[a.dest] = a.type(cfg[a.dest])
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.threads < 1:
            raise CLIError(EXIT_GUARD, "invalid_params", "--threads must be >= 1")
        outputs = args.func(args)
        _write_meta(args, outputs)
    except CLIError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc), "exit_code": exc.code}),
              file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": "internal", "message": repr(exc), "exit_code": EXIT_INTERNAL}),
              file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
