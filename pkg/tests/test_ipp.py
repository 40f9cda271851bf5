import json
from collections import Counter

import numpy as np
import pytest

from tempim.graph import ingest_edges
from tempim.ipp import (IPP, FilterStats, active_members, brute_force_ipps,
                        enumerate_two_hop_motifs, filter_ipps, mine_ipps, read_ipps_jsonl,
                        validate_ipp, write_ipps_jsonl)

from conftest import random_graph


def nested_loop_motifs(g, rels=frozenset({0, 1})):
    """Every ordered pair of distinct-endpoint edge incidences at a shared middle node."""
    edges = {(e.src, e.dst, e.t) for e in g.edges() if e.rel in rels}
    inc = set()
    for a, b, t in edges:
        inc.add((a, b, t))
        inc.add((b, a, t))
    out = []
    for v1, v0, t0 in inc:
        for w1, v2, t1 in inc:
            if w1 == v1 and v2 != v0:
                out.append((v0, v1, v2, t0, t1))
    return out


def test_single_edge_no_motifs():
    g, _ = ingest_edges("a,b,0,1")
    assert list(enumerate_two_hop_motifs(g)) == []


def test_path_both_orientations():
    g, _ = ingest_edges("a,b,0,0\nb,c,1,0")
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert sorted(enumerate_two_hop_motifs(g)) == sorted([(a, b, c, 0, 1), (c, b, a, 1, 0)])


@pytest.mark.parametrize("seed", range(10))
def test_enumeration_matches_nested_loop(seed):
    g = random_graph(seed, n_nodes=50, n_edges=150, T=5, rel_probs=(0.4, 0.4, 0.2))
    assert Counter(enumerate_two_hop_motifs(g)) == Counter(nested_loop_motifs(g))


def test_forced_single_ipp(forced_ipp_graph):
    g = forced_ipp_graph
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert mine_ipps(g) == [IPP(a, b, c, 0, 1)]
    assert brute_force_ipps(g) == [IPP(a, b, c, 0, 1)]


def test_all_weak_graph_has_no_ipps():
    g, _ = ingest_edges("a,b,0,0\nb,c,1,0\nc,d,1,0")
    assert mine_ipps(g) == []
    assert brute_force_ipps(g) == []


def test_edge_condition_rejects_reverse_time(forced_ipp_graph):
    g = forced_ipp_graph
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert filter_ipps(g, [(a, b, c, 1, 0)]) == []


def test_node_condition_rejects_strong_middle():
    g, _ = ingest_edges("a,b,0,1\nb,c,0,0")
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert filter_ipps(g, [(a, b, c, 0, 0)]) == []


def test_same_period_wedge_admitted():
    g, _ = ingest_edges("x,a,0,1\na,b,0,0\nb,c,0,0")
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert IPP(a, b, c, 0, 0) in mine_ipps(g)


def test_parallel_relations_dedup():
    g, _ = ingest_edges("x,a,0,1\na,b,0,0\nb,c,1,0\nb,c,1,1")
    # b-c strong at t=1 does not matter: membership is tested at t0=0
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert mine_ipps(g) == [IPP(a, b, c, 0, 1)]


def test_brute_force_guard():
    lines = "\n".join(f"n{i},n{i + 1},0,0" for i in range(10_001))
    g, _ = ingest_edges(lines)
    with pytest.raises(RuntimeError, match="refused"):
        brute_force_ipps(g)


def test_empty_graph():
    g, _ = ingest_edges("")
    assert mine_ipps(g) == [] == brute_force_ipps(g)


@pytest.mark.parametrize("seed", range(25))
def test_mine_equals_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    g = random_graph(seed, n_nodes=int(rng.integers(5, 80)), n_edges=int(rng.integers(1, 300)),
                     T=int(rng.integers(1, 8)), rel_probs=(0.45, 0.45, 0.1))
    mined = mine_ipps(g)
    assert mined == brute_force_ipps(g)
    for ipp in mined:
        validate_ipp(g, ipp)


@pytest.mark.parametrize("seed", range(5))
def test_work_bound_one_evaluation_per_candidate(seed):
    g = random_graph(seed, n_nodes=40, n_edges=200, T=6)
    stats = FilterStats()
    mine_ipps(g, stats=stats)
    n_candidates = sum(1 for _ in enumerate_two_hop_motifs(g))
    assert stats.candidates == stats.evaluations == n_candidates


@pytest.mark.parametrize("threads", [2, 8])
def test_threads_do_not_change_output(threads):
    g = random_graph(7, n_nodes=100, n_edges=600, T=8)
    assert mine_ipps(g, threads=threads) == mine_ipps(g)


def test_determinism_and_sort_order():
    g = random_graph(11, n_nodes=60, n_edges=300, T=6)
    a, b = mine_ipps(g), mine_ipps(g)
    assert a == b
    assert a == sorted(a, key=IPP.sort_key)
    assert len(set(a)) == len(a)


def test_validator_rejects_bad(forced_ipp_graph):
    g = forced_ipp_graph
    a, b, c = (g.node_keys.index(k) for k in "abc")
    for bad in [IPP(a, b, c, 1, 0), IPP(b, a, c, 0, 1), IPP(a, b, a, 0, 1)]:
        with pytest.raises(ValueError):
            validate_ipp(g, bad)


def test_active_members():
    assert len(active_members([])) == 0
    labels = active_members([IPP(1, 2, 3, 0, 0), IPP(1, 4, 5, 0, 1), IPP(6, 2, 3, 0, 0)])
    assert labels.counts == {1: 2, 6: 1}
    assert labels.members == {1, 6}
    assert labels.to_json() == '{"1": 2, "6": 1}'


def test_jsonl_roundtrip(tmp_path):
    ipps = mine_ipps(random_graph(2, n_nodes=40, n_edges=200, T=5))
    p = tmp_path / "ipps.jsonl"
    with open(p, "w") as fh:
        write_ipps_jsonl(ipps, fh)
    with open(p) as fh:
        assert read_ipps_jsonl(fh) == ipps
    assert ipps
    assert list(json.loads(p.read_text().splitlines()[0])) == ["v0", "v1", "v2", "t0", "t1"]
