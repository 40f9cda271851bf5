from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tempim.graph import ingest_edges
from tempim.ipp import IPP, mine_ipps
from tempim.serialize import (SerializationConfig, Serializer, decode, degree_count, encode,
                              read_corpus_jsonl, sim, write_corpus_jsonl)

from conftest import random_graph, scan_neighbors

CFG = SerializationConfig()


def test_config_lengths():
    assert (CFG.node_width, CFG.length, CFG.n_numbers) == (14, 42, 21)
    with pytest.raises(ValueError):
        SerializationConfig(max_value=100, digits=2)


def test_degree_count_star():
    g, _ = ingest_edges("c,a,0,0\nc,b,0,0\nc,d,0,0\nz,y,1,0")
    c, a = g.node_keys.index("c"), g.node_keys.index("a")
    assert degree_count(g, c, 1, 0) == 3
    assert degree_count(g, a, 3, 0) == 1
    z = g.node_keys.index("z")
    assert all(degree_count(g, z, k, 0) == 0 for k in range(5))


@pytest.mark.parametrize("seed", range(8))
def test_degree_count_matches_tally(seed):
    g = random_graph(seed, n_nodes=30, n_edges=120, T=3)
    rels = {0, 1}
    for t in range(g.T):
        for v in range(g.num_nodes):
            tally = Counter(len(scan_neighbors(g, u, t, rels)) for u in scan_neighbors(g, v, t, rels))
            for k in range(0, 12):
                assert degree_count(g, v, k, t, rels) == tally.get(k, 0)


def test_isolated_node_all_zero():
    g, _ = ingest_edges("a,b,0,0\nc,d,1,0")
    assert Serializer(g).node(g.node_keys.index("a"), 1) == "00000000000000"


def test_degree_clipped():
    text = "\n".join(f"hub,l{i},0,0" for i in range(150))
    g, _ = ingest_edges(text)
    s = Serializer(g).node(g.node_keys.index("hub"), 0)
    assert s[:2] == "99"
    # 150 leaves of degree 1: count clipped too
    assert s[2:6] == "0199"


def test_neighbor_degrees_112():
    # v's neighbors: p (deg 1), q (deg 1), r (deg 2 via r-s)
    g, _ = ingest_edges("v,p,0,0\nv,q,0,0\nv,r,0,0\nr,s,0,0")
    assert Serializer(g).node(g.node_keys.index("v"), 0) == "03" + "0102" + "0201" + "0000"


def test_tie_break_smaller_degree_first():
    # neighbor degrees {1, 2, 3}, each once
    g, _ = ingest_edges("v,a,0,0\nv,b,0,0\nb,b2,0,0\nv,c,0,0\nc,c2,0,0\nc,c3,0,0")
    assert Serializer(g).node(g.node_keys.index("v"), 0) == "03" + "0101" + "0201" + "0301"


def test_forced_ipp_string(forced_ipp_graph):
    g = forced_ipp_graph
    (ipp,) = mine_ipps(g)
    # hand computation: c@1 {b:1}, b@1 {c:1}, a@0 {x:1, b:1}
    expect = "01" "0101" "0000" "0000" + "01" "0101" "0000" "0000" + "02" "0102" "0000" "0000"
    ser = Serializer(g)
    assert ser.ipp(ipp) == expect
    assert ser.ipp(ipp)[:14] == ser.node(ipp.v2, ipp.t1)


def test_ipp_over_isolated_nodes_all_zero():
    g, _ = ingest_edges("a,b,0,0\nb,c,0,0\nx,y,1,0\nx,y,2,0")
    a, b, c = (g.node_keys.index(k) for k in "abc")
    assert Serializer(g).ipp(IPP(a, b, c, 2, 2)) == "0" * 42


def test_missing_endpoint_errors():
    g, _ = ingest_edges("a,b,0,0")
    with pytest.raises(ValueError):
        Serializer(g).ipp(IPP(0, 1, 7, 0, 0))


def test_sim_basics():
    s = "0102030405"
    assert sim(s, s) == 5
    assert sim(s, "9998979695") == 0
    # matches are positional numbers, not characters
    assert sim("1100", "1001") == 0
    with pytest.raises(ValueError):
        sim("01", "0102")


def _oracle_sim(a, b):
    return sum(x == y for x, y in zip(decode(a), decode(b)))


@pytest.mark.parametrize("seed", range(4))
def test_corpus_roundtrip_and_sim(seed, tmp_path):
    g = random_graph(seed, n_nodes=60, n_edges=400, T=5)
    corpus = Serializer(g).corpus(mine_ipps(g))
    assert corpus
    strings = [r.istr for r in corpus]
    for s in strings:
        nums = decode(s)
        assert len(s) == CFG.length and len(nums) == CFG.n_numbers
        assert all(0 <= x <= 99 for x in nums)
        assert encode(nums) == s
        assert sim(s, s) == CFG.n_numbers
    rng = np.random.default_rng(seed)
    for _ in range(200):
        a, b = rng.choice(len(strings), 2)
        assert sim(strings[a], strings[b]) == sim(strings[b], strings[a]) == _oracle_sim(strings[a], strings[b])
    p = tmp_path / "c.jsonl"
    with open(p, "w") as fh:
        write_corpus_jsonl(corpus, fh)
    with open(p) as fh:
        assert read_corpus_jsonl(fh) == corpus


def test_serialization_is_pure():
    g = random_graph(5, n_nodes=40, n_edges=200, T=4)
    a, b = Serializer(g), Serializer(g)
    for v in range(g.num_nodes):
        assert a.node(v, 2) == b.node(v, 2) == a.node(v, 2)


@given(st.lists(st.integers(0, 99), min_size=0, max_size=30))
def test_encode_decode_hypothesis(nums):
    assert decode(encode(nums)) == nums


def test_decode_rejects_garbage():
    for bad in ("012", "0a", "1²"):
        with pytest.raises(ValueError):
            decode(bad)
