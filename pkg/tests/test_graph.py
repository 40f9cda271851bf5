import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tempim.graph import (ParseError, RelationKind, TemporalEdge, TemporalMultiGraph,
                          derive_strong_by_quantile, ingest_edges)

from conftest import explicit_strong_sets, random_graph, scan_neighbors


def test_minimal_two_edge_graph():
    g, summary = ingest_edges("a,b,0,1\nb,c,1,1")
    assert g.num_nodes == 3
    assert g.relation_counts()[1] == 2
    assert g.T == 2
    assert summary.rows_read == 2


def test_duplicates_collapse():
    g, summary = ingest_edges("a,b,0,1\na,b,0,1\nb,a,0,1")
    assert g.num_edges == 1
    assert summary.duplicates == 2


def test_parallel_relations_kept():
    g, _ = ingest_edges("a,b,0,1\na,b,0,0")
    assert g.num_edges == 2


def test_self_loop_reported_not_fatal():
    g, summary = ingest_edges("a,a,0,1\na,b,0,1")
    assert g.num_edges == 1
    assert summary.self_loops == [(1, "a")]


@pytest.mark.parametrize("text,line", [
    ("a,b,0,1\na,b,0", 2),
    ("a,b,x,1", 1),
    ("a,b,0,7", 1),
    ("a,b,-1,1", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as ei:
        ingest_edges(text)
    assert ei.value.line == line


def test_header_and_comments():
    g, _ = ingest_edges("src,dst,timestamp,relation\n# note\na,b,0,1\n\nb,c,0,0", header=True)
    assert g.num_edges == 2


def test_relation_kind_rejects_unknown():
    assert RelationKind.parse("2") is RelationKind.COLD
    with pytest.raises(ValueError):
        RelationKind.parse(3)


def test_strong_first_ids():
    g, _ = ingest_edges("w1,w2,0,0\nb,c,1,1\na,b,0,1")
    # a,b strong at t=0, c at t=1, weak-only nodes last
    assert g.node_keys == ("a", "b", "c", "w1", "w2")
    assert g.max_strong_id.tolist() == [1, 2]


def test_bucketing():
    g, _ = ingest_edges("a,b,100,1\nb,c,160,1\nc,d,221,0", bucket=60)
    assert sorted(e.t for e in g.edges()) == [0, 1, 2]


def test_membership_examples():
    g, _ = ingest_edges("a,b,0,1\nb,c,1,1\nc,w,1,0")
    assert g.strong_membership(0, 0) and g.strong_membership(0, 1)
    w = g.node_keys.index("w")
    assert not any(g.strong_membership(w, t) for t in range(g.T))
    with pytest.raises(IndexError):
        g.strong_membership(0, 2)


@pytest.mark.parametrize("seed", range(20))
def test_membership_matches_explicit_sets(seed):
    g = random_graph(seed, n_nodes=40, n_edges=120, T=6)
    sets = explicit_strong_sets(g)
    for t in range(g.T):
        for v in range(g.num_nodes):
            assert g.strong_membership(v, t) == (v in sets[t])
    # per-period strong nodes lie in that period's node set
    for t in range(g.T):
        assert set(g.strong_nodes_at(t).tolist()) <= set(g.nodes_at(t).tolist())


def test_neighbors_and_degree_small():
    g, _ = ingest_edges("c,l1,0,1\nc,l2,0,1\nc,l3,0,0\nz,q,1,0")
    c = g.node_keys.index("c")
    assert g.degree(c, 0) == 3
    assert g.neighbors(c, 1) == set()
    assert g.degree(g.node_keys.index("l1"), 0) == 1
    tri, _ = ingest_edges("a,b,0,1\nb,c,0,1\na,c,0,1")
    assert [tri.degree(v, 0) for v in range(3)] == [2, 2, 2]


@pytest.mark.parametrize("seed", range(10))
def test_neighbors_match_edge_scan(seed):
    g = random_graph(seed, n_nodes=25, n_edges=100, T=4, rel_probs=(0.4, 0.4, 0.2))
    for rels in (None, {0}, {1}, {0, 1}, {2}):
        for t in range(g.T):
            deg = g.degrees_at(t, rels)
            for v in range(g.num_nodes):
                expect = scan_neighbors(g, v, t, rels)
                assert g.neighbors(v, t, rels) == expect
                assert g.degree(v, t, rels) == len(expect) == deg[v]


def test_cold_start_nodes():
    g, _ = ingest_edges("a,b,0,1\nb,c,0,1")
    assert g.cold_start_nodes(0, 1) == {g.node_keys.index("a"), g.node_keys.index("c")}
    assert g.cold_start_nodes(0, 0) == set()


@pytest.mark.parametrize("seed", range(10))
def test_cold_start_matches_degree_scan(seed):
    g = random_graph(seed, n_nodes=30, n_edges=60, T=4)
    for t in range(g.T):
        expect = set()
        for v in range(g.num_nodes):
            nb = scan_neighbors(g, v, t, {1})
            if nb and len(nb) <= 1:
                expect.add(v)
        assert g.cold_start_nodes(t, 1) == expect


def test_augment():
    g, _ = ingest_edges("a,b,0,1\nb,c,1,0")
    assert g.augment([]) == g
    g2 = g.augment([TemporalEdge(0, 2, 1, 2)])
    assert g2.num_edges == g.num_edges + 1
    assert g2.relation_counts()[2] == 1
    assert g.relation_counts()[2] == 0  # original untouched
    with pytest.raises(ValueError, match="unknown endpoints"):
        g.augment([TemporalEdge(0, 99, 0, 2)])
    with pytest.raises(ValueError, match="rel=2"):
        g.augment([TemporalEdge(0, 2, 0, 1)])


@pytest.mark.parametrize("seed", range(5))
def test_ingest_idempotent_and_ids_dense(seed):
    rng = np.random.default_rng(seed)
    from conftest import random_edge_text
    text = random_edge_text(rng, 50, 200, 8)
    g1, _ = ingest_edges(text)
    g2, _ = ingest_edges(text)
    assert g1 == g2
    used = np.unique(np.concatenate([g1.src, g1.dst]))
    assert used.tolist() == list(range(g1.num_nodes))


def test_save_load_roundtrip(tmp_path):
    g = random_graph(3, rel_probs=(0.4, 0.4, 0.2))
    g.save(tmp_path / "g")
    h = TemporalMultiGraph.load(tmp_path / "g")
    assert h == g
    for col in ("src", "dst", "t", "rel"):
        assert getattr(h, col).tobytes() == getattr(g, col).tobytes()
    # saving again yields identical bytes
    h.save(tmp_path / "h")
    for ext in (".npz", ".ids.json"):
        assert (tmp_path / ("g" + ext)).read_bytes() == (tmp_path / ("h" + ext)).read_bytes()


def test_constructor_rejects_misordered_ids():
    with pytest.raises(ValueError, match="first strong appearance"):
        TemporalMultiGraph([2], [3], [0], [1], ["a", "b", "c", "d"])


def test_quantile_derivation():
    rows = "a,b,1,0\na,b,1,5\nb,c,9,0\nc,d,1,100\nd,e,1,100"
    lines = derive_strong_by_quantile(rows, quantile=0.5, bucket=50)
    rel = {tuple(l.split(",")[:3]): int(l.split(",")[3]) for l in lines}
    # accumulated (pair, period) weights 2, 9, 1, 1 -> median 1.5
    assert rel == {("a", "b", "0"): 1, ("b", "c", "0"): 1, ("c", "d", "2"): 0, ("d", "e", "2"): 0}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8), st.integers(0, 4),
                          st.integers(0, 2)), max_size=40))
def test_invariants_hypothesis(rows):
    text = "\n".join(f"k{a},k{b},{t},{r}" for a, b, t, r in rows)
    g, summary = ingest_edges(text)
    assert np.all(g.src < g.dst)
    assert summary.rows_read == len(rows)
    sets = explicit_strong_sets(g)
    for t in range(g.T):
        for v in range(g.num_nodes):
            assert g.strong_membership(v, t) == (v in sets[t])
