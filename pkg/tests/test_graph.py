import numpy as np
import pytest

from kgrec.exceptions import DataError
from kgrec.graph import build_unified_graph, neighbors, sample_neighbors
from kgrec.ingest import Dataset, RawInteraction, RawTriple, build_id_maps


def make(pos_pairs, triples):
    pos = [RawInteraction(u, i, 5.0, 0) for u, i in pos_pairs]
    m = build_id_maps(pos, triples)
    ds = Dataset(
        [(m.user_index[u], m.item_index[i]) for u, i in pos_pairs], [], m.num_users, m.num_items
    )
    return build_unified_graph(ds, triples, m), m


def test_single_interaction():
    g, _ = make([("u", "b")], [])
    assert g.num_nodes == 2
    inter, self_ = g.interacted_relation, g.self_relation
    assert neighbors(g, 0) == [(0, self_), (1, inter)]
    assert neighbors(g, 1) == [(0, inter), (1, self_)]


def test_triple_adds_aux_node():
    g, m = make([("u", "b")], [RawTriple("b", "category", "fiction")])
    aux = g.aux_offset + m.aux_entity_index["fiction"]
    assert g.role(aux) == "aux_entity"
    assert (aux, m.relation_index["category"]) in neighbors(g, g.item_offset)
    assert neighbors(g, aux) == [(g.item_offset, 0), (aux, g.self_relation)]


def test_unknown_key_rejected():
    pos = [RawInteraction("u", "b", 5.0, 0)]
    m = build_id_maps(pos, [])
    ds = Dataset([(0, 0)], [], 1, 1)
    with pytest.raises(DataError, match="mystery"):
        build_unified_graph(ds, [RawTriple("b", "r", "mystery")], m)


def test_parallel_edges_collapsed():
    g, _ = make([("u", "b"), ("u", "b")], [RawTriple("b", "r", "x")] * 3)
    assert len(neighbors(g, 0)) == 2
    assert len(neighbors(g, 1)) == 3


def random_graph(seed, n_triples=200):
    rng = np.random.default_rng(seed)
    users = [f"u{k}" for k in range(15)]
    items = [f"b{k}" for k in range(25)]
    aux = [f"x{k}" for k in range(30)]
    pos = sorted({(users[rng.integers(15)], items[rng.integers(25)]) for _ in range(60)})
    ents = items + aux
    triples = [
        RawTriple(ents[rng.integers(len(ents))], f"r{rng.integers(4)}", ents[rng.integers(len(ents))])
        for _ in range(n_triples)
    ]
    return make(pos, triples)


@pytest.mark.parametrize("seed", range(5))
def test_symmetry_against_dense_matrix(seed):
    g, _ = random_graph(seed)
    assert g.num_nodes <= 200
    dense = np.zeros((g.num_nodes, g.num_nodes), dtype=int)
    for i in range(g.num_nodes):
        for j, _ in neighbors(g, i):
            dense[i, j] = 1
    np.testing.assert_array_equal(dense, dense.T)


@pytest.mark.parametrize("seed", range(5))
def test_csr_invariants(seed):
    g, _ = random_graph(seed)
    off = g.offsets
    assert off[0] == 0 and np.all(np.diff(off) >= 0)
    assert off[-1] == len(g.neighbors) == len(g.relations)
    assert g.degrees().sum() == g.num_edges
    for i in range(g.num_nodes):
        nb = neighbors(g, i)
        assert nb == sorted(nb)
        assert nb.count((i, g.self_relation)) == 1


def test_isolated_aux_node_has_only_self():
    g, m = make([("u", "b")], [RawTriple("x", "r", "x")])
    x = g.aux_offset + m.aux_entity_index["x"]
    assert neighbors(g, x) == [(x, g.self_relation)]


def test_neighbors_out_of_range():
    g, _ = make([("u", "b")], [])
    with pytest.raises(IndexError):
        neighbors(g, 2)


def hub_graph(n_items=99):
    return make([("u", f"b{k}") for k in range(n_items)], [])[0]


def test_sample_neighbors_small_degree():
    g, _ = make([("u", "b1"), ("u", "b2")], [])
    assert sample_neighbors(g, 0, 10, seed=0) == neighbors(g, 0)


def test_sample_neighbors_caps_and_keeps_self():
    g = hub_graph()
    assert len(neighbors(g, 0)) == 100
    s = sample_neighbors(g, 0, 10, seed=7)
    assert len(s) == 10
    assert (0, g.self_relation) in s
    assert s == sorted(s)
    assert set(s) <= set(neighbors(g, 0))
    assert sample_neighbors(g, 0, 10, seed=7) == s
    assert sample_neighbors(g, 0, 10, seed=8) != s


def test_capped_view_matches_sampling():
    g = hub_graph()
    view = g.capped(10, seed=3)
    assert neighbors(view, 0) == sample_neighbors(g, 0, 10, seed=3)
    assert neighbors(view, 5) == neighbors(g, 5)
    assert g.capped(1000, seed=3) is g
