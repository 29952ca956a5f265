import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incentive_net.topology import (Topology, TopologyError, attachment_shift,
                                    fit_power_law_exponent, gen_topology, is_connected,
                                    max_degree)


def test_ring_four_has_four_edges_of_degree_two():
    t = gen_topology("ring", 4)
    assert len(t.edges) == 4
    assert t.degrees.tolist() == [2, 2, 2, 2]


def test_star_four_centre_and_leaves():
    t = gen_topology("star", 4)
    assert t.degrees.tolist() == [3, 1, 1, 1]


def test_random_single_agent_is_empty():
    t = gen_topology("random", 1, {"p": 0.5})
    assert t.n == 1 and t.edges == ()


@pytest.mark.parametrize("kind,n,expected", [("star", 4, 3), ("ring", 5, 2), ("empty", 3, 0)])
def test_max_degree(kind, n, expected):
    assert max_degree(gen_topology(kind, n)) == expected


@pytest.mark.parametrize("kind,n,params", [
    ("ring", 0, {}), ("random", 5, {"p": 1.5}), ("random", 5, {"p": -0.1}),
    ("scale_free", 10, {"exponent": 2.0}), ("nope", 3, {}), ("circulant", 4, {"k": 2}),
])
def test_invalid_arguments_raise(kind, n, params):
    with pytest.raises(TopologyError):
        gen_topology(kind, n, params)


def test_self_loop_and_asymmetry_rejected():
    with pytest.raises(TopologyError):
        Topology(3, ((1, 1),))
    with pytest.raises(TopologyError):
        Topology.from_adjacency(np.array([[0, 1], [0, 0]]))


def test_edge_list_round_trip(tmp_path):
    t = gen_topology("random", 12, {"p": 0.4}, seed=3)
    path = tmp_path / "g.txt"
    t.write(path)
    text = path.read_text()
    assert text.startswith("n=12\n")
    assert Topology.read(path) == t


def test_arc_bookkeeping_is_consistent():
    t = gen_topology("random", 9, {"p": 0.5}, seed=1)
    assert t.n_arcs == 2 * len(t.edges)
    for i in range(t.n):
        assert sorted(t.src[t.inbound_arcs(i)].tolist()) == list(t.neighbors[i])
        assert sorted(t.dst[t.outbound_arcs(i)].tolist()) == list(t.neighbors[i])


def test_add_agent_extends_graph():
    t = gen_topology("ring", 4).add_agent([0, 2])
    assert t.n == 5 and t.neighbors[4] == (0, 2)


@settings(max_examples=60, deadline=None)
@given(kind=st.sampled_from(["ring", "star", "random", "scale_free"]),
       n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1), p=st.floats(0, 1))
def test_generated_graphs_are_simple_symmetric_and_deterministic(kind, n, seed, p):
    params = {"p": p} if kind == "random" else {"exponent": 2.7, "m": 2}
    t = gen_topology(kind, n, params, seed)
    a = t.adjacency
    assert np.array_equal(a, a.T)
    assert not a.diagonal().any()
    assert np.array_equal(a.sum(axis=1), t.degrees)
    assert gen_topology(kind, n, params, seed) == t
    if kind == "ring" and n >= 3:
        assert set(t.degrees.tolist()) == {2}
    if kind == "star":
        assert t.degrees[0] == n - 1 and all(t.degrees[1:] == 1)


@pytest.mark.parametrize("exponent", [2.5, 3.0, 3.5])
def test_scale_free_degree_tail_matches_exponent(exponent):
    m = 2
    fits = [fit_power_law_exponent(gen_topology("scale_free", 3000, {"exponent": exponent, "m": m},
                                                seed=s).degrees,
                                   k_min=m, shift=attachment_shift(exponent, m))
            for s in range(3)]
    assert abs(np.mean(fits) - exponent) <= 0.3
    assert all(abs(f - exponent) <= 0.3 for f in fits)


def test_scale_free_graph_is_connected():
    assert is_connected(gen_topology("scale_free", 500, {"exponent": 3.0, "m": 2}, seed=1))
