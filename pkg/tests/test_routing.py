import pytest
from hypothesis import given, settings, strategies as st

from qkdnar.errors import ValidationError
from qkdnar.model import Link, build_poliqi, build_topology
from qkdnar.routing import Route, dfs_first_route, enumerate_phi, k_shortest_routes


def test_route_validation():
    ab = Link("A", "B", 10.0)
    bc = Link("B", "C", 10.0)
    with pytest.raises(ValidationError):
        Route(())
    with pytest.raises(ValidationError):
        Route((ab, Link("C", "D", 5.0)))       # not contiguous
    with pytest.raises(ValidationError):
        Route((ab, Link("B", "A", 10.0)))      # revisits A
    route = Route((ab, bc))
    assert route.nodes == ("A", "B", "C")
    assert route.total_km == 20.0
    assert route.crossings == 1


def test_ring_two_routes():
    topo = build_poliqi()
    routes = k_shortest_routes(topo, "A", "C", 2)
    assert [r.nodes for r in routes] == [("A", "B", "C"), ("A", "E", "D", "C")]
    assert [r.total_km for r in routes] == [20.0, 30.0]


def test_k_one_is_shortest():
    topo = build_poliqi()
    assert k_shortest_routes(topo, "A", "D", 1)[0].nodes == ("A", "E", "D")


def test_disconnected_pair_empty():
    topo = build_topology([("A", 1), ("B", 1), ("C", 1), ("D", 1)],
                          [("A", "B", 5.0), ("C", "D", 5.0)], channels=1)
    assert k_shortest_routes(topo, "A", "C", 3) == []


def test_k_must_be_positive():
    topo = build_poliqi()
    with pytest.raises(ValidationError):
        k_shortest_routes(topo, "A", "C", 0)


def test_equal_length_ties_lexicographic():
    # two 20 km A->D alternatives: A-B-D and A-C-D
    topo = build_topology(
        [("A", 1), ("B", 1), ("C", 1), ("D", 1)],
        [("A", "B", 10.0), ("B", "D", 10.0), ("A", "C", 10.0), ("C", "D", 10.0)],
        channels=1)
    routes = k_shortest_routes(topo, "A", "D", 2)
    assert [r.nodes for r in routes] == [("A", "B", "D"), ("A", "C", "D")]


def test_dfs_ring_visits_b_before_e():
    topo = build_poliqi()
    assert dfs_first_route(topo, "A", "C").nodes == ("A", "B", "C")


def test_dfs_adjacent_pair():
    topo = build_poliqi()
    assert dfs_first_route(topo, "A", "B").nodes == ("A", "B")


def test_dfs_prefers_reachable_route():
    # DFS order would find A-B-C (60 km, dead); it must fall through to A-D-C
    topo = build_topology(
        [("A", 1), ("B", 1), ("C", 1), ("D", 1)],
        [("A", "B", 30.0), ("B", "C", 30.0), ("A", "D", 10.0), ("D", "C", 10.0)],
        channels=1)
    assert dfs_first_route(topo, "A", "C").nodes == ("A", "D", "C")


def test_dfs_falls_back_to_first_route_when_all_too_long():
    topo = build_topology([("A", 1), ("B", 1), ("C", 1)],
                          [("A", "B", 40.0), ("B", "C", 40.0)], channels=1)
    assert dfs_first_route(topo, "A", "C").nodes == ("A", "B", "C")


def test_dfs_isolated_node_none():
    topo = build_topology([("A", 1), ("B", 1), ("C", 1)],
                          [("A", "B", 5.0)], channels=1)
    assert dfs_first_route(topo, "A", "C") is None


def test_phi_ring_both_routes():
    topo = build_poliqi()
    routes = enumerate_phi(topo, "A", "C", 4, 50.0)
    assert [r.nodes for r in routes] == [("A", "B", "C"), ("A", "E", "D", "C")]


def test_phi_length_filter():
    topo = build_poliqi()
    assert enumerate_phi(topo, "A", "C", 4, 15.0) == []
    assert [r.nodes for r in enumerate_phi(topo, "A", "C", 4, 25.0)] == [("A", "B", "C")]


def test_phi_truncation():
    topo = build_poliqi()
    routes = enumerate_phi(topo, "A", "C", 1, 50.0)
    assert [r.nodes for r in routes] == [("A", "B", "C")]


def test_phi_guards():
    topo = build_poliqi()
    with pytest.raises(ValidationError):
        enumerate_phi(topo, "A", "C", 0, 50.0)


@st.composite
def random_topology(draw):
    n = draw(st.integers(min_value=3, max_value=6))
    names = [chr(ord("A") + i) for i in range(n)]
    fibers = [(names[i], names[i + 1],
               draw(st.floats(min_value=1.0, max_value=20.0))) for i in range(n - 1)]
    extra = draw(st.integers(min_value=0, max_value=2))
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]
             if (a, b) not in {(f[0], f[1]) for f in fibers}]
    for j in range(min(extra, len(pairs))):
        a, b = pairs[draw(st.integers(min_value=0, max_value=len(pairs) - 1))]
        if (a, b) not in {(f[0], f[1]) for f in fibers}:
            fibers.append((a, b, draw(st.floats(min_value=1.0, max_value=20.0))))
    return build_topology([(x, 4) for x in names], fibers, channels=4)


@settings(max_examples=60, deadline=None)
@given(random_topology(), st.integers(min_value=1, max_value=6))
def test_routes_simple_ordered_deterministic(topo, k):
    src, dst = topo.nodes[0], topo.nodes[-1]
    routes = k_shortest_routes(topo, src, dst, k)
    assert routes == k_shortest_routes(topo, src, dst, k)
    for route in routes:
        assert len(set(route.nodes)) == len(route.nodes)
        assert route.src == src and route.dst == dst
    lengths = [r.total_km for r in routes]
    assert lengths == sorted(lengths)
    first = dfs_first_route(topo, src, dst)
    if first is not None:
        everything = k_shortest_routes(topo, src, dst, 10_000)
        assert first.nodes in [r.nodes for r in everything]
