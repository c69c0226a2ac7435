import pytest
import numpy as np

from qkdnar.errors import AllocationRefused, ValidationError
from qkdnar.model import Request, build_topology
from qkdnar.nar import (LINK, ROUTE, TRANSITIVE, affected_by_link,
                        affected_by_route, avg_nar, evaluate_slot, max_nar,
                        nar_scores, used_routes)
from qkdnar.routing import k_shortest_routes
from qkdnar.solvers.common import hop_chain
from qkdnar.state import NetworkState

from conftest import make_scenario
from oracles import (oracle_affected_by_link, oracle_affected_by_route,
                     oracle_avg_nar, oracle_max_nar, oracle_used_routes)


def route(topo, src, dst):
    return k_shortest_routes(topo, src, dst, 1)[0]


@pytest.fixture
def chain_plan(chain_scenario):
    """r0 = OB over A-B-C, r1 = direct channel on B>C, plus a QKP-only r2."""
    state = NetworkState.for_scenario(chain_scenario)
    topo = chain_scenario.topology
    r0, r1 = chain_scenario.requests
    plan = [state.allocate_ob(r0, route(topo, "A", "C"), 0),
            state.allocate_ob(r1, route(topo, "B", "C"), 0)]
    qkp_req = Request(id=2, src="A", dst="C", rate_kbps=5.0, slots=frozenset({0}))
    state.deposit_qkp(("A", "C"), 10.0, 0)
    plan.append(state.draw_qkp(qkp_req, 5.0, 0))
    return plan, state


def test_attack_propagates_downstream(chain_plan):
    plan, state = chain_plan
    assert affected_by_link(plan, state, ("A", "B"), 0) == {0, 1}


def test_reverse_direction_unaffected(chain_plan):
    plan, state = chain_plan
    assert affected_by_link(plan, state, ("B", "A"), 0) == set()


def test_qkp_request_immune(chain_plan):
    plan, state = chain_plan
    for link in state.topology.link_map:
        assert 2 not in affected_by_link(plan, state, link, 0)


def test_unknown_link_rejected(chain_plan):
    plan, state = chain_plan
    with pytest.raises(ValidationError, match="unknown link"):
        affected_by_link(plan, state, ("A", "Z"), 0)


def test_affected_by_route_chain(chain_plan):
    plan, state = chain_plan
    full = route(state.topology, "A", "C")
    assert affected_by_route(plan, state, full, 0) == {0, 1}
    direct = route(state.topology, "B", "C")
    assert affected_by_route(plan, state, direct, 0) == {0, 1}


def test_affected_by_route_requires_use(chain_plan):
    plan, state = chain_plan
    unused = route(state.topology, "C", "A")
    with pytest.raises(ValidationError, match="not in use"):
        affected_by_route(plan, state, unused, 0)


def test_chain_max_and_avg(chain_plan):
    plan, state = chain_plan
    assert max_nar(plan, state, 0, LINK) == 2
    assert max_nar(plan, state, 0, ROUTE) == 2
    assert avg_nar(plan, state, 0, LINK) == 2.0


def test_empty_plan_zero(chain_scenario):
    state = NetworkState.for_scenario(chain_scenario)
    assert max_nar([], state, 0) == 0
    assert avg_nar([], state, 0) == 0.0


def test_single_isolated_lightpath(chain_scenario):
    state = NetworkState.for_scenario(chain_scenario)
    r1 = chain_scenario.requests[1]
    plan = [state.allocate_ob(r1, route(state.topology, "B", "C"), 0)]
    assert max_nar(plan, state, 0) == 1
    assert avg_nar(plan, state, 0) == 1.0


def test_tr_hops_do_not_propagate(chain_scenario):
    state = NetworkState.for_scenario(chain_scenario)
    topo = chain_scenario.topology
    r0, r1 = chain_scenario.requests
    plan = [state.allocate_tr(r0, hop_chain(route(topo, "A", "C")), 0),
            state.allocate_ob(r1, route(topo, "B", "C"), 0)]
    # attack on A>B only hits the chain itself, not the B>C rider
    assert affected_by_link(plan, state, ("A", "B"), 0) == {0}


def test_transitive_propagation_extends():
    # two overlapping OB lightpaths forming a cascade A>B>C and B>C>D
    topo = build_topology([("A", 8), ("B", 8), ("C", 8), ("D", 8)],
                          [("A", "B", 5.0), ("B", "C", 5.0), ("C", "D", 5.0)],
                          channels=4)
    scenario = make_scenario(topo, [("A", "C"), ("B", "D"), ("C", "D")], rate=5.0)
    state = NetworkState.for_scenario(scenario)
    r0, r1, r2 = scenario.requests
    plan = [state.allocate_ob(r0, route(topo, "A", "C"), 0),
            state.allocate_ob(r1, route(topo, "B", "D"), 0),
            state.allocate_ob(r2, route(topo, "C", "D"), 0)]
    # one level: A>B contaminates B>C (via r0) -> hits r0, r1; r2 untouched
    assert affected_by_link(plan, state, ("A", "B"), 0) == {0, 1}
    # transitive: contamination rides r1 onward to C>D and reaches r2
    assert affected_by_link(plan, state, ("A", "B"), 0, TRANSITIVE) == {0, 1, 2}


def test_precache_lightpath_propagates_but_never_counts(chain_scenario):
    state = NetworkState.for_scenario(chain_scenario)
    topo = chain_scenario.topology
    r1 = chain_scenario.requests[1]
    pre = state.allocate_ob(None, route(topo, "A", "C"), 0, pair=("A", "C"))
    served = state.allocate_ob(r1, route(topo, "B", "C"), 0)
    plan = [pre, served]
    # jamming A>B rides the pre-caching lightpath into B>C and hits r1
    assert affected_by_link(plan, state, ("A", "B"), 0) == {1}
    assert max_nar(plan, state, 0) == 1


def random_plan(seed):
    """Random small topology + random feasible realizations."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 7))
    names = [chr(ord("A") + i) for i in range(n)]
    fibers = [(names[i], names[i + 1], float(rng.uniform(4, 12)))
              for i in range(n - 1)]
    possible = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]
                if (a, b) not in {(f[0], f[1]) for f in fibers}]
    for idx in rng.permutation(len(possible))[:int(rng.integers(0, 3))]:
        a, b = possible[idx]
        fibers.append((a, b, float(rng.uniform(4, 12))))
    topo = build_topology([(x, 20) for x in names], fibers, channels=6)
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1:]]
    picked = [pairs[i] for i in rng.permutation(len(pairs))[:int(rng.integers(2, 6))]]
    scenario = make_scenario(topo, picked, rate=2.0)
    state = NetworkState.for_scenario(scenario)
    plan = []
    for req in scenario.requests:
        routes = k_shortest_routes(topo, req.src, req.dst, 3)
        if not routes:
            continue
        r = routes[int(rng.integers(len(routes)))]
        kind = rng.random()
        try:
            if kind < 0.4:
                plan.append(state.allocate_ob(req, r, 0))
            elif kind < 0.8:
                plan.append(state.allocate_tr(req, hop_chain(r), 0))
            else:
                state.deposit_qkp(req.pair, 5.0, 0)
                plan.append(state.draw_qkp(req, 2.0, 0))
        except AllocationRefused:
            pass
    return plan, state


@pytest.mark.parametrize("seed", range(40))
def test_matches_bruteforce_oracle(seed):
    plan, state = random_plan(seed)
    for link in sorted(state.topology.link_map):
        for prop in ("one_level", "transitive"):
            assert affected_by_link(plan, state, link, 0, prop) == \
                oracle_affected_by_link(plan, 0, link, prop)
    for keys in oracle_used_routes(plan, 0):
        matching = [rt for rt in used_routes(plan, 0) if rt.link_keys() == keys]
        assert matching
        assert affected_by_route(plan, state, matching[0], 0) == \
            oracle_affected_by_route(plan, 0, set(keys))
    for semantics in (LINK, ROUTE):
        assert max_nar(plan, state, 0, semantics) == oracle_max_nar(plan, 0, semantics)
        assert avg_nar(plan, state, 0, semantics) == pytest.approx(
            oracle_avg_nar(plan, 0, semantics))
        mx, avg = nar_scores(plan, state, 0, semantics)
        assert mx == oracle_max_nar(plan, 0, semantics)
        assert avg == pytest.approx(oracle_avg_nar(plan, 0, semantics))


@pytest.mark.parametrize("seed", range(25))
def test_link_semantics_dominates_route(seed):
    plan, state = random_plan(seed)
    assert max_nar(plan, state, 0, LINK) >= max_nar(plan, state, 0, ROUTE)


@pytest.mark.parametrize("seed", range(15))
def test_removal_never_grows_affected_sets(seed):
    plan, state = random_plan(seed)
    if not plan:
        return
    smaller = plan[:-1]
    for link in sorted(state.topology.link_map):
        assert affected_by_link(smaller, state, link, 0) <= \
            affected_by_link(plan, state, link, 0)


def test_tr_only_semantics_coincide():
    plan, state = random_plan(7)
    tr_only = [r for r in plan if r.kind == "tr"]
    link_m = max_nar(tr_only, state, 0, LINK)
    route_m = max_nar(tr_only, state, 0, ROUTE)
    assert link_m == route_m
    # equals the max per-directed-link traversal count
    counts = {}
    for real in tr_only:
        for lk in real.link_keys():
            counts[lk] = counts.get(lk, 0) + 1
    assert link_m == (max(counts.values()) if counts else 0)


def test_evaluate_slot_report(chain_plan):
    plan, state = chain_plan
    sn = evaluate_slot(plan, state, 0)
    assert sn.max_nar == 2 and sn.avg_nar == 2.0
    assert sn.targets["A>B"] == (0, 1)
    blob = sn.to_json(elide_above=1)
    assert blob["targets"]["A>B"] == {"count": 2}
