"""Enumerative exact solver for desk-scale single-slot instances.

Branch-and-bound over per-request choices (candidate route x mode, or leave
the request unserved), with first-fit wavelengths.  Minimizes the tuple
(unserved count, maxNAR, avgNAR); both unserved count and maxNAR only grow as
realizations are added, which gives the pruning rule.
"""

from __future__ import annotations

import time

from ..errors import AllocationRefused, InstanceTooLarge
from ..model import Scenario
from ..nar import LINK, ONE_LEVEL, evaluate_slot, nar_scores
from ..routing import DEFAULT_MAX_KM, Route, enumerate_phi
from ..state import NetworkState, OB, Realization, TR, to_ukb
from .common import (SolveResult, active_requests, allocate_mode, finish_result,
                     hop_chain, required_ukb, slot_outcome)

MAX_REQUESTS = 8
MAX_NODES = 6


def solve_exact(scenario: Scenario, semantics: str = LINK,
                propagation: str = ONE_LEVEL, max_routes: int = 8) -> SolveResult:
    if len(scenario.requests) > MAX_REQUESTS:
        raise InstanceTooLarge(
            f"exact solver handles at most {MAX_REQUESTS} requests, "
            f"got {len(scenario.requests)}")
    if len(scenario.topology.nodes) > MAX_NODES:
        raise InstanceTooLarge(
            f"exact solver handles at most {MAX_NODES} nodes, "
            f"got {len(scenario.topology.nodes)}")
    if scenario.horizon != 1:
        raise InstanceTooLarge("exact solver handles a single timeslot")

    t0 = time.perf_counter()
    table = scenario.key_rate_table
    requests = active_requests(scenario, 0)
    options: list[list[tuple[Route, str]]] = []
    for req in requests:
        need = required_ukb(req)
        opts = []
        for route in enumerate_phi(scenario.topology, req.src, req.dst,
                                   max_routes, DEFAULT_MAX_KM):
            if scenario.architecture.allows_ob:
                if to_ukb(table.ob_route_rate(route)) >= need:
                    opts.append((route, OB))
            if scenario.architecture.allows_tr:
                if to_ukb(table.tr_chain_rate(hop_chain(route))) >= need:
                    opts.append((route, TR))
        options.append(opts)

    state = NetworkState.for_scenario(scenario)
    best: dict = {"score": None, "plan": None}
    explored = 0

    def leaf(plan: list[Realization], unserved: int):
        mx, avg = nar_scores(plan, state, 0, semantics, propagation)
        score = (unserved, mx, avg)
        if best["score"] is None or score < best["score"]:
            best["score"] = score
            best["plan"] = [(r.request_id, r.kind, r.routes()) for r in plan]

    def descend(i: int, plan: list[Realization], unserved: int):
        nonlocal explored
        explored += 1
        if best["score"] is not None:
            mx, _ = nar_scores(plan, state, 0, semantics, propagation)
            bu, bm = best["score"][0], best["score"][1]
            if unserved > bu or (unserved == bu and mx > bm):
                return
        if i == len(requests):
            leaf(plan, unserved)
            return
        for route, mode in options[i]:
            try:
                real = allocate_mode(state, requests[i], route, mode, 0)
            except AllocationRefused:
                continue
            plan.append(real)
            descend(i + 1, plan, unserved)
            plan.pop()
            state.release(real)
        descend(i + 1, plan, unserved + 1)

    descend(0, [], 0)

    # rebuild the winning plan on a fresh state so the result is replayable
    final_state = NetworkState.for_scenario(scenario)
    final_plan: list[Realization] = []
    if best["plan"]:
        by_id = {r.id: r for r in requests}
        for request_id, kind, routes in best["plan"]:
            req = by_id[request_id]
            route = routes[0] if kind == OB else Route(
                tuple(l for r in routes for l in r.links))
            final_plan.append(allocate_mode(final_state, req, route, kind, 0))
    slot_nars = [evaluate_slot(final_plan, final_state, 0, semantics, propagation)]
    outcomes = [slot_outcome(scenario, final_state, 0, iterations=explored)]
    return finish_result("exact", scenario, final_state, final_plan, slot_nars,
                         outcomes, semantics, propagation,
                         time.perf_counter() - t0)
