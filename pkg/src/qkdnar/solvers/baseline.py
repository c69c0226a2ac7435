"""Depth-first-search baseline provisioner.

Serves requests in id order over the first route a depth-first search finds,
with no load balancing and no deliberate key pre-caching.  The key pool still
tops up shortfalls when it happens to hold keys, and surpluses of served
requests are banked rather than discarded.
"""

from __future__ import annotations

import time

from ..errors import AllocationRefused
from ..model import Architecture, Scenario
from ..nar import LINK, ONE_LEVEL, evaluate_slot
from ..routing import dfs_first_route
from ..state import NetworkState, OB, TR
from .common import (SolveResult, active_requests, allocate_mode, finish_result,
                     hop_chain, required_ukb, slot_outcome)


def _baseline_mode(architecture: Architecture, ob_rate_kbps: float,
                   rate_needed: float) -> str:
    if architecture.kind == Architecture.OB_KIND:
        return OB
    if architecture.kind == Architecture.TR_KIND:
        return TR
    return OB if ob_rate_kbps >= rate_needed else TR


def solve_baseline(scenario: Scenario, semantics: str = LINK,
                   propagation: str = ONE_LEVEL) -> SolveResult:
    t0 = time.perf_counter()
    state = NetworkState.for_scenario(scenario)
    table = scenario.key_rate_table
    plan = []
    slot_nars, outcomes = [], []
    for slot in range(scenario.horizon):
        for request in active_requests(scenario, slot):
            need = required_ukb(request)
            route = dfs_first_route(scenario.topology, request.src, request.dst)
            real = None
            if route is not None:
                mode = _baseline_mode(scenario.architecture,
                                      table.ob_route_rate(route), request.rate_kbps)
                try:
                    real = allocate_mode(state, request, route, mode, slot)
                except AllocationRefused:
                    real = None
            delivered = real.delivered_ukb if real else 0
            if delivered >= need:
                plan.append(real)
                state.bank_surplus(real, delivered - need)
                continue
            shortfall = need - delivered
            if state.qkp_balance_ukb(request.pair) >= shortfall:
                if real is not None:
                    plan.append(real)
                plan.append(state._draw_ukb(request, shortfall, slot))
            elif real is not None:
                state.release(real)     # don't hold resources for a lost cause
        slot_nars.append(evaluate_slot(plan, state, slot, semantics, propagation))
        outcomes.append(slot_outcome(scenario, state, slot))
        if slot + 1 < scenario.horizon:
            state.advance_slot()
    return finish_result("baseline", scenario, state, plan, slot_nars, outcomes,
                         semantics, propagation, time.perf_counter() - t0)
