"""Tabu-search provisioner that minimizes the worst-case attack radius.

Per slot: serve every request on its shortest feasible route (under OBTR an
alpha-percent coin decides whether a request starts on a trusted-relay chain
or an optical-bypass lightpath), bank surplus keys, pre-cache keys for future
slots while spare resources last, then run a fixed number of tabu iterations
that reroute one random lightpath at a time through its k-shortest-route
neighborhood.  Candidates are ranked by (maxNAR, avgNAR, modules used); the
best configuration seen in the slot is restored before moving on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import AllocationRefused
from ..model import Architecture, Request, Scenario
from ..nar import LINK, ONE_LEVEL, evaluate_slot, nar_scores
from ..rng import STREAM_ALPHA, STREAM_TABU, substream
from ..routing import Route
from ..state import NetworkState, OB, QKP, Realization, TR, to_ukb
from .common import (RouteCache, SolveResult, active_requests, allocate_mode,
                     finish_result, required_ukb, slot_outcome)

EARLY_EXIT_AFTER = 50   # consecutive non-improving iterations


@dataclass
class TabuList:
    """Recently reversed moves, forbidden for ``tenure`` iterations."""

    tenure: int
    entries: dict[tuple, int] = field(default_factory=dict)

    def forbid(self, move: tuple, now: int):
        if self.tenure > 0:
            self.entries[move] = now + self.tenure

    def is_tabu(self, move: tuple, now: int) -> bool:
        expiry = self.entries.get(move)
        return expiry is not None and expiry > now

    def purge(self, now: int):
        for move in [m for m, exp in self.entries.items() if exp <= now]:
            del self.entries[move]


def _signature(real: Realization) -> tuple:
    nodes = (real.route.nodes if real.kind == OB
             else (real.hops[0][0].src,) + tuple(r.dst for r, _ in real.hops))
    return (real.kind, nodes)


def _move_key(real: Realization) -> tuple:
    if real.request_id is not None:
        return ("req", real.request_id)
    return ("pre", real.pair)


def _modes_for(architecture: Architecture) -> list[str]:
    modes = []
    if architecture.allows_ob:
        modes.append(OB)
    if architecture.allows_tr:
        modes.append(TR)
    return modes


def build_initial_solution(scenario: Scenario, state: NetworkState, slot: int,
                           routes: RouteCache, alpha_rng: np.random.Generator,
                           plan: list[Realization]) -> list[Realization]:
    """Serve unserved requests on their shortest feasible route.

    Pool balances are used first when they fully cover a request; otherwise a
    channel realization is tried, topped up from the pool if it falls short.
    Surplus keys of served requests are banked.  Requests that cannot be
    fully served release whatever they tried to hold.
    """
    arch = scenario.architecture
    added = []
    for request in active_requests(scenario, slot):
        need = required_ukb(request) - state.delivered_ukb_for(request.id, slot)
        if need <= 0:
            continue
        pool = state.qkp_balance_ukb(request.pair)
        if pool >= need:
            real = state._draw_ukb(request, need, slot)
            plan.append(real)
            added.append(real)
            continue
        if arch.kind == Architecture.OBTR_KIND:
            mode = TR if alpha_rng.random() < arch.alpha / 100.0 else OB
        elif arch.kind == Architecture.TR_KIND:
            mode = TR
        else:
            mode = OB
        real = None
        for route in routes.k_shortest(request.src, request.dst):
            try:
                candidate = allocate_mode(state, request, route, mode, slot)
            except AllocationRefused:
                continue
            if candidate.delivered_ukb + pool < need:
                state.release(candidate)
                continue
            real = candidate
            break
        if real is None:
            continue
        plan.append(real)
        added.append(real)
        if real.delivered_ukb < need:
            draw = state._draw_ukb(request, need - real.delivered_ukb, slot)
            plan.append(draw)
            added.append(draw)
        else:
            state.bank_surplus(real, real.delivered_ukb - need)
    return added


def _future_demand_ukb(scenario: Scenario, slot: int) -> dict[tuple[str, str], int]:
    future: dict[tuple[str, str], int] = {}
    for req in scenario.requests:
        later = sum(1 for t in req.slots if t > slot)
        if later:
            future[req.pair] = future.get(req.pair, 0) + later * required_ukb(req)
    return future


def precache_qkp(scenario: Scenario, state: NetworkState, slot: int,
                 routes: RouteCache, plan: list[Realization]) -> list[Realization]:
    """Greedy key pre-caching for future slots while spare resources last.

    Repeatedly picks the pair with the largest uncovered future demand and
    allocates the cheapest feasible realization for it (fewest modules, then
    shortest route), banking the full delivered rate.  Stops when every
    relevant pool is full or nothing can be allocated any more.
    """
    future = _future_demand_ukb(scenario, slot)
    if not future:
        return []
    modes = _modes_for(scenario.architecture)
    deposits = []
    while True:
        shortfalls = []
        for pair, demand in future.items():
            pool = state.qkp_balance_ukb(pair)
            if pool < state.cap_ukb and demand > pool:
                shortfalls.append((demand - pool, pair))
        if not shortfalls:
            break
        shortfalls.sort(key=lambda s: (-s[0], s[1]))
        made = None
        for _, pair in shortfalls:
            options = []
            for ri, route in enumerate(routes.phi(pair[0], pair[1])):
                for mode in modes:
                    cost = 2 if mode == OB else 2 * route.crossings + 2
                    options.append((cost, route.total_km, ri, mode, route))
            options.sort(key=lambda o: o[:3])
            for _, _, _, mode, route in options:
                try:
                    real = allocate_mode(state, None, route, mode, slot, pair=pair)
                except AllocationRefused:
                    continue
                stored = state.bank_surplus(real, real.delivered_ukb)
                if stored == 0:
                    state.release(real)
                    continue
                made = real
                break
            if made is not None:
                break
        if made is None:
            break
        plan.append(made)
        deposits.append(made)
    return deposits


def _slot_score(plan: list[Realization], state: NetworkState, slot: int,
                semantics: str, propagation: str) -> tuple[int, float, int]:
    mx, avg = nar_scores(plan, state, slot, semantics, propagation)
    return (mx, avg, sum(state.modules_used.values()))


def tabu_step(scenario: Scenario, state: NetworkState, plan: list[Realization],
              tabu: TabuList, slot: int, rng: np.random.Generator,
              routes: RouteCache, iteration: int = 0,
              best_score: Optional[tuple] = None, semantics: str = LINK,
              propagation: str = ONE_LEVEL) -> bool:
    """Reroute one randomly chosen lightpath to its best non-tabu neighbor.

    The neighborhood is the request's k-shortest routes crossed with the
    architecture's modes; a tabu candidate is allowed only if it beats the
    best score seen this slot (aspiration).  Returns False when no feasible
    neighbor exists (the step is a no-op).
    """
    channels = sorted((r for r in plan if r.slot == slot and r.is_channel),
                      key=lambda r: r.rid)
    if not channels:
        return False
    target = channels[int(rng.integers(len(channels)))]
    request = (scenario.request_by_id(target.request_id)
               if target.request_id is not None else None)
    if request is not None:
        src, dst = request.src, request.dst
        required = (required_ukb(request)
                    - (state.delivered_ukb_for(request.id, slot) - target.delivered_ukb))
        bankable = required_ukb(request)
    else:
        src, dst = target.pair
        required = 1
        bankable = 0
    old_signature = _signature(target)
    move_key = _move_key(target)
    try:
        state.release(target)
    except AllocationRefused:
        return False            # its banked keys were already drawn
    rest = [r for r in plan if r is not target]

    best = None
    for ri, route in enumerate(routes.k_shortest(src, dst)):
        for mi, mode in enumerate(_modes_for(scenario.architecture)):
            try:
                cand = allocate_mode(state, request, route, mode, slot,
                                     pair=None if request else target.pair)
            except AllocationRefused:
                continue
            ok = cand.delivered_ukb >= required
            if ok:
                surplus = (cand.delivered_ukb - bankable if request is not None
                           else cand.delivered_ukb)
                stored = state.bank_surplus(cand, max(0, surplus))
                score = _slot_score(rest + [cand], state, slot, semantics, propagation)
                is_tabu = tabu.is_tabu((move_key, _signature(cand)), iteration)
                aspirated = best_score is not None and score < best_score
                if (not is_tabu or aspirated) and (best is None or score < best[0]):
                    best = (score, ri, mi, route, mode)
            state.release(cand)
    if best is None:
        # no feasible neighbor: put the original assignment back
        restored = allocate_mode(state, request, target.routes()[0] if target.kind == OB
                                 else _full_route_of(target), target.kind, slot,
                                 pair=None if request else target.pair)
        state.bank_surplus(restored, target.deposit_ukb)
        plan[plan.index(target)] = restored
        return False
    _, ri, mi, route, mode = best
    new_real = allocate_mode(state, request, route, mode, slot,
                             pair=None if request else target.pair)
    surplus = (new_real.delivered_ukb - bankable if request is not None
               else new_real.delivered_ukb)
    state.bank_surplus(new_real, max(0, surplus))
    plan[plan.index(target)] = new_real
    moved = _signature(new_real) != old_signature
    if moved:
        tabu.forbid((move_key, old_signature), iteration)
    return moved


def _full_route_of(real: Realization) -> Route:
    """Stitch a trusted-relay chain's hops back into one route."""
    links = []
    for hop, _ in real.hops:
        links.extend(hop.links)
    return Route(tuple(links))


def solve_minmaxnar(scenario: Scenario, semantics: str = LINK,
                    propagation: str = ONE_LEVEL) -> SolveResult:
    """Full multi-slot run: initial solution, pre-caching, tabu refinement."""
    t0 = time.perf_counter()
    state = NetworkState.for_scenario(scenario)
    routes = RouteCache(scenario.topology, scenario.k_neighborhood)
    alpha_rng = substream(scenario.seed, STREAM_ALPHA)
    tabu_rng = substream(scenario.seed, STREAM_TABU)
    plan: list[Realization] = []
    slot_nars, outcomes = [], []
    for slot in range(scenario.horizon):
        build_initial_solution(scenario, state, slot, routes, alpha_rng, plan)
        precache_qkp(scenario, state, slot, routes, plan)
        tabu = TabuList(scenario.tabu_tenure)
        best_score = _slot_score(plan, state, slot, semantics, propagation)
        best_plan = list(plan)
        best_state = state.clone()
        stale = 0
        executed = 0
        for it in range(scenario.theta):
            tabu.purge(it)
            tabu_step(scenario, state, plan, tabu, slot, tabu_rng, routes,
                      iteration=it, best_score=best_score,
                      semantics=semantics, propagation=propagation)
            executed = it + 1
            score = _slot_score(plan, state, slot, semantics, propagation)
            if score < best_score:
                best_score = score
                best_plan = list(plan)
                best_state = state.clone()
                stale = 0
            else:
                stale += 1
                if stale >= EARLY_EXIT_AFTER:
                    break
        plan = best_plan
        state = best_state
        slot_nars.append(evaluate_slot(plan, state, slot, semantics, propagation))
        outcomes.append(slot_outcome(scenario, state, slot, iterations=executed))
        if slot + 1 < scenario.horizon:
            state.advance_slot()
    return finish_result("heuristic", scenario, state, plan, slot_nars, outcomes,
                         semantics, propagation, time.perf_counter() - t0)
