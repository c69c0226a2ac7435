"""Shared solver plumbing: route caching, realization helpers, results."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..errors import AllocationRefused
from ..model import Request, Scenario, Topology
from ..nar import LINK, NarReport, ONE_LEVEL, SlotNar, evaluate_slot
from ..routing import DEFAULT_MAX_KM, DEFAULT_MAX_ROUTES, Route, enumerate_phi, k_shortest_routes
from ..state import NetworkState, OB, Realization, TR, to_kb, to_ukb


class RouteCache:
    """Memoized candidate routes per directed node pair."""

    def __init__(self, topology: Topology, k: int,
                 max_routes: int = DEFAULT_MAX_ROUTES,
                 max_km: float = DEFAULT_MAX_KM):
        self.topology = topology
        self.k = k
        self.max_routes = max_routes
        self.max_km = max_km
        self._k_cache: dict[tuple[str, str], list[Route]] = {}
        self._phi_cache: dict[tuple[str, str], list[Route]] = {}

    def k_shortest(self, src: str, dst: str) -> list[Route]:
        key = (src, dst)
        if key not in self._k_cache:
            self._k_cache[key] = k_shortest_routes(self.topology, src, dst, self.k)
        return self._k_cache[key]

    def phi(self, src: str, dst: str) -> list[Route]:
        key = (src, dst)
        if key not in self._phi_cache:
            self._phi_cache[key] = enumerate_phi(
                self.topology, src, dst, self.max_routes, self.max_km)
        return self._phi_cache[key]


def hop_chain(route: Route) -> list[Route]:
    """Split a route into single-link hops (a relay at every crossed node)."""
    return [Route((link,)) for link in route.links]


def allocate_mode(state: NetworkState, request: Optional[Request], route: Route,
                  mode: str, slot: int,
                  pair: Optional[tuple[str, str]] = None) -> Realization:
    if mode == OB:
        return state.allocate_ob(request, route, slot, pair=pair)
    if mode == TR:
        return state.allocate_tr(request, hop_chain(route), slot, pair=pair)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class SlotOutcome:
    slot: int
    served: list[int]
    unserved: list[int]
    modules_avg: float
    qkp_total_kbslot: float
    iterations: int = 0


@dataclass
class SolveResult:
    """Plan plus the per-slot metrics every solver reports."""

    solver: str
    plan: list[Realization]
    nar_report: NarReport
    outcomes: list[SlotOutcome]
    wallclock: float = 0.0

    @property
    def objective(self) -> int:
        return self.nar_report.objective

    @property
    def total_unserved(self) -> int:
        return sum(len(o.unserved) for o in self.outcomes)

    def lexicographic_score(self) -> tuple:
        """(unserved, objective, mean avgNAR): the comparison order used
        when ranking solutions."""
        avg = (sum(s.avg_nar for s in self.nar_report.slots)
               / max(1, len(self.nar_report.slots)))
        return (self.total_unserved, self.objective, avg)

    def to_json(self) -> dict:
        per_slot = []
        for out, sn in zip(self.outcomes, self.nar_report.slots):
            per_slot.append({
                "slot": out.slot, "max_nar": sn.max_nar, "avg_nar": sn.avg_nar,
                "served": out.served, "unserved": out.unserved,
                "modules_avg": out.modules_avg,
                "qkp_total_kbslot": out.qkp_total_kbslot,
                "iterations": out.iterations,
            })
        return {"solver": self.solver, "objective": self.objective,
                "semantics": self.nar_report.semantics,
                "per_slot": per_slot, "wallclock": self.wallclock}

    def summary_rows(self) -> list[dict]:
        rows = []
        for out, sn in zip(self.outcomes, self.nar_report.slots):
            rows.append({
                "t": out.slot, "maxNAR": sn.max_nar, "avgNAR": sn.avg_nar,
                "served": len(out.served), "unserved": len(out.unserved),
                "modules_avg": out.modules_avg,
                "qkp_total_kbslot": out.qkp_total_kbslot,
            })
        return rows


def active_requests(scenario: Scenario, slot: int) -> list[Request]:
    return sorted((r for r in scenario.requests if slot in r.slots),
                  key=lambda r: r.id)


def slot_outcome(scenario: Scenario, state: NetworkState, slot: int,
                 iterations: int = 0) -> SlotOutcome:
    served, unserved = [], []
    for req in active_requests(scenario, slot):
        (served if state.is_served(req, slot) else unserved).append(req.id)
    n_nodes = len(scenario.topology.nodes)
    return SlotOutcome(
        slot=slot, served=served, unserved=unserved,
        modules_avg=sum(state.modules_used.values()) / n_nodes,
        qkp_total_kbslot=to_kb(sum(state.pools.values())),
        iterations=iterations)


def finish_result(solver: str, scenario: Scenario, state: NetworkState,
                  plan: list[Realization], slot_nars: list[SlotNar],
                  outcomes: list[SlotOutcome], semantics: str,
                  propagation: str, wallclock: float) -> SolveResult:
    report = NarReport(slots=slot_nars, semantics=semantics, propagation=propagation)
    return SolveResult(solver=solver, plan=plan, nar_report=report,
                       outcomes=outcomes, wallclock=wallclock)


def required_ukb(request: Request) -> int:
    return to_ukb(request.rate_kbps)
