"""Mutable provisioning state for one timeslot sequence.

Wavelengths and modules renew every slot; quantum-key-pool balances carry
over.  All key quantities are tracked internally as integer micro-kb
(`_UKB` units per kb) so ledger arithmetic is exact and every allocation has
an exact inverse.

A realization records how one request (or a pre-caching lightpath) receives
or generates keys in one slot: an optical-bypass lightpath, a trusted-relay
chain, or a draw from the key pool.  Realization objects are immutable once
their surplus has been banked; cloned states may therefore share them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import AllocationRefused, PlanInfeasible, ValidationError
from .keyrate import KeyRateTable
from .model import Request, Scenario, Topology
from .routing import Route

_UKB = 10 ** 6

OB = "ob"
TR = "tr"
QKP = "qkp"


def to_ukb(kb: float) -> int:
    return round(kb * _UKB)


def to_kb(ukb: int) -> float:
    return ukb / _UKB


@dataclass
class Realization:
    """How one request gets keys in one slot (or a pre-caching lightpath)."""

    rid: int
    request_id: Optional[int]
    pair: tuple[str, str]
    slot: int
    kind: str
    delivered_ukb: int
    route: Optional[Route] = None                 # OB lightpath
    wavelength: Optional[int] = None
    hops: tuple[tuple[Route, int], ...] = ()      # TR chain: (route, wavelength)
    amount_ukb: int = 0                           # QKP draw
    deposit_ukb: int = 0                          # surplus banked into the pool

    @property
    def delivered_kbps(self) -> float:
        return to_kb(self.delivered_ukb)

    @property
    def is_channel(self) -> bool:
        return self.kind in (OB, TR)

    def link_keys(self) -> tuple[tuple[str, str], ...]:
        if self.kind == OB:
            return self.route.link_keys()
        if self.kind == TR:
            return tuple(itertools.chain.from_iterable(
                r.link_keys() for r, _ in self.hops))
        return ()

    def routes(self) -> tuple[Route, ...]:
        if self.kind == OB:
            return (self.route,)
        if self.kind == TR:
            return tuple(r for r, _ in self.hops)
        return ()

    def module_cost(self) -> dict[str, int]:
        """Modules this realization holds at each node."""
        cost: dict[str, int] = {}
        if self.kind == OB:
            cost[self.route.src] = 1
            cost[self.route.dst] = cost.get(self.route.dst, 0) + 1
        elif self.kind == TR:
            chain = [self.hops[0][0].src] + [r.dst for r, _ in self.hops]
            cost[chain[0]] = 1
            cost[chain[-1]] = cost.get(chain[-1], 0) + 1
            for relay in chain[1:-1]:
                cost[relay] = cost.get(relay, 0) + 2
        return cost

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "request": self.request_id,
               "pair": list(self.pair), "slot": self.slot}
        if self.kind == OB:
            obj["links"] = [f"{u}>{v}" for u, v in self.route.link_keys()]
            obj["wavelength"] = self.wavelength
            obj["delivered_kbps"] = to_kb(self.delivered_ukb)
            obj["deposit_kbslot"] = to_kb(self.deposit_ukb)
        elif self.kind == TR:
            obj["hops"] = [{"links": [f"{u}>{v}" for u, v in r.link_keys()],
                            "wavelength": w} for r, w in self.hops]
            obj["delivered_kbps"] = to_kb(self.delivered_ukb)
            obj["deposit_kbslot"] = to_kb(self.deposit_ukb)
        else:
            obj["amount_kbslot"] = to_kb(self.amount_ukb)
        return obj


def _pair_of(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a < b else (b, a)


class NetworkState:
    """Single-writer provisioning state; clone for independent what-ifs."""

    def __init__(self, topology: Topology, qkp_capacity_kbslot: float,
                 key_rate_table: KeyRateTable):
        self.topology = topology
        self.table = key_rate_table
        self.cap_ukb = to_ukb(qkp_capacity_kbslot)
        self.slot = 0
        self.occupancy: dict[tuple[tuple[str, str], int], int] = {}
        self.modules_used: dict[str, int] = {n: 0 for n in topology.nodes}
        self.pools: dict[tuple[str, str], int] = {}
        self.delivered: dict[tuple[int, int], int] = {}
        self.active: dict[int, Realization] = {}
        self._next_rid = 0

    @classmethod
    def for_scenario(cls, scenario: Scenario) -> "NetworkState":
        return cls(scenario.topology, scenario.qkp_capacity_kbslot,
                   scenario.key_rate_table)

    # -- inspection --------------------------------------------------------

    def qkp_balance_ukb(self, pair: tuple[str, str]) -> int:
        return self.pools.get(_pair_of(*pair), 0)

    def qkp_balance(self, pair: tuple[str, str]) -> float:
        return to_kb(self.qkp_balance_ukb(pair))

    def delivered_ukb_for(self, request_id: int, slot: Optional[int] = None) -> int:
        return self.delivered.get((request_id, self.slot if slot is None else slot), 0)

    def is_served(self, request: Request, slot: Optional[int] = None) -> bool:
        return self.delivered_ukb_for(request.id, slot) >= to_ukb(request.rate_kbps)

    def snapshot(self) -> dict:
        """Comparable copy of all mutable fields (for round-trip checks)."""
        return {
            "slot": self.slot,
            "occupancy": dict(self.occupancy),
            "modules": dict(self.modules_used),
            "pools": {p: v for p, v in self.pools.items() if v},
            "delivered": {k: v for k, v in self.delivered.items() if v},
            "active": sorted(self.active),
        }

    def clone(self) -> "NetworkState":
        twin = NetworkState.__new__(NetworkState)
        twin.topology = self.topology
        twin.table = self.table
        twin.cap_ukb = self.cap_ukb
        twin.slot = self.slot
        twin.occupancy = dict(self.occupancy)
        twin.modules_used = dict(self.modules_used)
        twin.pools = dict(self.pools)
        twin.delivered = dict(self.delivered)
        twin.active = dict(self.active)
        twin._next_rid = self._next_rid
        return twin

    # -- allocation --------------------------------------------------------

    def _check_slot(self, slot: int):
        if slot != self.slot:
            raise ValidationError(f"state is at slot {self.slot}, not {slot}")

    def _first_fit(self, link_keys: Sequence[tuple[str, str]]) -> Optional[int]:
        for w in range(self.topology.channels):
            if all((lk, w) not in self.occupancy for lk in link_keys):
                return w
        return None

    def _check_modules(self, cost: dict[str, int]):
        budget = self.topology.module_budget
        for node, extra in cost.items():
            if self.modules_used[node] + extra > budget[node]:
                raise AllocationRefused(f"module budget exhausted at node {node}")

    def _commit(self, real: Realization):
        if real.kind == OB:
            for lk in real.route.link_keys():
                self.occupancy[(lk, real.wavelength)] = real.rid
        elif real.kind == TR:
            for route, w in real.hops:
                for lk in route.link_keys():
                    self.occupancy[(lk, w)] = real.rid
        for node, extra in real.module_cost().items():
            self.modules_used[node] += extra
        if real.request_id is not None:
            key = (real.request_id, real.slot)
            self.delivered[key] = self.delivered.get(key, 0) + real.delivered_ukb
        self.active[real.rid] = real

    def _next_id(self) -> int:
        rid = self._next_rid
        self._next_rid += 1
        return rid

    def allocate_ob(self, request: Optional[Request], route: Route, slot: int,
                    pair: Optional[tuple[str, str]] = None) -> Realization:
        """First-fit a continuous wavelength for an optical-bypass lightpath.

        Costs one module at each endpoint, none at crossed nodes.  Raises
        AllocationRefused (state untouched) when no wavelength is free on the
        whole route, an endpoint is out of modules, or the route is beyond
        reach.
        """
        self._check_slot(slot)
        route_pair = _pair_of(route.src, route.dst)
        if request is not None:
            if route_pair != request.pair:
                raise ValidationError(
                    f"route {route!r} does not connect request {request.id} endpoints")
            pair = request.pair
        elif pair is None:
            raise ValidationError("pre-caching allocation needs an explicit pair")
        elif route_pair != _pair_of(*pair):
            raise ValidationError(f"route {route!r} does not connect pair {pair}")
        rate_ukb = to_ukb(self.table.ob_route_rate(route))
        if rate_ukb <= 0:
            raise AllocationRefused(f"zero achievable rate over {route.total_km:g} km")
        w = self._first_fit(route.link_keys())
        if w is None:
            raise AllocationRefused("no continuous wavelength free on route")
        self._check_modules({route.src: 1, route.dst: 1})
        real = Realization(rid=self._next_id(),
                           request_id=None if request is None else request.id,
                           pair=_pair_of(*pair), slot=slot, kind=OB,
                           delivered_ukb=rate_ukb, route=route, wavelength=w)
        self._commit(real)
        return real

    def allocate_tr(self, request: Optional[Request], hop_routes: Sequence[Route],
                    slot: int, pair: Optional[tuple[str, str]] = None) -> Realization:
        """Allocate a trusted-relay chain, all hops or nothing.

        Each hop gets its own wavelength; relays cost two modules, chain
        endpoints one each.  Delivered rate is the slowest hop.
        """
        self._check_slot(slot)
        if not hop_routes:
            raise ValidationError("trusted-relay chain needs at least one hop")
        for a, b in zip(hop_routes, hop_routes[1:]):
            if a.dst != b.src:
                raise ValidationError("trusted-relay hops do not concatenate")
        chain_nodes = [hop_routes[0].src] + [r.dst for r in hop_routes]
        full_nodes = list(hop_routes[0].nodes)
        for r in hop_routes[1:]:
            full_nodes.extend(r.nodes[1:])
        if len(set(full_nodes)) != len(full_nodes):
            raise ValidationError("trusted-relay chain revisits a node")
        chain_pair = _pair_of(chain_nodes[0], chain_nodes[-1])
        if request is not None:
            if chain_pair != request.pair:
                raise ValidationError(
                    f"chain does not connect request {request.id} endpoints")
            pair = request.pair
        elif pair is None:
            raise ValidationError("pre-caching allocation needs an explicit pair")
        elif chain_pair != _pair_of(*pair):
            raise ValidationError(f"chain does not connect pair {pair}")
        rate_ukb = to_ukb(self.table.tr_chain_rate(hop_routes))
        if rate_ukb <= 0:
            raise AllocationRefused("zero achievable rate on a hop")
        hops = []
        for hop in hop_routes:
            w = self._first_fit(hop.link_keys())
            if w is None:
                raise AllocationRefused(
                    f"no wavelength free on hop {hop.src}>{hop.dst}")
            hops.append((hop, w))
        cost: dict[str, int] = {chain_nodes[0]: 1}
        cost[chain_nodes[-1]] = cost.get(chain_nodes[-1], 0) + 1
        for relay in chain_nodes[1:-1]:
            cost[relay] = cost.get(relay, 0) + 2
        self._check_modules(cost)
        real = Realization(rid=self._next_id(),
                           request_id=None if request is None else request.id,
                           pair=_pair_of(*pair), slot=slot, kind=TR,
                           delivered_ukb=rate_ukb, hops=tuple(hops))
        self._commit(real)
        return real

    def draw_qkp(self, request: Request, amount_kbslot: float, slot: int) -> Realization:
        """Serve keys from the pair's pool; no wavelengths, no modules."""
        self._check_slot(slot)
        amount = to_ukb(amount_kbslot)
        if amount <= 0:
            raise ValidationError("draw amount must be > 0")
        return self._draw_ukb(request, amount, slot)

    def _draw_ukb(self, request: Request, amount: int, slot: int) -> Realization:
        pair = request.pair
        if self.pools.get(pair, 0) < amount:
            raise AllocationRefused(
                f"insufficient QKP balance for pair {pair[0]}-{pair[1]}")
        self.pools[pair] = self.pools.get(pair, 0) - amount
        real = Realization(rid=self._next_id(), request_id=request.id, pair=pair,
                           slot=slot, kind=QKP, delivered_ukb=amount,
                           amount_ukb=amount)
        key = (request.id, slot)
        self.delivered[key] = self.delivered.get(key, 0) + amount
        self.active[real.rid] = real
        return real

    def deposit_qkp(self, pair: tuple[str, str], amount_kbslot: float,
                    slot: int) -> float:
        """Store keys for a pair; clipped at capacity, surplus discarded."""
        self._check_slot(slot)
        if amount_kbslot < 0:
            raise ValidationError("deposit amount must be >= 0")
        return to_kb(self._deposit_ukb(_pair_of(*pair), to_ukb(amount_kbslot)))

    def _deposit_ukb(self, pair: tuple[str, str], amount: int) -> int:
        held = self.pools.get(pair, 0)
        stored = min(amount, self.cap_ukb - held)
        if stored < 0:
            stored = 0
        self.pools[pair] = held + stored
        return stored

    def bank_surplus(self, real: Realization, amount_ukb: int) -> int:
        """Bank a channel realization's surplus keys into its pair's pool."""
        if real.rid not in self.active:
            raise ValueError(f"unknown realization {real.rid}")
        if amount_ukb <= 0:
            return 0
        stored = self._deposit_ukb(real.pair, amount_ukb)
        real.deposit_ukb += stored
        return stored

    def release(self, real: Realization):
        """Exact inverse of an allocation; refuses if the pool state forbids it."""
        if real.rid not in self.active:
            raise ValueError(f"unknown realization {real.rid}")
        if real.kind == QKP:
            pair = real.pair
            if self.pools.get(pair, 0) + real.amount_ukb > self.cap_ukb:
                raise AllocationRefused("pool has no room to take back a draw")
            self.pools[pair] = self.pools.get(pair, 0) + real.amount_ukb
        else:
            if real.deposit_ukb and self.pools.get(real.pair, 0) < real.deposit_ukb:
                raise AllocationRefused("banked surplus already drawn from pool")
            if real.deposit_ukb:
                self.pools[real.pair] -= real.deposit_ukb
            for lk_w in [k for k, rid in self.occupancy.items() if rid == real.rid]:
                del self.occupancy[lk_w]
            for node, extra in real.module_cost().items():
                self.modules_used[node] -= extra
        if real.request_id is not None:
            key = (real.request_id, real.slot)
            self.delivered[key] -= real.delivered_ukb
            if self.delivered[key] == 0:
                del self.delivered[key]
        del self.active[real.rid]
        if self.pools.get(real.pair) == 0:
            del self.pools[real.pair]

    def advance_slot(self):
        """Move to the next slot: channels and modules renew, pools carry over."""
        self.occupancy.clear()
        for n in self.modules_used:
            self.modules_used[n] = 0
        self.active.clear()
        self.slot += 1


# -- spec-shaped free functions ---------------------------------------------

def try_allocate_ob(state: NetworkState, request: Request, route: Route,
                    slot: int) -> Realization:
    return state.allocate_ob(request, route, slot)


def try_allocate_tr(state: NetworkState, request: Request,
                    hop_routes: Sequence[Route], slot: int) -> Realization:
    return state.allocate_tr(request, hop_routes, slot)


def draw_qkp(state: NetworkState, request: Request, amount_kbslot: float,
             slot: int) -> Realization:
    return state.draw_qkp(request, amount_kbslot, slot)


def deposit_qkp(state: NetworkState, pair: tuple[str, str],
                amount_kbslot: float, slot: int) -> float:
    return state.deposit_qkp(pair, amount_kbslot, slot)


def advance_slot(state: NetworkState):
    state.advance_slot()


def release(state: NetworkState, real: Realization):
    state.release(real)


# -- plan (de)serialization and replay ---------------------------------------

def plan_to_json(plan: Iterable[Realization]) -> list[dict]:
    return [r.to_json() for r in plan]


def _parse_links(tokens: Sequence[str], topology: Topology) -> Route:
    links = []
    for tok in tokens:
        try:
            u, v = tok.split(">")
        except ValueError as exc:
            raise ValidationError(f"bad link token {tok!r}") from exc
        link = topology.link_map.get((u, v))
        if link is None:
            raise ValidationError(f"unknown link {tok!r}")
        links.append(link)
    return Route(tuple(links))


def plan_from_json(records: Sequence[dict], topology: Topology) -> list[Realization]:
    plan = []
    for i, obj in enumerate(records):
        try:
            kind = obj["kind"]
            request_id = obj["request"]
            pair = _pair_of(*obj["pair"])
            slot = int(obj["slot"])
            if kind == OB:
                route = _parse_links(obj["links"], topology)
                real = Realization(rid=i, request_id=request_id, pair=pair,
                                   slot=slot, kind=OB,
                                   delivered_ukb=to_ukb(float(obj["delivered_kbps"])),
                                   route=route, wavelength=int(obj["wavelength"]),
                                   deposit_ukb=to_ukb(float(obj.get("deposit_kbslot", 0.0))))
            elif kind == TR:
                hops = tuple((_parse_links(h["links"], topology), int(h["wavelength"]))
                             for h in obj["hops"])
                real = Realization(rid=i, request_id=request_id, pair=pair,
                                   slot=slot, kind=TR,
                                   delivered_ukb=to_ukb(float(obj["delivered_kbps"])),
                                   hops=hops,
                                   deposit_ukb=to_ukb(float(obj.get("deposit_kbslot", 0.0))))
            elif kind == QKP:
                amount = to_ukb(float(obj["amount_kbslot"]))
                real = Realization(rid=i, request_id=request_id, pair=pair,
                                   slot=slot, kind=QKP, delivered_ukb=amount,
                                   amount_ukb=amount)
            else:
                raise ValidationError(f"unknown realization kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad plan record [{i}]: {exc}") from exc
        plan.append(real)
    return plan


def replay_plan(scenario: Scenario, plan: Sequence[Realization]) -> NetworkState:
    """Re-apply a plan against a fresh state, validating every invariant.

    Raises PlanInfeasible naming the violated invariant.  Channel rates are
    recomputed from the routes and must match the recorded delivered rates;
    recorded pool deposits may not exceed the surplus the realization earned.
    """
    state = NetworkState.for_scenario(scenario)
    requests = {r.id: r for r in scenario.requests}
    budget = scenario.topology.module_budget
    for real in plan:
        if real.slot < state.slot:
            raise PlanInfeasible("plan records are not ordered by slot")
        if real.slot >= scenario.horizon:
            raise PlanInfeasible(f"slot {real.slot} outside horizon")
        while state.slot < real.slot:
            state.advance_slot()
        if real.request_id is not None and real.request_id not in requests:
            raise PlanInfeasible(f"unknown request {real.request_id}")
        if real.request_id is not None and real.pair != requests[real.request_id].pair:
            raise PlanInfeasible(
                f"realization {real.rid} pair does not match its request")
        if real.kind == QKP:
            if real.request_id is None:
                raise PlanInfeasible("QKP draw without a request")
            if state.pools.get(real.pair, 0) < real.amount_ukb:
                raise PlanInfeasible(
                    f"QKP ledger would go negative for pair {real.pair}")
            state._draw_ukb(requests[real.request_id], real.amount_ukb, real.slot)
            continue
        if real.kind == TR:
            for a, b in zip(real.hops, real.hops[1:]):
                if a[0].dst != b[0].src:
                    raise PlanInfeasible(
                        f"trusted-relay hops do not concatenate in realization {real.rid}")
        ends = ((real.route.src, real.route.dst) if real.kind == OB
                else (real.hops[0][0].src, real.hops[-1][0].dst))
        if _pair_of(*ends) != real.pair:
            raise PlanInfeasible(
                f"realization {real.rid} does not connect its pair")
        rate = (state.table.ob_route_rate(real.route) if real.kind == OB
                else state.table.tr_chain_rate([r for r, _ in real.hops]))
        if to_ukb(rate) != real.delivered_ukb:
            raise PlanInfeasible(
                f"delivered rate mismatch for realization {real.rid}")
        for lk, w in ([(lk, real.wavelength) for lk in real.route.link_keys()]
                      if real.kind == OB else
                      [(lk, w) for r, w in real.hops for lk in r.link_keys()]):
            if w is None or not 0 <= w < scenario.topology.channels:
                raise PlanInfeasible(f"wavelength {w} out of range")
            if (lk, w) in state.occupancy:
                raise PlanInfeasible(
                    f"wavelength exclusivity violated on {lk[0]}>{lk[1]} w{w}")
        for node, extra in real.module_cost().items():
            if state.modules_used[node] + extra > budget[node]:
                raise PlanInfeasible(f"module budget exceeded at node {node}")
        if real.request_id is not None:
            allowed = max(0, real.delivered_ukb - to_ukb(requests[real.request_id].rate_kbps))
        else:
            allowed = real.delivered_ukb
        if real.deposit_ukb > allowed:
            raise PlanInfeasible(
                f"recorded deposit exceeds surplus for realization {real.rid}")
        if real.deposit_ukb and (state.pools.get(real.pair, 0) + real.deposit_ukb
                                 > state.cap_ukb):
            raise PlanInfeasible(f"pool capacity exceeded for pair {real.pair}")
        applied = Realization(rid=real.rid, request_id=real.request_id,
                              pair=real.pair, slot=real.slot, kind=real.kind,
                              delivered_ukb=real.delivered_ukb, route=real.route,
                              wavelength=real.wavelength, hops=real.hops)
        state._commit(applied)
        state._next_rid = max(state._next_rid, real.rid + 1)
        if real.deposit_ukb:
            state.pools[real.pair] = state.pools.get(real.pair, 0) + real.deposit_ukb
            applied.deposit_ukb = real.deposit_ukb
    return state
