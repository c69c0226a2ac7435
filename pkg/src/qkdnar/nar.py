"""Attack-radius metrics: affected-request sets and maxNAR/avgNAR.

Two attack semantics are supported.  Link semantics jams one directed fiber:
the jamming signal enters every optical-bypass lightpath crossing that fiber
and rides it downstream (trusted-relay hops regenerate and stop it), and all
requests with a channel realization on any contaminated fiber are affected.
Route semantics follows the ILP view: an attack on a used route affects the
requests whose channel realizations share a link with it.

Requests served purely from the quantum key pool are never affected; the
reverse direction of a fiber is a separate link and is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .errors import ValidationError
from .model import Link
from .routing import Route
from .state import NetworkState, OB, Realization

LINK = "link"
ROUTE = "route"
ONE_LEVEL = "one_level"
TRANSITIVE = "transitive"

LinkKey = tuple[str, str]


def _link_key(e: Union[Link, LinkKey]) -> LinkKey:
    if isinstance(e, Link):
        return (e.src, e.dst)
    return (e[0], e[1])


def _channel_reals(plan: Iterable[Realization], slot: int) -> list[Realization]:
    return [r for r in plan if r.slot == slot and r.is_channel]


def _contaminated(seed: LinkKey, ob_routes: Sequence[tuple[LinkKey, ...]],
                  propagation: str) -> set[LinkKey]:
    """Links reached by a jamming signal injected on ``seed``."""
    contaminated = {seed}
    if propagation == ONE_LEVEL:
        for keys in ob_routes:
            if seed in keys:
                contaminated.update(keys[keys.index(seed) + 1:])
        return contaminated
    if propagation != TRANSITIVE:
        raise ValidationError(f"unknown propagation mode {propagation!r}")
    changed = True
    while changed:
        changed = False
        for keys in ob_routes:
            hit = next((i for i, k in enumerate(keys) if k in contaminated), None)
            if hit is None:
                continue
            fresh = set(keys[hit + 1:]) - contaminated
            if fresh:
                contaminated |= fresh
                changed = True
    return contaminated


def affected_by_link(plan: Iterable[Realization], state: NetworkState,
                     e: Union[Link, LinkKey], slot: int,
                     propagation: str = ONE_LEVEL) -> set[int]:
    """Requests disrupted by jamming the directed link ``e``."""
    key = _link_key(e)
    if key not in state.topology.link_map:
        raise ValidationError(f"unknown link {key[0]}>{key[1]}")
    chans = _channel_reals(plan, slot)
    ob_routes = [r.route.link_keys() for r in chans if r.kind == OB]
    bad = _contaminated(key, ob_routes, propagation)
    return {r.request_id for r in chans
            if r.request_id is not None and any(k in bad for k in r.link_keys())}


def used_routes(plan: Iterable[Realization], slot: int) -> list[Route]:
    """Distinct physical routes carrying at least one channel realization."""
    seen: dict[tuple[LinkKey, ...], Route] = {}
    for real in _channel_reals(plan, slot):
        for route in real.routes():
            seen.setdefault(route.link_keys(), route)
    return [seen[k] for k in sorted(seen)]


def affected_by_route(plan: Iterable[Realization], state: NetworkState,
                      route: Route, slot: int) -> set[int]:
    """ILP-style attack on a used route: requests sharing any of its links."""
    chans = _channel_reals(plan, slot)
    in_use = {rt.link_keys() for r in chans for rt in r.routes()}
    if route.link_keys() not in in_use:
        raise ValidationError(f"route {route!r} is not in use")
    keys = set(route.link_keys())
    return {r.request_id for r in chans
            if r.request_id is not None and keys & set(r.link_keys())}


def _link_affected_map(chans: Sequence[Realization],
                       propagation: str = ONE_LEVEL) -> dict[LinkKey, set[int]]:
    """Affected set per used directed link, in one pass."""
    users: dict[LinkKey, set[int]] = {}
    ob_routes = []
    used: set[LinkKey] = set()
    for r in chans:
        keys = r.link_keys()
        used.update(keys)
        if r.kind == OB:
            ob_routes.append(keys)
        if r.request_id is None:
            continue
        for k in keys:
            users.setdefault(k, set()).add(r.request_id)
    out: dict[LinkKey, set[int]] = {}
    for e in sorted(used):
        affected: set[int] = set()
        for k in _contaminated(e, ob_routes, propagation):
            affected |= users.get(k, set())
        out[e] = affected
    return out


def _route_affected_map(chans: Sequence[Realization]) -> dict[tuple[LinkKey, ...], set[int]]:
    routes: set[tuple[LinkKey, ...]] = set()
    for r in chans:
        for route in r.routes():
            routes.add(route.link_keys())
    out = {}
    for keys in sorted(routes):
        key_set = set(keys)
        out[keys] = {r.request_id for r in chans
                     if r.request_id is not None and key_set & set(r.link_keys())}
    return out


def max_nar(plan: Iterable[Realization], state: NetworkState, slot: int,
            semantics: str = LINK, propagation: str = ONE_LEVEL) -> int:
    chans = _channel_reals(plan, slot)
    if not chans:
        return 0
    if semantics == LINK:
        return max(len(s) for s in _link_affected_map(chans, propagation).values())
    if semantics == ROUTE:
        return max(len(s) for s in _route_affected_map(chans).values())
    raise ValidationError(f"unknown semantics {semantics!r}")


def avg_nar(plan: Iterable[Realization], state: NetworkState, slot: int,
            semantics: str = LINK, propagation: str = ONE_LEVEL) -> float:
    chans = _channel_reals(plan, slot)
    if not chans:
        return 0.0
    if semantics == LINK:
        sets = _link_affected_map(chans, propagation).values()
    elif semantics == ROUTE:
        sets = _route_affected_map(chans).values()
    else:
        raise ValidationError(f"unknown semantics {semantics!r}")
    return sum(len(s) for s in sets) / len(sets)


def nar_scores(plan: Iterable[Realization], state: NetworkState, slot: int,
               semantics: str = LINK,
               propagation: str = ONE_LEVEL) -> tuple[int, float]:
    """(max_nar, avg_nar) in one pass; the hot path for solver scoring."""
    chans = _channel_reals(plan, slot)
    if not chans:
        return 0, 0.0
    if semantics == LINK:
        amap = _link_affected_map(chans, propagation)
    elif semantics == ROUTE:
        amap = _route_affected_map(chans)
    else:
        raise ValidationError(f"unknown semantics {semantics!r}")
    sizes = [len(s) for s in amap.values()]
    return max(sizes), sum(sizes) / len(sizes)


@dataclass
class SlotNar:
    """NAR evaluation of one slot: worst and mean impact per attack target."""

    slot: int
    max_nar: int
    avg_nar: float
    targets: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def to_json(self, elide_above: int = 32) -> dict:
        targets = {}
        for label, ids in self.targets.items():
            entry: dict = {"count": len(ids)}
            if len(ids) <= elide_above:
                entry["requests"] = list(ids)
            targets[label] = entry
        return {"slot": self.slot, "max_nar": self.max_nar,
                "avg_nar": self.avg_nar, "targets": targets}


@dataclass
class NarReport:
    slots: list[SlotNar]
    semantics: str = LINK
    propagation: str = ONE_LEVEL

    @property
    def objective(self) -> int:
        return sum(s.max_nar for s in self.slots)

    def to_json(self, elide_above: int = 32) -> dict:
        return {"semantics": self.semantics, "propagation": self.propagation,
                "objective": self.objective,
                "slots": [s.to_json(elide_above) for s in self.slots]}

    def csv_rows(self) -> list[dict]:
        return [{"slot": s.slot, "max_nar": s.max_nar, "avg_nar": s.avg_nar}
                for s in self.slots]


def evaluate_slot(plan: Iterable[Realization], state: NetworkState, slot: int,
                  semantics: str = LINK, propagation: str = ONE_LEVEL) -> SlotNar:
    chans = _channel_reals(plan, slot)
    if not chans:
        return SlotNar(slot=slot, max_nar=0, avg_nar=0.0)
    if semantics == LINK:
        amap = _link_affected_map(chans, propagation)
        targets = {f"{u}>{v}": tuple(sorted(ids)) for (u, v), ids in amap.items()}
    elif semantics == ROUTE:
        rmap = _route_affected_map(chans)
        targets = {"-".join([keys[0][0]] + [k[1] for k in keys]): tuple(sorted(ids))
                   for keys, ids in rmap.items()}
    else:
        raise ValidationError(f"unknown semantics {semantics!r}")
    sizes = [len(ids) for ids in targets.values()]
    return SlotNar(slot=slot, max_nar=max(sizes),
                   avg_nar=sum(sizes) / len(sizes), targets=targets)
