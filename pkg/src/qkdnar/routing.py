"""Candidate-route machinery over the physical topology.

Routes are simple directed paths.  All enumeration is deterministic: paths
come out ordered by (total length, node-id sequence), so equal-length
alternatives always appear in the same order regardless of platform.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator, Optional, TYPE_CHECKING

from .errors import ValidationError

if TYPE_CHECKING:
    from .model import Link, Topology

DEFAULT_MAX_ROUTES = 8
DEFAULT_MAX_KM = 50.0


@dataclass(frozen=True)
class Route:
    """An ordered, contiguous, loop-free sequence of directed links."""

    links: tuple["Link", ...]

    def __post_init__(self):
        if not self.links:
            raise ValidationError("route needs at least one link")
        for a, b in zip(self.links, self.links[1:]):
            if a.dst != b.src:
                raise ValidationError(f"route not contiguous at {a.dst!r}/{b.src!r}")
        nodes = self.nodes
        if len(set(nodes)) != len(nodes):
            raise ValidationError("route revisits a node")

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.links[0].src,) + tuple(l.dst for l in self.links)

    @property
    def total_km(self) -> float:
        return sum(l.km for l in self.links)

    @property
    def crossings(self) -> int:
        """Intermediate nodes traversed without terminating the path."""
        return len(self.links) - 1

    @property
    def src(self) -> str:
        return self.links[0].src

    @property
    def dst(self) -> str:
        return self.links[-1].dst

    def link_keys(self) -> tuple[tuple[str, str], ...]:
        return tuple((l.src, l.dst) for l in self.links)

    def __repr__(self):
        return f"Route({'-'.join(self.nodes)}, {self.total_km:g}km)"


def _paths_by_length(topology: "Topology", src: str, dst: str,
                     max_km: Optional[float] = None) -> Iterator[Route]:
    """Yield all simple src->dst routes ordered by (length, node sequence).

    Best-first expansion of partial simple paths.  Exact lexicographic
    tie-breaking falls out of pushing (cost, node-tuple) keys onto the heap.
    """
    if src == dst:
        raise ValidationError("route endpoints must differ")
    adj = topology.adjacency
    heap: list[tuple[float, tuple[str, ...], tuple["Link", ...]]] = [(0.0, (src,), ())]
    while heap:
        cost, nodes, links = heapq.heappop(heap)
        here = nodes[-1]
        if here == dst:
            yield Route(links)
            continue
        for link in adj.get(here, ()):
            if link.dst in nodes:
                continue
            new_cost = cost + link.km
            if max_km is not None and new_cost > max_km:
                continue
            heapq.heappush(heap, (new_cost, nodes + (link.dst,), links + (link,)))


def k_shortest_routes(topology: "Topology", src: str, dst: str, k: int) -> list[Route]:
    """Up to k simple routes in non-decreasing length, ties by node sequence."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    out = []
    for route in _paths_by_length(topology, src, dst):
        out.append(route)
        if len(out) == k:
            break
    return out


def enumerate_phi(topology: "Topology", src: str, dst: str,
                  max_routes: int = DEFAULT_MAX_ROUTES,
                  max_km: float = DEFAULT_MAX_KM) -> list[Route]:
    """Bounded candidate-route set between two nodes (length-capped)."""
    if max_routes < 1:
        raise ValidationError(f"max_routes must be >= 1, got {max_routes}")
    out = []
    for route in _paths_by_length(topology, src, dst, max_km=max_km):
        out.append(route)
        if len(out) == max_routes:
            break
    return out


def dfs_first_route(topology: "Topology", src: str, dst: str,
                    max_km: float = DEFAULT_MAX_KM) -> Optional[Route]:
    """First route a depth-first search finds, expanding neighbors in id order.

    Prefers the first route within max_km; if none exists, returns the very
    first simple route encountered, or None when src and dst are disconnected.
    """
    if src == dst:
        raise ValidationError("route endpoints must differ")
    adj = topology.adjacency
    first_found: Optional[Route] = None

    def walk(here: str, nodes: tuple[str, ...], links: tuple["Link", ...]) -> Optional[Route]:
        nonlocal first_found
        for link in adj.get(here, ()):
            if link.dst in nodes:
                continue
            new_links = links + (link,)
            if link.dst == dst:
                route = Route(new_links)
                if first_found is None:
                    first_found = route
                if route.total_km <= max_km:
                    return route
                continue
            hit = walk(link.dst, nodes + (link.dst,), new_links)
            if hit is not None:
                return hit
        return None

    within_reach = walk(src, (src,), ())
    return within_reach if within_reach is not None else first_found
