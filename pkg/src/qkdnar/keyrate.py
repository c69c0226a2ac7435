"""Achievable secret-key-rate model.

Rates come from a small distance->rate anchor table (kb/s at 10..50 km).
Between anchors we interpolate linearly; below the first anchor the rate is
clamped to the 10 km value, and beyond the last anchor the channel is
considered unusable (rate 0).  Optical bypass loses 11% of the rate for every
intermediate node the lightpath crosses; a trusted-relay chain is limited by
its slowest hop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, TYPE_CHECKING

from .errors import ValidationError

if TYPE_CHECKING:
    from .routing import Route

DEFAULT_ANCHORS: tuple[tuple[float, float], ...] = (
    (10.0, 23.0),
    (20.0, 13.0),
    (30.0, 7.0),
    (40.0, 3.5),
    (50.0, 1.9),
)


@dataclass(frozen=True)
class KeyRateTable:
    """Distance->rate anchors plus the per-crossed-node bypass penalty."""

    anchors: tuple[tuple[float, float], ...] = DEFAULT_ANCHORS
    ob_penalty_per_node: float = 0.11
    max_reach_km: float = field(init=False, default=0.0)

    def __post_init__(self):
        if not self.anchors:
            raise ValidationError("key rate table needs at least one anchor")
        reaches = [a[0] for a in self.anchors]
        rates = [a[1] for a in self.anchors]
        if sorted(reaches) != reaches or len(set(reaches)) != len(reaches):
            raise ValidationError("anchor reaches must be strictly increasing")
        if sorted(rates, reverse=True) != rates or len(set(rates)) != len(rates):
            raise ValidationError("anchor rates must be strictly decreasing")
        if not 0.0 < self.ob_penalty_per_node < 1.0:
            raise ValidationError("ob_penalty_per_node must lie in (0, 1)")
        object.__setattr__(self, "max_reach_km", reaches[-1])

    def rate_for_distance(self, d_km: float) -> float:
        """Achievable rate in kb/s for one quantum channel spanning d_km."""
        if d_km < 0:
            raise ValidationError(f"distance must be non-negative, got {d_km}")
        if d_km > self.max_reach_km:
            return 0.0
        anchors = self.anchors
        if d_km <= anchors[0][0]:
            return anchors[0][1]
        for (x0, r0), (x1, r1) in zip(anchors, anchors[1:]):
            if d_km <= x1:
                return r0 + (d_km - x0) * (r1 - r0) / (x1 - x0)
        return anchors[-1][1]

    def ob_route_rate(self, route: "Route") -> float:
        """Rate of an optical-bypass lightpath over the given physical route.

        Every intermediate node crossed without regeneration costs a
        multiplicative penalty; routes past the maximum reach deliver 0.
        """
        base = self.rate_for_distance(route.total_km)
        return base * (1.0 - self.ob_penalty_per_node) ** route.crossings

    def tr_chain_rate(self, hop_routes: Sequence["Route"]) -> float:
        """Bottleneck rate of a trusted-relay chain (min over hop rates)."""
        if not hop_routes:
            raise ValidationError("trusted-relay chain needs at least one hop")
        return min(self.ob_route_rate(hop) for hop in hop_routes)

    def to_json(self) -> dict:
        return {"anchors": [list(a) for a in self.anchors],
                "ob_penalty_per_node": self.ob_penalty_per_node}

    @classmethod
    def from_json(cls, obj: dict) -> "KeyRateTable":
        try:
            anchors = tuple((float(x), float(r)) for x, r in obj["anchors"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad key_rate_table.anchors: {exc}") from exc
        penalty = float(obj.get("ob_penalty_per_node", 0.11))
        return cls(anchors=anchors, ob_penalty_per_node=penalty)


DEFAULT_TABLE = KeyRateTable()


def rate_for_distance(d_km: float, table: KeyRateTable = DEFAULT_TABLE) -> float:
    return table.rate_for_distance(d_km)


def ob_route_rate(route: "Route", table: KeyRateTable = DEFAULT_TABLE) -> float:
    return table.ob_route_rate(route)


def tr_chain_rate(hop_routes: Iterable["Route"], table: KeyRateTable = DEFAULT_TABLE) -> float:
    return table.tr_chain_rate(tuple(hop_routes))
