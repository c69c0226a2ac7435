from __future__ import annotations

import pytest

from qkdnar.model import (Architecture, Request, Scenario, Topology,
                          build_poliqi, build_topology)
from qkdnar.state import NetworkState


@pytest.fixture
def poliqi():
    return build_poliqi()


@pytest.fixture
def chain_topology():
    # A - B - C line, 10 km spans
    return build_topology([("A", 10), ("B", 10), ("C", 10)],
                          [("A", "B", 10.0), ("B", "C", 10.0)], channels=4)


def make_requests(pairs, rate=10.0, slots=(0,)):
    return tuple(Request(id=i, src=a, dst=b, rate_kbps=rate,
                         slots=frozenset(slots))
                 for i, (a, b) in enumerate(pairs))


def make_scenario(topology, pairs, arch="OB", rate=10.0, horizon=1, **knobs):
    return Scenario(topology=topology, requests=make_requests(pairs, rate=rate,
                                                              slots=range(horizon)),
                    architecture=Architecture.parse(arch), horizon=horizon,
                    **knobs)


@pytest.fixture
def chain_scenario(chain_topology):
    # r0 spans the whole chain, r1 sits on the second hop
    return make_scenario(chain_topology, [("A", "C"), ("B", "C")])


def fresh_state(scenario) -> NetworkState:
    return NetworkState.for_scenario(scenario)
