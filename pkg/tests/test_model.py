import json

import pytest

from qkdnar.errors import ValidationError
from qkdnar.keyrate import DEFAULT_TABLE
from qkdnar.model import (Architecture, Request, Scenario, Topology, build_nsf,
                          build_poliqi, generate_demand_count, generate_demands,
                          load_scenario, load_topology, poliqi_requests,
                          poliqi_scenario, scenario_hash)

TWO_NODE = {
    "nodes": [{"id": "A", "modules": 4}, {"id": "B", "modules": 4}],
    "fibers": [{"a": "A", "b": "B", "km": 10.0}],
    "channels": 2,
}


def test_load_minimal_topology(tmp_path):
    path = tmp_path / "two.json"
    path.write_text(json.dumps(TWO_NODE))
    topo = load_topology(path)
    assert len(topo.links) == 2
    assert topo.link_map[("A", "B")].km == 10.0
    assert topo.link_map[("B", "A")].km == 10.0


def test_load_dangling_node_named(tmp_path):
    bad = dict(TWO_NODE, fibers=[{"a": "A", "b": "Z", "km": 10.0}])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(ValidationError, match="Z"):
        load_topology(path)


def test_load_negative_length_named(tmp_path):
    bad = dict(TWO_NODE, fibers=[{"a": "A", "b": "B", "km": -3.0}])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(ValidationError, match="length"):
        load_topology(path)


def test_load_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="JSON"):
        load_topology(path)


def test_topology_roundtrip(tmp_path):
    topo = build_poliqi()
    path = tmp_path / "ring.json"
    path.write_text(json.dumps(topo.to_json()))
    assert load_topology(path) == topo


def test_every_link_has_reverse():
    topo = build_nsf(3)
    for link in topo.links:
        rev = topo.link_map[(link.dst, link.src)]
        assert rev.km == link.km


def test_poliqi_shape():
    topo = build_poliqi()
    assert len(topo.nodes) == 5
    assert len(topo.links) == 10
    assert all(m == 10 for m in topo.modules)
    assert all(l.km == 10.0 for l in topo.links)
    # the chosen span keeps each hop at the table's top rate
    assert DEFAULT_TABLE.rate_for_distance(topo.links[0].km) == 23.0


def test_nsf_shape_and_determinism():
    topo = build_nsf(1)
    assert len(topo.nodes) == 14
    assert len(topo.links) == 42
    assert sum(topo.modules) == 70
    assert all(5.0 <= l.km <= 15.0 for l in topo.links)
    assert build_nsf(1) == topo
    assert build_nsf(2) != topo


def test_generate_demands_count():
    topo = build_nsf(1)
    reqs = generate_demands(topo, 0.8, 7)
    assert len(reqs) == 72          # floor(0.8 * 91)
    pairs = {r.pair for r in reqs}
    assert len(pairs) == 72         # no repeats under coverage sampling
    for r in reqs:
        assert 5.0 <= r.rate_kbps <= 10.0 or 15.0 <= r.rate_kbps <= 25.0


def test_generate_demands_deterministic():
    topo = build_nsf(1)
    a = generate_demands(topo, 0.5, 3)
    b = generate_demands(topo, 0.5, 3)
    assert a == b
    assert generate_demands(topo, 0.5, 4) != a


def test_generate_demands_coverage_guards():
    topo = build_nsf(1)
    with pytest.raises(ValidationError):
        generate_demands(topo, 0.0, 1)
    with pytest.raises(ValidationError):
        generate_demands(topo, 1.5, 1)


def test_generate_demand_count_beyond_pairs():
    topo = build_nsf(1)
    reqs = generate_demand_count(topo, 145, 7)
    assert len(reqs) == 145
    assert len({r.id for r in reqs}) == 145


def test_request_validation():
    with pytest.raises(ValidationError):
        Request(id=0, src="A", dst="A", rate_kbps=5.0, slots=frozenset({0}))
    with pytest.raises(ValidationError):
        Request(id=0, src="A", dst="B", rate_kbps=0.0, slots=frozenset({0}))
    with pytest.raises(ValidationError):
        Request(id=0, src="A", dst="B", rate_kbps=5.0, slots=frozenset())


def test_architecture_parse_and_json():
    assert Architecture.parse("ob") == Architecture.ob()
    assert Architecture.parse("obtr:80") == Architecture.obtr(80)
    assert Architecture.from_json({"OBTR": 40}).alpha == 40
    assert Architecture.parse("TR").to_json() == "TR"
    with pytest.raises(ValidationError):
        Architecture.parse("quantum")
    with pytest.raises(ValidationError):
        Architecture.obtr(120)


def test_scenario_roundtrip(tmp_path):
    scenario = poliqi_scenario(Architecture.obtr(40), horizon=2, seed=9)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario.to_json()))
    again = load_scenario(path)
    assert again == scenario
    assert scenario_hash(again) == scenario_hash(scenario)


def test_scenario_generator_spec(tmp_path):
    topo = build_nsf(1)
    obj = {"topology": topo.to_json(),
           "requests": {"coverage": 0.5, "seed": 3},
           "architecture": "TR", "horizon": 2, "seed": 3}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(obj))
    scenario = load_scenario(path)
    assert len(scenario.requests) == 45
    assert all(r.slots == frozenset({0, 1}) for r in scenario.requests)


def test_scenario_topology_by_path(tmp_path):
    (tmp_path / "topo.json").write_text(json.dumps(TWO_NODE))
    obj = {"topology": "topo.json",
           "requests": [{"id": 0, "src": "A", "dst": "B",
                         "rate_kbps": 5.0, "slots": [0]}],
           "architecture": "OB", "horizon": 1}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(obj))
    scenario = load_scenario(path)
    assert scenario.topology.nodes == ("A", "B")


def test_scenario_validation():
    topo = build_poliqi()
    with pytest.raises(ValidationError, match="unknown node"):
        Scenario(topology=topo,
                 requests=(Request(id=0, src="A", dst="Z", rate_kbps=5.0,
                                   slots=frozenset({0})),),
                 architecture=Architecture.ob())
    with pytest.raises(ValidationError, match="horizon"):
        Scenario(topology=topo, requests=tuple(poliqi_requests()),
                 architecture=Architecture.ob(), horizon=0)


def test_poliqi_scenario_is_the_documented_instance():
    scenario = poliqi_scenario(Architecture.tr())
    assert len(scenario.requests) == 7
    assert all(r.rate_kbps == 10.0 for r in scenario.requests)
    assert all(m == 10 for m in scenario.topology.modules)
