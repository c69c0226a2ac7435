"""Domain types, topology/scenario ingestion, and testbed builders."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

from .errors import ValidationError
from .keyrate import DEFAULT_TABLE, KeyRateTable
from .rng import STREAM_DEMAND_PAIRS, STREAM_DEMAND_RATES, STREAM_LINK_LENGTHS, substream


class Link(NamedTuple):
    """One directed fiber segment."""

    src: str
    dst: str
    km: float


@dataclass(frozen=True)
class Topology:
    """Directed physical graph with per-node module budgets.

    Every undirected fiber appears as two directed links, one per direction.
    ``channels`` is the number of wavelengths available on each link.
    """

    nodes: tuple[str, ...]
    modules: tuple[int, ...]          # aligned with nodes
    links: tuple[Link, ...]
    channels: int

    def __post_init__(self):
        if len(self.nodes) != len(set(self.nodes)):
            raise ValidationError("node ids must be unique")
        if len(self.modules) != len(self.nodes):
            raise ValidationError("modules must align with nodes")
        for n, m in zip(self.nodes, self.modules):
            if m < 0:
                raise ValidationError(f"node {n!r}: module budget must be >= 0")
        if self.channels < 0:
            raise ValidationError("channels must be >= 0")
        seen = set()
        node_set = set(self.nodes)
        for link in self.links:
            if link.km <= 0:
                raise ValidationError(f"link {link.src}>{link.dst}: length must be > 0")
            for end in (link.src, link.dst):
                if end not in node_set:
                    raise ValidationError(f"link {link.src}>{link.dst}: unknown node {end!r}")
            key = (link.src, link.dst)
            if key in seen:
                raise ValidationError(f"duplicate link {link.src}>{link.dst}")
            seen.add(key)
        for link in self.links:
            if (link.dst, link.src) not in seen:
                raise ValidationError(f"link {link.src}>{link.dst} has no reverse direction")

    @cached_property
    def adjacency(self) -> dict[str, tuple[Link, ...]]:
        adj: dict[str, list[Link]] = {n: [] for n in self.nodes}
        for link in self.links:
            adj[link.src].append(link)
        return {n: tuple(sorted(out, key=lambda l: l.dst)) for n, out in adj.items()}

    @cached_property
    def module_budget(self) -> dict[str, int]:
        return dict(zip(self.nodes, self.modules))

    @cached_property
    def link_map(self) -> dict[tuple[str, str], Link]:
        return {(l.src, l.dst): l for l in self.links}

    def fibers(self) -> list[Link]:
        """Canonical undirected view: one link per fiber, src < dst."""
        return sorted(l for l in self.links if l.src < l.dst)

    def to_json(self) -> dict:
        return {
            "nodes": [{"id": n, "modules": m} for n, m in zip(self.nodes, self.modules)],
            "fibers": [{"a": l.src, "b": l.dst, "km": l.km} for l in self.fibers()],
            "channels": self.channels,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Topology":
        if not isinstance(obj, dict):
            raise ValidationError("topology must be a JSON object")
        for key in ("nodes", "fibers", "channels"):
            if key not in obj:
                raise ValidationError(f"topology: missing field {key!r}")
        nodes, modules = [], []
        for i, entry in enumerate(obj["nodes"]):
            try:
                nodes.append(str(entry["id"]))
                modules.append(int(entry["modules"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"topology.nodes[{i}]: {exc}") from exc
        fibers = []
        for i, entry in enumerate(obj["fibers"]):
            try:
                fibers.append((str(entry["a"]), str(entry["b"]), float(entry["km"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"topology.fibers[{i}]: {exc}") from exc
        try:
            channels = int(obj["channels"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"topology.channels: {exc}") from exc
        return build_topology(list(zip(nodes, modules)), fibers, channels)


def build_topology(nodes: Sequence[tuple[str, int]],
                   fibers: Sequence[tuple[str, str, float]],
                   channels: int) -> Topology:
    """Assemble a Topology from undirected fibers (expanded to both directions).

    Link order is canonical (sorted by endpoints) so equal inputs compare
    equal regardless of the order fibers were listed in.
    """
    normalized = []
    for a, b, km in fibers:
        if a == b:
            raise ValidationError(f"fiber {a!r}-{b!r}: endpoints must differ")
        normalized.append((a, b, km) if a < b else (b, a, km))
    links = []
    for a, b, km in sorted(normalized):
        links.append(Link(a, b, km))
        links.append(Link(b, a, km))
    ids = tuple(n for n, _ in nodes)
    budgets = tuple(int(m) for _, m in nodes)
    return Topology(nodes=ids, modules=budgets, links=tuple(links), channels=channels)


def load_topology(path: Union[str, Path]) -> Topology:
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read topology file {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"topology file {path} is not valid JSON: {exc}") from exc
    return Topology.from_json(obj)


@dataclass(frozen=True)
class Request:
    """A key request: node pair, required rate per active timeslot."""

    id: int
    src: str
    dst: str
    rate_kbps: float
    slots: frozenset[int]

    def __post_init__(self):
        if self.src == self.dst:
            raise ValidationError(f"request {self.id}: src and dst must differ")
        if self.rate_kbps <= 0:
            raise ValidationError(f"request {self.id}: rate must be > 0")
        if not self.slots:
            raise ValidationError(f"request {self.id}: needs at least one timeslot")

    @property
    def pair(self) -> tuple[str, str]:
        """Unordered endpoint pair (keys are shared by both directions)."""
        return (self.src, self.dst) if self.src < self.dst else (self.dst, self.src)

    def to_json(self) -> dict:
        return {"id": self.id, "src": self.src, "dst": self.dst,
                "rate_kbps": self.rate_kbps, "slots": sorted(self.slots)}

    @classmethod
    def from_json(cls, obj: dict) -> "Request":
        try:
            return cls(id=int(obj["id"]), src=str(obj["src"]), dst=str(obj["dst"]),
                       rate_kbps=float(obj["rate_kbps"]),
                       slots=frozenset(int(s) for s in obj["slots"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad request record: {exc}") from exc


@dataclass(frozen=True)
class Architecture:
    """Which provisioning technologies are available (OB, TR, or both).

    Under OBTR, ``alpha`` percent of the requests start on trusted-relay
    realizations, the rest on optical bypass.
    """

    kind: str
    alpha: int = 0

    OB_KIND = "OB"
    TR_KIND = "TR"
    OBTR_KIND = "OBTR"

    def __post_init__(self):
        if self.kind not in (self.OB_KIND, self.TR_KIND, self.OBTR_KIND):
            raise ValidationError(f"unknown architecture {self.kind!r}")
        if not 0 <= self.alpha <= 100:
            raise ValidationError(f"alpha must be in [0, 100], got {self.alpha}")

    @classmethod
    def ob(cls) -> "Architecture":
        return cls(cls.OB_KIND)

    @classmethod
    def tr(cls) -> "Architecture":
        return cls(cls.TR_KIND)

    @classmethod
    def obtr(cls, alpha: int) -> "Architecture":
        return cls(cls.OBTR_KIND, alpha=int(alpha))

    @property
    def allows_ob(self) -> bool:
        return self.kind in (self.OB_KIND, self.OBTR_KIND)

    @property
    def allows_tr(self) -> bool:
        return self.kind in (self.TR_KIND, self.OBTR_KIND)

    def label(self) -> str:
        if self.kind == self.OBTR_KIND:
            return f"OBTR{self.alpha}"
        return self.kind

    def to_json(self):
        if self.kind == self.OBTR_KIND:
            return {"OBTR": self.alpha}
        return self.kind

    @classmethod
    def from_json(cls, obj) -> "Architecture":
        if isinstance(obj, str):
            return cls.parse(obj)
        if isinstance(obj, dict) and "OBTR" in obj:
            return cls.obtr(int(obj["OBTR"]))
        raise ValidationError(f"bad architecture spec: {obj!r}")

    @classmethod
    def parse(cls, text: str) -> "Architecture":
        t = text.strip().upper()
        if t == "OB":
            return cls.ob()
        if t == "TR":
            return cls.tr()
        if t.startswith("OBTR"):
            rest = t[4:].lstrip(":")
            try:
                return cls.obtr(int(rest) if rest else 0)
            except ValueError as exc:
                raise ValidationError(f"bad architecture {text!r}") from exc
        raise ValidationError(f"bad architecture {text!r}")


@dataclass(frozen=True)
class Scenario:
    """One runnable planning instance: topology, demand, knobs."""

    topology: Topology
    requests: tuple[Request, ...]
    architecture: Architecture
    horizon: int = 1
    qkp_capacity_kbslot: float = 50.0
    seed: int = 0
    theta: int = 200
    k_neighborhood: int = 4
    tabu_tenure: int = 7
    key_rate_table: KeyRateTable = DEFAULT_TABLE

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if self.qkp_capacity_kbslot < 0:
            raise ValidationError("qkp_capacity must be >= 0")
        if self.theta < 0 or self.k_neighborhood < 1 or self.tabu_tenure < 0:
            raise ValidationError("solver knobs out of range")
        node_set = set(self.topology.nodes)
        ids = set()
        for req in self.requests:
            if req.id in ids:
                raise ValidationError(f"duplicate request id {req.id}")
            ids.add(req.id)
            for end in (req.src, req.dst):
                if end not in node_set:
                    raise ValidationError(f"request {req.id}: unknown node {end!r}")
            if max(req.slots) >= self.horizon or min(req.slots) < 0:
                raise ValidationError(f"request {req.id}: slot outside horizon")

    def request_by_id(self, rid: int) -> Request:
        for req in self.requests:
            if req.id == rid:
                return req
        raise KeyError(rid)

    def to_json(self) -> dict:
        obj = {
            "topology": self.topology.to_json(),
            "requests": [r.to_json() for r in self.requests],
            "architecture": self.architecture.to_json(),
            "horizon": self.horizon,
            "qkp_capacity": self.qkp_capacity_kbslot,
            "seed": self.seed,
            "theta": self.theta,
            "k_neighborhood": self.k_neighborhood,
            "tabu_tenure": self.tabu_tenure,
        }
        if self.key_rate_table != DEFAULT_TABLE:
            obj["key_rate_table"] = self.key_rate_table.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: dict, base_dir: Optional[Path] = None) -> "Scenario":
        if not isinstance(obj, dict):
            raise ValidationError("scenario must be a JSON object")
        topo_spec = obj.get("topology")
        if isinstance(topo_spec, str):
            path = Path(topo_spec)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            topology = load_topology(path)
        else:
            topology = Topology.from_json(topo_spec)
        horizon = int(obj.get("horizon", 1))
        seed = int(obj.get("seed", 0))
        req_spec = obj.get("requests")
        if isinstance(req_spec, list):
            requests = tuple(Request.from_json(r) for r in req_spec)
        elif isinstance(req_spec, dict) and "coverage" in req_spec:
            requests = tuple(generate_demands(
                topology, float(req_spec["coverage"]),
                int(req_spec.get("seed", seed)), horizon=horizon))
        elif isinstance(req_spec, dict) and "count" in req_spec:
            requests = tuple(generate_demand_count(
                topology, int(req_spec["count"]),
                int(req_spec.get("seed", seed)), horizon=horizon))
        else:
            raise ValidationError("scenario.requests must be a list or a generator spec")
        table = DEFAULT_TABLE
        if "key_rate_table" in obj:
            table = KeyRateTable.from_json(obj["key_rate_table"])
        return cls(
            topology=topology,
            requests=requests,
            architecture=Architecture.from_json(obj.get("architecture", "OB")),
            horizon=horizon,
            qkp_capacity_kbslot=float(obj.get("qkp_capacity", 50.0)),
            seed=seed,
            theta=int(obj.get("theta", 200)),
            k_neighborhood=int(obj.get("k_neighborhood", 4)),
            tabu_tenure=int(obj.get("tabu_tenure", 7)),
            key_rate_table=table,
        )

    def with_architecture(self, architecture: Architecture) -> "Scenario":
        return replace(self, architecture=architecture)


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return Scenario.from_json(obj, base_dir=path.parent)


# --- testbed builders -------------------------------------------------------

POLIQI_RING = ("A", "B", "C", "D", "E")

# Demand set bundled with the five-node ring scenario: all five two-hop pairs
# (oriented so their short routes share one rotation direction) plus two
# adjacent pairs.  Any assignment must place at least 12 directed hops on the
# ring's 10 directed links, so a worst-case attack always hits two requests
# somewhere; the exact solver confirms 2 is optimal under TR.
POLIQI_PAIRS = (("A", "C"), ("B", "D"), ("C", "E"), ("D", "A"), ("E", "B"),
                ("A", "B"), ("C", "D"))

NSF_FIBERS = (
    ("01", "02"), ("01", "03"), ("01", "08"),
    ("02", "03"), ("02", "04"),
    ("03", "06"),
    ("04", "05"), ("04", "11"),
    ("05", "06"), ("05", "07"),
    ("06", "10"), ("06", "13"),
    ("07", "08"),
    ("08", "09"),
    ("09", "10"), ("09", "12"), ("09", "14"),
    ("11", "12"), ("11", "14"),
    ("12", "13"),
    ("13", "14"),
)


def build_poliqi(modules_per_node: int = 10, channels: int = 4,
                 link_km: float = 10.0) -> Topology:
    """Five-node ring testbed; ten modules per node, uniform 10 km spans."""
    ring = POLIQI_RING
    fibers = [(ring[i], ring[(i + 1) % len(ring)], link_km) for i in range(len(ring))]
    return build_topology([(n, modules_per_node) for n in ring], fibers, channels)


def build_nsf(seed: int, modules_per_node: int = 5, channels: int = 16) -> Topology:
    """14-node NSF map with fiber lengths drawn uniformly from [5, 15] km."""
    rng = substream(seed, STREAM_LINK_LENGTHS)
    nodes = sorted({n for f in NSF_FIBERS for n in f})
    fibers = [(a, b, float(rng.uniform(5.0, 15.0))) for a, b in NSF_FIBERS]
    return build_topology([(n, modules_per_node) for n in nodes], fibers, channels)


def poliqi_requests(rate_kbps: float = 10.0, horizon: int = 1) -> list[Request]:
    slots = frozenset(range(horizon))
    return [Request(id=i, src=a, dst=b, rate_kbps=rate_kbps, slots=slots)
            for i, (a, b) in enumerate(POLIQI_PAIRS)]


def poliqi_scenario(architecture: Architecture, horizon: int = 1,
                    seed: int = 0, **knobs) -> Scenario:
    topo = build_poliqi()
    return Scenario(topology=topo, requests=tuple(poliqi_requests(horizon=horizon)),
                    architecture=architecture, horizon=horizon, seed=seed, **knobs)


def _unordered_pairs(topology: Topology) -> list[tuple[str, str]]:
    nodes = sorted(topology.nodes)
    return [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]


def _draw_rate(rng) -> float:
    # 80% light requests at 5-10 kb/s, 20% heavy at 15-25 kb/s
    if rng.random() < 0.8:
        return float(rng.uniform(5.0, 10.0))
    return float(rng.uniform(15.0, 25.0))


def generate_demands(topology: Topology, coverage: float, seed: int,
                     horizon: int = 1) -> list[Request]:
    """Seeded demand matrix over ``coverage`` of all unordered node pairs."""
    if not 0 < coverage <= 1:
        raise ValidationError(f"coverage must be in (0, 1], got {coverage}")
    pairs = _unordered_pairs(topology)
    n = int(len(pairs) * coverage)
    if n < 1:
        raise ValidationError(f"coverage {coverage} selects no node pairs")
    pick = substream(seed, STREAM_DEMAND_PAIRS)
    chosen = sorted(pick.choice(len(pairs), size=n, replace=False).tolist())
    rates = substream(seed, STREAM_DEMAND_RATES)
    slots = frozenset(range(horizon))
    return [Request(id=i, src=pairs[j][0], dst=pairs[j][1],
                    rate_kbps=_draw_rate(rates), slots=slots)
            for i, j in enumerate(chosen)]


def generate_demand_count(topology: Topology, count: int, seed: int,
                          horizon: int = 1) -> list[Request]:
    """Exactly ``count`` seeded requests; pairs repeat once all are in use."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    pairs = _unordered_pairs(topology)
    pick = substream(seed, STREAM_DEMAND_PAIRS)
    idx: list[int] = []
    while len(idx) < count:
        take = min(count - len(idx), len(pairs))
        idx.extend(sorted(pick.choice(len(pairs), size=take, replace=False).tolist()))
    rates = substream(seed, STREAM_DEMAND_RATES)
    slots = frozenset(range(horizon))
    return [Request(id=i, src=pairs[j][0], dst=pairs[j][1],
                    rate_kbps=_draw_rate(rates), slots=slots)
            for i, j in enumerate(idx)]


def canonical_json(obj) -> str:
    """Stable serialization used for hashing and byte-identical outputs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def scenario_hash(scenario: Scenario) -> str:
    import hashlib
    return hashlib.sha256(canonical_json(scenario.to_json()).encode("utf-8")).hexdigest()
