"""Domain types shared by the reservation plane, the recovery agents and the simulator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

StationId = int


class Kind(enum.Enum):
    HOST = "host"
    ROUTER = "router"


class Priority(enum.IntEnum):
    INTERACTIVE = 0
    STREAMING = 1
    EXCELLENT_EFFORT = 2
    BEST_EFFORT = 3


@dataclass
class Station:
    id: StationId
    kind: Kind
    capacity: int
    available: int = -1
    up: bool = True
    label: str = ""

    def __post_init__(self):
        if self.available < 0:
            self.available = self.capacity
        if not 0 <= self.available <= self.capacity:
            raise ValueError(f"station {self.id}: available {self.available} outside [0, {self.capacity}]")

    @property
    def is_router(self) -> bool:
        return self.kind is Kind.ROUTER


@dataclass(frozen=True)
class Link:
    a: StationId
    b: StationId
    bandwidth: int
    prop_delay: float = 0.0
    queue_capacity: int = 400

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"link {self.a}-{self.b} is a self loop")
        if self.bandwidth <= 0:
            raise ValueError("link bandwidth must be positive")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be at least 1")

    @property
    def key(self) -> tuple[StationId, StationId]:
        return (min(self.a, self.b), max(self.a, self.b))


class Topology:
    """Stations plus undirected links.

    Station ids must be dense ``0..S-1`` and the graph connected.
    """

    def __init__(self, stations: list[Station], links: list[Link]):
        self.stations = list(stations)
        self.links = list(links)
        ids = [s.id for s in self.stations]
        if ids != list(range(len(ids))):
            raise ValueError("station ids must be dense 0..S-1 in order")
        self._links: dict[tuple[int, int], Link] = {}
        self.adj: dict[StationId, list[StationId]] = {s.id: [] for s in self.stations}
        for link in self.links:
            for end in (link.a, link.b):
                if end not in self.adj:
                    raise ValueError(f"link endpoint {end} does not exist")
            if link.key in self._links:
                raise ValueError(f"duplicate link {link.key}")
            self._links[link.key] = link
            self.adj[link.a].append(link.b)
            self.adj[link.b].append(link.a)
        for nbrs in self.adj.values():
            nbrs.sort()
        if self.stations and not self._connected():
            raise ValueError("topology is not connected")

    def _connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            for n in self.adj[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return len(seen) == len(self.stations)

    def __len__(self):
        return len(self.stations)

    def station(self, sid: StationId) -> Station:
        return self.stations[sid]

    def link(self, a: StationId, b: StationId) -> Optional[Link]:
        return self._links.get((min(a, b), max(a, b)))

    def has_link(self, a: StationId, b: StationId) -> bool:
        return (min(a, b), max(a, b)) in self._links


@dataclass(frozen=True)
class FlowSpec:
    """Per-station QoS requirement of a flow.

    Integer units throughout so the wire codec round-trips exactly:
    rate in bits/s, burst in bytes, jitter bound in microseconds.
    """

    rate: int
    burst: int
    jitter_us: int
    priority: Priority = Priority.STREAMING

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.burst <= 0:
            raise ValueError("burst must cover at least one packet")
        if self.jitter_us <= 0:
            raise ValueError("jitter bound must be positive")

    @property
    def jitter_bound(self) -> float:
        return self.jitter_us / 1e6


@dataclass(frozen=True)
class Path:
    stations: tuple[StationId, ...]

    def __init__(self, stations):
        object.__setattr__(self, "stations", tuple(stations))
        if len(self.stations) < 2:
            raise ValueError("a path needs at least a sender and a receiver")
        if len(set(self.stations)) != len(self.stations):
            raise ValueError(f"path {list(self.stations)} repeats a station")

    def __len__(self):
        return len(self.stations)

    def __iter__(self):
        return iter(self.stations)

    def __getitem__(self, i):
        return self.stations[i]

    def __contains__(self, sid):
        return sid in self.stations

    def index(self, sid: StationId) -> int:
        return self.stations.index(sid)

    @property
    def sender(self) -> StationId:
        return self.stations[0]

    @property
    def receiver(self) -> StationId:
        return self.stations[-1]

    def __repr__(self):
        return f"Path({list(self.stations)})"


@dataclass(frozen=True)
class DiffResult:
    same: tuple[StationId, ...]
    diff1: tuple[StationId, ...]
    diff2: tuple[StationId, ...]
    h: int
    k: int


@dataclass(frozen=True)
class AgentCursor:
    """Where the detector (sw) and connector (sc) are along the path.

    ``tc`` is carried for completeness; no recovery step consumes it.
    """

    sw: int = 0
    sc: int = 0
    tr: float = 0.01
    tc: float = 0.0

    def __post_init__(self):
        if self.sw < self.sc:
            raise ValueError("detector cursor must not trail the connector")
        if self.tr <= 0:
            raise ValueError("tr must be positive")


@dataclass(frozen=True)
class ConnectorState:
    connector_id: int
    station_addresses: tuple[StationId, ...]
    visit_times: tuple[float, ...]
    analyzer_id: int
    analyzer_address: StationId
    stream_id: int
    detector_flag: int = 0
    rsvp_handle: int = 0
    # open recovery episode; meaningful only while detector_flag == 1
    failed: tuple[StationId, ...] = ()
    pfs: int = 0
    attempts_left: int = 0
    excluded: tuple[StationId, ...] = ()
    candidate: Optional[Path] = None

    def __post_init__(self):
        if self.detector_flag not in (0, 1):
            raise ValueError("detector_flag must be 0 or 1")
        if len(self.visit_times) != len(self.station_addresses):
            raise ValueError("one visit time per station address")

    @property
    def path(self) -> Path:
        return Path(self.station_addresses)


@dataclass(frozen=True)
class AnalyzerState:
    connector_id: int
    analyzer_id: int
    connector_address: StationId
    rsvp_handle: int
    reserved_spec: FlowSpec
    same_table: tuple[StationId, ...] = ()
    diff1_table: tuple[StationId, ...] = ()
    diff2_table: tuple[StationId, ...] = ()
    connector_flag: int = 0
    new_path: Optional[Path] = None

    def __post_init__(self):
        if self.connector_flag not in (0, 1):
            raise ValueError("connector_flag must be 0 or 1")


@dataclass(frozen=True)
class DetectorState:
    detector_id: int
    connector_id: int
    connector_address: StationId
    required_qos: tuple[FlowSpec, ...]
    path: Path
    connector_flag: int = 0
    qos_test_value: int = 0
    batching: bool = False
    max_batch: int = 8
    reported: frozenset = field(default_factory=frozenset)
    pending: tuple = ()

    def __post_init__(self):
        if self.qos_test_value not in (0, 1):
            raise ValueError("qos_test_value must be 0 or 1")
        if len(self.required_qos) != len(self.path):
            raise ValueError("one required FlowSpec per path station")


def validate_path(path, topo: Topology) -> bool:
    stations = list(path)
    if len(stations) < 2 or len(set(stations)) != len(stations):
        return False
    if any(not 0 <= s < len(topo) for s in stations):
        return False
    return all(topo.has_link(a, b) for a, b in zip(stations, stations[1:]))
