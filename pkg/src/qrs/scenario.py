"""Scenario model and the plain-text scenario format.

A scenario file has ``[topology]``, ``[flows]``, ``[failures]`` and ``[sim]``
sections. Record lines are ``<kind> key=value ...``; ``[sim]`` takes
``key = value`` lines. ``#`` starts a comment. Example::

    [topology]
    station id=0 kind=router capacity_bps=4000000 label=r1
    station id=1 kind=host capacity_bps=1000000
    link a=0 b=1 bandwidth_bps=1000000 prop_delay_s=0.0001 queue_pkts=400

    [flows]
    flow sender=1 receiver=2 rate_bps=200000 pkt_bytes=1000 start_s=0 stop_s=60

    [failures]
    failure time_s=30 station=0 available_bps=down

    [sim]
    mode = proposed
    seed = 1
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath
from typing import Optional

from .core import FlowSpec, Kind, Link, Priority, Station, Topology

MODES = ("baseline", "proposed")


@dataclass(frozen=True)
class Diagnostic:
    section: str
    key: str
    line: int
    message: str

    def __str__(self):
        where = f"line {self.line}" if self.line else "file"
        key = f" key '{self.key}'" if self.key else ""
        return f"{where}: [{self.section}]{key}: {self.message}"


class ScenarioInvalid(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class FlowConfig:
    sender: int
    receiver: int
    spec: FlowSpec
    pkt_bytes: int
    start: float
    stop: float
    compound_deps: tuple[int, ...] = ()


@dataclass(frozen=True)
class FailureConfig:
    time: float
    station: int
    available: Optional[int] = None  # None: the station goes down

    @property
    def down(self) -> bool:
        return self.available is None


@dataclass
class Scenario:
    topology: Topology
    flows: list[FlowConfig]
    failures: list[FailureConfig] = field(default_factory=list)
    mode: str = "proposed"
    batching: bool = False
    seed: int = 0
    horizon: float = 60.0
    queue_capacity: int = 400
    k_alternatives: int = 4
    tr: float = 0.01
    baseline_recovery_delay: float = 2.0
    max_batch: int = 8

    def with_(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def check(self):
        """Raise ScenarioInvalid unless the scenario is runnable."""
        diags = []

        def bad(section, key, msg):
            diags.append(Diagnostic(section, key, 0, msg))

        n = len(self.topology)
        if self.mode not in MODES:
            bad("sim", "mode", f"must be one of {MODES}")
        if self.horizon <= 0:
            bad("sim", "horizon_s", "must be positive")
        if self.tr <= 0:
            bad("sim", "tr_s", "must be positive")
        if self.k_alternatives < 1:
            bad("sim", "k_alternatives", "must be at least 1")
        if self.baseline_recovery_delay < 0:
            bad("sim", "baseline_recovery_delay_s", "must be non-negative")
        if self.max_batch < 1:
            bad("sim", "max_batch", "must be at least 1")
        for i, f in enumerate(self.flows):
            for key, sid in (("sender", f.sender), ("receiver", f.receiver)):
                if not 0 <= sid < n:
                    bad("flows", key, f"flow {i}: station {sid} does not exist")
            if f.sender == f.receiver:
                bad("flows", "receiver", f"flow {i}: sender and receiver coincide")
            if not 0 <= f.start < f.stop:
                bad("flows", "start_s", f"flow {i}: need 0 <= start < stop")
            if f.start > self.horizon:
                bad("flows", "start_s", f"flow {i}: starts after the horizon")
            for d in f.compound_deps:
                if not 0 <= d < len(self.flows) or d == i:
                    bad("flows", "compound_deps", f"flow {i}: bad dependency {d}")
        if _has_cycle(self.flows):
            bad("flows", "compound_deps", "dependencies form a cycle")
        for f in self.failures:
            if not 0 <= f.station < n:
                bad("failures", "station", f"station {f.station} does not exist")
            if not 0 <= f.time <= self.horizon:
                bad("failures", "time_s", f"time {f.time} outside [0, horizon]")
            if f.available is not None and f.available < 0:
                bad("failures", "available_bps", "must be non-negative")
        if diags:
            raise ScenarioInvalid(diags)


def _has_cycle(flows) -> bool:
    color = {}

    def visit(i):
        color[i] = 1
        for d in flows[i].compound_deps:
            if not 0 <= d < len(flows):
                continue
            if color.get(d) == 1 or (d not in color and visit(d)):
                return True
        color[i] = 2
        return False

    return any(i not in color and visit(i) for i in range(len(flows)))


_STATION_KEYS = {"id": int, "kind": str, "capacity_bps": int, "label": str}
_STATION_REQ = ("id", "kind", "capacity_bps")
_LINK_KEYS = {"a": int, "b": int, "bandwidth_bps": int, "prop_delay_s": float, "queue_pkts": int}
_LINK_REQ = ("a", "b", "bandwidth_bps", "prop_delay_s")
_FLOW_KEYS = {"sender": int, "receiver": int, "rate_bps": int, "pkt_bytes": int,
              "start_s": float, "stop_s": float, "compound_deps": str,
              "jitter_bound_s": float, "priority": str}
_FLOW_REQ = ("sender", "receiver", "rate_bps", "pkt_bytes", "start_s", "stop_s")
_FAILURE_KEYS = {"time_s": float, "station": int, "available_bps": str}
_FAILURE_REQ = ("time_s", "station", "available_bps")
_SIM_KEYS = {"mode": str, "seed": int, "horizon_s": float, "batching": str,
             "k_alternatives": int, "tr_s": float, "baseline_recovery_delay_s": float,
             "queue_pkts": int, "max_batch": int}
_RECORDS = {"topology": {"station": (_STATION_KEYS, _STATION_REQ), "link": (_LINK_KEYS, _LINK_REQ)},
            "flows": {"flow": (_FLOW_KEYS, _FLOW_REQ)},
            "failures": {"failure": (_FAILURE_KEYS, _FAILURE_REQ)}}
SECTIONS = ("topology", "flows", "failures", "sim")
DEFAULT_JITTER_S = 0.05


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _priority(text):
    try:
        return Priority[text.upper()]
    except KeyError:
        raise ValueError(f"unknown priority {text!r}") from None


def parse_scenario(text: str) -> Scenario:
    diags: list[Diagnostic] = []
    records: dict[str, list] = {s: [] for s in SECTIONS}
    sim: dict[str, tuple] = {}
    seen = set()
    section = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTIONS:
                diags.append(Diagnostic(section, "", lineno, "unknown section"))
                section = None
                continue
            if section in seen:
                diags.append(Diagnostic(section, "", lineno, "section repeated"))
            seen.add(section)
            continue
        if section is None:
            diags.append(Diagnostic("", "", lineno, "content outside any section"))
            continue
        if section == "sim":
            key, eq, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not eq:
                diags.append(Diagnostic("sim", key, lineno, "expected key = value"))
            elif key not in _SIM_KEYS:
                diags.append(Diagnostic("sim", key, lineno, "unknown key"))
            else:
                sim[key] = (value, lineno)
            continue
        kind, *tokens = line.split()
        spec = _RECORDS[section].get(kind)
        if spec is None:
            diags.append(Diagnostic(section, kind, lineno, f"unknown record kind '{kind}'"))
            continue
        types, required = spec
        values = {}
        for tok in tokens:
            key, eq, value = tok.partition("=")
            if not eq:
                diags.append(Diagnostic(section, key, lineno, "expected key=value"))
                continue
            if key not in types:
                diags.append(Diagnostic(section, key, lineno, "unknown key"))
                continue
            if key in values:
                diags.append(Diagnostic(section, key, lineno, "key repeated"))
                continue
            try:
                values[key] = types[key](value)
            except ValueError:
                diags.append(Diagnostic(section, key, lineno, f"bad value {value!r}"))
        for key in required:
            if key not in values and not any(d.line == lineno and d.key == key for d in diags):
                diags.append(Diagnostic(section, key, lineno, "missing"))
        records[section].append((kind, values, lineno))

    for name in ("topology", "flows"):
        if name not in seen:
            diags.append(Diagnostic(name, "", 0, "section missing"))
    if diags:
        raise ScenarioInvalid(diags)

    def conv(section, key, lineno, fn, value):
        try:
            return fn(value)
        except ValueError as exc:
            diags.append(Diagnostic(section, key, lineno, str(exc)))
            return None

    # [sim]
    opts = {}
    for key, (value, lineno) in sim.items():
        if key == "batching":
            opts["batching"] = conv("sim", key, lineno, _bool, value)
        elif key == "mode":
            if value not in MODES:
                diags.append(Diagnostic("sim", key, lineno, f"must be one of {MODES}"))
            opts["mode"] = value
        else:
            target = {"horizon_s": "horizon", "tr_s": "tr", "queue_pkts": "queue_capacity",
                      "baseline_recovery_delay_s": "baseline_recovery_delay"}.get(key, key)
            opts[target] = conv("sim", key, lineno, _SIM_KEYS[key], value)
    queue_default = opts.get("queue_capacity") or 400

    # [topology]
    stations, links = [], []
    for kind, v, lineno in records["topology"]:
        try:
            if kind == "station":
                stations.append(Station(v["id"], Kind(v["kind"]), v["capacity_bps"],
                                        label=v.get("label", "")))
            else:
                links.append(Link(v["a"], v["b"], v["bandwidth_bps"], v["prop_delay_s"],
                                  v.get("queue_pkts", queue_default)))
        except ValueError as exc:
            diags.append(Diagnostic("topology", kind, lineno, str(exc)))
    stations.sort(key=lambda s: s.id)
    topo = None
    if not diags:
        try:
            topo = Topology(stations, links)
        except ValueError as exc:
            diags.append(Diagnostic("topology", "", 0, str(exc)))

    # [flows]
    flows = []
    for _, v, lineno in records["flows"]:
        deps = ()
        if v.get("compound_deps"):
            deps = conv("flows", "compound_deps", lineno,
                        lambda s: tuple(int(x) for x in s.split(",") if x), v["compound_deps"]) or ()
        prio = Priority.STREAMING
        if "priority" in v:
            prio = conv("flows", "priority", lineno, _priority, v["priority"])
        try:
            spec = FlowSpec(v["rate_bps"], v["pkt_bytes"],
                            round(v.get("jitter_bound_s", DEFAULT_JITTER_S) * 1e6),
                            prio or Priority.STREAMING)
            flows.append(FlowConfig(v["sender"], v["receiver"], spec, v["pkt_bytes"],
                                    v["start_s"], v["stop_s"], deps))
        except (ValueError, KeyError) as exc:
            diags.append(Diagnostic("flows", "flow", lineno, str(exc)))

    # [failures]
    failures = []
    for _, v, lineno in records["failures"]:
        avail = v["available_bps"]
        if avail == "down":
            failures.append(FailureConfig(v["time_s"], v["station"], None))
        else:
            amount = conv("failures", "available_bps", lineno, int, avail)
            if amount is not None:
                failures.append(FailureConfig(v["time_s"], v["station"], amount))

    if diags:
        raise ScenarioInvalid(diags)
    sc = Scenario(topo, flows, failures, **opts)
    sc.check()
    return sc


def load_scenario(path) -> Scenario:
    """Load a scenario file, or a bundled scenario by name (``default``, ``nofailure``, ``batching``)."""
    p = FsPath(path)
    if not p.exists() and p.suffix == "" and p.name in bundled_names():
        return parse_scenario(bundled_text(p.name))
    return parse_scenario(p.read_text())


def bundled_names() -> list[str]:
    files = resources.files("qrs") / "scenarios"
    return sorted(f.name[:-4] for f in files.iterdir() if f.name.endswith(".scn"))


def bundled_text(name: str) -> str:
    return (resources.files("qrs") / "scenarios" / f"{name}.scn").read_text()


def bundled(name: str) -> Scenario:
    return parse_scenario(bundled_text(name))
