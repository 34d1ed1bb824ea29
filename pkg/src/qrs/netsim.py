"""Deterministic discrete-event simulator for reserved multimedia flows.

Two modes share one engine. ``baseline`` is plain reservation: a failed
station drops traffic until routing converges ``baseline_recovery_delay``
seconds later, then affected flows are re-routed on the new shortest path
and re-reserved from scratch. ``proposed`` adds the detector, connector and
analyzer agents per flow; their control messages travel in-band as packets
of their encoded size.
"""

from __future__ import annotations

import copy
import heapq
import logging
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

from . import wire
from .analyzer import analyzer_step
from .connector import (NoAlternativePath, NoRouterAvailable, RecoveryError, RepinRejected, connector_step, nearest_router,
                        switched)
from .core import (AgentCursor, AnalyzerState, ConnectorState, DetectorState, Link, Path,
                   StationId)
from .detector import detector_finish, detector_step, probe_station, retarget
from .metrics import MetricsReport, Trace, finalize
from .reservation import (AdmissionFailed, CompoundService, ReservationEngine,
                          ReservationRequest)
from .routing import NoAlternativePath as RouteNoAlternative
from .routing import Unreachable, alternative_paths, shortest_path
from .scenario import FailureConfig, FlowConfig, Scenario

log = logging.getLogger(__name__)

EVENT_KINDS = ("packet_arrival", "packet_departure", "detector_tick", "component_message",
               "failure_inject", "flow_start", "flow_end", "baseline_rebuild")


def transmit_delay(size: int, bandwidth: float) -> float:
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return size * 8 / bandwidth


@dataclass(slots=True)
class Packet:
    stream_id: int
    seq_no: int
    size: int
    created: float
    route: tuple
    hop: int = 0
    delivered: Optional[float] = None
    control: Optional[tuple] = None  # (entity, flow index, message) for agent traffic

    @property
    def current_station(self) -> StationId:
        return self.route[self.hop]


class LinkQueue:
    """One direction of a link: FIFO with tail drop; the head is in transmission."""

    def __init__(self, link: Link, src: StationId, dst: StationId):
        self.link = link
        self.src = src
        self.dst = dst
        self.capacity = link.queue_capacity
        self.packets: deque = deque()

    def __len__(self):
        return len(self.packets)

    def offer(self, packet) -> bool:
        if len(self.packets) >= self.capacity:
            return False
        self.packets.append(packet)
        return True


def enqueue(queue: LinkQueue, packet) -> bool:
    return queue.offer(packet)


@dataclass
class Event:
    time: float
    seq: int
    kind: str
    data: tuple = ()

    def __lt__(self, other):
        return (self.time, self.seq) < (other.time, other.seq)


@dataclass
class _Failure:
    index: int
    cfg: FailureConfig
    affected: set = field(default_factory=set)
    pending: set = field(default_factory=set)
    recovered: bool = False


@dataclass
class _Flow:
    index: int
    cfg: FlowConfig
    interval: float
    phase: float
    path: Optional[Path] = None
    active: bool = False
    ended: bool = False
    sent: int = 0
    held: bool = False
    alarmed: set = field(default_factory=set)
    detector: Optional[DetectorState] = None
    cursor: Optional[AgentCursor] = None
    connector: Optional[ConnectorState] = None
    analyzer: Optional[AnalyzerState] = None
    connector_addr: StationId = 0
    analyzer_addr: StationId = 0


class Simulator:
    def __init__(self, scenario: Scenario, audit: bool = True):
        scenario.check()
        self.sc = scenario
        self.proposed = scenario.mode == "proposed"
        self.topo = copy.deepcopy(scenario.topology)
        self.engine = ReservationEngine(self.topo)
        self.audit = audit
        self._audited = -1
        self.trace = Trace()
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.events_processed = 0
        self.known_down: set = set()
        self._routes: dict = {}
        self.queues: dict[tuple, LinkQueue] = {}
        for link in self.topo.links:
            self.queues[(link.a, link.b)] = LinkQueue(link, link.a, link.b)
            self.queues[(link.b, link.a)] = LinkQueue(link, link.b, link.a)

        rng = random.Random(scenario.seed)
        self.flows = []
        for i, f in enumerate(scenario.flows):
            interval = transmit_delay(f.pkt_bytes, f.spec.rate)
            self.flows.append(_Flow(i, f, interval, rng.uniform(0.0, interval)))
        self.failures = [_Failure(i, f) for i, f in enumerate(scenario.failures)]

    # -- scheduling --------------------------------------------------------

    def schedule(self, time: float, kind: str, *data):
        self._seq += 1
        heapq.heappush(self._heap, Event(time, self._seq, kind, data))

    def run(self) -> MetricsReport:
        sc = self.sc
        self.trace.add("meta", 0.0, sc.horizon, 1.0, sc.mode)
        for f in self.flows:
            cfg = f.cfg
            self.trace.add("flow", 0.0, f.index, cfg.start, min(cfg.stop, sc.horizon),
                           list(cfg.compound_deps))
            self.schedule(cfg.start, "flow_start", f.index)
        for fail in self.failures:
            self.schedule(fail.cfg.time, "failure_inject", fail.index)

        handlers = {
            "packet_arrival": self._on_arrival,
            "packet_departure": self._on_departure,
            "detector_tick": self._on_detector_tick,
            "component_message": self._on_component_message,
            "failure_inject": self._on_failure,
            "flow_start": self._on_flow_start,
            "flow_end": self._on_flow_end,
            "baseline_rebuild": self._on_rebuild,
        }
        while self._heap and self._heap[0].time <= sc.horizon:
            ev = heapq.heappop(self._heap)
            self.now = ev.time
            handlers[ev.kind](*ev.data)
            self.events_processed += 1
            if self.audit and self.engine.version != self._audited:
                self.engine.audit()
                self._audited = self.engine.version
        self.trace.add("end", sc.horizon)
        return finalize(self.trace)

    # -- qos bookkeeping ---------------------------------------------------

    def _holds_qos(self, f: _Flow) -> bool:
        if not f.active or f.path is None:
            return False
        res = self.engine.get(f.index)
        if res is None or not self.engine.is_active(f.index) or tuple(res.path) != tuple(f.path):
            return False
        return all(self.topo.station(s).up for s in f.path)

    def _refresh_qos(self):
        for f in self.flows:
            held = self._holds_qos(f)
            if held != f.held:
                f.held = held
                self.trace.add("qos", self.now, f.index, int(held))

    def _compound_unheld(self, f: _Flow) -> bool:
        deps = f.cfg.compound_deps
        if not deps:
            return False
        return not (f.held and all(self.flows[d].held for d in deps))

    def _held_at(self, stream_id: int, sid: StationId) -> int:
        res = self.engine.get(stream_id)
        if res is not None and self.engine.is_active(stream_id) and sid in res.path:
            return res.spec.rate
        return 0

    # -- flows -------------------------------------------------------------

    def _route(self, src, dst) -> Optional[Path]:
        try:
            return shortest_path(self.topo, src, dst, avoid=self.known_down)
        except Unreachable:
            return None

    def _reserve_flow(self, f: _Flow, route: Path):
        deps = [d for d in f.cfg.compound_deps if not self.engine.is_active(d)]
        try:
            if deps:
                reqs = []
                for d in deps:
                    dcfg = self.flows[d].cfg
                    droute = self.flows[d].path or self._route(dcfg.sender, dcfg.receiver)
                    if droute is None:
                        raise AdmissionFailed(dcfg.sender, d)
                    reqs.append(ReservationRequest(d, dcfg.spec, droute))
                svc = CompoundService(ReservationRequest(f.index, f.cfg.spec, route), tuple(reqs))
                self.engine.reserve_compound(svc)
                for r in reqs:
                    self.trace.add("resv", self.now, r.stream_id, 1)
                    if self.flows[r.stream_id].path is None:
                        self.flows[r.stream_id].path = r.route
            else:
                self.engine.reserve(f.index, f.cfg.spec, route)
            self.trace.add("resv", self.now, f.index, 1)
            return True
        except AdmissionFailed as exc:
            for d in deps:
                self.trace.add("resv", self.now, d, 0)
            self.trace.add("resv", self.now, f.index, 0)
            log.debug("t=%.3f %s", self.now, exc)
            return False

    def _on_flow_start(self, idx):
        f = self.flows[idx]
        cfg = f.cfg
        f.active = True
        if self.engine.is_active(idx):
            f.path = self.engine.get(idx).path  # reserved earlier as a dependency
        else:
            route = self._route(cfg.sender, cfg.receiver)
            if route is None:
                route = shortest_path(self.topo, cfg.sender, cfg.receiver)
            f.path = route
            self._reserve_flow(f, route)
        if self.proposed:
            self._start_agents(f)
        self._refresh_qos()
        self.schedule(cfg.start + f.phase, "packet_arrival", None, idx)
        self.schedule(min(cfg.stop, self.sc.horizon), "flow_end", idx)

    def _on_flow_end(self, idx):
        f = self.flows[idx]
        f.active = False
        f.ended = True
        if f.detector is not None:
            f.detector, msgs = detector_finish(f.detector)
            self._send_alarms(f, msgs)
        self.engine.release(idx)
        self._refresh_qos()

    def _generate(self, idx):
        f = self.flows[idx]
        if not f.active:
            return
        pkt = Packet(idx, f.sent, f.cfg.pkt_bytes, self.now, tuple(f.path))
        self.trace.add("gen", self.now, idx, f.sent)
        f.sent += 1
        nxt = f.cfg.start + f.phase + f.sent * f.interval
        if nxt < f.cfg.stop:
            self.schedule(nxt, "packet_arrival", None, idx)
        self._at_station(pkt)

    # -- packets -----------------------------------------------------------

    def _on_arrival(self, pkt: Optional[Packet], idx=None):
        if pkt is None:
            self._generate(idx)
        else:
            pkt.hop += 1
            self._at_station(pkt)

    def _drop(self, pkt: Packet, reason: str):
        if pkt.control is not None:
            self.trace.add("ctl_drop", self.now, type(pkt.control[2]).__name__, reason)
            return
        f = self.flows[pkt.stream_id]
        self.trace.add("drop", self.now, pkt.stream_id, pkt.seq_no, reason, pkt.size * 8,
                       int(self._compound_unheld(f)), pkt.current_station)

    def _at_station(self, pkt: Packet):
        sid = pkt.current_station
        if not self.topo.station(sid).up:
            self._drop(pkt, "station_down")
            return
        if pkt.hop == len(pkt.route) - 1:
            pkt.delivered = self.now
            if pkt.control is not None:
                self._deliver_control(*pkt.control)
            else:
                self.trace.add("dlv", self.now, pkt.stream_id, pkt.seq_no, self.now - pkt.created)
            return
        q = self.queues[(sid, pkt.route[pkt.hop + 1])]
        if not enqueue(q, pkt):
            self._drop(pkt, "queue_full")
            return
        if len(q) == 1:
            self.schedule(self.now + transmit_delay(pkt.size, q.link.bandwidth),
                          "packet_departure", q)

    def _on_departure(self, q: LinkQueue):
        pkt = q.packets.popleft()
        self.schedule(self.now + q.link.prop_delay, "packet_arrival", pkt)
        if q.packets:
            head = q.packets[0]
            self.schedule(self.now + transmit_delay(head.size, q.link.bandwidth),
                          "packet_departure", q)

    # -- failures ----------------------------------------------------------

    def _on_failure(self, fidx):
        fail = self.failures[fidx]
        sid = fail.cfg.station
        if fail.cfg.down:
            self.engine.mark_down(sid)
        else:
            self.engine.set_capacity(sid, fail.cfg.available)
        # a flow is hit if it crosses the station and no longer holds its QoS
        affected = {f.index for f in self.flows
                    if f.active and f.path and sid in f.path and not self._holds_qos(f)}
        fail.affected = set(affected)
        fail.pending = set(affected)
        self.trace.add("inject", self.now, fidx, sid, sorted(affected))
        self._refresh_qos()
        self.schedule(self.now + self.sc.baseline_recovery_delay, "baseline_rebuild", fidx)

    def _on_rebuild(self, fidx):
        fail = self.failures[fidx]
        sid = fail.cfg.station
        if fail.cfg.down:
            self.known_down.add(sid)
            self._routes.clear()
        if self.proposed:
            return
        for f in self.flows:
            if not f.active:
                continue
            hit = f.index in fail.affected or (fail.cfg.down and f.path and sid in f.path)
            if not hit or self._holds_qos(f):
                continue
            route = self._route(f.cfg.sender, f.cfg.receiver)
            if route is None:
                continue
            self.engine.release(f.index)
            f.path = route
            if self._reserve_flow(f, route):
                self.trace.add("switch", self.now, f.index)
                self._mark_recovered(f)
        self._refresh_qos()

    def _mark_recovered(self, f: _Flow):
        for fail in self.failures:
            if f.index not in fail.pending:
                continue
            if fail.cfg.down and fail.cfg.station in f.path:
                continue
            if not self.engine.is_active(f.index):
                continue
            fail.pending.discard(f.index)
            if not fail.pending and fail.affected and not fail.recovered:
                fail.recovered = True
                self.trace.add("recovered", self.now, fail.index)

    # -- agents ------------------------------------------------------------

    def _start_agents(self, f: _Flow):
        path = f.path
        routers = [s for s in path if self.topo.station(s).is_router]
        f.connector_addr = routers[0] if routers else path.sender
        f.analyzer_addr = routers[-1] if routers else path.receiver
        spec = f.cfg.spec
        f.connector = ConnectorState(f.index, tuple(path), (self.now,) * len(path), f.index,
                                     f.analyzer_addr, f.index, rsvp_handle=f.index)
        f.analyzer = AnalyzerState(f.index, f.index, f.connector_addr, f.index, spec)
        f.detector = DetectorState(f.index, f.index, f.connector_addr, (spec,) * len(path), path,
                                   batching=self.sc.batching, max_batch=self.sc.max_batch)
        f.cursor = AgentCursor(0, 0, self.sc.tr)
        self.schedule(self.now + self.sc.tr, "detector_tick", f.index)

    def _failure_for(self, sid) -> int:
        hits = [x.index for x in self.failures if x.cfg.station == sid and x.cfg.time <= self.now]
        return hits[-1] if hits else -1

    def _on_detector_tick(self, idx):
        f = self.flows[idx]
        if not f.active:
            return

        def probe(sid, required):
            return probe_station(self.topo.station(sid), required, held=self._held_at(idx, sid))

        f.detector, f.cursor, msgs = detector_step(f.detector, f.cursor, self.now, probe)
        self._send_alarms(f, msgs)
        self.schedule(self.now + f.cursor.tr, "detector_tick", idx)

    def _send_alarms(self, f: _Flow, msgs):
        for m in msgs:
            stations = ([m.failed_station] if isinstance(m, wire.DetectorAlarm)
                        else [s for s, _ in m.entries])
            for s in stations:
                self.trace.add("alarm", self.now, f.index, s, self._failure_for(s))
            # detector traffic enters at the receiver-side router
            self._send(f.analyzer_addr, f.connector_addr, "connector", f.index, m)

    def _control_route(self, src, dst) -> Optional[tuple]:
        down = frozenset(s.id for s in self.topo.stations if not s.up)
        key = (src, dst, down)
        if key not in self._routes:
            try:
                self._routes[key] = tuple(shortest_path(self.topo, src, dst, avoid=down))
            except Unreachable:
                self._routes[key] = None
        return self._routes[key]

    def _send(self, src, dst, entity, idx, msg):
        size = wire.encoded_size(msg)
        self.trace.add("msg", self.now, type(msg).__name__, size)
        if src == dst:
            self.schedule(self.now, "component_message", entity, idx, msg)
            return
        route = self._control_route(src, dst)
        if route is None:
            self.trace.add("ctl_drop", self.now, type(msg).__name__, "unreachable")
            return
        pkt = Packet(-1, 0, size, self.now, route, control=(entity, idx, msg))
        self._at_station(pkt)

    def _deliver_control(self, entity, idx, msg):
        self.schedule(self.now, "component_message", entity, idx, msg)

    def _on_component_message(self, entity, idx, msg):
        f = self.flows[idx]
        if f.ended:
            return
        if entity == "connector":
            self._connector_event(f, msg)
        elif entity == "router":
            self._router_event(f, msg)
        elif entity == "analyzer":
            self._analyzer_event(f, msg)
        elif entity == "rsvp":
            reply = wire.QosExtractReply(msg.analyzer_id, f.cfg.spec)
            self._send(f.cfg.receiver, f.analyzer_addr, "analyzer", idx, reply)
        elif entity == "sender":
            self._sender_update(f, msg)

    def _connector_event(self, f: _Flow, event):
        def test(sid, need, held):
            return probe_station(self.topo.station(sid), need, held=self._held_at(f.index, sid))

        was_open = f.connector.detector_flag
        try:
            f.connector, msgs = connector_step(f.connector, event, self.now, test=test,
                                               sc=f.cursor.sc)
        except RecoveryError as err:
            f.connector = err.state
            outcome = "noalt" if isinstance(err, NoAlternativePath) else "expired"
            self.trace.add("episode", self.now, f.index, outcome)
            return
        if isinstance(event, (wire.DetectorAlarm, wire.CumulativeAlarm)):
            f.alarmed.update([event.failed_station] if isinstance(event, wire.DetectorAlarm)
                             else [s for s, _ in event.entries])
        if not was_open and f.connector.detector_flag:
            self.trace.add("episode", self.now, f.index, "open")
        for m in msgs:
            if isinstance(m, wire.RouteRequest):
                try:
                    router = nearest_router(m.failed_station, m.old_path, self.topo)
                except NoRouterAvailable:
                    f.connector = replace(f.connector, detector_flag=0)
                    self.trace.add("episode", self.now, f.index, "norouter")
                    return
                self._send(f.connector_addr, router, "router", f.index, m)
            elif isinstance(m, wire.AnalyzeRequest):
                self._send(f.connector_addr, f.analyzer_addr, "analyzer", f.index, m)
            elif isinstance(m, wire.SenderUpdate):
                self._send(f.connector_addr, f.cfg.sender, "sender", f.index, m)

    def _router_event(self, f: _Flow, req: wire.RouteRequest):
        try:
            alts = alternative_paths(self.topo, req.old_path, req.failed_station,
                                     self.sc.k_alternatives, rejected=req.excluded)
        except RouteNoAlternative:
            alts = []
        router = nearest_router(req.failed_station, req.old_path, self.topo)
        self._send(router, f.connector_addr, "connector", f.index,
                   wire.RouteReply(req.connector_id, tuple(alts)))

    def _analyzer_event(self, f: _Flow, msg):
        if isinstance(msg, wire.AnalyzeRequest):
            self.trace.add("analyze", self.now, f.index, "req")
        f.analyzer, out = analyzer_step(f.analyzer, msg)
        for m in out:
            if isinstance(m, wire.QosExtractRequest):
                self._send(f.analyzer_addr, f.cfg.receiver, "rsvp", f.index, m)
            else:
                self.trace.add("analyze", self.now, f.index, "ok")
                self._send(f.analyzer_addr, f.connector_addr, "connector", f.index, m)

    def _sender_update(self, f: _Flow, upd: wire.SenderUpdate):
        new_path = upd.new_path
        try:
            if self.engine.is_active(f.index):
                self.engine.repin(f.index, new_path)
            else:
                self.engine.reserve(f.index, f.cfg.spec, new_path)
            self.trace.add("resv", self.now, f.index, 1)
        except AdmissionFailed as exc:
            self.trace.add("resv", self.now, f.index, 0)
            self.trace.add("episode", self.now, f.index, "rejected")
            self._connector_event(f, RepinRejected(exc.station))
            return
        old = f.path
        f.path = new_path
        f.connector = switched(f.connector, new_path, self.now)
        f.detector = retarget(f.detector, new_path, f.cfg.spec)
        f.cursor = AgentCursor(0, 0, f.cursor.tr, f.cursor.tc)
        self.trace.add("switch", self.now, f.index)
        self.trace.add("episode", self.now, f.index, "switched")
        for s in sorted(f.alarmed):
            if s in old and s not in new_path:
                self.trace.add("resolved", self.now, f.index, s)
        self._mark_recovered(f)
        self._refresh_qos()


def run(scenario: Scenario, audit: bool = True) -> MetricsReport:
    return Simulator(scenario, audit=audit).run()


def run_with_trace(scenario: Scenario, audit: bool = True) -> tuple[MetricsReport, Trace]:
    sim = Simulator(scenario, audit=audit)
    report = sim.run()
    return report, sim.trace
