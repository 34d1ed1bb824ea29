"""Connector agent: turns detector alarms into a validated alternative path.

One recovery episode runs per alarm burst. Each pass of the loop asks the
nearest router for alternatives, has the analyzer map QoS onto the first
candidate, and tests the candidate from the failed position onwards. The
budget of passes is ``sw - sc``: the detector's lead over the connector,
counted in stations, with one station consumed per pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .core import ConnectorState, FlowSpec, Path, StationId, Topology
from .detector import ProbeResult
from .wire import (AnalyzeReply, AnalyzeRequest, CumulativeAlarm, DetectorAlarm,
                   RouteReply, RouteRequest, SenderUpdate)


class NoRouterAvailable(Exception):
    pass


class RecoveryError(Exception):
    """Episode ended without a path; ``state`` is the connector after closing it."""

    def __init__(self, msg: str, state: ConnectorState):
        super().__init__(msg)
        self.state = state


class NoAlternativePath(RecoveryError):
    pass


class RecoveryWindowExpired(RecoveryError):
    pass


FLAG_CHECK = "flag_check"


@dataclass(frozen=True)
class RepinRejected:
    """The sender could not move the reservation onto the validated path."""

    station: StationId


def nearest_router(failed: StationId, path: Path, topo: Topology) -> StationId:
    pos = path.index(failed)
    for sid in reversed(path[:pos]):
        if topo.station(sid).is_router:
            return sid
    for sid in topo.adj[failed]:
        if topo.station(sid).is_router:
            return sid
    raise NoRouterAvailable(f"no router upstream of or adjacent to {failed}")


# (station, requirement, held) -> ProbeResult
Tester = Callable[[StationId, FlowSpec, int], ProbeResult]


def _close(state: ConnectorState, keep: bool = False) -> ConnectorState:
    if keep:
        # remember what the episode was about in case the sender rejects the switch
        return replace(state, detector_flag=0, attempts_left=0, excluded=(), candidate=None)
    return replace(state, detector_flag=0, failed=(), pfs=0, attempts_left=0,
                   excluded=(), candidate=None)


def _request(state: ConnectorState) -> tuple[ConnectorState, list]:
    if state.attempts_left <= 0:
        raise RecoveryWindowExpired(
            f"connector {state.connector_id}: recovery budget spent", _close(state))
    state = replace(state, attempts_left=state.attempts_left - 1, candidate=None)
    excluded = tuple(sorted(set(state.failed[1:]) | set(state.excluded)))
    return state, [RouteRequest(state.connector_id, state.path, state.failed[0], excluded)]


def _open(state: ConnectorState, stations: list[StationId], sc: int) -> tuple[ConnectorState, list]:
    path = state.path
    on_path = [s for s in stations if s in path]
    if state.detector_flag == 1:
        # already recovering: fold new failures into the exclusion set
        return replace(state, failed=state.failed + tuple(on_path)), []
    if not on_path:
        return state, []
    pfs = min(path.index(s) for s in on_path)
    first = path[pfs]
    ordered = (first,) + tuple(s for s in on_path if s != first)
    state = replace(state, detector_flag=1, failed=ordered, pfs=pfs,
                    attempts_left=pfs - sc, excluded=ordered[1:])
    return _request(state)


def connector_step(state: ConnectorState, event, now: float, *,
                   test: Tester, sc: int = 0) -> tuple[ConnectorState, list]:
    """Advance the connector by one event.

    Raises NoAlternativePath or RecoveryWindowExpired when an episode ends
    without a path; the exception carries the closed state.
    """
    if event == FLAG_CHECK:
        return state, []
    if isinstance(event, DetectorAlarm):
        return _open(state, [event.failed_station], sc)
    if isinstance(event, CumulativeAlarm):
        return _open(state, [sid for sid, _ in event.entries], sc)
    if isinstance(event, RepinRejected):
        if state.detector_flag == 1 or not state.failed:
            return state, []
        state = replace(state, detector_flag=1, attempts_left=state.pfs - sc,
                        excluded=(event.station,), candidate=None)
        return _request(state)

    if not isinstance(event, (RouteReply, AnalyzeReply)):
        raise TypeError(f"connector cannot handle {type(event).__name__}")
    if state.detector_flag != 1:
        return state, []  # late reply for an episode that already ended

    if isinstance(event, RouteReply):
        alts = [p for p in event.alternatives
                if not any(s in p for s in state.failed) and not any(s in p for s in state.excluded)]
        if not alts:
            raise NoAlternativePath(
                f"connector {state.connector_id}: router has no candidate left", _close(state))
        cand = alts[0]
        return replace(state, candidate=cand), [AnalyzeRequest(state.connector_id, state.path, cand)]

    # AnalyzeReply: test the candidate from the failed position on
    cand = state.candidate
    if cand is None:
        return state, []
    new_specs = dict(event.per_station_qos)
    old = set(state.station_addresses)
    bad = None
    for j in range(min(state.pfs, len(cand)), len(cand)):
        sid = cand[j]
        if sid in old:
            held = event.qos_request.rate
            need = event.qos_request
        else:
            held = 0
            need = new_specs.get(sid, event.qos_request)
        if not test(sid, need, held).ok:
            bad = sid
            break
    if bad is not None:
        state = replace(state, excluded=state.excluded + (bad,))
        return _request(state)
    update = SenderUpdate(state.connector_id, state.stream_id, cand, event.qos_request)
    return _close(state, keep=True), [update]


def switched(state: ConnectorState, new_path: Path, now: float) -> ConnectorState:
    """The sender moved to ``new_path``; the connector now follows it."""
    return replace(state, station_addresses=tuple(new_path),
                   visit_times=(now,) * len(new_path), failed=(), pfs=0)
