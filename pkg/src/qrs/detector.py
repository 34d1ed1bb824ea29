"""Detector agent: sweeps the flow's path ahead of the media and raises alarms."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

from .core import AgentCursor, DetectorState, FlowSpec, Station, StationId
from .wire import DetectorAlarm, batch_alarms


class StationOffPath(Exception):
    pass


@dataclass(frozen=True)
class ProbeResult:
    ok: bool
    failed: Optional[FlowSpec] = None


def probe_station(station: Station, required: FlowSpec, *, path=None, held: int = 0) -> ProbeResult:
    """Test whether ``station`` can give ``required``.

    ``held`` is bandwidth the flow already holds there; it counts towards the
    requirement so a station is not faulted for the flow's own reservation.
    """
    if path is not None and station.id not in path:
        raise StationOffPath(f"station {station.id} is not on {path}")
    if not station.up or station.available + held < required.rate:
        return ProbeResult(False, required)
    return ProbeResult(True)


Probe = Callable[[StationId, FlowSpec], ProbeResult]


def _flush(state: DetectorState):
    if not state.pending:
        return state, []
    return replace(state, pending=()), [batch_alarms(list(state.pending))]


def detector_step(state: DetectorState, cursor: AgentCursor, now: float,
                  probe: Probe) -> tuple[DetectorState, AgentCursor, list]:
    """Visit the station under ``cursor.sw`` and move one station ahead.

    A station is alarmed once; later sweeps pass over it silently. When the
    sweep runs off the end of the path the cursor restarts at the sender and
    any pending batch is flushed.
    """
    out = []
    sid = state.path[cursor.sw]
    required = state.required_qos[cursor.sw]
    result = probe(sid, required)
    if not result.ok and sid not in state.reported:
        state = replace(state, qos_test_value=1)
    if state.qos_test_value == 1:
        alarm = DetectorAlarm(state.connector_id, sid, result.failed)
        state = replace(state, reported=state.reported | {sid}, qos_test_value=0)
        if state.batching:
            state = replace(state, pending=state.pending + (alarm,))
            if len(state.pending) >= state.max_batch:
                state, out = _flush(state)
        else:
            out.append(alarm)

    if cursor.sw + 1 < len(state.path):
        cursor = replace(cursor, sw=cursor.sw + 1)
    else:
        state, flushed = _flush(state)
        out += flushed
        cursor = replace(cursor, sw=cursor.sc)
    return state, cursor, out


def detector_finish(state: DetectorState) -> tuple[DetectorState, list]:
    """Flow over: flush whatever is pending and go quiet."""
    state, out = _flush(state)
    return replace(state, qos_test_value=0), out


def retarget(state: DetectorState, path, required: FlowSpec) -> DetectorState:
    """Point the detector at a new path after the sender switched."""
    return replace(state, path=path, required_qos=(required,) * len(path))
