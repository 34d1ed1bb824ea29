"""Simplified RSVP reservation plane.

Reservations are receiver-initiated and admitted hop by hop along the
reverse path. There is no soft-state refresh: a reservation lives until it
is released, re-pinned or preempted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import FlowSpec, Path, Station, StationId, Topology, validate_path


class State(enum.Enum):
    PENDING = "pending"
    ACTIVE = "active"
    RELEASED = "released"
    FAILED = "failed"


class AdmissionFailed(Exception):
    def __init__(self, station: StationId, stream_id: Optional[int] = None):
        who = f"stream {stream_id}: " if stream_id is not None else ""
        super().__init__(f"{who}admission failed at station {station}")
        self.station = station
        self.stream_id = stream_id


class ConservationViolation(AssertionError):
    pass


@dataclass
class Reservation:
    stream_id: int
    path: Path
    spec: FlowSpec
    pinned: bool = False
    state: State = State.PENDING


@dataclass(frozen=True)
class ReservationRequest:
    stream_id: int
    spec: FlowSpec
    route: Path


@dataclass(frozen=True)
class CompoundService:
    root: ReservationRequest
    dependencies: tuple[ReservationRequest, ...] = field(default_factory=tuple)

    def members(self) -> list[ReservationRequest]:
        return [*self.dependencies, self.root]


def admission_control(station: Station, spec: FlowSpec) -> bool:
    """Grant ``spec.rate`` at one station, debiting it on success."""
    if not station.up or station.available < spec.rate:
        return False
    station.available -= spec.rate
    return True


class ReservationEngine:
    """Owns every reservation over a topology and the debit ledger behind them."""

    def __init__(self, topo: Topology):
        self.topo = topo
        self.reservations: dict[int, Reservation] = {}
        self._order: list[int] = []  # admission order, oldest first
        self.attempts: list[tuple[int, bool]] = []
        self.version = 0

    def get(self, stream_id: int) -> Optional[Reservation]:
        return self.reservations.get(stream_id)

    def is_active(self, stream_id: int) -> bool:
        res = self.reservations.get(stream_id)
        return res is not None and res.state is State.ACTIVE

    def _credit(self, stations: Iterable[StationId], rate: int):
        for sid in stations:
            st = self.topo.station(sid)
            st.available += rate

    def _admit_reverse(self, stations: list[StationId], spec: FlowSpec, stream_id: int):
        granted = []
        for sid in reversed(stations):
            if not admission_control(self.topo.station(sid), spec):
                self._credit(granted, spec.rate)
                raise AdmissionFailed(sid, stream_id)
            granted.append(sid)

    def release(self, stream_id: int):
        res = self.reservations.get(stream_id)
        if res is None or res.state is not State.ACTIVE:
            return
        self._credit(res.path, res.spec.rate)
        res.state = State.RELEASED
        res.pinned = False
        self._order.remove(stream_id)
        self.version += 1

    def _snapshot(self):
        return ([s.available for s in self.topo.stations],
                {sid: (r, r.path, r.state, r.pinned) for sid, r in self.reservations.items()},
                list(self._order))

    def _restore(self, snap, failed: Iterable[tuple[int, FlowSpec, Path]]):
        avail, records, order = snap
        for st, a in zip(self.topo.stations, avail):
            st.available = a
        self.reservations = {}
        for sid, (res, path, state, pinned) in records.items():
            res.path, res.state, res.pinned = path, state, pinned
            self.reservations[sid] = res
        self._order = order
        for sid, spec, route in failed:
            res = self.reservations.get(sid)
            if res is None or res.state is not State.ACTIVE:
                self.reservations[sid] = Reservation(sid, route, spec, state=State.FAILED)
        self.version += 1

    def _reserve(self, stream_id: int, spec: FlowSpec, route: Path) -> Reservation:
        if not validate_path(route, self.topo):
            raise ValueError(f"{route} is not a path in the topology")
        self.release(stream_id)
        res = Reservation(stream_id, route, spec)
        self.reservations[stream_id] = res
        self._admit_reverse(list(route), spec, stream_id)
        res.state = State.ACTIVE
        res.pinned = True
        self._order.append(stream_id)
        self.version += 1
        return res

    def reserve(self, stream_id: int, spec: FlowSpec, route: Path) -> Reservation:
        """Admit ``spec`` on every station of ``route``, receiver first.

        Any earlier reservation for the stream is released first. On
        AdmissionFailed the ledger is exactly as it was before the call.
        """
        snap = self._snapshot()
        try:
            res = self._reserve(stream_id, spec, route)
        except AdmissionFailed:
            self._restore(snap, [(stream_id, spec, route)])
            self.attempts.append((stream_id, False))
            raise
        self.attempts.append((stream_id, True))
        return res

    def reserve_compound(self, svc: CompoundService) -> list[Reservation]:
        """Dependencies first, then the root; all members become active or none do."""
        members = svc.members()
        ids = [m.stream_id for m in members]
        if len(set(ids)) != len(ids):
            raise ValueError(f"compound service repeats a stream: {ids}")
        snap = self._snapshot()
        try:
            for m in members:
                self._reserve(m.stream_id, m.spec, m.route)
        except AdmissionFailed:
            self._restore(snap, [(m.stream_id, m.spec, m.route) for m in members])
            self.attempts.extend((sid, False) for sid in ids)
            raise
        self.attempts.extend((sid, True) for sid in ids)
        return [self.reservations[sid] for sid in ids]

    def repin(self, stream_id: int, new_path: Path,
              per_station: Iterable[tuple[StationId, FlowSpec]] = ()) -> Reservation:
        """Move an active reservation to ``new_path`` touching only the delta."""
        res = self.reservations.get(stream_id)
        if res is None or res.state is not State.ACTIVE:
            raise ValueError(f"stream {stream_id} has no active reservation to repin")
        if not validate_path(new_path, self.topo):
            raise ValueError(f"{new_path} is not a path in the topology")
        if tuple(new_path) == tuple(res.path):
            return res
        specs = dict(per_station)
        old = set(res.path)
        added = [s for s in new_path if s not in old]
        removed = [s for s in res.path if s not in set(new_path)]
        for sid in added:
            if specs.get(sid, res.spec).rate != res.spec.rate:
                raise ValueError("per-station spec must carry the reservation rate")
        try:
            self._admit_reverse(added, res.spec, stream_id)
        except AdmissionFailed:
            self.attempts.append((stream_id, False))
            raise
        self._credit(removed, res.spec.rate)
        res.path = new_path
        self.attempts.append((stream_id, True))
        self.version += 1
        return res

    def set_capacity(self, sid: StationId, capacity: int) -> list[int]:
        """Shrink or grow a station's reservable capacity.

        Newest reservations crossing the station are preempted until the
        rest fit. Returns the preempted stream ids.
        """
        st = self.topo.station(sid)
        used = st.capacity - st.available
        preempted = []
        for stream_id in reversed(list(self._order)):
            if used <= capacity:
                break
            res = self.reservations[stream_id]
            if sid in res.path:
                used -= res.spec.rate
                self.release(stream_id)
                res.state = State.FAILED
                preempted.append(stream_id)
        st.capacity = capacity
        st.available = capacity - used
        self.version += 1
        return preempted

    def mark_down(self, sid: StationId):
        self.topo.station(sid).up = False
        self.version += 1

    def debits(self) -> dict[StationId, int]:
        total = {s.id: 0 for s in self.topo.stations}
        for res in self.reservations.values():
            if res.state is State.ACTIVE:
                for sid in res.path:
                    total[sid] += res.spec.rate
        return total

    def audit(self):
        """Raise unless capacity - available equals active debits at every station."""
        for sid, debit in self.debits().items():
            st = self.topo.station(sid)
            if not 0 <= st.available <= st.capacity:
                raise ConservationViolation(f"station {sid}: available {st.available} of {st.capacity}")
            if st.capacity - st.available != debit:
                raise ConservationViolation(
                    f"station {sid}: capacity-available={st.capacity - st.available}, active debits={debit}")
