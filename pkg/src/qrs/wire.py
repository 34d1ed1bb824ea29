"""Binary codec for the recovery-system control messages.

Layout (all integers big-endian, fixed width)::

    header  magic u32 = 0x514D5253 | version u8 = 1 | type u8 | body_len u16
    Path      u16 count, count * u32 station id
    FlowSpec  u64 rate_bps | u32 burst_bytes | u32 jitter_us | u8 priority
    lists     u16 count, elements

Ids (connector, stream, analyzer) are u32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

from .core import FlowSpec, Path, Priority

MAGIC = 0x514D5253
VERSION = 1
HEADER = struct.Struct(">IBBH")
HEADER_LEN = HEADER.size
MAX_BODY = 0xFFFF


class WireError(Exception):
    pass


class OversizeBody(WireError):
    pass


class DecodeError(WireError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class BadMagic(DecodeError):
    pass


class BadVersion(DecodeError):
    pass


class UnknownType(DecodeError):
    pass


class TruncatedBody(DecodeError):
    pass


class TrailingBytes(DecodeError):
    pass


class InvalidField(DecodeError):
    """A field decoded but violates the message invariants."""


class MixedConnector(WireError):
    pass


class EmptyBatch(WireError):
    pass


@dataclass(frozen=True)
class SenderUpdate:
    connector_id: int
    stream_id: int
    new_path: Path
    flowspec: FlowSpec
    TYPE = 1


@dataclass(frozen=True)
class RouteRequest:
    connector_id: int
    old_path: Path
    failed_station: int
    excluded: tuple[int, ...] = ()
    TYPE = 2


@dataclass(frozen=True)
class RouteReply:
    connector_id: int
    alternatives: tuple[Path, ...]
    TYPE = 3


@dataclass(frozen=True)
class AnalyzeRequest:
    connector_id: int
    old_path: Path
    new_path: Path
    TYPE = 4


@dataclass(frozen=True)
class AnalyzeReply:
    connector_id: int
    qos_request: FlowSpec
    per_station_qos: tuple[tuple[int, FlowSpec], ...]
    TYPE = 5


@dataclass(frozen=True)
class QosExtractRequest:
    analyzer_id: int
    new_path: Path
    TYPE = 6


@dataclass(frozen=True)
class QosExtractReply:
    analyzer_id: int
    qos_request: FlowSpec
    TYPE = 7


@dataclass(frozen=True)
class DetectorAlarm:
    connector_id: int
    failed_station: int
    failed_qos: FlowSpec
    TYPE = 8


@dataclass(frozen=True)
class CumulativeAlarm:
    connector_id: int
    entries: tuple[tuple[int, FlowSpec], ...]
    TYPE = 9

    def __post_init__(self):
        if not self.entries:
            raise EmptyBatch("a cumulative alarm carries at least one entry")


Message = Union[
    SenderUpdate, RouteRequest, RouteReply, AnalyzeRequest, AnalyzeReply,
    QosExtractRequest, QosExtractReply, DetectorAlarm, CumulativeAlarm,
]

MESSAGE_TYPES = {
    cls.TYPE: cls
    for cls in (SenderUpdate, RouteRequest, RouteReply, AnalyzeRequest, AnalyzeReply,
                QosExtractRequest, QosExtractReply, DetectorAlarm, CumulativeAlarm)
}

_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_SPEC = struct.Struct(">QIIB")


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def u16(self, v):
        self.parts.append(_U16.pack(v))

    def u32(self, v):
        self.parts.append(_U32.pack(v))

    def path(self, p: Path):
        self.ids(p.stations)

    def ids(self, ids):
        self.u16(len(ids))
        self.parts.append(struct.pack(f">{len(ids)}I", *ids))

    def spec(self, s: FlowSpec):
        self.parts.append(_SPEC.pack(s.rate, s.burst, s.jitter_us, int(s.priority)))

    def count(self, n):
        if n > 0xFFFF:
            raise OversizeBody(f"list of {n} elements exceeds u16 count")
        self.u16(n)

    def bytes(self) -> bytes:
        return b"".join(self.parts)


def _encode_body(msg) -> bytes:
    w = _Writer()
    if isinstance(msg, SenderUpdate):
        w.u32(msg.connector_id)
        w.u32(msg.stream_id)
        w.path(msg.new_path)
        w.spec(msg.flowspec)
    elif isinstance(msg, RouteRequest):
        w.u32(msg.connector_id)
        w.path(msg.old_path)
        w.u32(msg.failed_station)
        w.ids(msg.excluded)
    elif isinstance(msg, RouteReply):
        w.u32(msg.connector_id)
        w.count(len(msg.alternatives))
        for p in msg.alternatives:
            w.path(p)
    elif isinstance(msg, AnalyzeRequest):
        w.u32(msg.connector_id)
        w.path(msg.old_path)
        w.path(msg.new_path)
    elif isinstance(msg, AnalyzeReply):
        w.u32(msg.connector_id)
        w.spec(msg.qos_request)
        w.count(len(msg.per_station_qos))
        for sid, spec in msg.per_station_qos:
            w.u32(sid)
            w.spec(spec)
    elif isinstance(msg, (QosExtractRequest,)):
        w.u32(msg.analyzer_id)
        w.path(msg.new_path)
    elif isinstance(msg, QosExtractReply):
        w.u32(msg.analyzer_id)
        w.spec(msg.qos_request)
    elif isinstance(msg, DetectorAlarm):
        w.u32(msg.connector_id)
        w.u32(msg.failed_station)
        w.spec(msg.failed_qos)
    elif isinstance(msg, CumulativeAlarm):
        w.u32(msg.connector_id)
        w.count(len(msg.entries))
        for sid, spec in msg.entries:
            w.u32(sid)
            w.spec(spec)
    else:
        raise TypeError(f"not a message: {msg!r}")
    return w.bytes()


def encode(msg: Message) -> bytes:
    try:
        body = _encode_body(msg)
    except struct.error as exc:
        raise OversizeBody(str(exc)) from exc
    if len(body) > MAX_BODY:
        raise OversizeBody(f"body of {len(body)} bytes exceeds {MAX_BODY}")
    return HEADER.pack(MAGIC, VERSION, msg.TYPE, len(body)) + body


def encoded_size(msg: Message) -> int:
    return len(encode(msg))


class _Reader:
    def __init__(self, data: bytes, pos: int, end: int):
        self.data = data
        self.pos = pos
        self.end = end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise TruncatedBody(f"need {n} bytes, body ends", self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def ids(self) -> tuple[int, ...]:
        n = self.u16()
        return struct.unpack(f">{n}I", self.take(4 * n))

    def path(self) -> Path:
        at = self.pos
        ids = self.ids()
        try:
            return Path(ids)
        except ValueError as exc:
            raise InvalidField(f"bad path: {exc}", at) from None

    def spec(self) -> FlowSpec:
        at = self.pos
        rate, burst, jitter, prio = _SPEC.unpack(self.take(_SPEC.size))
        try:
            return FlowSpec(rate, burst, jitter, Priority(prio))
        except ValueError as exc:
            raise InvalidField(f"bad flowspec: {exc}", at) from None

    def station_specs(self) -> tuple[tuple[int, FlowSpec], ...]:
        n = self.u16()
        return tuple((self.u32(), self.spec()) for _ in range(n))


def decode(data: bytes) -> Message:
    data = bytes(data)
    if len(data) < HEADER_LEN:
        raise TruncatedBody(f"header needs {HEADER_LEN} bytes, got {len(data)}", len(data))
    magic, version, mtype, body_len = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"magic 0x{magic:08X}", 0)
    if version != VERSION:
        raise BadVersion(f"version {version}", 4)
    if mtype not in MESSAGE_TYPES:
        raise UnknownType(f"type {mtype}", 5)
    end = HEADER_LEN + body_len
    if len(data) < end:
        raise TruncatedBody(f"body_len {body_len} but only {len(data) - HEADER_LEN} body bytes", len(data))
    r = _Reader(data, HEADER_LEN, end)

    if mtype == SenderUpdate.TYPE:
        msg = SenderUpdate(r.u32(), r.u32(), r.path(), r.spec())
    elif mtype == RouteRequest.TYPE:
        msg = RouteRequest(r.u32(), r.path(), r.u32(), tuple(r.ids()))
    elif mtype == RouteReply.TYPE:
        cid = r.u32()
        n = r.u16()
        msg = RouteReply(cid, tuple(r.path() for _ in range(n)))
    elif mtype == AnalyzeRequest.TYPE:
        msg = AnalyzeRequest(r.u32(), r.path(), r.path())
    elif mtype == AnalyzeReply.TYPE:
        msg = AnalyzeReply(r.u32(), r.spec(), r.station_specs())
    elif mtype == QosExtractRequest.TYPE:
        msg = QosExtractRequest(r.u32(), r.path())
    elif mtype == QosExtractReply.TYPE:
        msg = QosExtractReply(r.u32(), r.spec())
    elif mtype == DetectorAlarm.TYPE:
        msg = DetectorAlarm(r.u32(), r.u32(), r.spec())
    else:
        cid = r.u32()
        at = r.pos
        entries = r.station_specs()
        if not entries:
            raise InvalidField("cumulative alarm with no entries", at)
        msg = CumulativeAlarm(cid, entries)

    if r.pos != end:
        raise TrailingBytes(f"{end - r.pos} unread body bytes", r.pos)
    if len(data) != end:
        raise TrailingBytes(f"{len(data) - end} bytes after message", end)
    return msg


def batch_alarms(alarms: list[DetectorAlarm]) -> CumulativeAlarm:
    if not alarms:
        raise EmptyBatch("nothing to batch")
    ids = {a.connector_id for a in alarms}
    if len(ids) > 1:
        raise MixedConnector(f"alarms address connectors {sorted(ids)}")
    return CumulativeAlarm(alarms[0].connector_id,
                           tuple((a.failed_station, a.failed_qos) for a in alarms))


def unbatch_alarms(batch: CumulativeAlarm) -> list[DetectorAlarm]:
    return [DetectorAlarm(batch.connector_id, sid, spec) for sid, spec in batch.entries]
