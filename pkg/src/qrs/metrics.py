"""Metrics computed from a run's event trace.

The trace is the single source of truth: ``finalize`` reads nothing else,
so a persisted trace reproduces the report exactly.
"""

from __future__ import annotations

import json
import math
import statistics
import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional


class InsufficientData(ValueError):
    pass


class Trace:
    """Append-only list of ``[kind, time, *fields]`` records."""

    def __init__(self, records: Optional[list] = None):
        self.records: list = records if records is not None else []

    def add(self, kind: str, time: float, *fields):
        self.records.append([kind, time, *fields])

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def of(self, kind: str) -> list:
        return [r for r in self.records if r[0] == kind]

    def to_bytes(self) -> bytes:
        text = json.dumps(self.records, separators=(",", ":"))
        return zlib.compress(text.encode(), 9)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Trace":
        return cls(json.loads(zlib.decompress(data).decode()))


@dataclass(frozen=True)
class Ratio:
    """A ratio in [0, 1]; an empty denominator reads as 1.0 and is flagged."""

    num: float
    den: float

    @property
    def zero_denominator(self) -> bool:
        return self.den == 0

    @property
    def value(self) -> float:
        return 1.0 if self.den == 0 else self.num / self.den


def delay_jitter(delays: Iterable[float]) -> tuple[list[float], float]:
    d = list(delays)
    if len(d) < 2:
        raise InsufficientData(f"need two delivered packets, have {len(d)}")
    series = [abs(b - a) for a, b in zip(d, d[1:])]
    return series, statistics.fmean(series)


@dataclass
class StreamStats:
    generated: int = 0
    delivered: int = 0
    lost: int = 0
    mean_delay: float = 0.0
    max_delay: float = 0.0
    jitter: list = field(default_factory=list)

    @property
    def mean_jitter(self) -> Optional[float]:
        return statistics.fmean(self.jitter) if self.jitter else None


@dataclass
class MetricsReport:
    mode: str
    horizon: float
    bucket: float
    streams: dict[int, StreamStats]
    total: StreamStats
    loss_series: list[int]
    compound_lost_bits: int
    recovered_paths: int
    reservation_series: list[Ratio]
    reservation_success: Ratio
    detector: Ratio
    connector: Ratio
    analyzer: Ratio
    efficiency: Ratio
    messages: int
    message_bytes: int
    drops_by_reason: dict[str, int]

    @property
    def mean_jitter(self) -> Optional[float]:
        return self.total.mean_jitter

    def rows(self) -> list[tuple]:
        """CSV rows: time_bucket_s, metric_name, stream_id|ALL, value, denominator_flag."""
        out = []

        def add(bucket, name, stream, value, flag=0):
            out.append((bucket, name, stream, _fmt(value), flag))

        for i, n in enumerate(self.loss_series):
            add(_fmt(i * self.bucket), "packets_lost", "ALL", n)
        for i, r in enumerate(self.reservation_series):
            add(_fmt(i * self.bucket), "reservation_success_rate", "ALL", r.value,
                int(r.zero_denominator))
        for sid in sorted(self.streams):
            _stream_rows(add, str(sid), self.streams[sid])
        _stream_rows(add, "ALL", self.total)
        add("total", "compound_lost_bits", "ALL", self.compound_lost_bits)
        add("total", "recovered_paths", "ALL", self.recovered_paths)
        for metric, r in (("reservation_success_rate", self.reservation_success),
                          ("detector_utilization", self.detector),
                          ("connector_utilization", self.connector),
                          ("analyzer_utilization", self.analyzer),
                          ("efficiency", self.efficiency)):
            add("total", metric, "ALL", r.value, int(r.zero_denominator))
        add("total", "component_messages", "ALL", self.messages)
        add("total", "component_message_bytes", "ALL", self.message_bytes)
        return out

    def to_csv(self) -> str:
        lines = ["time_bucket_s,metric_name,stream_id,value,denominator_flag"]
        lines += [",".join(str(x) for x in row) for row in self.rows()]
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        t = self.total
        jit = "n/a" if t.mean_jitter is None else f"{t.mean_jitter * 1e3:.4f} ms"
        lines = [
            f"mode: {self.mode}",
            f"horizon: {self.horizon:g} s",
            f"packets generated: {t.generated}",
            f"packets delivered: {t.delivered}",
            f"packets lost: {t.lost}",
            f"mean delay: {t.mean_delay * 1e3:.4f} ms",
            f"max delay: {t.max_delay * 1e3:.4f} ms",
            f"mean jitter: {jit}",
            f"compound-service lost bits: {self.compound_lost_bits}",
            f"recovered paths: {self.recovered_paths}",
            f"reservation success rate: {_pct(self.reservation_success)}",
            f"detector utilization: {_pct(self.detector)}",
            f"connector utilization: {_pct(self.connector)}",
            f"analyzer utilization: {_pct(self.analyzer)}",
            f"system efficiency: {_pct(self.efficiency)}",
            f"component messages: {self.messages} ({self.message_bytes} bytes)",
        ]
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return format(v, ".9g")


def _pct(r: Ratio) -> str:
    flag = " (empty denominator)" if r.zero_denominator else ""
    return f"{r.value * 100:.2f}%{flag}"


def _stream_rows(add, key: str, s: StreamStats):
    add("total", "packets_generated", key, s.generated)
    add("total", "packets_delivered", key, s.delivered)
    add("total", "packets_lost", key, s.lost)
    add("total", "mean_delay_s", key, s.mean_delay)
    add("total", "max_delay_s", key, s.max_delay)
    mj = s.mean_jitter
    add("total", "mean_jitter_s", key, 0.0 if mj is None else mj, int(mj is None))


def _held_seconds(transitions: list[tuple[float, int]], start: float, stop: float) -> float:
    held, since, total = False, start, 0.0
    for t, v in transitions:
        t = min(max(t, start), stop)
        if held:
            total += t - since
        held, since = bool(v), t
    if held:
        total += stop - since
    return total


def finalize(trace: Trace) -> MetricsReport:
    meta = trace.of("meta")[0]
    horizon, bucket, mode = meta[2], meta[3], meta[4]
    nb = max(1, math.ceil(horizon / bucket))

    def slot(t):
        return min(int(t // bucket), nb - 1)

    gen = defaultdict(int)
    delays = defaultdict(list)
    lost = defaultdict(int)
    loss_series = [0] * nb
    res_ok, res_all = [0] * nb, [0] * nb
    qos = defaultdict(list)
    windows = {}
    drops = defaultdict(int)
    compound_bits = 0
    recovered = 0
    msgs = msg_bytes = 0
    alarms, resolved = [], set()
    analyze_req = analyze_ok = 0
    affected, detected = {}, set()

    for r in trace:
        kind, t = r[0], r[1]
        if kind == "gen":
            gen[r[2]] += 1
        elif kind == "dlv":
            delays[r[2]].append(r[4])
        elif kind == "drop":
            lost[r[2]] += 1
            loss_series[slot(t)] += 1
            drops[r[4]] += 1
            if r[6]:
                compound_bits += r[5]
        elif kind == "resv":
            res_all[slot(t)] += 1
            res_ok[slot(t)] += r[3]
        elif kind == "qos":
            qos[r[2]].append((t, r[3]))
        elif kind == "flow":
            windows[r[2]] = (r[3], r[4])
        elif kind == "inject":
            affected[r[2]] = set(r[4])
        elif kind == "alarm":
            alarms.append((r[2], r[3]))
            if r[4] >= 0 and r[2] in affected.get(r[4], ()):
                detected.add(r[4])
        elif kind == "resolved":
            resolved.add((r[2], r[3]))
        elif kind == "analyze":
            if r[3] == "req":
                analyze_req += 1
            else:
                analyze_ok += 1
        elif kind == "recovered":
            recovered += 1
        elif kind == "msg":
            msgs += 1
            msg_bytes += r[3]

    streams = {}
    for sid in sorted(windows):
        d = delays.get(sid, [])
        s = StreamStats(gen[sid], len(d), lost[sid])
        if d:
            s.mean_delay = statistics.fmean(d)
            s.max_delay = max(d)
        if len(d) >= 2:
            s.jitter = delay_jitter(d)[0]
        streams[sid] = s

    all_d = [x for sid in sorted(delays) for x in delays[sid]]
    total = StreamStats(sum(gen.values()), len(all_d), sum(lost.values()))
    if all_d:
        total.mean_delay = statistics.fmean(all_d)
        total.max_delay = max(all_d)
    total.jitter = [j for sid in sorted(streams) for j in streams[sid].jitter]

    active = held = 0.0
    for sid, (start, stop) in windows.items():
        active += max(0.0, stop - start)
        held += _held_seconds(qos.get(sid, []), start, stop)

    return MetricsReport(
        mode=mode, horizon=horizon, bucket=bucket, streams=streams, total=total,
        loss_series=loss_series, compound_lost_bits=compound_bits, recovered_paths=recovered,
        reservation_series=[Ratio(a, b) for a, b in zip(res_ok, res_all)],
        reservation_success=Ratio(sum(res_ok), sum(res_all)),
        detector=Ratio(len(detected), sum(1 for a in affected.values() if a)),
        connector=Ratio(sum(1 for a in alarms if a in resolved), len(alarms)),
        analyzer=Ratio(analyze_ok, analyze_req),
        efficiency=Ratio(held, active),
        messages=msgs, message_bytes=msg_bytes, drops_by_reason=dict(drops),
    )
