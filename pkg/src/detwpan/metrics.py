"""Aggregate counters folded from trace records.

The accumulator is a trace sink, so long runs never hold the trace in memory;
:func:`metrics_finalize` folds an existing record sequence the same way.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .engine import TraceRecord

PERIODS = ("beacon", "poll", "CAP", "CFP")


class LatencyStats(NamedTuple):
    count: int
    min: float
    mean: float
    max: float

    @classmethod
    def of(cls, values) -> "LatencyStats":
        values = list(values)
        if not values:
            return cls(0, 0.0, 0.0, 0.0)
        return cls(len(values), min(values), sum(values) / len(values), max(values))


@dataclass
class DeviceEnergy:
    device: int
    role: str
    doze: int
    rx: int
    tx: int
    idle: int
    lifetime: int
    charge_uas: float

    def fraction(self, state: str) -> float:
        return getattr(self, state) / self.lifetime if self.lifetime else 0.0


@dataclass
class Metrics:
    duration_us: int = 0
    collisions: dict[str, int] = field(default_factory=lambda: dict.fromkeys(PERIODS, 0))
    collisions_by_frame: dict[str, int] = field(default_factory=dict)
    gts_requests_sent: int = 0
    gts_latency: LatencyStats = LatencyStats(0, 0.0, 0.0, 0.0)          # need -> beacon received
    gts_alloc_latency: LatencyStats = LatencyStats(0, 0.0, 0.0, 0.0)    # request arrival -> announce
    denials: dict[str, int] = field(default_factory=dict)
    data_latency: dict[tuple[int, int], LatencyStats] = field(default_factory=dict)
    energy: dict[int, DeviceEnergy] = field(default_factory=dict)
    utilization: float = 0.0
    tx_frames: dict[int, int] = field(default_factory=dict)
    collisions_heard: dict[int, int] = field(default_factory=dict)
    polls_answered: int = 0
    polls_missed: int = 0
    beacons: int = 0
    channel_access_failures: int = 0
    protocol_violations: int = 0
    missed_beacons: int = 0
    peer_delivered: int = 0
    handshake_latency: LatencyStats = LatencyStats(0, 0.0, 0.0, 0.0)
    reuse_grants: int = 0

    @property
    def total_collisions(self) -> int:
        return sum(self.collisions_by_frame.values())

    @property
    def gts_request_collisions(self) -> int:
        return self.collisions_by_frame.get("GtsRequest", 0)

    def node_doze_fractions(self) -> dict[int, float]:
        return {d: e.fraction("doze") for d, e in self.energy.items() if e.role == "node"}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["device", "role", "doze_frac", "rx_frac", "tx_frac", "idle_frac", "charge_uas",
                    "lifetime_us", "tx_frames", "collisions_heard"])
        for d in sorted(self.energy):
            e = self.energy[d]
            w.writerow([d, e.role, f"{e.fraction('doze'):.6f}", f"{e.fraction('rx'):.6f}",
                        f"{e.fraction('tx'):.6f}", f"{e.fraction('idle'):.6f}", f"{e.charge_uas:.3f}",
                        e.lifetime, self.tx_frames.get(d, 0), self.collisions_heard.get(d, 0)])
        es = list(self.energy.values())
        n = len(es) or 1
        w.writerow(["total", "-",
                    f"{sum(e.fraction('doze') for e in es) / n:.6f}", f"{sum(e.fraction('rx') for e in es) / n:.6f}",
                    f"{sum(e.fraction('tx') for e in es) / n:.6f}", f"{sum(e.fraction('idle') for e in es) / n:.6f}",
                    f"{sum(e.charge_uas for e in es):.3f}", self.duration_us,
                    sum(self.tx_frames.values()), sum(self.collisions_heard.values())])
        return buf.getvalue()

    def summary(self) -> str:
        c = self.collisions
        lines = [
            f"duration_us            {self.duration_us}",
            f"collisions beacon/poll/CAP/CFP  {c['beacon']}/{c['poll']}/{c['CAP']}/{c['CFP']}",
            f"gts requests in CAP    {self.gts_requests_sent} (collided receptions {self.gts_request_collisions})",
            f"gts latency (us)       n={self.gts_latency.count} min={self.gts_latency.min:.0f} "
            f"mean={self.gts_latency.mean:.0f} max={self.gts_latency.max:.0f}",
            f"denials                {dict(sorted(self.denials.items()))}",
            f"polls answered/missed  {self.polls_answered}/{self.polls_missed}",
            f"channel utilization    {self.utilization:.4f}",
        ]
        dz = self.node_doze_fractions()
        if dz:
            lines.append(f"node doze fraction     min={min(dz.values()):.4f} mean={sum(dz.values()) / len(dz):.4f}")
        return "\n".join(lines)


class MetricsAccumulator:
    def __init__(self, scenario=None):
        self.scenario = scenario
        self.m = Metrics()
        self._gts_lat: list[int] = []
        self._alloc_lat: list[int] = []
        self._hs_lat: list[int] = []
        self._flows: dict[tuple[int, int], list[int]] = {}
        self._last_tx: dict[int, tuple[int, int, int | None]] = {}   # src -> (start, dst, gen)
        self._delivered: set[tuple[int, int, int]] = set()
        self._inflight = 0
        self._busy_since = 0
        self._busy = 0
        self._last_time = 0

    def feed(self, rec: TraceRecord) -> None:
        m = self.m
        kind = rec.kind
        f = rec.fields
        self._last_time = rec.time
        if kind == "TxStart":
            m.tx_frames[rec.device] = m.tx_frames.get(rec.device, 0) + 1
            fr = f.get("frame")
            if fr == "GtsRequest":
                m.gts_requests_sent += 1
            elif fr == "Beacon":
                m.beacons += 1
            self._last_tx[rec.device] = (rec.time, f.get("dst"), f.get("gen"))
            if self._inflight == 0:
                self._busy_since = rec.time
            self._inflight += 1
        elif kind == "TxEnd":
            self._inflight -= 1
            if self._inflight == 0:
                self._busy += rec.time - self._busy_since
        elif kind == "RxOutcome":
            if f.get("result") == "Collision":
                period = f.get("period")
                if period in m.collisions:
                    m.collisions[period] += 1
                fr = f.get("frame")
                m.collisions_by_frame[fr] = m.collisions_by_frame.get(fr, 0) + 1
                m.collisions_heard[rec.device] = m.collisions_heard.get(rec.device, 0) + 1
            else:
                src = f.get("src")
                last = self._last_tx.get(src)
                if last is not None and last[0] == f.get("start") and last[2] is not None and last[1] == rec.device:
                    key = (src, rec.device, last[2])
                    if key not in self._delivered:
                        self._delivered.add(key)
                        self._flows.setdefault((src, rec.device), []).append(rec.time - last[2])
        elif kind == "StateChange":
            ev = f.get("event")
            if ev == "gts_adopted" and f.get("latency") is not None:
                self._gts_lat.append(f["latency"])
            elif ev == "channel_access_failure":
                m.channel_access_failures += 1
            elif ev == "protocol_violation":
                m.protocol_violations += 1
            elif ev == "missed_beacon":
                m.missed_beacons += 1
            elif ev == "peer_delivered":
                m.peer_delivered += 1
                if f.get("handshake") is not None:
                    self._hs_lat.append(f["handshake"])
        elif kind == "GtsGrant":
            r = f.get("result")
            if r == "granted":
                self._alloc_lat.append(f.get("latency", 0))
                if f.get("host") is not None:
                    m.reuse_grants += 1
            elif r == "denied":
                reason = f.get("reason")
                m.denials[reason] = m.denials.get(reason, 0) + 1
        elif kind == "Poll":
            if f.get("result") == "answered":
                m.polls_answered += 1
            else:
                m.polls_missed += 1
        elif kind == "EnergySnapshot":
            m.energy[rec.device] = DeviceEnergy(rec.device, f.get("role", "node"), f["doze"], f["rx"], f["tx"],
                                                f["idle"], f["lifetime"], float(f["charge_uas"]))
            m.duration_us = max(m.duration_us, f["lifetime"])

    def finalize(self) -> Metrics:
        m = self.m
        m.gts_latency = LatencyStats.of(self._gts_lat)
        m.gts_alloc_latency = LatencyStats.of(self._alloc_lat)
        m.handshake_latency = LatencyStats.of(self._hs_lat)
        m.data_latency = {k: LatencyStats.of(v) for k, v in sorted(self._flows.items())}
        if not m.duration_us:
            m.duration_us = self._last_time
        m.utilization = self._busy / m.duration_us if m.duration_us else 0.0
        return m


def metrics_finalize(records: Iterable[TraceRecord], scenario=None) -> Metrics:
    acc = MetricsAccumulator(scenario)
    for r in records:
        acc.feed(r)
    return acc.finalize()
