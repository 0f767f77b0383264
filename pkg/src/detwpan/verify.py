"""Invariant checks over a trace, independent of in-engine state.

Each invariant is evaluated separately and cites the first offending trace
line. The verifier is a streaming sink: feed ``(line_number, record)`` pairs
in file order, then call :meth:`TraceVerifier.report`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .engine import TraceRecord, format_record, read_trace
from .mac_coordinator import parse_gts
from .scenario import Scenario
from .sim import is_polled, star_schedules, superframe_config
from .superframe import spans_overlap

INVARIANTS = (
    "ordering",
    "tx_pairing",
    "rx_consistency",
    "beacon_slot_collisions",
    "protected_period_collisions",
    "beacon_silence",
    "beacon_offsets",
    "beacon_spacing",
    "tx_windows",
    "poll_gap",
    "polled_nodes_no_cap_requests",
    "gts_disjoint",
    "peer_handshake",
    "energy_conservation",
)


@dataclass
class InvariantResult:
    name: str
    passed: bool = True
    checks: int = 0
    line: int | None = None
    text: str | None = None
    detail: str = ""


@dataclass
class VerificationReport:
    results: dict[str, InvariantResult] = field(default_factory=dict)
    records: int = 0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    @property
    def failures(self) -> list[InvariantResult]:
        return [r for r in self.results.values() if not r.passed]

    def __getitem__(self, name: str) -> InvariantResult:
        return self.results[name]

    def format(self) -> str:
        out = []
        for name in INVARIANTS:
            r = self.results[name]
            if r.passed:
                out.append(f"PASS  {name}  ({r.checks} checks)")
            else:
                out.append(f"FAIL  {name}  line {r.line}: {r.detail}")
                out.append(f"      {r.text}")
        n_fail = len(self.failures)
        out.append(f"{len(INVARIANTS) - n_fail} passed, {n_fail} failed, {self.records} records")
        return "\n".join(out)


class TraceVerifier:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.cfg = superframe_config(scenario)
        self.T = self.cfg.beacon_interval
        self.sd = self.cfg.slot_duration
        self.sched = star_schedules(scenario)
        self.mode = {c.address: scenario.coordinator_mode(c) for c in scenario.coordinators}
        self.coords = set(self.mode)
        self.results = {n: InvariantResult(n) for n in INVARIANTS}
        self.n = 0
        self._last_time = -math.inf
        self._open: dict[int, tuple[int, int, int, TraceRecord]] = {}   # device -> (start, dur, lineno, rec)
        self._tx_by_key: dict[tuple[int, int], int] = {}        # (src, start) -> end, retained briefly
        self._last_poll: dict[tuple[int, int], int] = {}
        self._first_window: dict[int, int] = {}
        self._gts_now: dict[int, list] = {}
        self._peer_open: dict[tuple[int, int], int] = {}
        self._polled = {n.address for n in scenario.nodes if is_polled(scenario, n) and not n.accelerate}
        self._poll_bound = {}
        for c in scenario.coordinators:
            if self.mode[c.address] == "extended" and c.policy == "linear" and c.kb and self.cfg.poll_slots:
                self._poll_bound[c.address] = -(-len(c.kb) // self.cfg.poll_slots) * self.T
        self._ordering = self.results["ordering"]
        self._beacon_spans = [((s.offset % self.T), self.sd, a) for a, s in self.sched.items()]
        self._check_spacing()

    # -- helpers -------------------------------------------------------------
    def _ok(self, name: str) -> None:
        self.results[name].checks += 1

    def _fail(self, name: str, lineno: int, rec: TraceRecord, detail: str) -> None:
        r = self.results[name]
        r.checks += 1
        if r.passed:
            r.passed = False
            r.line = lineno
            r.text = format_record(rec)
            r.detail = detail

    def _check_spacing(self) -> None:
        offs = sorted(s.offset % self.T for s in self.sched.values())
        r = self.results["beacon_spacing"]
        k = len(offs)
        for i in range(k):
            gap = (offs[(i + 1) % k] - offs[i]) % self.T if k > 1 else self.T
            if abs(gap - self.T / k) > self.sd and all(c.offset_slot is None for c in self.sc.coordinators):
                r.passed = False
                r.line = 0
                r.text = f"offsets {offs}"
                r.detail = "beacon offsets are not evenly spread"
            r.checks += 1

    # -- main loop -------------------------------------------------------------
    def feed(self, lineno: int, rec: TraceRecord) -> None:
        self.n += 1
        t = rec.time
        if t < self._last_time:
            self._fail("ordering", lineno, rec, "time went backwards")
        else:
            self._ordering.checks += 1
        self._last_time = t
        kind = rec.kind
        f = rec.fields
        if kind == "TxStart":
            self._tx_start(lineno, rec, f)
        elif kind == "TxEnd":
            op = self._open.pop(rec.device, None)
            if op is None or op[0] != f.get("start") or op[0] + op[1] != t:
                self._fail("tx_pairing", lineno, rec, "TxEnd without matching TxStart")
            else:
                self._ok("tx_pairing")
                self._tx_by_key[(rec.device, op[0])] = t
        elif kind == "RxOutcome":
            self._rx(lineno, rec, f)
        elif kind == "BeaconEmit":
            self._beacon_emit(lineno, rec, f)
        elif kind == "Poll":
            self._poll(lineno, rec, f)
        elif kind == "GtsGrant":
            if f.get("via") == "peer" and f.get("result") in ("granted", "denied"):
                key = (f.get("requester"), rec.device)
                opened = self._peer_open.get(key, 0)
                if f.get("result") == "granted" and opened != 1:
                    self._fail("peer_handshake", lineno, rec,
                               f"peer grant preceded by {opened} open requests (expected 1)")
                else:
                    self._ok("peer_handshake")
                self._peer_open[key] = 0
        elif kind == "StateChange":
            if f.get("event") == "protocol_violation":
                self._fail("peer_handshake", lineno, rec, "grant for a request never made")
        elif kind == "EnergySnapshot":
            total = f["doze"] + f["rx"] + f["tx"] + f["idle"]
            if abs(total - f["lifetime"]) > 1 or abs(f["lifetime"] - t) > 1:
                self._fail("energy_conservation", lineno, rec,
                           f"state times sum to {total}, lifetime {f['lifetime']}, at {t}")
            else:
                self._ok("energy_conservation")
        if len(self._tx_by_key) > 4096:
            cutoff = t - 10_000
            self._tx_by_key = {k: v for k, v in self._tx_by_key.items() if v >= cutoff}

    def _tx_start(self, lineno: int, rec: TraceRecord, f: dict) -> None:
        t = rec.time
        dev = rec.device
        dur = f.get("dur", 0)
        if dev in self._open:
            self._fail("tx_pairing", lineno, rec, "TxStart while the device is already transmitting")
        self._open[dev] = (t, dur, lineno, rec)
        frame = f.get("frame")
        period = f.get("period")
        star = f.get("star")
        # silence in every beacon slot, except the owner's own beacon
        span = (t % self.T, dur)
        bad = None
        for start, length, owner in self._beacon_spans:
            if frame == "Beacon" and owner == dev:
                continue
            if spans_overlap(span, (start, length), self.T):
                bad = owner
                break
        if bad is not None:
            self._fail("beacon_silence", lineno, rec, f"transmission overlaps the beacon slot of {bad}")
        else:
            self._ok("beacon_silence")
        if frame == "Beacon":
            s = self.sched.get(dev)
            if s is None or (t - s.offset) % self.T != 0:
                self._fail("beacon_offsets", lineno, rec, "beacon outside the planned offset")
            else:
                self._ok("beacon_offsets")
        s = self.sched.get(star)
        if s is not None:
            end = t + dur
            m = s.index_at(t)
            if period == "poll":
                m = s.index_at(t + s.config.poll_slots * self.sd)
                lo, hi = s.poll_window_start(m), s.beacon_start(m)
            elif period == "CAP":
                lo, hi = s.cap_start(m), s.cap_end(m)
            elif period == "CFP":
                lo, hi = s.cap_end(m), s.cfp_end(m)
            elif period == "beacon":
                lo, hi = s.beacon_start(m), s.beacon_start(m) + self.sd
            else:
                lo, hi = 0, -1
            if lo <= t and end <= hi:
                self._ok("tx_windows")
            else:
                self._fail("tx_windows", lineno, rec, f"{period} transmission outside the {period} of star {star}")
        if frame == "GtsRequest" and dev in self._polled and self.mode.get(star) == "extended":
            self._fail("polled_nodes_no_cap_requests", lineno, rec, "polled node sent a GtsRequest in the CAP")
        elif frame == "GtsRequest":
            self._ok("polled_nodes_no_cap_requests")

    def _rx(self, lineno: int, rec: TraceRecord, f: dict) -> None:
        key = (f.get("src"), f.get("start"))
        end = self._tx_by_key.get(key)
        if end is None or end != rec.time:
            self._fail("rx_consistency", lineno, rec, "reception without a matching transmission")
        else:
            self._ok("rx_consistency")
        if f.get("result") != "Collision":
            return
        period = f.get("period")
        if period == "beacon":
            self._fail("beacon_slot_collisions", lineno, rec, "collision during a beacon slot")
        else:
            self._ok("beacon_slot_collisions")
        if period in ("poll", "CFP") and self.mode.get(f.get("star")) == "extended":
            self._fail("protected_period_collisions", lineno, rec, f"collision in an extended {period}")
        else:
            self._ok("protected_period_collisions")

    def _beacon_emit(self, lineno: int, rec: TraceRecord, f: dict) -> None:
        dev = rec.device
        gts = f.get("gts")
        entries = []
        if gts not in (None, ""):
            for item in str(gts).split("|"):
                owner, start, length, reuse, host = parse_gts(item)
                entries.append((host if host is not None else dev, start, length, reuse, owner))
        pgrant = f.get("pgrant")
        if pgrant not in (None, ""):
            for item in str(pgrant).split("|"):
                req, rest = item.split(":")
                start, length = (int(x) for x in rest.split("+"))
                entries.append((dev, start, length, False, int(req)))
        self._gts_now[dev] = entries
        taken: dict[tuple[int, int], tuple] = {}
        clash = None
        # a star's slots are judged when that star announces them: a foreign reuse
        # grant only takes effect after the host's next beacon has flagged the owner
        for src in sorted(self._gts_now):
            for host, start, length, reuse, owner in self._gts_now[src]:
                if host != dev:
                    continue
                for sl in range(start, start + length):
                    prev = taken.get((host, sl))
                    if prev is not None and not (prev[0] and reuse):
                        clash = (host, sl, prev[1], owner)
                    taken[(host, sl)] = (reuse, owner)
        if clash:
            self._fail("gts_disjoint", lineno, rec,
                       f"slot {clash[1]} of star {clash[0]} held by {clash[2]} and {clash[3]} without reuse")
        else:
            self._ok("gts_disjoint")
        preq = f.get("preq")
        if preq not in (None, ""):
            for item in str(preq).split("|"):
                pair = item.split(":")[0]
                a, b = (int(x) for x in pair.split(">"))
                self._peer_open[(a, b)] = self._peer_open.get((a, b), 0) + 1

    def _poll(self, lineno: int, rec: TraceRecord, f: dict) -> None:
        c = rec.device
        bound = self._poll_bound.get(c)
        if bound is None:
            return
        key = (c, f.get("target"))
        at = f.get("at")
        first = self._first_window.setdefault(c, at)
        prev = self._last_poll.get(key, first - self.sd)
        if at - prev > bound:
            self._fail("poll_gap", lineno, rec, f"gap {at - prev} µs exceeds {bound} µs")
        else:
            self._ok("poll_gap")
        self._last_poll[key] = at

    def report(self) -> VerificationReport:
        for dev, (start, dur, lineno, rec) in sorted(self._open.items()):
            r = self.results["tx_pairing"]
            if r.passed:
                r.passed = False
                r.line = lineno
                r.text = format_record(rec)
                r.detail = "TxStart never ended"
        return VerificationReport(dict(self.results), self.n)


def verify(records: Iterable, scenario: Scenario) -> VerificationReport:
    """Check ``records`` (``TraceRecord`` or ``(lineno, TraceRecord)``) against the scenario."""
    v = TraceVerifier(scenario)
    for i, item in enumerate(records, 2):
        if isinstance(item, TraceRecord):
            v.feed(i, item)
        else:
            v.feed(*item)
    return v.report()


def verify_lines(lines: Iterable[str], scenario: Scenario) -> VerificationReport:
    return verify(read_trace(lines), scenario)
