"""Deterministic discrete-event core: clock, queue, seeded streams, trace.

One tick is one microsecond. Events dispatch in ``(time, sequence)`` order;
the sequence number is assigned at scheduling time, so events at equal time
run in the order they were scheduled.
"""

from __future__ import annotations

import heapq
import random
import re
from typing import Callable, Iterable, Iterator, NamedTuple, TextIO

import numpy as np

TX_START = "TxStart"
TX_END = "TxEnd"
RX_OUTCOME = "RxOutcome"
STATE_CHANGE = "StateChange"
GTS_GRANT = "GtsGrant"
POLL = "Poll"
BEACON_EMIT = "BeaconEmit"
COLLISION_DETAIL = "CollisionDetail"
ENERGY_SNAPSHOT = "EnergySnapshot"

RECORD_KINDS = (
    TX_START, TX_END, RX_OUTCOME, STATE_CHANGE, GTS_GRANT,
    POLL, BEACON_EMIT, COLLISION_DETAIL, ENERGY_SNAPSHOT,
)


class EngineError(RuntimeError):
    pass


class Event(NamedTuple):
    time: int
    sequence: int
    callback: Callable
    args: tuple


class TraceRecord(NamedTuple):
    time: int
    device: int
    kind: str
    fields: dict


def _fmt(v) -> str:
    if v is True:
        return "1"
    if v is False:
        return "0"
    if v is None:
        return "-"
    return str(v)


def format_record(rec: TraceRecord) -> str:
    parts = [str(rec.time), str(rec.device), rec.kind]
    parts.extend(f"{k}={_fmt(v)}" for k, v in rec.fields.items())
    return ",".join(parts)


_INT = re.compile(r"-?\d+\Z")


def _parse_value(s: str):
    if _INT.match(s):
        return int(s)
    if s == "-":
        return None
    try:
        return float(s)
    except ValueError:
        return s


def parse_record(line: str) -> TraceRecord:
    parts = line.rstrip("\n").split(",")
    if len(parts) < 3:
        raise ValueError(f"malformed trace line: {line!r}")
    fields = {}
    for p in parts[3:]:
        k, sep, v = p.partition("=")
        if not sep:
            raise ValueError(f"malformed field {p!r}")
        fields[k] = _parse_value(v)
    return TraceRecord(int(parts[0]), int(parts[1]), parts[2], fields)


def read_trace(lines: Iterable[str]) -> Iterator[tuple[int, TraceRecord]]:
    """Yield ``(line_number, record)``; line numbers are 1-based, header skipped."""
    for n, line in enumerate(lines, 1):
        if not line.strip() or line.startswith("time_us,"):
            continue
        yield n, parse_record(line)


TRACE_HEADER = "time_us,device,kind,fields"


class CsvSink:
    def __init__(self, fh: TextIO, header: bool = True):
        self.fh = fh
        self.lines = 1 if header else 0
        if header:
            fh.write(TRACE_HEADER + "\n")

    def __call__(self, rec: TraceRecord) -> None:
        self.fh.write(format_record(rec))
        self.fh.write("\n")
        self.lines += 1


class Trace:
    """Append-only record stream fanned out to sinks.

    ``keep=True`` also retains the records in memory (``records``).
    """

    def __init__(self, sinks: Iterable[Callable[[TraceRecord], None]] = (), keep: bool = False):
        self.sinks = list(sinks)
        self.records: list[TraceRecord] = []
        if keep:
            self.sinks.append(self.records.append)
        self.count = 0

    def emit(self, time: int, device: int, kind: str, fields: dict) -> None:
        rec = TraceRecord(time, device, kind, fields)
        self.count += 1
        for s in self.sinks:
            s(rec)

    def lines(self) -> list[str]:
        return [format_record(r) for r in self.records]


def stream_seed(seed: int, device: int) -> int:
    state = np.random.SeedSequence([seed, device]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


class Engine:
    def __init__(self, seed: int = 0, trace: Trace | None = None, livelock_limit: int = 100_000):
        self.now = 0
        self.seed = seed
        self.trace = trace if trace is not None else Trace()
        self.livelock_limit = livelock_limit
        self._queue: list[Event] = []
        self._seq = 0
        self._streams: dict[int, random.Random] = {}
        self.dispatched = 0

    def schedule(self, time: int, callback: Callable, *args) -> None:
        if time < self.now:
            raise EngineError(f"event scheduled in the past: {time} < {self.now}")
        heapq.heappush(self._queue, Event(time, self._seq, callback, args))
        self._seq += 1

    def pending(self) -> int:
        return len(self._queue)

    def run(self, until: int) -> None:
        q = self._queue
        pop = heapq.heappop
        same = 0
        last = self.now
        while q:
            if q[0][0] > until:
                break
            ev = pop(q)
            t = ev[0]
            if t == last:
                same += 1
                if same > self.livelock_limit:
                    raise EngineError(
                        f"livelock: more than {self.livelock_limit} events at t={t} "
                        f"(last callback {getattr(ev[2], '__qualname__', ev[2])})"
                    )
            else:
                same = 0
                last = t
            self.now = t
            self.dispatched += 1
            ev[2](*ev[3])
        if self.now < until:
            self.now = until

    def stream(self, device: int) -> random.Random:
        rng = self._streams.get(device)
        if rng is None:
            rng = self._streams[device] = random.Random(stream_seed(self.seed, device))
        return rng

    def draw_uniform(self, device: int, bound: int) -> int:
        """Uniform integer in ``[0, bound]`` from the device's own stream."""
        if bound < 0:
            raise ValueError("bound must be >= 0")
        if bound == 0:
            return 0
        return self.stream(device).randint(0, bound)

    def emit(self, device: int, kind: str, **fields) -> None:
        self.trace.emit(self.now, device, kind, fields)
