"""Slotted CSMA/CA for the contention access period.

Backoff boundaries are aligned on the CAP start. A clear channel assessment
(CCA) is evaluated ``cca`` µs after a boundary; two consecutive idle CCAs let
the frame go out on the following boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

from .frames import Frame

WAIT = "wait"          # cannot finish in this CAP: defer to the next one
SENSE = "sense"
TRANSMIT = "transmit"
ABORT = "abort"


@dataclass(frozen=True)
class CsmaParams:
    min_be: int = 3
    max_be: int = 5
    max_retries: int = 4        # max CSMA backoffs before channel access failure
    max_frame_retries: int = 3  # retransmissions after a missing ack
    backoff_period: int = 320   # 20 symbols at 16 µs
    cca: int = 128              # 8 symbols
    turnaround: int = 192       # 12 symbols
    ack_wait: int = 864         # 54 symbols

    def __post_init__(self) -> None:
        if not 0 <= self.min_be <= self.max_be:
            raise ValueError("need 0 <= min_be <= max_be")


@dataclass
class BackoffState:
    nb: int = 0
    be: int = 3
    cw: int = 2
    pending_frame: Frame | None = None

    @classmethod
    def fresh(cls, params: CsmaParams, frame: Frame | None = None) -> "BackoffState":
        return cls(0, params.min_be, 2, frame)


class Action(NamedTuple):
    kind: str
    at: int = 0


def next_boundary(t: int, cap_start: int, period: int) -> int:
    k = -(-(t - cap_start) // period)
    return cap_start + max(k, 0) * period


def csma_step(
    state: BackoffState,
    params: CsmaParams,
    now: int,
    cap_start: int,
    cap_end: int,
    needed: int,
    sensed_busy: bool | None,
    draw: Callable[[int], int],
) -> Action:
    """Advance the procedure by one decision.

    ``sensed_busy`` is ``None`` when a new backoff round starts, otherwise the
    result of the CCA that just completed. ``needed`` is the time the frame
    exchange (frame + turnaround + ack) occupies once transmission starts.
    ``draw(bound)`` returns a uniform integer in ``[0, bound]``.
    """
    bp = params.backoff_period
    if sensed_busy is None:
        delay = draw((1 << state.be) - 1)
        b = next_boundary(now, cap_start, bp) + delay * bp
        if b + 2 * bp + needed > cap_end:
            return Action(WAIT)
        state.cw = 2
        return Action(SENSE, b + params.cca)
    if sensed_busy:
        state.nb += 1
        state.be = min(state.be + 1, params.max_be)
        state.cw = 2
        if state.nb > params.max_retries:
            return Action(ABORT)
        return csma_step(state, params, now, cap_start, cap_end, needed, None, draw)
    state.cw -= 1
    b = next_boundary(now, cap_start, bp)
    if state.cw > 0:
        return Action(SENSE, b + params.cca)
    return Action(TRANSMIT, b)


class Outgoing:
    __slots__ = ("frame", "needs_reply", "reply_kind", "power", "star", "on_done", "retries", "extra")

    def __init__(self, frame, needs_reply, reply_kind, power, star, on_done=None, extra=None):
        self.frame = frame
        self.needs_reply = needs_reply
        self.reply_kind = reply_kind
        self.power = power
        self.star = star
        self.on_done = on_done
        self.retries = 0
        self.extra = extra or {}


OK = "ok"
FAILED = "failed"        # no reply after max_frame_retries
ACCESS_FAILURE = "channel_access_failure"


class CapAccess:
    """Queue of frames contending in one star's CAP on behalf of a device.

    The owner calls :meth:`start` while awake inside (or just before) the CAP
    of superframe ``m``. When the queue drains the owner's ``cap_idle(access)``
    hook fires; when the remaining frames cannot complete before the CAP end
    ``cap_deferred(access)`` fires and the frames stay queued.
    """

    def __init__(self, dev, params: CsmaParams, schedule):
        self.dev = dev
        self.params = params
        self.schedule = schedule
        self.queue: list[Outgoing] = []
        self.active = False
        self.m = 0
        self._tok = 0
        self._state = BackoffState.fresh(params)
        self._awaiting: Outgoing | None = None

    def __len__(self) -> int:
        return len(self.queue)

    def submit(self, out: Outgoing) -> None:
        self.queue.append(out)

    def discard(self, pred) -> None:
        self.queue = [o for o in self.queue if not pred(o)]

    def start(self, m: int) -> None:
        if self.active:
            return
        self.active = True
        self.m = m
        self._begin_frame()

    def stop(self) -> None:
        self.active = False
        self._tok += 1
        self._awaiting = None

    def _needed(self, out: Outgoing) -> int:
        d = self.dev.airtime(out.frame)
        if out.needs_reply:
            d += self.params.ack_wait
        return d

    def _begin_frame(self) -> None:
        if not self.queue:
            self.active = False
            self.dev.cap_idle(self)
            return
        self._state = BackoffState.fresh(self.params, self.queue[0].frame)
        self._step(None)

    def _step(self, sensed) -> None:
        dev = self.dev
        eng = dev.engine
        s = self.schedule
        act = csma_step(
            self._state, self.params, eng.now, s.cap_start(self.m), s.cap_end(self.m),
            self._needed(self.queue[0]), sensed,
            lambda bound: eng.draw_uniform(dev.address, bound),
        )
        self._tok += 1
        tok = self._tok
        if act.kind == SENSE:
            eng.schedule(act.at, self._sense, tok)
        elif act.kind == TRANSMIT:
            eng.schedule(act.at, self._transmit, tok)
        elif act.kind == WAIT:
            self.active = False
            dev.cap_deferred(self)
        else:
            out = self.queue.pop(0)
            eng.emit(dev.address, "StateChange", event=ACCESS_FAILURE, frame=out.frame.kind.value)
            if out.on_done:
                out.on_done(ACCESS_FAILURE)
            self._begin_frame()

    def _sense(self, tok) -> None:
        if tok != self._tok or not self.active:
            return
        self._step(self.dev.carrier_busy())

    def _transmit(self, tok) -> None:
        if tok != self._tok or not self.active:
            return
        dev = self.dev
        if dev.radio == "tx":
            self._step(True)
            return
        out = self.queue[0]
        dev.send(out.frame, out.power, "CAP", out.star, **out.extra)
        if out.needs_reply:
            self._awaiting = out
            eng = dev.engine
            eng.schedule(eng.now + dev.airtime(out.frame) + self.params.ack_wait, self._reply_timeout, tok)
        else:
            self._tok += 1
            eng = dev.engine
            eng.schedule(eng.now + dev.airtime(out.frame), self._sent, self._tok)

    def _sent(self, tok) -> None:
        if tok != self._tok or not self.active:
            return
        out = self.queue.pop(0)
        if out.on_done:
            out.on_done(OK)
        self._begin_frame()

    def on_reply(self, frame) -> bool:
        """Feed a received frame; returns True when it was the awaited reply."""
        out = self._awaiting
        if out is None or frame.kind is not out.reply_kind or frame.source != out.frame.destination:
            return False
        self._awaiting = None
        self._tok += 1
        self.queue.pop(0)
        if out.on_done:
            out.on_done(OK, frame)
        if self.active:
            # replies land after a turnaround; stay on the CAP backoff grid
            self._begin_frame()
        return True

    def _reply_timeout(self, tok) -> None:
        if tok != self._tok or self._awaiting is None:
            return
        out = self._awaiting
        self._awaiting = None
        out.retries += 1
        if out.retries > self.params.max_frame_retries:
            self.queue.pop(0)
            if out.on_done:
                out.on_done(FAILED)
        self._begin_frame()
