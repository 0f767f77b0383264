"""Reduced-function device: scan, associate, track beacons, contend, doze.

A node's superframe agenda after each own beacon runs in this order: CAP work
(GTS request, data request for pending downlink, CAP data), then its GTS slot,
then doze until the next wake point. The wake point is the start of the poll
window for polled nodes in extended mode and the beacon start otherwise; the
radio leaves doze ``wake_lead`` µs earlier and spends that time idle-awake.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from . import csma
from .csma import CapAccess, CsmaParams, Outgoing
from .energy import DOZE, IDLE, RX, TX
from .frames import Address, Frame, FrameKind, GtsDescriptor, SuperframeConfig, ack_frame, command_frame
from .network import Device, Network, TxInfo
from .superframe import CAP, CFP, POLL, StarSchedule

WAKE_LEAD_US = 330
MISSED_BEACON_LIMIT = 4
UPLINK_QUEUE_LIMIT = 16


class Phase(enum.Enum):
    SCANNING = "Scanning"
    ASSOCIATING = "Associating"
    SYNCHRONIZED = "Synchronized"
    DOZING = "Dozing"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class QosNeed:
    min_rate: float = 0.0
    max_rate: float = 0.0
    max_latency: int = 0
    wants_gts: bool = False
    slots_needed: int = 1

    def __post_init__(self) -> None:
        if self.min_rate < 0 or self.min_rate > self.max_rate:
            raise ValueError("need 0 <= min_rate <= max_rate")
        if self.wants_gts and self.slots_needed < 1:
            raise ValueError("slots_needed must be >= 1 when wants_gts")
        if self.max_latency < 0:
            raise ValueError("max_latency must be >= 0")


@dataclass(frozen=True)
class NodeConfig:
    """Traffic pattern and behaviour switches of one node."""

    address: Address
    coordinator: Address | None = None      # affinity; None accepts any
    need: QosNeed = QosNeed()
    payload_bytes: int = 0                   # uplink data, via GTS when held
    period_superframes: int = 0
    cap_payload_bytes: int = 0               # background CAP data
    cap_period_superframes: int = 0
    gts_need_at_us: int = 0
    accelerate: bool = False                 # also request GTS in the CAP
    answer_polls_when_accelerating: bool = True
    start_us: int = 0
    wake_events_us: tuple[int, ...] = ()
    tx_power_dbm: float | None = None
    channels: tuple[int, ...] = (11,)
    scan_dwell_us: int | None = None


@dataclass
class NodeState:
    phase: Phase = Phase.SCANNING
    coordinator: Address | None = None
    next_beacon_time: int | None = None
    granted_gts: GtsDescriptor | None = None
    missed_beacons: int = 0


@dataclass(frozen=True, slots=True)
class Candidate:
    arrival: int
    coordinator: Address
    beacon_start: int


def select_coordinator(candidates) -> Candidate | None:
    """Earliest beacon arrival wins; ties go to the lower address."""
    best = None
    for c in candidates:
        if best is None or (c.arrival, c.coordinator) < (best.arrival, best.coordinator):
            best = c
    return best


class Node(Device):
    trace_radio = True

    def __init__(self, net: Network, index: int, cfg: NodeConfig, superframe: SuperframeConfig,
                 mac: CsmaParams, tx_power: float, wake_lead: int = WAKE_LEAD_US,
                 missed_limit: int = MISSED_BEACON_LIMIT):
        super().__init__(net, index, cfg.address, tx_power if cfg.tx_power_dbm is None else cfg.tx_power_dbm,
                         cfg.channels[0])
        self.cfg = cfg
        self.superframe = superframe
        self.mac = mac
        self.wake_lead = wake_lead
        self.missed_limit = missed_limit
        self.state = NodeState()
        self.sched: StarSchedule | None = None
        self.access: CapAccess | None = None
        self.extended = False
        self.polled = False
        self.refused = False
        self.m = 0
        self.beacons_seen = 0
        self.uplink: deque[int] = deque()      # generation times
        self.gts_adopted_m = -1
        self.need_active = False
        self.need_time = 0
        self._need_deferred = False
        self.gts_request_inflight = False
        self.awaiting_downlink = False
        self.cap_open = False
        self.gts_todo = False
        self._tok = 0
        self._btok = 0
        self._htok = 0
        self._gts_tok = 0
        self._gts_active = False
        self._acking = False
        self._local_awake = False
        self._candidates: list[Candidate] = []
        self._scan_i = 0
        self._scan_tok = 0
        self._preassoc: tuple[StarSchedule, bool, bool] | None = None

    # -- setup --------------------------------------------------------------
    def preassociate(self, sched: StarSchedule, extended: bool, polled: bool) -> None:
        self._preassoc = (sched, extended, polled)

    @property
    def phase(self) -> Phase:
        p = self.state.phase
        if p is Phase.SYNCHRONIZED and self.radio == DOZE:
            return Phase.DOZING
        return p

    def start(self) -> None:
        eng = self.engine
        for t in self.cfg.wake_events_us:
            eng.schedule(t, self._local_event)
        if self.cfg.need.wants_gts:
            eng.schedule(max(self.cfg.gts_need_at_us, self.cfg.start_us), self._need_arises)
        eng.schedule(self.cfg.start_us, self._boot)

    def _boot(self) -> None:
        if self._preassoc is not None:
            sched, extended, polled = self._preassoc
            self._join(sched, extended, polled)
            m = sched.index_at(self.engine.now)
            while self._wake_point(m) < self.engine.now + self.wake_lead:
                m += 1
            self._plan_wake_at(m)
        else:
            self._scan_start()

    def _join(self, sched: StarSchedule, extended: bool, polled: bool) -> None:
        self.sched = sched
        self.extended = extended
        self.polled = polled
        self.access = CapAccess(self, self.mac, sched)
        self.state.coordinator = sched.coordinator
        self._set_phase(Phase.SYNCHRONIZED)

    def _set_phase(self, phase: Phase, **extra) -> None:
        self.state.phase = phase
        self.engine.emit(self.address, "StateChange", phase=phase.value, **extra)

    # -- radio scheduling ----------------------------------------------------
    def _wake_point(self, m: int) -> int:
        s = self.sched
        if self.extended and self.polled and s.config.poll_slots:
            return s.poll_window_start(m)
        return s.beacon_start(m)

    def _sleep_until(self, target: int, cb, *args) -> None:
        """Doze (or wait idle when too close) until ``target``, then run ``cb`` in RX."""
        eng = self.engine
        now = eng.now
        if target < now:
            raise RuntimeError(f"node {self.address}: wake target {target} in the past (now {now})")
        self._tok += 1
        tok = self._tok
        if target - now > self.wake_lead:
            self._radio(DOZE)
            eng.schedule(target - self.wake_lead, self._wake_lead_ev, tok, target, cb, args)
        else:
            if self.radio != RX or target > now:
                self._radio(IDLE)
            eng.schedule(target, self._run, tok, cb, args)

    def _wake_lead_ev(self, tok, target, cb, args) -> None:
        if tok != self._tok:
            return
        self._local_awake = False
        self._radio(IDLE)
        self.engine.schedule(target, self._run, tok, cb, args)

    def _run(self, tok, cb, args) -> None:
        if tok != self._tok:
            return
        self._radio(RX)
        cb(*args)

    def _plan_wake_at(self, m: int) -> None:
        self.state.next_beacon_time = self.sched.beacon_start(m)
        self._sleep_until(self._wake_point(m), self._await_beacon, m)

    def _await_beacon(self, m: int) -> None:
        self._btok += 1
        self.engine.schedule(self.sched.beacon_start(m) + self.sched.sd, self._beacon_timeout, self._btok, m)

    def _beacon_timeout(self, btok, m) -> None:
        if btok != self._btok:
            return
        self.state.missed_beacons += 1
        self.engine.emit(self.address, "StateChange", event="missed_beacon", count=self.state.missed_beacons)
        if self.state.missed_beacons >= self.missed_limit:
            self._lose_sync()
            return
        self.m = m
        self._plan_wake_at(m + 1)

    def _lose_sync(self) -> None:
        if self.access is not None:
            self.access.stop()
        self._drop_gts("lost_sync")
        self.sched = None
        self.access = None
        self.state.coordinator = None
        self.state.missed_beacons = 0
        self._tok += 1
        self._scan_start()

    # -- scanning / association ---------------------------------------------
    def _scan_start(self) -> None:
        if self.refused:
            return
        self._set_phase(Phase.SCANNING)
        self._candidates = []
        self._scan_i = 0
        self._scan_channel()

    def _scan_channel(self) -> None:
        chans = self.cfg.channels
        self.set_channel(chans[self._scan_i])
        self._radio(RX)
        dwell = self.cfg.scan_dwell_us or (self.superframe.beacon_interval + self.superframe.slot_duration)
        self._scan_tok += 1
        self.engine.schedule(self.engine.now + dwell, self._scan_dwell_end, self._scan_tok)

    def _scan_dwell_end(self, tok) -> None:
        if tok != self._scan_tok or self.state.phase is not Phase.SCANNING:
            return
        self._scan_i += 1
        if self._scan_i < len(self.cfg.channels):
            self._scan_channel()
            return
        self.engine.emit(self.address, "StateChange", event="scan_timeout")
        self._scan_i = 0
        self._scan_channel()

    def _scan_heard(self, frame: Frame, info: TxInfo) -> None:
        if self.cfg.coordinator is not None and frame.source != self.cfg.coordinator:
            return
        if not self._candidates:
            self.engine.schedule(self.engine.now, self._scan_decide)
        self._candidates.append(Candidate(self.engine.now, frame.source, info.start))

    def _scan_decide(self) -> None:
        if self.state.phase is not Phase.SCANNING or not self._candidates:
            return
        best = select_coordinator(self._candidates)
        self._candidates = []
        self._scan_tok += 1
        cfg = self.superframe
        sched = StarSchedule(best.coordinator, best.beacon_start % cfg.beacon_interval, cfg)
        self.sched = sched
        self.access = CapAccess(self, self.mac, sched)
        self.state.coordinator = best.coordinator
        self._set_phase(Phase.ASSOCIATING, coordinator=best.coordinator)
        self.m = sched.index_at(best.beacon_start)
        self._submit_assoc()
        self.cap_open = True
        self.gts_todo = False
        self._continue()

    def _submit_assoc(self) -> None:
        if any(o.frame.kind is FrameKind.ASSOC_REQUEST for o in self.access.queue):
            return
        req = command_frame(FrameKind.ASSOC_REQUEST, self.address, self.sched.coordinator)
        self.access.submit(Outgoing(req, True, FrameKind.ASSOC_RESPONSE, self.tx_power,
                                    self.sched.coordinator, self._assoc_done))

    def _assoc_done(self, result, frame: Frame | None = None) -> None:
        if result != csma.OK:
            return
        if frame.info.get("status") == "accepted":
            self.extended = bool(frame.info.get("extended"))
            self.polled = bool(frame.info.get("polled"))
            self._set_phase(Phase.SYNCHRONIZED, coordinator=frame.source)
        else:
            self.refused = True
            self.access.queue.clear()
            self.access.stop()
            self._tok += 1
            self._btok += 1
            self.sched = None
            self.state.coordinator = None
            self._set_phase(Phase.SCANNING, event="assoc_refused")
            self.cap_open = False
            self._radio(DOZE)

    # -- frame reception -----------------------------------------------------
    def on_frame(self, frame: Frame, rx_dbm: float, info: TxInfo) -> None:
        kind = frame.kind
        phase = self.state.phase
        if kind is FrameKind.BEACON:
            if phase is Phase.SCANNING:
                if not self.refused:
                    self._scan_heard(frame, info)
            elif self.sched is not None and frame.source == self.sched.coordinator:
                self._on_beacon(frame, info)
            return
        if frame.destination != self.address:
            return
        if kind is FrameKind.POLL:
            self.handle_poll(frame, info)
        elif kind is FrameKind.ACK or kind is FrameKind.ASSOC_RESPONSE:
            if self._gts_active and kind is FrameKind.ACK:
                self._gts_ack()
            elif self.access is not None:
                self.access.on_reply(frame)
        elif kind is FrameKind.DATA and self.sched is not None and frame.source == self.sched.coordinator:
            self._downlink(frame, info)

    def _on_beacon(self, frame: Frame, info: TxInfo) -> None:
        self._btok += 1
        self._tok += 1
        s = self.sched
        self.state.missed_beacons = 0
        m = s.index_at(info.start)
        self.m = m
        self.state.next_beacon_time = s.beacon_start(m + 1)
        self.beacons_seen += 1
        bc = frame.beacon
        self.cap_open = True
        self.gts_todo = True
        if self.state.phase is Phase.ASSOCIATING:
            self._submit_assoc()
            self._continue()
            return
        self._adopt(bc, m)
        self._generate(m)
        if self.need_active and self.state.granted_gts is None and not self.gts_request_inflight:
            if not (self.extended and self.polled) or self.cfg.accelerate:
                self._submit_gts_request()
        if self.address in bc.pending_addresses and not self.awaiting_downlink:
            if not any(o.extra.get("req") for o in self.access.queue):
                f = Frame(FrameKind.DATA, self.address, s.coordinator, 1, info={"request": True})
                self.access.submit(Outgoing(f, True, FrameKind.ACK, self.tx_power, s.coordinator,
                                            self._data_request_done, {"req": 1}))
        self._route_uplink(m)
        self._continue()

    def _adopt(self, bc, m: int) -> None:
        mine = None
        for d in bc.gts_list:
            if d.owner == self.address:
                mine = d
                break
        cur = self.state.granted_gts
        if mine is None:
            if cur is not None:
                self._drop_gts("gts_lost")
            return
        if cur == mine:
            return
        self.state.granted_gts = mine
        self.gts_request_inflight = False
        if cur is None or (cur.host, cur.start_slot) != (mine.host, mine.start_slot):
            self.gts_adopted_m = m
        fields = {"event": "gts_adopted", "start_slot": mine.start_slot, "length": mine.length_slots,
                  "power": mine.min_tx_power, "host": mine.host}
        if self.need_active and cur is None:
            fields["latency"] = self.engine.now - self.need_time
        self.engine.emit(self.address, "StateChange", **fields)

    def _drop_gts(self, why: str) -> None:
        if self.state.granted_gts is None:
            return
        self.state.granted_gts = None
        self.engine.emit(self.address, "StateChange", event=why)
        if self.cfg.need.wants_gts and self.need_active:
            self.need_time = self.engine.now
            self.engine.emit(self.address, "StateChange", event="gts_need")

    def _gts_usable(self, m: int) -> bool:
        g = self.state.granted_gts
        if g is None:
            return False
        return g.host is None or m > self.gts_adopted_m

    def _gts_time(self, m: int) -> int | None:
        g = self.state.granted_gts
        if g is None:
            return None
        s = self.sched
        if g.host is None:
            return s.cfp_slot_start(m, g.start_slot)
        c = s.config
        rel = (g.host_offset + 1 + c.cap_slots + g.start_slot) * c.slot_duration
        return s.beacon_start(m) + rel % c.beacon_interval

    def _generate(self, m: int) -> None:
        cfg = self.cfg
        now = self.engine.now
        n = self.beacons_seen
        if cfg.period_superframes and n % cfg.period_superframes == 0:
            self.uplink.append(now)
            while len(self.uplink) > UPLINK_QUEUE_LIMIT:
                self.uplink.popleft()
                self.engine.emit(self.address, "StateChange", event="uplink_dropped")
        if cfg.cap_period_superframes and n % cfg.cap_period_superframes == 0:
            f = Frame(FrameKind.DATA, self.address, self.sched.coordinator, cfg.cap_payload_bytes,
                      info={"gen": now})
            self.access.submit(Outgoing(f, True, FrameKind.ACK, self.tx_power, self.sched.coordinator,
                                        None, {"gen": now, "bg": 1}))

    def _route_uplink(self, m: int) -> None:
        """Uplink data rides the GTS when one is usable, otherwise the CAP."""
        if not self.uplink or self._gts_usable(m):
            return
        coord = self.sched.coordinator
        while self.uplink:
            gen = self.uplink.popleft()
            f = Frame(FrameKind.DATA, self.address, coord, self.cfg.payload_bytes, info={"gen": gen})
            self.access.submit(Outgoing(f, True, FrameKind.ACK, self.tx_power, coord, None, {"gen": gen}))

    def _submit_gts_request(self) -> None:
        coord = self.sched.coordinator
        f = command_frame(FrameKind.GTS_REQUEST, self.address, coord, slots=self.cfg.need.slots_needed)
        self.gts_request_inflight = True
        self.access.submit(Outgoing(f, True, FrameKind.ACK, self.tx_power, coord, self._gts_request_done,
                                    {"slots": self.cfg.need.slots_needed}))

    def _gts_request_done(self, result, frame=None) -> None:
        # an acked request waits for the next beacon; a failed one is retried then
        if result != csma.OK:
            self.gts_request_inflight = False

    def _data_request_done(self, result, frame=None) -> None:
        if result == csma.OK:
            self.awaiting_downlink = True
            self._htok += 1
            self.engine.schedule(self.sched.cap_end(self.m), self._downlink_timeout, self._htok)

    def _downlink_timeout(self, htok) -> None:
        if htok != self._htok or not self.awaiting_downlink:
            return
        self.awaiting_downlink = False
        self._continue()

    def _downlink(self, frame: Frame, info: TxInfo) -> None:
        self.awaiting_downlink = False
        self._htok += 1
        self._acking = True
        self.engine.schedule(self.engine.now + self.mac.turnaround, self._send_ack, frame.source, info.period,
                             info.star)

    def _send_ack(self, dst, period, star) -> None:
        if self.radio == TX or self.radio == DOZE:
            self._acking = False
            self._continue()
            return
        self.send(ack_frame(self.address, dst), None, period, star)

    # -- polls ---------------------------------------------------------------
    def handle_poll(self, frame: Frame, info: TxInfo) -> None:
        if self.cfg.accelerate and not self.cfg.answer_polls_when_accelerating:
            return
        wants = self.need_active and self.state.granted_gts is None
        slots = self.cfg.need.slots_needed if wants else 0
        resp = command_frame(FrameKind.POLL_RESPONSE, self.address, frame.source, wants=wants, slots=slots)
        self.engine.schedule(self.engine.now + self.mac.turnaround, self._send_poll_response, resp)

    def _send_poll_response(self, resp: Frame) -> None:
        if self.radio == DOZE or self.radio == TX:
            return
        self.send(resp, None, POLL, resp.destination, wants=resp.info["wants"], slots=resp.info["slots"])

    # -- need bookkeeping ----------------------------------------------------
    def _need_arises(self) -> None:
        if self.radio == TX:
            self._need_deferred = True
            return
        self._register_need()

    def _register_need(self) -> None:
        self.need_active = True
        self.need_time = self.engine.now
        self.engine.emit(self.address, "StateChange", event="gts_need")

    def on_tx_done(self, frame: Frame, info: TxInfo) -> None:
        self._radio(RX)
        if self._need_deferred:
            self._need_deferred = False
            self._register_need()
        if self._acking and frame.kind is FrameKind.ACK:
            self._acking = False
            self._continue()

    # -- local wake ----------------------------------------------------------
    def _local_event(self) -> None:
        self.engine.emit(self.address, "StateChange", event="local_wake")
        if self.state.phase is Phase.SYNCHRONIZED:
            self.uplink.append(self.engine.now)
        if self.radio == DOZE:
            self._radio(IDLE)
            self._local_awake = True
            self.engine.schedule(self.engine.now + self.wake_lead, self._local_done)

    def _local_done(self) -> None:
        if self._local_awake and self.radio == IDLE:
            self._local_awake = False
            self._radio(DOZE)

    # -- superframe agenda ---------------------------------------------------
    def cap_idle(self, access) -> None:
        self._continue()

    def cap_deferred(self, access) -> None:
        self.cap_open = False
        self._continue()

    def _continue(self) -> None:
        if self.state.phase not in (Phase.ASSOCIATING, Phase.SYNCHRONIZED):
            return
        if self.access.active or self._gts_active or self._acking or self.radio == TX:
            return
        now = self.engine.now
        s = self.sched
        m = self.m
        if self.cap_open and len(self.access) and now < s.cap_end(m):
            self._tok += 1
            self._radio(RX)
            self.access.start(m)
            return
        if self.awaiting_downlink and now < s.cap_end(m):
            self._radio(RX)
            return
        if self.state.phase is Phase.SYNCHRONIZED and self.gts_todo and self.uplink and self._gts_usable(m):
            t = self._gts_time(m)
            if t is not None and t >= now:
                self._sleep_until(t, self._gts_slot, m)
                return
        self.gts_todo = False
        self._plan_wake_at(m + 1)

    # -- GTS use -------------------------------------------------------------
    def _gts_power(self) -> float:
        g = self.state.granted_gts
        return self.tx_power if g.min_tx_power is None else g.min_tx_power

    def _gts_slot(self, m: int) -> None:
        g = self.state.granted_gts
        if g is None or not self.uplink:
            self.gts_todo = False
            self._continue()
            return
        self._gts_active = True
        self._gts_end = self._gts_time(m) + g.length_slots * self.sched.sd
        self._gts_send()

    def _gts_send(self) -> None:
        g = self.state.granted_gts
        now = self.engine.now
        f = Frame(FrameKind.DATA, self.address, self.sched.coordinator, self.cfg.payload_bytes,
                  info={"gen": self.uplink[0]})
        if g is None or now + self.airtime(f) + self.mac.ack_wait > self._gts_end:
            self._gts_finish()
            return
        star = self.sched.coordinator if g.host is None else g.host
        self.send(f, self._gts_power(), CFP, star, gen=self.uplink[0])
        self._gts_tok += 1
        self.engine.schedule(now + self.airtime(f) + self.mac.ack_wait, self._gts_timeout, self._gts_tok)

    def _gts_ack(self) -> None:
        self._gts_tok += 1
        if self.uplink:
            self.uplink.popleft()
        if self.uplink:
            self.engine.schedule(self.engine.now + self.mac.turnaround, self._gts_next, self._gts_tok)
        else:
            self._gts_finish()

    def _gts_next(self, tok) -> None:
        if tok == self._gts_tok and self._gts_active:
            self._gts_send()

    def _gts_timeout(self, tok) -> None:
        if tok != self._gts_tok or not self._gts_active:
            return
        self._gts_send()

    def _gts_finish(self) -> None:
        self._gts_active = False
        self._gts_tok += 1
        self.gts_todo = False
        self._continue()
