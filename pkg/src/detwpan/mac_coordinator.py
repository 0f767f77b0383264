"""Full-function coordinator: beacons, polling, GTS allocation, peer GTS, reuse.

Timeline of one superframe ``m`` of a coordinator with offset ``o``::

    poll window   [b - poll*sd, b)   one Poll/PollResponse exchange per slot,
                                     right-aligned so the response ends on the
                                     slot boundary
    beacon        b = o + m*T        emitted without carrier sensing
    CAP / CFP     after the beacon slot

Allocations decided while handling a request are announced in the next own
beacon; the announce time minus the request arrival is the coordinator-side
allocation latency.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from . import csma
from .csma import CapAccess, CsmaParams, Outgoing
from .energy import RX, TX
from .frames import (
    Address,
    Beacon,
    Direction,
    Frame,
    FrameKind,
    GtsDescriptor,
    PeerGrant,
    PeerGtsRequest,
    SuperframeConfig,
    ack_frame,
    beacon_frame,
    command_frame,
    encode_beacon,
    MAX_FRAME_BYTES,
)
from .mac_node import QosNeed
from .network import Device, Network, TxInfo
from .superframe import BEACON, CAP, CFP, POLL, StarSchedule

LINEAR = "linear"
PRIORITY = "priority"
STRICT = "strict"
OPEN = "open"
BASELINE = "baseline"
EXTENDED = "extended"

POWER_LEVELS = (0.0, -8.0, -16.0, -24.0)
REPORT_LIMIT = 8


class SaturationError(ValueError):
    """More beacon slots requested than fit in one cycle."""


class ScenarioDesignError(ValueError):
    pass


# -- knowledge base and polling ------------------------------------------------

@dataclass
class KnowledgeEntry:
    address: Address
    need: QosNeed = QosNeed()
    priority: int = 0
    last_polled: int | None = None
    consecutive_misses: int = 0


def next_poll_targets(base: Sequence[KnowledgeEntry], policy: str, budget: int,
                      cursor: int = 0) -> tuple[list[Address], int]:
    """Pick up to ``budget`` addresses to poll; returns ``(targets, new_cursor)``.

    Linear: round-robin over the declared order starting at ``cursor``.
    Priority: ``(priority asc, last poll asc, address asc)``; never-polled
    entries count as the oldest.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    n = len(base)
    if n == 0 or budget == 0:
        return [], cursor
    take = min(budget, n)
    if policy == LINEAR:
        targets = [base[(cursor + i) % n].address for i in range(take)]
        return targets, (cursor + take) % n
    if policy == PRIORITY:
        ranked = sorted(base, key=lambda e: (e.priority, -1 if e.last_polled is None else e.last_polled, e.address))
        return [e.address for e in ranked[:take]], cursor
    raise ValueError(f"unknown polling policy {policy!r}")


# -- beacon plan -----------------------------------------------------------------

@dataclass(frozen=True)
class BeaconSlotPlan:
    cycle: int
    slot_duration: int
    coordinators: tuple[Address, ...]
    offsets: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.offsets)

    @property
    def silence_slots(self) -> tuple[tuple[int, int], ...]:
        return tuple((o, self.slot_duration) for o in self.offsets)

    def offset_of(self, coordinator: Address) -> int:
        return self.offsets[self.coordinators.index(coordinator)]


def plan_beacon_slots(coordinators: Iterable[Address], cycle: int, slot_duration: int) -> BeaconSlotPlan:
    """Spread ``k`` beacon slots evenly over the cycle, by ascending address."""
    order = tuple(sorted(coordinators))
    k = len(order)
    if k < 1:
        raise ValueError("need at least one coordinator")
    if slot_duration <= 0 or cycle <= 0:
        raise ValueError("cycle and slot_duration must be positive")
    if k * slot_duration > cycle:
        raise SaturationError(f"{k} beacon slots of {slot_duration} µs exceed the {cycle} µs cycle")
    offsets = tuple((i * cycle // k) // slot_duration * slot_duration for i in range(k))
    return BeaconSlotPlan(cycle, slot_duration, order, offsets)


# -- GTS table -------------------------------------------------------------------

@dataclass(frozen=True)
class Denial:
    reason: str          # "capacity" | "unknown-requester"


CAPACITY = "capacity"
UNKNOWN_REQUESTER = "unknown-requester"


class GtsTable:
    """Allocations in this coordinator's own CFP."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.entries: list[GtsDescriptor] = []

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def occupied(self) -> set[int]:
        return {s for d in self.entries for s in d.slots}

    def first_fit(self, length: int) -> int | None:
        taken = self.occupied()
        for start in range(self.capacity - length + 1):
            if all(s not in taken for s in range(start, start + length)):
                return start
        return None

    def find(self, owner: Address) -> GtsDescriptor | None:
        for d in self.entries:
            if d.owner == owner:
                return d
        return None

    def covering(self, slot: int) -> GtsDescriptor | None:
        for d in self.entries:
            if slot in d.slots:
                return d
        return None

    def add(self, desc: GtsDescriptor) -> None:
        if desc.host is not None:
            raise ValueError("foreign-hosted descriptors do not belong in the own table")
        if not desc.fits(self.capacity):
            raise ValueError("descriptor outside the CFP")
        if self.occupied() & set(desc.slots):
            raise ValueError("descriptor overlaps an existing allocation")
        self.entries.append(desc)
        self.check()

    def remove(self, desc: GtsDescriptor) -> None:
        self.entries.remove(desc)

    def replace(self, old: GtsDescriptor, new: GtsDescriptor) -> None:
        self.entries[self.entries.index(old)] = new
        self.check()

    def check(self) -> None:
        seen: set[int] = set()
        for d in self.entries:
            if not d.fits(self.capacity):
                raise AssertionError("GTS outside CFP")
            for s in d.slots:
                if s in seen:
                    raise AssertionError(f"GTS slot {s} allocated twice")
                seen.add(s)
        if len(seen) > self.capacity:
            raise AssertionError("GTS table over capacity")


def allocate_gts(table: GtsTable, owner: Address, slots: int, known: bool,
                 direction: Direction = Direction.TO_COORDINATOR) -> GtsDescriptor | Denial:
    """First-fit allocation in the own CFP (the table is not modified)."""
    if not known:
        return Denial(UNKNOWN_REQUESTER)
    start = table.first_fit(slots)
    if start is None:
        return Denial(CAPACITY)
    return GtsDescriptor(owner, direction, start, slots)


# -- power observations and reuse ---------------------------------------------

def dbm_to_mw(p: float) -> float:
    return 0.0 if p == -math.inf else 10.0 ** (p / 10.0)


def mw_to_dbm(mw: float) -> float:
    return -math.inf if mw <= 0 else 10.0 * math.log10(mw)


@dataclass
class PowerObservation:
    """Running mean of received power, averaged in milliwatts.

    A sample of ``-inf`` dBm (not heard at all) adds zero power.
    """

    observed: Address
    at: Address
    sum_mw: float = 0.0
    sample_count: int = 0
    last_loss_db: float | None = None

    def add(self, rx_dbm: float, tx_power_dbm: float | None = None) -> None:
        self.sum_mw += dbm_to_mw(rx_dbm)
        self.sample_count += 1
        if tx_power_dbm is not None and rx_dbm != -math.inf:
            self.last_loss_db = tx_power_dbm - rx_dbm

    @property
    def rx_power_dbm(self) -> float:
        if self.sample_count == 0:
            return -math.inf
        return mw_to_dbm(self.sum_mw / self.sample_count)


@dataclass(frozen=True)
class ReuseParams:
    threshold_dbm: float = -90.0
    link_margin_db: float = 6.0
    min_samples: int = 3
    power_levels: tuple[float, ...] = POWER_LEVELS
    sensitivity_dbm: float = -95.0


@dataclass(frozen=True)
class ForeignSlot:
    """A GTS that another coordinator (``host``) announced in its beacon."""

    host: Address
    host_offset: int       # host beacon offset minus ours, in slots, mod slot_count
    owner: Address
    start_slot: int
    length_slots: int


@dataclass(frozen=True)
class ReuseDecision:
    allowed: bool
    descriptor: GtsDescriptor | None = None
    reason: str = ""


def min_power_for(loss_db: float | None, params: ReuseParams) -> float | None:
    """Smallest power level that still reaches ``sensitivity + margin``."""
    if loss_db is None:
        return None
    for p in sorted(params.power_levels):
        if p - loss_db >= params.sensitivity_dbm + params.link_margin_db:
            return p
    return None


def evaluate_reuse(
    requester: Address,
    slots_needed: int,
    candidates: Sequence[ForeignSlot],
    local_obs: Mapping[Address, PowerObservation],
    remote_obs: Mapping[Address, Mapping[Address, PowerObservation]],
    link_loss_db: float | None,
    params: ReuseParams,
    direction: Direction = Direction.TO_COORDINATOR,
) -> ReuseDecision:
    """Decide whether ``requester`` may share a foreign GTS.

    Both directions must be quiet: the foreign owner as heard here and the
    requester as reported by the host, each over ``min_samples`` samples.
    """
    if not candidates:
        return ReuseDecision(False, reason="no-candidate")
    power = min_power_for(link_loss_db, params)
    if power is None:
        return ReuseDecision(False, reason="no-power-level")
    reason = "insufficient-observations"
    for c in sorted(candidates, key=lambda c: (c.host, c.start_slot)):
        if c.length_slots < slots_needed:
            continue
        fo = local_obs.get(c.owner)
        lo = remote_obs.get(c.host, {}).get(requester)
        if fo is None or lo is None or fo.sample_count < params.min_samples or lo.sample_count < params.min_samples:
            continue
        if fo.rx_power_dbm >= params.threshold_dbm or lo.rx_power_dbm >= params.threshold_dbm:
            reason = "too-loud"
            continue
        d = GtsDescriptor(requester, direction, c.start_slot, slots_needed, min_tx_power=power,
                          reuse_flag=True, host=c.host, host_offset=c.host_offset)
        return ReuseDecision(True, d)
    return ReuseDecision(False, reason=reason)


# -- trace formatting helpers ---------------------------------------------------

def fmt_gts(d: GtsDescriptor) -> str:
    s = f"{d.owner}:{d.start_slot}+{d.length_slots}"
    if d.reuse_flag:
        s += f":r{d.min_tx_power:g}"
    if d.host is not None:
        s += f":h{d.host}"
    return s


def parse_gts(s: str) -> tuple[int, int, int, bool, int | None]:
    """Inverse of :func:`fmt_gts` to ``(owner, start, length, reuse, host)``."""
    parts = s.split(":")
    owner = int(parts[0])
    start, length = (int(x) for x in parts[1].split("+"))
    reuse = False
    host = None
    for p in parts[2:]:
        if p.startswith("r"):
            reuse = True
        elif p.startswith("h"):
            host = int(p[1:])
    return owner, start, length, reuse, host


def _join(items) -> str:
    return "|".join(items)


# -- the coordinator device ---------------------------------------------------------

@dataclass(frozen=True)
class PeerTraffic:
    target: Address
    period_superframes: int = 1
    payload_bytes: int = 8
    slots_needed: int = 1


@dataclass(frozen=True)
class DownlinkTraffic:
    node: Address
    period_superframes: int
    payload_bytes: int


@dataclass(frozen=True)
class CoordinatorConfig:
    address: Address
    channel: int = 11
    mode: str = EXTENDED
    policy: str = LINEAR
    admission: str = OPEN
    reuse: bool = False
    report_power: bool | None = None       # defaults to ``reuse``
    reuse_threshold_dbm: float = -90.0
    link_margin_db: float = 6.0
    min_samples: int = 3
    expiry_superframes: int = 8
    tx_power_dbm: float | None = None
    knowledge: tuple[KnowledgeEntry, ...] = ()
    peers: tuple[PeerTraffic, ...] = ()
    downlink: tuple[DownlinkTraffic, ...] = ()
    power_levels: tuple[float, ...] = POWER_LEVELS

    @property
    def reports(self) -> bool:
        return self.reuse if self.report_power is None else self.report_power


@dataclass
class _Pending:
    desc: GtsDescriptor
    arrival: int
    via: str
    requester: Address


@dataclass
class _PeerLink:
    """Outgoing peer traffic towards one target coordinator."""

    target: Address
    messages: deque = field(default_factory=deque)     # (gen, payload)
    grant: GtsDescriptor | None = None
    request_beacon: int | None = None                   # start of the beacon carrying our request
    handshake_from: int | None = None
    tx_tok: int = 0
    sending: bool = False


class Coordinator(Device):
    is_coordinator = True

    def __init__(self, net: Network, index: int, cfg: CoordinatorConfig, schedule: StarSchedule,
                 mac: CsmaParams, tx_power: float, sensitivity_dbm: float, coordinators: Iterable[Address],
                 members: Iterable[Address] = (), max_frame_bytes: int = MAX_FRAME_BYTES):
        super().__init__(net, index, cfg.address,
                         tx_power if cfg.tx_power_dbm is None else cfg.tx_power_dbm, cfg.channel)
        self.cfg = cfg
        self.sched = schedule
        self.config: SuperframeConfig = schedule.config
        self.mac = mac
        self.extended = cfg.mode == EXTENDED
        self.max_frame_bytes = max_frame_bytes
        self.kb: list[KnowledgeEntry] = [replace(e) for e in cfg.knowledge]
        self.kb_by_addr = {e.address: e for e in self.kb}
        self.coordinators = set(coordinators) - {cfg.address}
        self.members: set[Address] = set(members)
        self.table = GtsTable(self.config.cfp_slots)
        self.foreign: list[GtsDescriptor] = []          # reuse grants hosted by other coordinators
        self.last_used: dict[tuple, int] = {}
        self.announce: list[_Pending] = []
        self.denied: dict[Address, str] = {}
        self.peer_grants: dict[Address, GtsDescriptor] = {}   # requester -> descriptor in our CFP
        self.peer_requests_heard: list[tuple[PeerGtsRequest, int]] = []
        self.peer_links = {p.target: _PeerLink(p.target) for p in cfg.peers}
        self.peer_sched: dict[Address, StarSchedule] = {}
        self.peer_gts_view: dict[Address, tuple[GtsDescriptor, ...]] = {}
        self.pending_dl: dict[Address, tuple[int, int]] = {}
        self.obs: dict[Address, PowerObservation] = {}
        self.remote_obs: dict[Address, dict[Address, PowerObservation]] = {}
        self.reuse_params = ReuseParams(cfg.reuse_threshold_dbm, cfg.link_margin_db, cfg.min_samples,
                                        tuple(cfg.power_levels), sensitivity_dbm)
        self.cursor = 0
        self.cycle = -1
        self._poll_log: list[list] = []                  # [target, at, slot, answered, wants]
        self._targets: list[Address] = []
        self._targets_m: int | None = None
        self.access = CapAccess(self, mac, schedule)
        self.peer_access: dict[Address, CapAccess] = {}
        self.until = None

    # -- lifecycle -------------------------------------------------------------
    @property
    def polling(self) -> bool:
        return self.extended and bool(self.kb) and self.config.poll_slots > 0

    def start(self) -> None:
        self.net.core.set_channel(self.index, self.channel)
        self._radio(RX)
        m = self.sched.next_beacon_at_or_after(self.engine.now)
        self._schedule_cycle(m)

    def _schedule_cycle(self, m: int) -> None:
        eng = self.engine
        b = self.sched.beacon_start(m)
        if self.until is not None and b > self.until:
            return
        if self.polling:
            ex = self._exchange_time()
            for j in range(self.config.poll_slots):
                t = self.sched.poll_slot_start(m, j) + self.sched.sd - ex
                if t >= eng.now:
                    eng.schedule(t, self._poll_slot, m, j)
        eng.schedule(b, self._beacon_slot, m)

    def _exchange_time(self) -> int:
        poll = command_frame(FrameKind.POLL, self.address, self.address)
        resp = command_frame(FrameKind.POLL_RESPONSE, self.address, self.address)
        return self.airtime(poll) + self.mac.turnaround + self.airtime(resp)

    # -- polling ---------------------------------------------------------------
    def _poll_slot(self, m: int, j: int) -> None:
        if self._targets_m != m:
            self._targets, self.cursor = next_poll_targets(self.kb, self.cfg.policy, self.config.poll_slots,
                                                           self.cursor)
            self._targets_m = m
        if j >= len(self._targets):
            return
        target = self._targets[j]
        now = self.engine.now
        self.kb_by_addr[target].last_polled = now
        self._poll_log.append([target, now, j, False, False])
        self.send(command_frame(FrameKind.POLL, self.address, target), None, POLL, self.address)

    def _poll_answered(self, frame: Frame) -> None:
        for rec in reversed(self._poll_log):
            if rec[0] == frame.source and not rec[3]:
                rec[3] = True
                rec[4] = bool(frame.info.get("wants"))
                break
        e = self.kb_by_addr.get(frame.source)
        if e is not None:
            e.consecutive_misses = 0
        if frame.info.get("wants"):
            self.request_gts(frame.source, int(frame.info.get("slots") or 1), "poll")

    def _flush_polls(self) -> None:
        for target, at, j, answered, wants in self._poll_log:
            if not answered:
                self.kb_by_addr[target].consecutive_misses += 1
            self.engine.emit(self.address, "Poll", target=target, at=at, slot=j,
                             result="answered" if answered else "miss", wants=wants)
        self._poll_log = []

    # -- GTS requests --------------------------------------------------------------
    def _known(self, addr: Address, via: str) -> bool:
        if via == "peer":
            return addr in self.coordinators
        return addr in self.members

    def _holds(self, owner: Address) -> bool:
        if self.table.find(owner) is not None:
            return True
        if any(d.owner == owner for d in self.foreign):
            return True
        return any(p.desc.owner == owner for p in self.announce)

    def request_gts(self, owner: Address, slots: int, via: str) -> GtsDescriptor | Denial | None:
        """Handle one request; ``None`` when it duplicates a live allocation."""
        if self._holds(owner):
            return None
        now = self.engine.now
        res = allocate_gts(self.table, owner, slots, self._known(owner, via))
        if isinstance(res, Denial) and res.reason == CAPACITY and self.cfg.reuse and self.extended and via != "peer":
            dec = self._evaluate_reuse(owner, slots)
            if dec.allowed:
                res = dec.descriptor
        if isinstance(res, Denial):
            if self.denied.get(owner) != res.reason:
                self.denied[owner] = res.reason
                self.engine.emit(self.address, "GtsGrant", requester=owner, result="denied",
                                 reason=res.reason, via=via)
            return res
        self.denied.pop(owner, None)
        if res.host is None:
            self.table.add(res)
        else:
            self.foreign.append(res)
        self.announce.append(_Pending(res, now, via, owner))
        return res

    def _evaluate_reuse(self, owner: Address, slots: int) -> ReuseDecision:
        mine_hosts = {(d.host, d.start_slot) for d in self.foreign}
        sd = self.config.slot_duration
        cands = []
        for host, gts in sorted(self.peer_gts_view.items()):
            hs = self.peer_sched.get(host)
            if hs is None:
                continue
            off = ((hs.offset - self.sched.offset) % self.config.beacon_interval) // sd
            for d in gts:
                if d.host is not None or (host, d.start_slot) in mine_hosts:
                    continue
                cands.append(ForeignSlot(host, off, d.owner, d.start_slot, d.length_slots))
        own = self.obs.get(owner)
        loss = own.last_loss_db if own is not None else None
        return evaluate_reuse(owner, slots, cands, self.obs, self.remote_obs, loss, self.reuse_params)

    # -- beacon ------------------------------------------------------------------
    def _beacon_slot(self, m: int) -> None:
        # zero-delay hop: receptions ending exactly now are processed first
        self.engine.schedule(self.engine.now, self._emit_beacon, m)

    def _expire(self, m: int) -> None:
        limit = self.cfg.expiry_superframes
        for d in list(self.table.entries):
            if m - self.last_used.get((None, d.owner), m) > limit:
                self.table.remove(d)
                self.peer_grants.pop(d.owner, None)
                self.engine.emit(self.address, "GtsGrant", requester=d.owner, result="expired",
                                 start_slot=d.start_slot, length=d.length_slots)
        for d in list(self.foreign):
            if m - self.last_used.get((None, d.owner), m) > limit:
                self.foreign.remove(d)
                self.engine.emit(self.address, "GtsGrant", requester=d.owner, result="expired",
                                 start_slot=d.start_slot, length=d.length_slots, host=d.host)

    def _generate(self, m: int, now: int) -> list[PeerGtsRequest]:
        for dl in self.cfg.downlink:
            if dl.period_superframes and m % dl.period_superframes == 0 and dl.node in self.members:
                self.indirect_queue(dl.node, (now, dl.payload_bytes))
        requests = []
        for p in self.cfg.peers:
            link = self.peer_links[p.target]
            if p.period_superframes and m % p.period_superframes == 0:
                link.messages.append((now, p.payload_bytes))
            if self.extended and link.messages:
                if link.grant is None and link.request_beacon is None:
                    requests.append(PeerGtsRequest(self.address, p.target, p.slots_needed))
                    link.request_beacon = now
                    link.handshake_from = now
        if not self.extended:
            for link in self.peer_links.values():
                acc = self.peer_access.get(link.target)
                if link.messages or (acc is not None and acc.queue):
                    self._peer_cap(link)
        return requests

    def indirect_queue(self, address: Address, frame) -> None:
        """Hold one frame for a dozing node; a newer frame replaces the older."""
        self.pending_dl[address] = frame

    def _allocate_peer_requests(self) -> None:
        heard = sorted(self.peer_requests_heard, key=lambda x: x[0].requester)
        self.peer_requests_heard = []
        for req, arrival in heard:
            if req.requester in self.peer_grants:
                continue
            res = self.request_gts(req.requester, req.slots_needed, "peer")
            if isinstance(res, GtsDescriptor):
                self.peer_grants[req.requester] = res
                # arrival time, not the allocation time, is the request's arrival
                self.announce[-1].arrival = arrival

    def build_superframe(self, m: int) -> tuple[SuperframeConfig, Beacon, list]:
        now = self.engine.now
        self._expire(m)
        requests = self._generate(m, now) if m >= 0 else []
        self._allocate_peer_requests()
        own_gts = [d for d in self.table if d.owner not in self.peer_grants]
        gts = sorted(own_gts, key=lambda d: d.start_slot) + list(self.foreign)
        grants = [PeerGrant(r, d) for r, d in sorted(self.peer_grants.items())]
        report = None
        if self.cfg.reports:
            rows = sorted(
                (a, o.rx_power_dbm) for a, o in self.obs.items()
                if a not in self.members and a not in self.coordinators and o.sample_count
            )
            report = [(a, round(p, 2)) for a, p in rows[:REPORT_LIMIT]]
        pending = sorted(self.pending_dl)
        beacon = encode_beacon(self.config, gts, pending, requests, grants, report, self.max_frame_bytes)
        return self.config, beacon, requests

    def _emit_beacon(self, m: int) -> None:
        eng = self.engine
        now = eng.now
        self.cycle = m
        if self._poll_log:
            self._flush_polls()
        _, beacon, requests = self.build_superframe(m)
        frame = beacon_frame(self.address, beacon)
        if self.airtime(frame) > self.sched.sd:
            raise ScenarioDesignError(f"beacon of {self.address} ({frame.total_bytes} B) exceeds its slot")
        for p in self.announce:
            self.last_used[(None, p.desc.owner)] = m
            d = p.desc
            eng.emit(self.address, "GtsGrant", requester=p.requester, result="granted", via=p.via,
                     start_slot=d.start_slot, length=d.length_slots, reuse=d.reuse_flag,
                     power=d.min_tx_power, host=d.host, latency=now - p.arrival)
        self.announce = []
        eng.emit(self.address, "BeaconEmit", seq=m, bytes=frame.total_bytes,
                 gts=_join(fmt_gts(d) for d in beacon.gts_list),
                 pending=_join(str(a) for a in beacon.pending_addresses),
                 preq=_join(f"{r.requester}>{r.target}:{r.slots_needed}" for r in requests),
                 pgrant=_join(f"{g.requester}:{g.descriptor.start_slot}+{g.descriptor.length_slots}"
                              for g in beacon.piggyback_grants))
        if self.radio == TX:
            raise ScenarioDesignError(f"coordinator {self.address} still transmitting at its beacon")
        self.send(frame, None, BEACON, self.address)
        if self.access.queue:
            eng.schedule(self.sched.cap_start(m), self._kick_cap, m)
        self._schedule_cycle(m + 1)

    def _kick_cap(self, m: int) -> None:
        if not self.access.active and self.access.queue:
            self.access.start(m)

    def cap_idle(self, access) -> None:
        pass

    def cap_deferred(self, access) -> None:
        pass

    # -- reception ---------------------------------------------------------------
    def on_frame(self, frame: Frame, rx_dbm: float, info: TxInfo) -> None:
        src = frame.source
        o = self.obs.get(src)
        if o is None:
            o = self.obs[src] = PowerObservation(src, self.address)
        o.add(rx_dbm, info.power)
        kind = frame.kind
        if kind is FrameKind.BEACON:
            self.process_peer_beacon(frame, info)
            return
        if frame.destination != self.address:
            return
        if kind is FrameKind.POLL_RESPONSE:
            self._poll_answered(frame)
        elif kind is FrameKind.GTS_REQUEST:
            self._ack(src, info)
            self.request_gts(src, int(frame.info.get("slots", 1)), "cap")
        elif kind is FrameKind.DATA:
            self._ack(src, info)
            if info.period == CFP:
                self.last_used[(None, src)] = self.cycle
            if frame.info.get("request"):
                self._serve_data_request(src)
        elif kind is FrameKind.ASSOC_REQUEST:
            self._associate(src, info)
        elif kind is FrameKind.ACK:
            if self.access.on_reply(frame):
                return
            link = self.peer_links.get(src)
            if link is not None and link.sending:
                self._peer_acked(link)
                return
            acc = self.peer_access.get(src)
            if acc is not None:
                acc.on_reply(frame)

    def _ack_power(self, src: Address, info: TxInfo) -> float:
        if info.period == CFP:
            for d in self.foreign:
                if d.owner == src:
                    return d.min_tx_power
            d = self.table.find(src)
            if d is not None and d.reuse_flag:
                return d.min_tx_power
        return self.tx_power

    def _ack(self, src: Address, info: TxInfo) -> None:
        self.engine.schedule(self.engine.now + self.mac.turnaround, self._send_ack, src,
                             self._ack_power(src, info), info.period, info.star)

    def _send_ack(self, dst, power, period, star) -> None:
        if self.radio == TX:
            self.engine.emit(self.address, "StateChange", event="ack_skipped", dst=dst)
            return
        self.send(ack_frame(self.address, dst), power, period, star)

    def _associate(self, src: Address, info: TxInfo) -> None:
        if self.cfg.admission == STRICT and src not in self.kb_by_addr:
            status = "refused"
        else:
            status = "accepted"
            self.members.add(src)
        resp = command_frame(FrameKind.ASSOC_RESPONSE, self.address, src, status=status,
                             polled=self.polling and src in self.kb_by_addr, extended=self.extended)
        self.engine.emit(self.address, "StateChange", event="assoc", node=src, status=status)
        self.engine.schedule(self.engine.now + self.mac.turnaround, self._send_plain, resp, info.period)

    def _send_plain(self, frame: Frame, period: str) -> None:
        if self.radio == TX:
            return
        self.send(frame, None, period, self.address)

    def _serve_data_request(self, src: Address) -> None:
        item = self.pending_dl.get(src)
        if item is None:
            return
        gen, payload = item
        f = Frame(FrameKind.DATA, self.address, src, payload, info={"gen": gen})

        def done(result, frame=None, src=src, item=item):
            if result == csma.OK and self.pending_dl.get(src) == item:
                del self.pending_dl[src]

        self.access.submit(Outgoing(f, True, FrameKind.ACK, self.tx_power, self.address, done, {"gen": gen}))
        if not self.access.active:
            now = self.engine.now
            m = self.sched.index_at(now)
            if now < self.sched.cap_end(m):
                self.access.start(m)

    # -- peer coordinators -----------------------------------------------------
    def process_peer_beacon(self, frame: Frame, info: TxInfo) -> None:
        b = frame.source
        bc = frame.beacon
        T = self.config.beacon_interval
        sched = self.peer_sched.get(b)
        if sched is None:
            sched = self.peer_sched[b] = StarSchedule(b, info.start % T, bc.superframe)
        self.peer_gts_view[b] = bc.gts_list
        me = self.address
        if bc.neighbor_report is not None:
            reported = dict(bc.neighbor_report)
            book = self.remote_obs.setdefault(b, {})
            for x in self.members:
                ob = book.get(x)
                if ob is None:
                    ob = book[x] = PowerObservation(x, b)
                ob.add(reported.get(x, -math.inf))
        for req in bc.piggyback_requests:
            if req.target == me:
                self.peer_requests_heard.append((req, self.engine.now))
        # reuse of our own slots announced by b: our owner must drop its power
        for d in bc.gts_list:
            if d.host == me and d.reuse_flag:
                self._flag_reuse(d)
        link = self.peer_links.get(b)
        grant = None
        for g in bc.piggyback_grants:
            if g.requester == me:
                grant = g.descriptor
        if link is None:
            if grant is not None:
                self._protocol_violation(b)
            return
        if grant is None:
            link.grant = None
            if link.request_beacon is not None and info.start > link.request_beacon:
                link.request_beacon = None      # not granted: ask again next beacon
            return
        if link.grant is None and link.request_beacon is None:
            self._protocol_violation(b)
            return
        link.request_beacon = None
        link.grant = grant
        if link.messages and not link.sending:
            mb = sched.index_at(info.start)
            t = sched.cfp_slot_start(mb, grant.start_slot)
            link.tx_tok += 1
            self.engine.schedule(t, self._peer_tx, link, link.tx_tok, t + grant.length_slots * sched.sd)

    def _protocol_violation(self, b: Address) -> None:
        self.engine.emit(self.address, "StateChange", event="protocol_violation", peer=b)

    def _flag_reuse(self, foreign: GtsDescriptor) -> None:
        own = None
        for s in foreign.slots:
            own = self.table.covering(s)
            if own is not None:
                break
        if own is None or own.reuse_flag:
            return
        ob = self.obs.get(own.owner)
        power = min_power_for(ob.last_loss_db if ob else None, self.reuse_params)
        if power is None:
            power = self.tx_power
        new = replace(own, min_tx_power=power, reuse_flag=True)
        self.table.replace(own, new)
        self.engine.emit(self.address, "GtsGrant", requester=own.owner, result="reuse_flagged",
                         start_slot=own.start_slot, length=own.length_slots, power=power, by=foreign.owner)

    def _peer_tx(self, link: _PeerLink, tok: int, slot_end: int) -> None:
        if tok != link.tx_tok or not link.messages or link.grant is None:
            return
        if self.radio == TX:
            return
        gen, payload = link.messages[0]
        f = Frame(FrameKind.DATA, self.address, link.target, payload, info={"gen": gen})
        if self.engine.now + self.airtime(f) + self.mac.ack_wait > slot_end:
            return
        link.sending = True
        link.sent_end = self.engine.now + self.airtime(f)
        self.send(f, None, CFP, link.target, gen=gen, peer=1)
        self.engine.schedule(link.sent_end + self.mac.ack_wait, self._peer_timeout, link, tok)

    def _peer_acked(self, link: _PeerLink) -> None:
        link.sending = False
        link.tx_tok += 1
        gen, _ = link.messages.popleft()
        fields = {"event": "peer_delivered", "target": link.target, "gen": gen,
                  "delivered": link.sent_end, "latency": link.sent_end - gen}
        if link.handshake_from is not None:
            fields["handshake"] = link.sent_end - link.handshake_from
            link.handshake_from = None
        self.engine.emit(self.address, "StateChange", **fields)

    def _peer_timeout(self, link: _PeerLink, tok: int) -> None:
        if tok == link.tx_tok and link.sending:
            link.sending = False

    def _peer_cap(self, link: _PeerLink) -> None:
        """Baseline: contend in the target's CAP."""
        sched = self.peer_sched.get(link.target)
        if sched is None:
            return
        acc = self.peer_access.get(link.target)
        if acc is None:
            acc = self.peer_access[link.target] = CapAccess(self, self.mac, sched)
        while link.messages:
            gen, payload = link.messages.popleft()
            f = Frame(FrameKind.DATA, self.address, link.target, payload, info={"gen": gen})

            def done(result, frame=None, gen=gen, target=link.target, f=f):
                if result == csma.OK:
                    self.engine.emit(self.address, "StateChange", event="peer_delivered", target=target,
                                     gen=gen, latency=self.engine.now - gen)

            acc.submit(Outgoing(f, True, FrameKind.ACK, self.tx_power, link.target, done, {"gen": gen, "peer": 1}))
        now = self.engine.now
        m = sched.next_beacon_at_or_after(now)
        self.engine.schedule(sched.cap_start(m), self._kick_peer_cap, link.target, m)

    def _kick_peer_cap(self, target: Address, m: int) -> None:
        acc = self.peer_access[target]
        if not acc.active and acc.queue:
            acc.start(m)
