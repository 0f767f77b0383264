"""Build a runnable network from a scenario and run it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .csma import CsmaParams
from .energy import EnergyParams
from .engine import Engine, Trace, TraceRecord
from .frames import SuperframeConfig
from .mac_coordinator import (
    Coordinator,
    CoordinatorConfig,
    DownlinkTraffic,
    KnowledgeEntry,
    PeerTraffic,
    ScenarioDesignError,
    plan_beacon_slots,
)
from .mac_node import Node, NodeConfig, QosNeed
from .medium import Medium, Position, received_power
from .metrics import Metrics, MetricsAccumulator
from .network import Network
from .scenario import Scenario, ScenarioError, validate_geometry
from .superframe import StarSchedule, spans_overlap


def superframe_config(sc: Scenario) -> SuperframeConfig:
    s = sc.superframe
    return SuperframeConfig(s.beacon_interval_us, s.slot_count, s.slot_duration_us, s.cap_slots, s.cfp_slots,
                            s.poll_slots)


def csma_params(sc: Scenario) -> CsmaParams:
    m = sc.mac
    return CsmaParams(m.min_be, m.max_be, m.max_retries, m.max_frame_retries, m.backoff_period_us, m.cca_us,
                      m.turnaround_us, m.ack_wait_us)


def energy_params(sc: Scenario) -> EnergyParams:
    e = sc.energy
    return EnergyParams(e.doze_ua, e.idle_ua, e.rx_ua, e.tx_ua)


def star_schedules(sc: Scenario) -> dict[int, StarSchedule]:
    """Beacon offsets per coordinator: the even plan unless overridden per star."""
    cfg = superframe_config(sc)
    if not sc.coordinators:
        return {}
    plan = plan_beacon_slots([c.address for c in sc.coordinators], cfg.beacon_interval, cfg.slot_duration)
    out = {}
    for c in sc.coordinators:
        off = plan.offset_of(c.address) if c.offset_slot is None else c.offset_slot * cfg.slot_duration
        out[c.address] = StarSchedule(c.address, off, cfg)
    return out


def check_footprints(sc: Scenario, schedules: dict[int, StarSchedule]) -> list[str]:
    """Active spans (poll window through CFP) of different stars must not overlap."""
    T = sc.superframe.beacon_interval_us
    problems = []
    items = sorted(schedules.items())
    for i, (a, sa) in enumerate(items):
        for b, sb in items[i + 1:]:
            pa = sa.footprint(polling=True)
            pb = sb.footprint(polling=True)
            if spans_overlap(pa, pb, T):
                problems.append(f"active periods of coordinators {a} and {b} overlap")
    return problems


def knowledge_of(sc: Scenario, address: int) -> int | None:
    for c in sc.coordinators:
        if any(k.address == address for k in c.kb):
            return c.address
    return None


def home_coordinator(sc: Scenario, node) -> int | None:
    """Affinity, else the knowledge base listing the node, else the loudest coordinator."""
    if node.coordinator is not None:
        return node.coordinator
    k = knowledge_of(sc, node.address)
    if k is not None:
        return k
    params = sc.radio_params()
    best = None
    for c in sc.coordinators:
        d = Position(c.x, c.y).distance(Position(node.x, node.y))
        rx = received_power(params.tx_power_dbm, d, params)
        if best is None or rx > best[0]:
            best = (rx, c.address)
    return None if best is None else best[1]


def is_polled(sc: Scenario, node) -> bool:
    home = home_coordinator(sc, node)
    if home is None:
        return False
    c = sc.coordinator(home)
    return (sc.coordinator_mode(c) == "extended" and sc.superframe.poll_slots > 0
            and any(k.address == node.address for k in c.kb))


@dataclass
class Simulation:
    scenario: Scenario
    engine: Engine
    network: Network
    coordinators: list[Coordinator]
    nodes: list[Node]
    schedules: dict[int, StarSchedule]
    until: int
    metrics: MetricsAccumulator

    def run(self) -> "RunResult":
        for dev in self.network.devices:
            dev.start()
        self.engine.run(self.until)
        for dev in self.network.devices:
            dev.finish(self.until)
        return RunResult(self.engine.trace, self.metrics.finalize(), self)


@dataclass
class RunResult:
    trace: Trace
    metrics: Metrics
    simulation: Simulation

    @property
    def records(self) -> list[TraceRecord]:
        return self.trace.records

    def lines(self) -> list[str]:
        return self.trace.lines()


def build(sc: Scenario, seed: int | None = None, until: int | None = None,
          sinks: Iterable[Callable[[TraceRecord], None]] = (), keep: bool = True,
          allow_hidden: bool | None = None) -> Simulation:
    hidden_ok = sc.simulation.allow_hidden if allow_hidden is None else allow_hidden
    violations = validate_geometry(sc)
    if violations and not hidden_ok:
        raise ScenarioError([(0, str(v)) for v in violations])
    schedules = star_schedules(sc)
    extended_any = any(sc.coordinator_mode(c) == "extended" for c in sc.coordinators)
    if extended_any:
        problems = check_footprints(sc, schedules)
        if problems:
            raise ScenarioError([(0, p) for p in problems])
    cfg = superframe_config(sc)
    mac = csma_params(sc)
    radio = sc.radio_params()
    metrics = MetricsAccumulator(sc)
    trace = Trace([metrics.feed, *sinks], keep=keep)
    eng = Engine(sc.simulation.seed if seed is None else seed, trace)
    coords = sorted(sc.coordinators, key=lambda c: c.address)
    positions = [Position(c.x, c.y) for c in coords] + [Position(n.x, n.y) for n in sc.nodes]
    medium = Medium(positions, radio)
    net = Network(eng, medium, sc.radio.bitrate, energy_params(sc))
    stop = sc.duration_us if until is None else until
    net.horizon = stop
    caddrs = [c.address for c in coords]
    preassoc = not sc.simulation.associate
    homes = {n.address: home_coordinator(sc, n) for n in sc.nodes}
    coordinators = []
    for i, c in enumerate(coords):
        mode = sc.coordinator_mode(c)
        kb = tuple(
            KnowledgeEntry(k.address, QosNeed(k.min_rate, k.max_rate, k.max_latency_us, k.wants_gts, k.slots_needed),
                           k.priority)
            for k in c.kb
        )
        downlink = tuple(
            DownlinkTraffic(n.address, n.downlink_period_superframes, n.downlink_payload_bytes)
            for n in sc.nodes if n.downlink_period_superframes and homes[n.address] == c.address
        )
        ccfg = CoordinatorConfig(
            c.address, c.channel, mode, c.policy, c.admission, c.reuse, c.report_power, c.reuse_threshold_dbm,
            c.link_margin_db, c.min_samples, c.expiry_superframes, c.tx_power_dbm, kb,
            tuple(PeerTraffic(p.target, p.period_superframes, p.payload_bytes, p.slots_needed) for p in c.peer),
            downlink,
        )
        members = [a for a, h in homes.items() if h == c.address] if preassoc else []
        dev = Coordinator(net, i, ccfg, schedules[c.address], mac, radio.tx_power_dbm, radio.sensitivity_dbm,
                          caddrs, members, sc.radio.max_frame_bytes)
        dev.until = stop
        net.add(dev)
        coordinators.append(dev)
    nodes = []
    for j, n in enumerate(sc.nodes):
        home = homes[n.address]
        channel = sc.coordinator(home).channel if (preassoc and home is not None) else sc.simulation.channels[0]
        ncfg = NodeConfig(
            n.address, n.coordinator,
            QosNeed(n.min_rate, n.max_rate, n.max_latency_us, n.wants_gts, n.slots_needed),
            n.payload_bytes, n.period_superframes, n.cap_payload_bytes, n.cap_period_superframes,
            n.gts_need_at_us, n.accelerate, n.answer_polls, n.start_us, n.wake_events_us, n.tx_power_dbm,
            (channel,) if preassoc else sc.simulation.channels,
        )
        dev = Node(net, len(coords) + j, ncfg, cfg, mac, radio.tx_power_dbm, sc.mac.wake_lead_us,
                   sc.mac.missed_beacon_limit)
        if preassoc and home is not None:
            hc = sc.coordinator(home)
            dev.preassociate(schedules[home], sc.coordinator_mode(hc) == "extended", is_polled(sc, n))
        net.add(dev)
        nodes.append(dev)
    return Simulation(sc, eng, net, coordinators, nodes, schedules, stop, metrics)


def run_scenario(sc: Scenario, seed: int | None = None, until: int | None = None,
                 sinks: Iterable[Callable[[TraceRecord], None]] = (), keep: bool = True,
                 allow_hidden: bool | None = None) -> RunResult:
    return build(sc, seed, until, sinks, keep, allow_hidden).run()
