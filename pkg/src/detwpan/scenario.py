"""Scenario files: a flat, line-oriented format.

Grammar::

    file     := { line }
    line     := blank | comment | header | pair
    comment  := "#" text
    header   := "[" section "]"
    pair     := key "=" value

Sections ``simulation``, ``radio``, ``superframe``, ``mac`` and ``energy``
appear at most once; ``coordinator`` and ``node`` repeat, one block per
device. Keys ``kb`` and ``peer`` may repeat inside a coordinator block::

    kb   = address, priority, min_rate, max_rate, max_latency_us, wants_gts, slots_needed
    peer = target, period_superframes, payload_bytes[, slots_needed]

Booleans are ``true``/``false``; lists are whitespace separated; ``none``
leaves an optional value unset. Text after ``#`` is ignored. Every problem is
reported with its line number, all of them at once.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from typing import Any, Callable

from .medium import Position, RadioParams, audible, path_loss


class ScenarioError(ValueError):
    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = sorted(errors)
        super().__init__("\n".join(f"line {n}: {msg}" if n else msg for n, msg in self.errors))


MODES = ("baseline", "extended", "mixed")
POLICIES = ("linear", "priority")
ADMISSIONS = ("strict", "open")


@dataclass(frozen=True)
class KbLine:
    address: int
    priority: int = 0
    min_rate: float = 0.0
    max_rate: float = 0.0
    max_latency_us: int = 0
    wants_gts: bool = True
    slots_needed: int = 1


@dataclass(frozen=True)
class PeerLine:
    target: int
    period_superframes: int = 1
    payload_bytes: int = 8
    slots_needed: int = 1


@dataclass(frozen=True)
class SimulationSpec:
    mode: str = "extended"
    duration_superframes: int = 100
    duration_us: int | None = None
    seed: int = 0
    associate: bool = False
    allow_hidden: bool = False
    channels: tuple[int, ...] = (11,)


@dataclass(frozen=True)
class RadioSpec:
    tx_power_dbm: float = 0.0
    sensitivity_dbm: float = -95.0
    path_loss_exponent: float = 2.0
    reference_loss_db: float = 40.0
    bitrate: int = 250_000
    max_frame_bytes: int = 127


@dataclass(frozen=True)
class SuperframeSpec:
    beacon_interval_us: int = 250_000
    slot_count: int = 125
    slot_duration_us: int = 2_000
    cap_slots: int = 8
    cfp_slots: int = 4
    poll_slots: int = 1


@dataclass(frozen=True)
class MacSpec:
    min_be: int = 3
    max_be: int = 5
    max_retries: int = 4
    max_frame_retries: int = 3
    backoff_period_us: int = 320
    cca_us: int = 128
    turnaround_us: int = 192
    ack_wait_us: int = 864
    wake_lead_us: int = 330
    missed_beacon_limit: int = 4


@dataclass(frozen=True)
class EnergySpec:
    doze_ua: float = 40.0
    idle_ua: float = 500.0
    rx_ua: float = 37_000.0
    tx_ua: tuple[tuple[float, float], ...] = ((0.0, 30_000.0), (-8.0, 25_000.0), (-16.0, 22_000.0), (-24.0, 20_000.0))


@dataclass(frozen=True)
class CoordinatorSpec:
    address: int
    x: float = 0.0
    y: float = 0.0
    channel: int = 11
    mode: str | None = None
    policy: str = "linear"
    admission: str = "open"
    reuse: bool = False
    report_power: bool | None = None
    reuse_threshold_dbm: float = -90.0
    link_margin_db: float = 6.0
    min_samples: int = 3
    expiry_superframes: int = 8
    tx_power_dbm: float | None = None
    offset_slot: int | None = None
    kb: tuple[KbLine, ...] = ()
    peer: tuple[PeerLine, ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class NodeSpec:
    address: int
    x: float = 0.0
    y: float = 0.0
    coordinator: int | None = None
    min_rate: float = 0.0
    max_rate: float = 0.0
    max_latency_us: int = 0
    wants_gts: bool = False
    slots_needed: int = 1
    payload_bytes: int = 8
    period_superframes: int = 0
    cap_payload_bytes: int = 8
    cap_period_superframes: int = 0
    downlink_period_superframes: int = 0
    downlink_payload_bytes: int = 8
    gts_need_at_us: int = 0
    accelerate: bool = False
    answer_polls: bool = True
    start_us: int = 0
    wake_events_us: tuple[int, ...] = ()
    tx_power_dbm: float | None = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Scenario:
    simulation: SimulationSpec = SimulationSpec()
    radio: RadioSpec = RadioSpec()
    superframe: SuperframeSpec = SuperframeSpec()
    mac: MacSpec = MacSpec()
    energy: EnergySpec = EnergySpec()
    coordinators: tuple[CoordinatorSpec, ...] = ()
    nodes: tuple[NodeSpec, ...] = ()

    @property
    def duration_us(self) -> int:
        s = self.simulation
        if s.duration_us is not None:
            return s.duration_us
        return s.duration_superframes * self.superframe.beacon_interval_us

    def coordinator_mode(self, c: CoordinatorSpec) -> str:
        return c.mode or self.simulation.mode

    def coordinator(self, address: int) -> CoordinatorSpec:
        for c in self.coordinators:
            if c.address == address:
                return c
        raise KeyError(address)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def radio_params(self) -> RadioParams:
        r = self.radio
        return RadioParams(r.tx_power_dbm, r.sensitivity_dbm, r.path_loss_exponent, r.reference_loss_db)


SINGLE = {
    "simulation": SimulationSpec,
    "radio": RadioSpec,
    "superframe": SuperframeSpec,
    "mac": MacSpec,
    "energy": EnergySpec,
}
REPEATED = {"coordinator": CoordinatorSpec, "node": NodeSpec}
MULTI_KEYS = {"kb": KbLine, "peer": PeerLine}


# -- value conversion ------------------------------------------------------------

def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {s!r}")


def _int(s: str) -> int:
    try:
        return int(s, 0)
    except ValueError:
        f = float(s)
        if not f.is_integer():
            raise ValueError(f"expected an integer, got {s!r}") from None
        return int(f)


def _float(s: str) -> float:
    v = float(s)
    if math.isnan(v):
        raise ValueError("NaN not allowed")
    return v


def _opt(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    def f(s: str):
        return None if s.lower() == "none" else conv(s)
    return f


def _ints(s: str) -> tuple[int, ...]:
    return tuple(_int(p) for p in s.replace(",", " ").split())


def _power_table(s: str) -> tuple[tuple[float, float], ...]:
    out = []
    for p in s.split():
        level, sep, ua = p.partition(":")
        if not sep:
            raise ValueError(f"expected level:current pairs, got {p!r}")
        out.append((_float(level), _float(ua)))
    if not out:
        raise ValueError("empty tx current table")
    return tuple(out)


def _record(cls) -> Callable[[str], Any]:
    convs = [_CONV[f.type] for f in fields(cls)]

    def f(s: str):
        parts = [p.strip() for p in s.split(",")]
        required = sum(1 for fl in fields(cls) if fl.default is dataclasses.MISSING)
        if not required <= len(parts) <= len(convs):
            raise ValueError(f"expected {required}..{len(convs)} comma-separated values, got {len(parts)}")
        return cls(*(c(p) for c, p in zip(convs, parts)))
    return f


_CONV: dict[str, Callable[[str], Any]] = {
    "int": _int,
    "float": _float,
    "bool": _bool,
    "str": str,
    "int | None": _opt(_int),
    "float | None": _opt(_float),
    "bool | None": _opt(_bool),
    "str | None": _opt(str),
    "tuple[int, ...]": _ints,
    "tuple[tuple[float, float], ...]": _power_table,
}
_CONV["tuple[KbLine, ...]"] = _record(KbLine)
_CONV["tuple[PeerLine, ...]"] = _record(PeerLine)


def _fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return " ".join(f"{a!r}:{b!r}" for a, b in v)
        return " ".join(str(x) for x in v)
    return str(v)


def _fmt_record(r) -> str:
    return ", ".join(_fmt_value(getattr(r, f.name)) for f in fields(r))


# -- parsing ---------------------------------------------------------------------

def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; raises :class:`ScenarioError` listing every problem."""
    errors: list[tuple[int, str]] = []
    single: dict[str, dict] = {}
    single_line: dict[str, int] = {}
    blocks: list[tuple[str, int, dict]] = []
    current: dict | None = None
    section = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append((n, f"malformed section header {raw.strip()!r}"))
                current = None
                continue
            section = line[1:-1].strip().lower()
            if section in SINGLE:
                if section in single:
                    errors.append((n, f"section [{section}] repeated (first at line {single_line[section]})"))
                current = single.setdefault(section, {})
                single_line.setdefault(section, n)
            elif section in REPEATED:
                current = {}
                blocks.append((section, n, current))
            else:
                errors.append((n, f"unknown section [{section}]"))
                current = None
            continue
        key, sep, value = line.partition("=")
        if not sep:
            errors.append((n, f"expected key = value, got {line!r}"))
            continue
        if current is None:
            errors.append((n, "key outside of a known section"))
            continue
        key = key.strip().lower()
        value = value.strip()
        cls = SINGLE.get(section) or REPEATED[section]
        flds = {f.name: f for f in fields(cls) if f.name != "line"}
        if key not in flds:
            errors.append((n, f"unknown key {key!r} in [{section}]"))
            continue
        conv = _CONV[flds[key].type]
        if key in MULTI_KEYS:
            try:
                current.setdefault(key, []).append((n, _record(MULTI_KEYS[key])(value)))
            except (ValueError, TypeError) as e:
                errors.append((n, f"{key}: {e}"))
            continue
        if key in current:
            errors.append((n, f"duplicate key {key!r} (first at line {current[key][0]})"))
            continue
        try:
            current[key] = (n, conv(value))
        except (ValueError, TypeError) as e:
            errors.append((n, f"{key}: {e}"))

    def build(cls, raw: dict, line: int):
        kwargs = {}
        for k, v in raw.items():
            if k in MULTI_KEYS:
                kwargs[k] = tuple(x for _, x in v)
            else:
                kwargs[k] = v[1]
        if "line" in {f.name for f in fields(cls)}:
            kwargs["line"] = line
        try:
            return cls(**kwargs)
        except TypeError as e:
            errors.append((line, f"[{cls.__name__}] {e}"))
            return None

    parts = {name: build(cls, single.get(name, {}), single_line.get(name, 0)) for name, cls in SINGLE.items()}
    coords, nodes = [], []
    for name, line, raw in blocks:
        if "address" not in raw:
            errors.append((line, f"[{name}] block without address"))
            continue
        obj = build(REPEATED[name], raw, line)
        if obj is not None:
            (coords if name == "coordinator" else nodes).append(obj)
    if errors:
        raise ScenarioError(errors)
    sc = Scenario(coordinators=tuple(coords), nodes=tuple(nodes), **parts)
    problems = validate_scenario(sc, single_line)
    if problems:
        raise ScenarioError(problems)
    return sc


def validate_scenario(sc: Scenario, section_lines: dict[str, int] | None = None) -> list[tuple[int, str]]:
    lines = section_lines or {}
    errs: list[tuple[int, str]] = []
    sim = sc.simulation
    if sim.mode not in MODES:
        errs.append((lines.get("simulation", 0), f"mode must be one of {', '.join(MODES)}"))
    if sim.duration_superframes < 0 or (sim.duration_us is not None and sim.duration_us < 0):
        errs.append((lines.get("simulation", 0), "duration must be >= 0"))
    if not sim.channels:
        errs.append((lines.get("simulation", 0), "channels must not be empty"))
    sf = sc.superframe
    try:
        from .frames import SuperframeConfig
        SuperframeConfig(sf.beacon_interval_us, sf.slot_count, sf.slot_duration_us, sf.cap_slots, sf.cfp_slots,
                         sf.poll_slots)
    except ValueError as e:
        errs.append((lines.get("superframe", 0), f"superframe: {e}"))
    try:
        sc.radio_params()
    except ValueError as e:
        errs.append((lines.get("radio", 0), f"radio: {e}"))
    if sc.radio.bitrate <= 0:
        errs.append((lines.get("radio", 0), "bitrate must be positive"))
    m = sc.mac
    if not 0 <= m.min_be <= m.max_be:
        errs.append((lines.get("mac", 0), "need 0 <= min_be <= max_be"))
    seen: dict[int, int] = {}
    positions: list[tuple[int, int, float, float]] = []
    for dev in (*sc.coordinators, *sc.nodes):
        if dev.address in seen:
            errs.append((dev.line, f"duplicate address {dev.address} (also defined at line {seen[dev.address]})"))
        else:
            seen[dev.address] = dev.line
        if not (0 <= dev.address < 0xFFFF):
            errs.append((dev.line, f"address {dev.address} out of range (0xFFFF is broadcast)"))
        if not (math.isfinite(dev.x) and math.isfinite(dev.y)):
            errs.append((dev.line, "non-finite position"))
        else:
            for a, ln, x, y in positions:
                if (x, y) == (dev.x, dev.y):
                    errs.append((dev.line, f"device {dev.address} shares its position with {a} (line {ln})"))
            positions.append((dev.address, dev.line, dev.x, dev.y))
    caddrs = {c.address for c in sc.coordinators}
    for c in sc.coordinators:
        if c.mode is not None and c.mode not in ("baseline", "extended"):
            errs.append((c.line, "coordinator mode must be baseline or extended"))
        if sim.mode == "mixed" and c.mode is None:
            errs.append((c.line, "mixed mode needs an explicit mode per coordinator"))
        if c.policy not in POLICIES:
            errs.append((c.line, f"policy must be one of {', '.join(POLICIES)}"))
        if c.admission not in ADMISSIONS:
            errs.append((c.line, f"admission must be one of {', '.join(ADMISSIONS)}"))
        if c.offset_slot is not None and not 0 <= c.offset_slot < sf.slot_count:
            errs.append((c.line, "offset_slot outside the cycle"))
        kb_seen = set()
        for k in c.kb:
            if k.address in kb_seen:
                errs.append((c.line, f"knowledge base lists {k.address} twice"))
            kb_seen.add(k.address)
            if k.address in caddrs:
                errs.append((c.line, f"knowledge base entry {k.address} is a coordinator"))
            if k.min_rate > k.max_rate or k.slots_needed < 1:
                errs.append((c.line, f"knowledge base entry {k.address}: need min_rate <= max_rate, slots >= 1"))
        for p in c.peer:
            if p.target not in caddrs or p.target == c.address:
                errs.append((c.line, f"peer target {p.target} is not another declared coordinator"))
    for nd in sc.nodes:
        if nd.coordinator is not None and nd.coordinator not in caddrs:
            errs.append((nd.line, f"node {nd.address} references undeclared coordinator {nd.coordinator}"))
        if nd.min_rate > nd.max_rate:
            errs.append((nd.line, "min_rate must not exceed max_rate"))
        if nd.wants_gts and nd.slots_needed < 1:
            errs.append((nd.line, "slots_needed must be >= 1"))
        if nd.downlink_period_superframes and nd.coordinator is None:
            errs.append((nd.line, "downlink traffic needs a coordinator affinity"))
    return errs


def emit_scenario(sc: Scenario) -> str:
    out: list[str] = []
    for name in SINGLE:
        obj = getattr(sc, name)
        out.append(f"[{name}]")
        for f in fields(obj):
            out.append(f"{f.name} = {_fmt_value(getattr(obj, f.name))}")
        out.append("")
    for name, items in (("coordinator", sc.coordinators), ("node", sc.nodes)):
        for obj in items:
            out.append(f"[{name}]")
            for f in fields(obj):
                if f.name == "line":
                    continue
                v = getattr(obj, f.name)
                if f.name in MULTI_KEYS:
                    out.extend(f"{f.name} = {_fmt_record(r)}" for r in v)
                else:
                    out.append(f"{f.name} = {_fmt_value(v)}")
            out.append("")
    return "\n".join(out)


# -- geometry --------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryViolation:
    a: int
    b: int
    distance_m: float
    rx_dbm: float

    def __str__(self) -> str:
        return (f"coordinators {self.a} and {self.b} are hidden from each other: "
                f"{self.distance_m:.1f} m, {self.rx_dbm:.2f} dBm at max power")


def validate_geometry(sc: Scenario) -> list[GeometryViolation]:
    """Coordinator pairs that cannot hear each other at their max power.

    Only relevant when some coordinator runs the extended method.
    """
    if not any(sc.coordinator_mode(c) == "extended" for c in sc.coordinators):
        return []
    params = sc.radio_params()
    out = []
    cs = sorted(sc.coordinators, key=lambda c: c.address)
    for i, a in enumerate(cs):
        for b in cs[i + 1:]:
            d = Position(a.x, a.y).distance(Position(b.x, b.y))
            for src, dst in ((a, b), (b, a)):
                p = src.tx_power_dbm if src.tx_power_dbm is not None else params.tx_power_dbm
                rx = p - path_loss(d, params)
                if not audible(rx, params):
                    out.append(GeometryViolation(src.address, dst.address, d, rx))
                    break
    return out
