"""Frame types and byte/airtime accounting.

Frame layout table (normative for all byte accounting in this package):

=================  =====  ==========================================
field              bytes  present in
=================  =====  ==========================================
frame control      2      every frame
sequence number    1      every frame
destination addr   2      every frame except Ack
source addr        2      every frame except Ack
FCS                2      every frame
=================  =====  ==========================================

Header sizes therefore are 9 bytes for every kind except ``Ack`` (5 bytes).
MAC command payloads (counted in ``payload_bytes``):

* Poll: 1 (command id)
* PollResponse: 3 (command id, flags, slots needed)
* GtsRequest: 2 (command id, GTS characteristics)
* AssocRequest: 2 (command id, capability)
* AssocResponse: 4 (command id, short address, status)

Beacon body:

* superframe descriptor: 3
* per GTS descriptor: 3
* per reuse-flagged GTS descriptor, extra: 3 (minimum power, host, host offset)
* per pending address: 2
* per piggyback entry (peer request or peer grant): 5
* per neighbor report entry (address + received power): 3

No bit-level serialization exists; only sizes and contents are modelled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NewType

Address = NewType("Address", int)

BROADCAST = Address(0xFFFF)

DEFAULT_BITRATE = 250_000
MAX_FRAME_BYTES = 127

CONTROL_BYTES = 2
SEQUENCE_BYTES = 1
ADDRESS_BYTES = 2
FCS_BYTES = 2

SUPERFRAME_DESCRIPTOR_BYTES = 3
GTS_DESCRIPTOR_BYTES = 3
PENDING_ADDRESS_BYTES = 2
PIGGYBACK_ENTRY_BYTES = 5
NEIGHBOR_REPORT_ENTRY_BYTES = 3
REUSE_EXTENSION_BYTES = 3


class FrameKind(enum.Enum):
    BEACON = "Beacon"
    DATA = "Data"
    ACK = "Ack"
    GTS_REQUEST = "GtsRequest"
    POLL = "Poll"
    POLL_RESPONSE = "PollResponse"
    ASSOC_REQUEST = "AssocRequest"
    ASSOC_RESPONSE = "AssocResponse"

    def __str__(self) -> str:
        return self.value


COMMAND_PAYLOAD_BYTES = {
    FrameKind.POLL: 1,
    FrameKind.POLL_RESPONSE: 3,
    FrameKind.GTS_REQUEST: 2,
    FrameKind.ASSOC_REQUEST: 2,
    FrameKind.ASSOC_RESPONSE: 4,
}


class Direction(enum.Enum):
    TO_COORDINATOR = "up"
    FROM_COORDINATOR = "down"

    def __str__(self) -> str:
        return self.value


class BeaconOverflow(ValueError):
    """Beacon body does not fit in the configured maximum frame size."""


def header_bytes(kind: FrameKind) -> int:
    if kind is FrameKind.ACK:
        return CONTROL_BYTES + SEQUENCE_BYTES + FCS_BYTES
    return CONTROL_BYTES + SEQUENCE_BYTES + 2 * ADDRESS_BYTES + FCS_BYTES


@dataclass(frozen=True, slots=True)
class SuperframeConfig:
    """Temporal skeleton of one beacon interval. Durations are in µs ticks.

    Slot 0 holds the beacon, followed by ``cap_slots`` then ``cfp_slots``.
    The ``poll_slots`` precede the beacon slot (they end where it starts).
    """

    beacon_interval: int
    slot_count: int
    slot_duration: int
    cap_slots: int
    cfp_slots: int
    poll_slots: int = 0

    def __post_init__(self) -> None:
        if self.slot_count <= 0 or self.slot_duration <= 0:
            raise ValueError("slot_count and slot_duration must be positive")
        if min(self.cap_slots, self.cfp_slots, self.poll_slots) < 0:
            raise ValueError("slot counts must be non-negative")
        if 1 + self.poll_slots + self.cap_slots + self.cfp_slots > self.slot_count:
            raise ValueError("beacon + poll + CAP + CFP slots exceed slot_count")
        if self.slot_count * self.slot_duration > self.beacon_interval:
            raise ValueError("slot_count x slot_duration exceeds beacon_interval")

    @property
    def active_slots(self) -> int:
        return 1 + self.poll_slots + self.cap_slots + self.cfp_slots

    @property
    def inactive_duration(self) -> int:
        return self.beacon_interval - self.active_slots * self.slot_duration


@dataclass(frozen=True, slots=True)
class GtsDescriptor:
    """One guaranteed slot allocation.

    ``start_slot`` indexes the CFP of ``host`` (``None`` means the announcing
    coordinator itself). A descriptor hosted in a foreign CFP only exists as a
    power-reuse grant; ``host_offset`` then gives the host's beacon offset
    relative to the announcing coordinator's, in slots.
    """

    owner: Address
    direction: Direction
    start_slot: int
    length_slots: int
    min_tx_power: float | None = None
    reuse_flag: bool = False
    host: Address | None = None
    host_offset: int | None = None

    def __post_init__(self) -> None:
        if (self.host is None) != (self.host_offset is None):
            raise ValueError("host and host_offset go together")
        if self.host is not None and not self.reuse_flag:
            raise ValueError("a foreign-hosted GTS must be a reuse grant")
        if self.length_slots <= 0:
            raise ValueError("length_slots must be positive")
        if self.start_slot < 0:
            raise ValueError("start_slot must be non-negative")
        if (self.min_tx_power is not None) != self.reuse_flag:
            raise ValueError("min_tx_power must be present iff reuse_flag is set")

    @property
    def slots(self) -> range:
        return range(self.start_slot, self.start_slot + self.length_slots)

    def fits(self, cfp_slots: int) -> bool:
        return self.start_slot + self.length_slots <= cfp_slots


@dataclass(frozen=True, slots=True)
class PeerGtsRequest:
    requester: Address
    target: Address
    slots_needed: int
    direction: Direction = Direction.TO_COORDINATOR

    def __post_init__(self) -> None:
        if self.requester == self.target:
            raise ValueError("peer request to self")
        if self.slots_needed <= 0:
            raise ValueError("slots_needed must be positive")


@dataclass(frozen=True, slots=True)
class PeerGrant:
    requester: Address
    descriptor: GtsDescriptor


@dataclass(frozen=True, slots=True)
class Beacon:
    superframe: SuperframeConfig
    gts_list: tuple[GtsDescriptor, ...] = ()
    pending_addresses: tuple[Address, ...] = ()
    piggyback_requests: tuple[PeerGtsRequest, ...] = ()
    piggyback_grants: tuple[PeerGrant, ...] = ()
    neighbor_report: tuple[tuple[Address, float], ...] | None = None

    def __post_init__(self) -> None:
        if len(set(self.pending_addresses)) != len(self.pending_addresses):
            raise ValueError("duplicate pending address")
        _check_gts_disjoint(self.gts_list)

    @property
    def body_bytes(self) -> int:
        return beacon_body_bytes(
            len(self.gts_list),
            len(self.pending_addresses),
            len(self.piggyback_requests) + len(self.piggyback_grants),
            len(self.neighbor_report or ()),
            sum(1 for d in self.gts_list if d.reuse_flag),
        )


def _check_gts_disjoint(gts: tuple[GtsDescriptor, ...]) -> None:
    taken: dict[tuple[Address | None, int], GtsDescriptor] = {}
    for d in gts:
        for s in d.slots:
            other = taken.get((d.host, s))
            if other is not None and not (other.reuse_flag and d.reuse_flag):
                raise ValueError(f"GTS slot {s} allocated twice without reuse")
            taken[(d.host, s)] = d


def beacon_body_bytes(n_gts: int, n_pending: int, n_piggyback: int, n_report: int = 0, n_reuse: int = 0) -> int:
    return (
        SUPERFRAME_DESCRIPTOR_BYTES
        + GTS_DESCRIPTOR_BYTES * n_gts
        + PENDING_ADDRESS_BYTES * n_pending
        + PIGGYBACK_ENTRY_BYTES * n_piggyback
        + NEIGHBOR_REPORT_ENTRY_BYTES * n_report
        + REUSE_EXTENSION_BYTES * n_reuse
    )


@dataclass(frozen=True, slots=True)
class Frame:
    kind: FrameKind
    source: Address
    destination: Address
    payload_bytes: int = 0
    beacon: Beacon | None = None
    # kind-specific extras (PollResponse flags, assoc status, data request marker, ...)
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.payload_bytes < 0:
            raise ValueError("payload_bytes must be >= 0")
        if self.kind is FrameKind.BEACON:
            if self.destination != BROADCAST:
                raise ValueError("beacon destination must be broadcast")
            if self.beacon is None:
                raise ValueError("beacon frame without body")

    @property
    def total_bytes(self) -> int:
        return header_bytes(self.kind) + self.payload_bytes


def airtime(frame: Frame | int, phy_bitrate: int = DEFAULT_BITRATE) -> int:
    """Airtime in µs ticks, rounded up. Accepts a frame or a byte count."""
    if phy_bitrate <= 0:
        raise ValueError("phy_bitrate must be positive")
    n = frame if isinstance(frame, int) else frame.total_bytes
    return -(-n * 8 * 1_000_000 // phy_bitrate)


def encode_beacon(
    superframe: SuperframeConfig,
    gts_list=(),
    pending_addresses=(),
    piggyback_requests=(),
    piggyback_grants=(),
    neighbor_report=None,
    max_frame_bytes: int = MAX_FRAME_BYTES,
) -> Beacon:
    """Build a beacon body from a coordinator snapshot.

    Raises :class:`BeaconOverflow` when header + body exceed ``max_frame_bytes``.
    """
    beacon = Beacon(
        superframe,
        tuple(gts_list),
        tuple(pending_addresses),
        tuple(piggyback_requests),
        tuple(piggyback_grants),
        None if neighbor_report is None else tuple(neighbor_report),
    )
    total = header_bytes(FrameKind.BEACON) + beacon.body_bytes
    if total > max_frame_bytes:
        raise BeaconOverflow(f"beacon needs {total} bytes > {max_frame_bytes}")
    return beacon


def beacon_frame(source: Address, beacon: Beacon) -> Frame:
    return Frame(FrameKind.BEACON, source, BROADCAST, beacon.body_bytes, beacon)


def command_frame(kind: FrameKind, source: Address, destination: Address, **info) -> Frame:
    return Frame(kind, source, destination, COMMAND_PAYLOAD_BYTES[kind], info=info)


def ack_frame(source: Address, destination: Address) -> Frame:
    return Frame(FrameKind.ACK, source, destination, 0)
