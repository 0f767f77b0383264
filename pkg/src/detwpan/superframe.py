"""Absolute timing of one star's superframes on the shared µs clock."""

from __future__ import annotations

from dataclasses import dataclass

from .frames import Address, SuperframeConfig

BEACON = "beacon"
POLL = "poll"
CAP = "CAP"
CFP = "CFP"
INACTIVE = "inactive"

PROTECTED_PERIODS = (BEACON, POLL, CFP)


@dataclass(frozen=True, slots=True)
class StarSchedule:
    """Superframe ``m`` of a star starts with its beacon at ``offset + m*T``.

    Layout relative to the beacon start ``b``::

        [b - poll_slots*sd, b)              poll window
        [b, b + sd)                         beacon slot
        [b + sd, b + (1+cap)*sd)            CAP
        [b + (1+cap)*sd, ... + cfp*sd)      CFP
    """

    coordinator: Address
    offset: int
    config: SuperframeConfig

    @property
    def interval(self) -> int:
        return self.config.beacon_interval

    @property
    def sd(self) -> int:
        return self.config.slot_duration

    def beacon_start(self, m: int) -> int:
        return self.offset + m * self.config.beacon_interval

    def poll_slot_start(self, m: int, j: int) -> int:
        return self.beacon_start(m) - (self.config.poll_slots - j) * self.config.slot_duration

    def poll_window_start(self, m: int) -> int:
        return self.poll_slot_start(m, 0)

    def cap_start(self, m: int) -> int:
        return self.beacon_start(m) + self.config.slot_duration

    def cap_end(self, m: int) -> int:
        return self.beacon_start(m) + (1 + self.config.cap_slots) * self.config.slot_duration

    def cfp_slot_start(self, m: int, slot: int) -> int:
        return self.cap_end(m) + slot * self.config.slot_duration

    def cfp_end(self, m: int) -> int:
        return self.cfp_slot_start(m, self.config.cfp_slots)

    def index_at(self, t: int) -> int:
        """Index of the last superframe whose beacon started at or before ``t``."""
        return (t - self.offset) // self.config.beacon_interval

    def next_beacon_at_or_after(self, t: int) -> int:
        m = self.index_at(t)
        if self.beacon_start(m) < t:
            m += 1
        return m

    def period_at(self, t: int) -> str:
        sd = self.config.slot_duration
        m = self.index_at(t)
        rel = t - self.beacon_start(m)
        c = self.config
        if rel < sd:
            return BEACON
        if rel < (1 + c.cap_slots) * sd:
            return CAP
        if rel < (1 + c.cap_slots + c.cfp_slots) * sd:
            return CFP
        if rel >= c.beacon_interval - c.poll_slots * sd:
            return POLL
        return INACTIVE

    def footprint(self, polling: bool = True) -> tuple[int, int]:
        """``(start, length)`` of the occupied span within a cycle (may wrap)."""
        c = self.config
        before = c.poll_slots * c.slot_duration if polling else 0
        length = before + (1 + c.cap_slots + c.cfp_slots) * c.slot_duration
        return (self.offset - before) % c.beacon_interval, length


def spans_overlap(a: tuple[int, int], b: tuple[int, int], cycle: int) -> bool:
    """Overlap test for two cyclic half-open spans given as ``(start, length)``."""
    (sa, la), (sb, lb) = a, b
    if la <= 0 or lb <= 0:
        return False
    d = (sb - sa) % cycle
    return d < la or (cycle - d) < lb
