"""Pure coordinator logic: beacon plan, poll targets, GTS table, reuse decision."""

import math

import pytest
from hypothesis import given, strategies as st

from detwpan.frames import Direction, GtsDescriptor
from detwpan.mac_coordinator import (
    CAPACITY,
    UNKNOWN_REQUESTER,
    Denial,
    ForeignSlot,
    GtsTable,
    KnowledgeEntry,
    PowerObservation,
    ReuseParams,
    SaturationError,
    allocate_gts,
    evaluate_reuse,
    min_power_for,
    next_poll_targets,
    plan_beacon_slots,
)
from detwpan.superframe import spans_overlap

import oracles

T, SD = 250_000, 2000


def test_three_stars_get_thirds():
    plan = plan_beacon_slots([7, 3, 5], T, SD)
    assert plan.coordinators == (3, 5, 7)
    assert list(plan.offsets) == oracles.even_offsets(3, T, SD)
    for got, exact in zip(plan.offsets, (0, T / 3, 2 * T / 3)):
        assert 0 <= exact - got < SD


def test_k1_and_k4():
    assert plan_beacon_slots([1], T, SD).offsets == (0,)
    assert list(plan_beacon_slots([1, 2, 3, 4], T, SD).offsets) == [0, T // 4 // SD * SD, T // 2 // SD * SD, 3 * T // 4 // SD * SD]


@given(st.integers(1, T // SD))
def test_spacing_invariant_up_to_saturation(k):
    plan = plan_beacon_slots(range(k), T, SD)
    offs = plan.offsets
    assert list(offs) == oracles.even_offsets(k, T, SD)
    gaps = [((offs[(i + 1) % k] - offs[i]) % T) or T for i in range(k)]
    assert all(abs(g - T / k) <= SD for g in gaps)
    spans = plan.silence_slots
    for i in range(k):
        for j in range(i + 1, k):
            assert not spans_overlap(spans[i], spans[j], T)


def test_saturation_exactly_past_bound():
    kmax = T // SD
    plan_beacon_slots(range(kmax), T, SD)
    with pytest.raises(SaturationError):
        plan_beacon_slots(range(kmax + 1), T, SD)
    # a cycle that is not a multiple of the slot
    plan_beacon_slots(range(3), 6001, 2000)
    with pytest.raises(SaturationError):
        plan_beacon_slots(range(4), 7999, 2000)


def _kb(*addrs, prio=None):
    return [KnowledgeEntry(a, priority=(prio[i] if prio else 0)) for i, a in enumerate(addrs)]


def test_linear_round_robin():
    base = _kb(1, 2, 3)
    cur = 0
    seq = []
    for _ in range(4):
        t, cur = next_poll_targets(base, "linear", 1, cur)
        seq += t
    assert seq == [1, 2, 3, 1]


def test_priority_first():
    base = _kb(1, 2, prio=[2, 1])
    assert next_poll_targets(base, "priority", 1)[0] == [2]


def test_priority_never_polled_first_then_oldest():
    base = _kb(1, 2, 3)
    base[0].last_polled = 5
    base[1].last_polled = 3
    assert next_poll_targets(base, "priority", 2)[0] == [3, 2]


@given(st.integers(1, 12), st.integers(1, 4))
def test_linear_gap_bound(n, b):
    base = _kb(*range(n))
    cur = 0
    last = {}
    worst = 0
    for m in range(60):
        t, cur = next_poll_targets(base, "linear", b, cur)
        for a in t:
            if a in last:
                worst = max(worst, m - last[a])
            last[a] = m
    assert worst == oracles.max_poll_gap(n, b)
    assert worst <= math.ceil(n / b)


def test_five_nodes_budget_two_gap_three():
    assert oracles.max_poll_gap(5, 2) == 3


def test_first_fit_and_capacity():
    t = GtsTable(4)
    d = allocate_gts(t, 10, 1, True)
    assert isinstance(d, GtsDescriptor) and d.start_slot == 0
    for a in range(10, 14):
        t.add(allocate_gts(t, a, 1, True))
    assert allocate_gts(t, 20, 1, True) == Denial(CAPACITY)
    assert allocate_gts(GtsTable(4), 20, 1, False) == Denial(UNKNOWN_REQUESTER)


@given(st.lists(st.tuples(st.integers(1, 3), st.booleans()), max_size=20))
def test_table_never_double_books(ops):
    t = GtsTable(7)
    owner = 100
    for length, drop in ops:
        owner += 1
        r = allocate_gts(t, owner, length, True)
        if isinstance(r, GtsDescriptor):
            t.add(r)
        if drop and len(t):
            t.remove(t.entries[0])
        t.check()
        slots = [s for d in t for s in d.slots]
        assert len(slots) == len(set(slots))
        assert all(0 <= s < 7 for s in slots)


def _obs(p, n):
    o = PowerObservation(0, 0)
    for _ in range(n):
        o.add(p)
    return o


CAND = [ForeignSlot(host=2, host_offset=40, owner=21, start_slot=0, length_slots=1)]
RP = ReuseParams()


def test_reuse_allowed_when_both_directions_quiet():
    d = evaluate_reuse(11, 1, CAND, {21: _obs(-100, 3)}, {2: {11: _obs(-100, 3)}}, 40.0, RP)
    assert d.allowed
    g = d.descriptor
    assert g.reuse_flag and g.host == 2 and g.min_tx_power == -24.0 and g.start_slot == 0


def test_reuse_denied_when_loud():
    d = evaluate_reuse(11, 1, CAND, {21: _obs(-60, 3)}, {2: {11: _obs(-100, 3)}}, 40.0, RP)
    assert not d.allowed and d.reason == "too-loud"


def test_reuse_denied_without_observations():
    d = evaluate_reuse(11, 1, CAND, {}, {}, 40.0, RP)
    assert not d.allowed
    d = evaluate_reuse(11, 1, CAND, {21: _obs(-100, 2)}, {2: {11: _obs(-100, 2)}}, 40.0, RP)
    assert not d.allowed


def test_min_power_for_link_budget():
    # 1 m, 40 dB: -24 dBm reaches -64, margin 6 over -95 -> lowest level suffices
    assert min_power_for(40.0, RP) == -24.0
    # 80 dB: need p - 80 >= -89 -> p >= -9 -> -8
    assert min_power_for(80.0, RP) == -8.0
    assert min_power_for(120.0, RP) is None


def test_observation_mean_in_milliwatts():
    o = PowerObservation(1, 2)
    o.add(-60.0)
    o.add(-math.inf)
    assert o.rx_power_dbm == pytest.approx(-60 - 10 * math.log10(2))
