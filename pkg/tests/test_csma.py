from hypothesis import given, strategies as st

from detwpan.csma import ABORT, SENSE, TRANSMIT, WAIT, BackoffState, CsmaParams, csma_step, next_boundary
from detwpan.energy import DOZE, IDLE, RX, TX, EnergyAccumulator, EnergyParams

import oracles

P = CsmaParams()
CAP0, CAP1 = 2000, 18000


def test_be3_draws_from_0_to_7():
    bounds = []
    st_ = BackoffState.fresh(P)
    csma_step(st_, P, CAP0, CAP0, CAP1, 1000, None, lambda b: bounds.append(b) or 0)
    assert bounds == [2 ** 3 - 1]


def test_idle_twice_transmits_on_boundary():
    s = BackoffState.fresh(P)
    a = csma_step(s, P, CAP0, CAP0, CAP1, 1000, None, lambda b: 2)
    assert a.kind == SENSE and a.at == CAP0 + 2 * 320 + P.cca
    a = csma_step(s, P, a.at, CAP0, CAP1, 1000, False, lambda b: 0)
    assert a.kind == SENSE and a.at == CAP0 + 3 * 320 + P.cca
    a = csma_step(s, P, a.at, CAP0, CAP1, 1000, False, lambda b: 0)
    assert a.kind == TRANSMIT and a.at == CAP0 + 4 * 320


def test_forced_busy_aborts_after_max_retries_plus_one():
    s = BackoffState.fresh(P)
    a = csma_step(s, P, CAP0, CAP0, CAP1, 500, None, lambda b: 0)
    busy = 0
    while a.kind == SENSE:
        a = csma_step(s, P, a.at, CAP0, CAP1, 500, True, lambda b: 0)
        busy += 1
    assert a.kind == ABORT
    assert busy == P.max_retries + 1


def test_wait_when_exchange_cannot_finish_in_cap():
    s = BackoffState.fresh(P)
    a = csma_step(s, P, CAP1 - 1000, CAP0, CAP1, 2000, None, lambda b: 0)
    assert a.kind == WAIT


@given(st.integers(0, 10**6), st.lists(st.booleans(), max_size=12), st.integers(0, 2**31))
def test_backoff_bounds(now, senses, seed):
    import random
    rng = random.Random(seed)
    draws = []

    def draw(b):
        draws.append(b)
        return rng.randint(0, b)

    cap0 = 0
    cap1 = 10**9
    s = BackoffState.fresh(P)
    a = csma_step(s, P, now, cap0, cap1, 1000, None, draw)
    for busy in senses:
        if a.kind != SENSE:
            break
        assert (a.at - P.cca - cap0) % P.backoff_period == 0
        a = csma_step(s, P, a.at, cap0, cap1, 1000, busy, draw)
        assert P.min_be <= s.be <= P.max_be
    assert all(b in (7, 15, 31) for b in draws)
    if a.kind == TRANSMIT:
        assert a.at % P.backoff_period == 0


def test_next_boundary():
    assert next_boundary(2000, 2000, 320) == 2000
    assert next_boundary(2001, 2000, 320) == 2320
    assert next_boundary(100, 2000, 320) == 2000


def test_energy_doze_fraction_example():
    # 1 s interval, 20 ms active, 330 µs wake lead
    acc = EnergyAccumulator()
    acc.switch(0, DOZE)
    acc.switch(1_000_000 - 20_000 - 330, IDLE)
    acc.switch(1_000_000 - 20_000, RX)
    acc.finalize(1_000_000)
    assert acc.fraction(DOZE) == oracles.doze_fraction(1_000_000, 20_000, 330)
    assert acc.fraction(DOZE) > 0.9


def test_energy_zero_length_doze():
    acc = EnergyAccumulator(state=IDLE)
    acc.switch(10, DOZE)
    acc.switch(10, RX)
    acc.finalize(20)
    assert acc.durations[DOZE] == 0 and acc.lifetime == 20


def test_energy_charge():
    acc = EnergyAccumulator()
    acc.switch(1_000_000, TX, -24.0)
    acc.finalize(1_001_000)
    q = acc.charge_uas(EnergyParams())
    assert q == (1_000_000 * 40 + 1000 * 20_000) / 1e6


@given(st.lists(st.tuples(st.integers(0, 1000), st.sampled_from([DOZE, RX, TX, IDLE])), max_size=30))
def test_energy_conservation(steps):
    acc = EnergyAccumulator()
    t = 0
    for dt, s in steps:
        t += dt
        acc.switch(t, s)
    acc.finalize(t + 1)
    assert acc.lifetime == t + 1
