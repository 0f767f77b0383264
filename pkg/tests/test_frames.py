import pytest
from hypothesis import given, strategies as st

from detwpan.frames import (
    BeaconOverflow,
    Direction,
    Frame,
    FrameKind,
    GtsDescriptor,
    PeerGtsRequest,
    SuperframeConfig,
    ack_frame,
    airtime,
    beacon_frame,
    command_frame,
    encode_beacon,
    header_bytes,
)

import oracles

SF = SuperframeConfig(250_000, 125, 2000, 8, 4, 1)


def test_header_sizes_match_layout():
    assert header_bytes(FrameKind.DATA) == oracles.DATA_HEADER == 9
    assert header_bytes(FrameKind.ACK) == oracles.ACK_BYTES == 5
    assert header_bytes(FrameKind.BEACON) == oracles.BEACON_HEADER
    assert Frame(FrameKind.DATA, 1, 2).total_bytes == 9
    assert ack_frame(1, 2).total_bytes == 5


def test_airtime_by_hand():
    assert airtime(16) == oracles.airtime_us(16) == 512
    assert airtime(Frame(FrameKind.DATA, 1, 2)) == oracles.airtime_us(9) == 288


@given(st.integers(1, 127))
def test_airtime_halves_at_double_rate(n):
    slow = airtime(n, 125_000)
    assert slow == oracles.airtime_us(n, 125_000)
    assert airtime(n, 250_000) * 2 == slow


def test_empty_beacon_body_is_descriptor_only():
    b = encode_beacon(SF)
    assert b.body_bytes == oracles.SUPERFRAME_DESCRIPTOR
    assert beacon_frame(1, b).total_bytes == oracles.BEACON_HEADER + oracles.SUPERFRAME_DESCRIPTOR


def test_beacon_body_additivity():
    one = encode_beacon(SF, [GtsDescriptor(5, Direction.TO_COORDINATOR, 0, 1)])
    assert one.body_bytes == oracles.SUPERFRAME_DESCRIPTOR + oracles.GTS_DESCRIPTOR
    sf = SuperframeConfig(250_000, 125, 2000, 4, 7, 0)
    gts = [GtsDescriptor(10 + i, Direction.TO_COORDINATOR, i, 1) for i in range(7)]
    b = encode_beacon(sf, gts, [20, 21, 22])
    assert b.body_bytes == oracles.SUPERFRAME_DESCRIPTOR + 7 * oracles.GTS_DESCRIPTOR + 3 * oracles.PENDING_ADDRESS


def test_beacon_overflow():
    sf = SuperframeConfig(250_000, 125, 2000, 4, 7, 0)
    with pytest.raises(BeaconOverflow):
        encode_beacon(sf, pending_addresses=list(range(100)))


def test_piggyback_and_reuse_bytes():
    base = encode_beacon(SF).body_bytes
    with_req = encode_beacon(SF, piggyback_requests=[PeerGtsRequest(1, 2, 1)])
    assert with_req.body_bytes == base + 5
    reuse = GtsDescriptor(5, Direction.TO_COORDINATOR, 0, 1, min_tx_power=-24.0, reuse_flag=True,
                          host=2, host_offset=40)
    assert encode_beacon(SF, [reuse]).body_bytes == base + 3 + 3


def test_gts_descriptor_validation():
    with pytest.raises(ValueError):
        GtsDescriptor(5, Direction.TO_COORDINATOR, 0, 1, reuse_flag=True)          # reuse needs a power
    with pytest.raises(ValueError):
        GtsDescriptor(5, Direction.TO_COORDINATOR, 0, 1, host=3, host_offset=1)    # foreign needs reuse
    with pytest.raises(ValueError):
        GtsDescriptor(5, Direction.TO_COORDINATOR, 0, 0)


def test_beacon_rejects_double_allocation():
    a = GtsDescriptor(5, Direction.TO_COORDINATOR, 0, 2)
    b = GtsDescriptor(6, Direction.TO_COORDINATOR, 1, 1)
    with pytest.raises(ValueError):
        encode_beacon(SF, [a, b])


def test_command_payloads():
    assert command_frame(FrameKind.POLL, 1, 2).total_bytes == 10
    assert command_frame(FrameKind.POLL_RESPONSE, 2, 1).total_bytes == 12


def test_superframe_config_rejects_overfull():
    with pytest.raises(ValueError):
        SuperframeConfig(250_000, 10, 2000, 8, 4, 1)
    with pytest.raises(ValueError):
        SuperframeConfig(100_000, 125, 2000, 8, 4, 1)
