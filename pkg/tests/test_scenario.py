import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from detwpan.scenario import (
    CoordinatorSpec,
    KbLine,
    NodeSpec,
    Scenario,
    ScenarioError,
    SimulationSpec,
    emit_scenario,
    parse_scenario,
    validate_geometry,
)

import oracles

MINIMAL = """\
[simulation]
mode = extended

[coordinator]
address = 1

[node]
address = 10
x = 1
coordinator = 1
"""


def test_minimal_file():
    sc = parse_scenario(MINIMAL)
    assert [c.address for c in sc.coordinators] == [1]
    assert sc.nodes[0].coordinator == 1 and sc.nodes[0].x == 1.0


def test_duplicate_address_names_both_lines():
    text = MINIMAL + "\n[node]\naddress = 10\nx = 2\n"
    with pytest.raises(ScenarioError) as e:
        parse_scenario(text)
    (line, msg), = e.value.errors
    assert line == 12 and "line 7" in msg and "duplicate address 10" in msg


def test_undeclared_coordinator():
    with pytest.raises(ScenarioError, match="undeclared coordinator 7"):
        parse_scenario(MINIMAL.replace("coordinator = 1", "coordinator = 7"))


def test_every_error_reported_with_location():
    text = "[simulation]\nmode = extended\nbogus = 1\n[coordinator]\naddress = one\n[node]\naddress = 5\nx = 1\ny\n"
    with pytest.raises(ScenarioError) as e:
        parse_scenario(text)
    lines = [ln for ln, _ in e.value.errors]
    assert {3, 5, 9} <= set(lines) and lines == sorted(lines)
    assert "unknown key 'bogus'" in e.value.errors[0][1]


def test_multi_key_records():
    sc = parse_scenario(MINIMAL.replace("address = 1\n", "address = 1\nkb = 10, 2, 0, 0, 0, true, 1\n", 1))
    assert sc.coordinators[0].kb == (KbLine(10, 2, 0.0, 0.0, 0, True, 1),)


names = st.integers(1, 500)
finite = st.floats(-500, 500, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 3))


@st.composite
def scenarios(draw):
    n_c = draw(st.integers(1, 3))
    addrs = draw(st.lists(names, min_size=n_c + 3, max_size=n_c + 3, unique=True))
    coords = []
    pts = draw(st.lists(st.tuples(finite, finite), min_size=len(addrs), max_size=len(addrs), unique=True))
    for i in range(n_c):
        kb = tuple(KbLine(a, draw(st.integers(0, 3))) for a in addrs[n_c:n_c + draw(st.integers(0, 3))])
        coords.append(CoordinatorSpec(addrs[i], *pts[i], policy=draw(st.sampled_from(["linear", "priority"])),
                                      reuse=draw(st.booleans()), kb=kb))
    nodes = tuple(
        NodeSpec(a, *pts[n_c + j], coordinator=draw(st.sampled_from([None] + addrs[:n_c])),
                 wants_gts=draw(st.booleans()), wake_events_us=tuple(draw(st.lists(st.integers(0, 10**6), max_size=2))))
        for j, a in enumerate(addrs[n_c:])
    )
    sim = SimulationSpec(mode=draw(st.sampled_from(["baseline", "extended"])), seed=draw(st.integers(0, 99)))
    return Scenario(simulation=sim, coordinators=tuple(coords), nodes=nodes)


@settings(max_examples=60, deadline=None)
@given(scenarios())
def test_emit_parse_round_trip(sc):
    again = parse_scenario(emit_scenario(sc))
    assert again == sc
    assert emit_scenario(again) == emit_scenario(sc)


def _pair(distance):
    return Scenario(coordinators=(CoordinatorSpec(1), CoordinatorSpec(2, x=distance)))


def test_geometry_ok_at_10m():
    assert oracles.rx_dbm(0, 10) >= -95
    assert validate_geometry(_pair(10)) == []


def test_geometry_violation_at_1000m():
    assert oracles.rx_dbm(0, 1000) < -95
    (v,) = validate_geometry(_pair(1000))
    assert (v.a, v.b) == (1, 2) and v.rx_dbm == pytest.approx(-100)


def test_single_coordinator_trivially_ok():
    assert validate_geometry(Scenario(coordinators=(CoordinatorSpec(1),))) == []


def test_hidden_coordinator_blocks_build_unless_allowed():
    from detwpan.sim import build
    sc = _pair(1000)
    with pytest.raises(ScenarioError):
        build(sc)
    build(sc, allow_hidden=True)
    build(sc.replace(simulation=dataclasses.replace(sc.simulation, allow_hidden=True)))
