import dataclasses

from detwpan.mac_node import Candidate, QosNeed, select_coordinator
from detwpan.scenario import CoordinatorSpec, KbLine, NodeSpec, Scenario, SimulationSpec
from detwpan.sim import run_scenario

import pytest

from builders import single_star, reuse_pair


def _events(records, dev=None, kind=None, **match):
    out = []
    for r in records:
        if dev is not None and r.device != dev:
            continue
        if kind is not None and r.kind != kind:
            continue
        if all(r.fields.get(k) == v for k, v in match.items()):
            out.append(r)
    return out


def _associating(sc):
    return sc.replace(simulation=dataclasses.replace(sc.simulation, associate=True))


def test_select_coordinator_earliest_then_lowest_address():
    cs = [Candidate(500, 7, 100), Candidate(400, 9, 0), Candidate(400, 3, 0)]
    assert select_coordinator(cs).coordinator == 3
    assert select_coordinator([]) is None


def test_qos_need_validation():
    with pytest.raises(ValueError):
        QosNeed(min_rate=5, max_rate=1)


def test_scan_finds_coordinator_within_one_interval():
    sc = _associating(single_star(1, superframes=3, kb=True))
    r = run_scenario(sc)
    assoc = _events(r.records, 10, "StateChange", phase="Associating")
    assert assoc and assoc[0].time <= sc.superframe.beacon_interval_us
    assert _events(r.records, 10, "StateChange", phase="Synchronized")


def test_out_of_range_coordinator_times_out():
    sc = _associating(single_star(1, superframes=4, kb=True))
    far = dataclasses.replace(sc.nodes[0], x=5000.0, y=0.0)
    r = run_scenario(sc.replace(nodes=(far,)))
    assert not _events(r.records, 10, "StateChange", phase="Associating")
    assert _events(r.records, 10, "StateChange", event="scan_timeout")


def test_first_beacon_heard_wins():
    a = CoordinatorSpec(1, x=0, y=0)
    b = CoordinatorSpec(2, x=10, y=0)
    n = NodeSpec(50, x=5, y=1, start_us=10_000)
    sc = Scenario(simulation=SimulationSpec(duration_superframes=3, associate=True, mode="baseline"),
                  coordinators=(a, b), nodes=(n,))
    r = run_scenario(sc)
    (rec,) = _events(r.records, 50, "StateChange", phase="Associating")
    # coordinator 2 beacons at 124000, before coordinator 1's next beacon at 250000
    assert rec.fields["coordinator"] == 2


@pytest.mark.parametrize("admission,in_kb,status", [
    ("strict", True, "accepted"), ("strict", False, "refused"), ("open", False, "accepted"),
])
def test_admission(admission, in_kb, status):
    kb = (KbLine(10),) if in_kb else ()
    sc = Scenario(simulation=SimulationSpec(duration_superframes=2, associate=True),
                  coordinators=(CoordinatorSpec(1, admission=admission, kb=kb),),
                  nodes=(NodeSpec(10, x=1, coordinator=1),))
    r = run_scenario(sc)
    (rec,) = _events(r.records, 1, "StateChange", event="assoc")
    assert rec.fields["status"] == status


def test_gts_slot_used_without_carrier_sense():
    sc = single_star(1, superframes=4, wants_gts=True, period_superframes=1)
    r = run_scenario(sc)
    sd = sc.superframe.slot_duration_us
    cap_end = (1 + sc.superframe.cap_slots) * sd
    cfp = [x for x in _events(r.records, 10, "TxStart", frame="Data") if x.fields["period"] == "CFP"]
    assert cfp
    for x in cfp:
        assert x.time % sc.superframe.beacon_interval_us == cap_end      # exactly at slot 0 start
    assert not _events(r.records, 10, "StateChange", event="cca")


def test_empty_beacon_then_doze_until_wake_lead():
    sc = single_star(1, mode="baseline", superframes=3)
    r = run_scenario(sc)
    T = sc.superframe.beacon_interval_us
    wakes = [x.time for x in _events(r.records, 10, "StateChange", radio="idle_awake")]
    assert wakes[:2] == [T - 330, 2 * T - 330]


def test_min_power_of_reuse_grant_is_used():
    r = run_scenario(reuse_pair())
    (adopt,) = _events(r.records, 22, "StateChange", event="gts_adopted")
    assert adopt.fields["power"] == -24.0
    later = [x for x in _events(r.records, 22, "TxStart", frame="Data", period="CFP") if x.time > adopt.time]
    assert later and all(x.fields["power"] == -24.0 for x in later)


def test_poll_responses_reflect_need():
    sc = single_star(2, superframes=6, wants_gts=False)
    sc = sc.replace(nodes=(dataclasses.replace(sc.nodes[0], wants_gts=True, slots_needed=2), sc.nodes[1]))
    r = run_scenario(sc)
    resp10 = _events(r.records, 10, "TxStart", frame="PollResponse")
    resp11 = _events(r.records, 11, "TxStart", frame="PollResponse")
    assert resp10[0].fields["wants"] is True and resp10[0].fields["slots"] == 2
    assert all(x.fields["wants"] is False for x in resp11)


def test_silent_node_misses_poll():
    # 99 is in the knowledge base but never answers
    sc = Scenario(simulation=SimulationSpec(duration_superframes=4),
                  coordinators=(CoordinatorSpec(1, kb=(KbLine(99),)),))
    r = run_scenario(sc)
    polls = _events(r.records, 1, "Poll")
    assert len(polls) == 4 and all(p.fields["result"] == "miss" for p in polls)


def test_local_wake_truncates_doze():
    sc = single_star(1, mode="baseline", superframes=1, wake_events_us=(100_000,))
    r = run_scenario(sc)
    (ev,) = _events(r.records, 10, "StateChange", event="local_wake")
    assert ev.time == 100_000
    radio = [(x.time, x.fields["radio"]) for x in _events(r.records, 10, "StateChange") if "radio" in x.fields]
    assert radio[0] == (100_000, "idle_awake")
    (snap,) = _events(r.records, 10, "EnergySnapshot")
    # awake for the event (one wake lead) and before the next beacon (another)
    assert snap.fields["doze"] == sc.duration_us - 2 * 330
