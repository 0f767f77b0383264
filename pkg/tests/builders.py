"""Scenario constructors shared by unit and acceptance tests."""

import math

from detwpan.scenario import (
    CoordinatorSpec,
    KbLine,
    NodeSpec,
    PeerLine,
    RadioSpec,
    Scenario,
    SimulationSpec,
    SuperframeSpec,
)


def single_star(n_nodes=2, mode="extended", superframes=20, seed=0, kb=True, **node_kw):
    addrs = [10 + i for i in range(n_nodes)]
    c = CoordinatorSpec(1, kb=tuple(KbLine(a) for a in addrs) if kb else ())
    nodes = tuple(
        NodeSpec(a, x=3 * math.cos(i), y=3 * math.sin(i), coordinator=1, **node_kw) for i, a in enumerate(addrs)
    )
    return Scenario(simulation=SimulationSpec(mode=mode, duration_superframes=superframes, seed=seed),
                    coordinators=(c,), nodes=nodes)


def three_stars(superframes=10_000, seed=0, cap_background=False):
    """3 coordinators x 4 polled nodes, all mutually in range."""
    coords = []
    nodes = []
    for i in range(3):
        a = i + 1
        cx, cy = 30 * math.cos(2 * math.pi * i / 3), 30 * math.sin(2 * math.pi * i / 3)
        kb = tuple(KbLine(a * 100 + j + 1) for j in range(4))
        coords.append(CoordinatorSpec(a, x=round(cx, 3), y=round(cy, 3), kb=kb))
        for j in range(4):
            ang = 2 * math.pi * j / 4
            nodes.append(NodeSpec(
                a * 100 + j + 1, x=round(cx + 3 * math.cos(ang), 3), y=round(cy + 3 * math.sin(ang), 3),
                coordinator=a, wants_gts=True, period_superframes=1, gts_need_at_us=j * 37_000,
                cap_period_superframes=1 if (cap_background and j % 2 == 0) else 0,
            ))
    return Scenario(simulation=SimulationSpec(mode="extended", duration_superframes=superframes, seed=seed),
                    coordinators=tuple(coords), nodes=tuple(nodes))


def baseline_contention(n_nodes=8, superframes=1000, seed=0):
    """Every node issues a GTS request in the first CAP."""
    nodes = tuple(
        NodeSpec(10 + i, x=3 * math.cos(i), y=3 * math.sin(i), coordinator=1, wants_gts=True, period_superframes=1)
        for i in range(n_nodes)
    )
    return Scenario(simulation=SimulationSpec(mode="baseline", duration_superframes=superframes, seed=seed),
                    coordinators=(CoordinatorSpec(1),), nodes=nodes)


def polling_latency(superframes=30, seed=3, late_node=15, late_at=1_250_000):
    """Linear polling, 5-entry knowledge base, 1 poll slot; one need arises right after its poll."""
    addrs = range(11, 16)
    kb = tuple(KbLine(a) for a in addrs)
    nodes = tuple(
        NodeSpec(a, x=a - 10, coordinator=1, wants_gts=True, period_superframes=1,
                 gts_need_at_us=late_at if a == late_node else 0)
        for a in addrs
    )
    return Scenario(simulation=SimulationSpec(duration_superframes=superframes, seed=seed),
                    superframe=SuperframeSpec(cfp_slots=5, poll_slots=1),
                    coordinators=(CoordinatorSpec(1, policy="linear", kb=kb),), nodes=nodes)


def peer_pair(offset_slot_b, superframes=6, seed=1):
    a = CoordinatorSpec(1, x=0, y=0, offset_slot=0, peer=(PeerLine(2, 1, 8, 1),))
    b = CoordinatorSpec(2, x=20, y=0, offset_slot=offset_slot_b)
    return Scenario(simulation=SimulationSpec(duration_superframes=superframes, seed=seed), coordinators=(a, b))


def reuse_pair(reuse=True, superframes=40, seed=1):
    """Two stars 60 m apart, exponent 3: audible at 0 dBm, silent at -24 dBm.

    A owns the single CFP slot for node 11; B's second node 22 then needs a
    slot that only reuse can provide.
    """
    a = CoordinatorSpec(1, x=0, y=0, reuse=reuse, kb=(KbLine(11),))
    b = CoordinatorSpec(2, x=60, y=0, reuse=reuse, kb=(KbLine(21), KbLine(22)))
    nodes = (
        NodeSpec(11, x=-1, y=0, coordinator=1, wants_gts=True, period_superframes=1),
        NodeSpec(21, x=61, y=0, coordinator=2, wants_gts=True, period_superframes=1),
        NodeSpec(22, x=61, y=1, coordinator=2, wants_gts=True, period_superframes=1, gts_need_at_us=2_000_000),
    )
    return Scenario(simulation=SimulationSpec(duration_superframes=superframes, seed=seed),
                    radio=RadioSpec(path_loss_exponent=3.0), superframe=SuperframeSpec(cfp_slots=1),
                    coordinators=(a, b), nodes=nodes)
