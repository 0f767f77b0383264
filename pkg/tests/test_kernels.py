"""The compiled and pure-Python kernels must be interchangeable."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from detwpan import _pymedium
from detwpan.medium import KERNEL, Position, RadioParams, pathloss_matrix

_cmedium = pytest.importorskip("detwpan._cmedium")


def test_extension_is_active_by_default():
    assert KERNEL == "cython"


def _replay(core_cls, pl, ops):
    core = core_cls(pl, -95.0)
    out = []
    handles = []
    for op in ops:
        if op[0] == "listen":
            core.set_listening(op[1], op[2])
        elif op[0] == "chan":
            core.set_channel(op[1], op[2])
        elif op[0] == "begin":
            handles.append(core.begin(op[1], op[2], op[3]))
            out.append(("busy", tuple(core.busy(d) for d in range(len(pl)))))
        else:
            if op[1] < len(handles) and handles[op[1]] is not None:
                res = core.finish(handles[op[1]])
                handles[op[1]] = None
                out.append(("rx", sorted((j, c, round(p, 6)) for j, c, p in res)))
    return out


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_incremental_kernels_agree(seed, n):
    rng = random.Random(seed)
    pos = [Position(rng.uniform(0, 150), rng.uniform(0, 150)) for _ in range(n)]
    pl = pathloss_matrix(pos, RadioParams(path_loss_exponent=2.5))
    ops = []
    begun = 0
    for _ in range(40):
        r = rng.random()
        if r < 0.2:
            ops.append(("listen", rng.randrange(n), rng.random() < 0.7))
        elif r < 0.25:
            ops.append(("chan", rng.randrange(n), rng.choice((11, 12))))
        elif r < 0.6 and begun < 20:
            ops.append(("begin", rng.randrange(n), rng.choice((0.0, -16.0)), rng.choice((11, 11, 12))))
            begun += 1
        else:
            ops.append(("end", rng.randrange(max(begun, 1))))
    ops += [("end", k) for k in range(begun)]
    assert _replay(_pymedium.MediumCore, pl, ops) == _replay(_cmedium.MediumCore, pl, ops)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.floats(-120, -30, allow_nan=False), min_size=1, max_size=5), min_size=1, max_size=5))
def test_resolve_codes_agree(rows):
    assert _pymedium.resolve_codes(rows, -95.0) == _cmedium.resolve_codes(rows, -95.0)
