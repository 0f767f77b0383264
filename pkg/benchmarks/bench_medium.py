"""Compare the compiled and pure-Python medium kernels on one workload.

    python3 benchmarks/bench_medium.py [--devices 16] [--frames 20000]

Both kernels replay the same begin/finish sequence; the script checks that
their outcomes agree before reporting timings.
"""

from __future__ import annotations

import argparse
import random
import time

from detwpan import _pymedium
from detwpan.medium import Position, RadioParams, pathloss_matrix

try:
    from detwpan import _cmedium
except ImportError:
    _cmedium = None


def workload(n_devices: int, n_frames: int, seed: int):
    rng = random.Random(seed)
    pos = [Position(rng.uniform(0, 200), rng.uniform(0, 200)) for _ in range(n_devices)]
    pl = pathloss_matrix(pos, RadioParams(path_loss_exponent=3.0))
    ops = []
    active = []
    for k in range(n_frames):
        # keep a handful of frames in flight so overlaps are common
        if active and (len(active) >= 4 or rng.random() < 0.5):
            ops.append(("end", active.pop(rng.randrange(len(active)))))
        src = rng.randrange(n_devices)
        ops.append(("begin", src, rng.choice((0.0, -8.0, -16.0))))
        active.append(k)
    for k in active:
        ops.append(("end", k))
    return pl, ops


def replay(core_cls, pl, ops):
    core = core_cls(pl, -95.0)
    for d in range(len(pl)):
        core.set_listening(d, True)
    handles = []
    out = []
    for op in ops:
        if op[0] == "begin":
            handles.append(core.begin(op[1], op[2], 0))
        else:
            out.append(core.finish(handles[op[1]]))
    return out


def timed(core_cls, pl, ops, repeat: int) -> tuple[float, list]:
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = replay(core_cls, pl, ops)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--devices", type=int, default=16)
    ap.add_argument("--frames", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)
    pl, ops = workload(args.devices, args.frames, args.seed)
    t_py, r_py = timed(_pymedium.MediumCore, pl, ops, args.repeat)
    print(f"python  {t_py * 1e3:9.1f} ms  ({args.frames / t_py:,.0f} frames/s)")
    if _cmedium is None:
        print("cython  not built (run: python3 setup.py build_ext --inplace)")
        return 0
    t_c, r_c = timed(_cmedium.MediumCore, pl, ops, args.repeat)
    norm = lambda rs: [sorted((j, c, round(p, 9)) for j, c, p in r) for r in rs]
    if norm(r_py) != norm(r_c):
        print("MISMATCH between kernels")
        return 1
    print(f"cython  {t_c * 1e3:9.1f} ms  ({args.frames / t_c:,.0f} frames/s)")
    print(f"speedup {t_py / t_c:.1f}x, outcomes identical")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
