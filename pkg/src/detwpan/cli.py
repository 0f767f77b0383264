"""Command-line entry points: ``run``, ``verify`` and ``compare``.

Exit codes: 0 success, 1 invariant failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from contextlib import ExitStack
from typing import Sequence

from .engine import CsvSink, read_trace
from .mac_coordinator import SaturationError, ScenarioDesignError
from .scenario import Scenario, ScenarioError, parse_scenario
from .sim import run_scenario
from .verify import TraceVerifier

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse's exit code but route through our contract
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _seed_range(text: str) -> list[int]:
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
        if hi < lo:
            raise ValueError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def with_mode(sc: Scenario, mode: str) -> Scenario:
    """The same scenario and traffic with every star switched to ``mode``."""
    coords = tuple(dataclasses.replace(c, mode=None) for c in sc.coordinators)
    return sc.replace(simulation=dataclasses.replace(sc.simulation, mode=mode), coordinators=coords)


def cmd_run(args) -> int:
    sc = _load(args.scenario)
    verifier = TraceVerifier(sc)
    counter = iter(range(2, 1 << 62))

    def check(rec):
        verifier.feed(next(counter), rec)

    with ExitStack() as stack:
        sinks = [check]
        if args.trace:
            sinks.append(CsvSink(stack.enter_context(open(args.trace, "w", encoding="utf-8", newline=""))))
        result = run_scenario(sc, seed=args.seed, until=args.until, sinks=sinks, keep=False,
                              allow_hidden=True if args.allow_hidden else None)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.metrics.to_csv())
    print(result.metrics.summary())
    report = verifier.report()
    if not report.passed:
        print(report.format())
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_verify(args) -> int:
    sc = _load(args.scenario)
    verifier = TraceVerifier(sc)
    with open(args.trace, encoding="utf-8") as fh:
        for lineno, rec in read_trace(fh):
            verifier.feed(lineno, rec)
    report = verifier.report()
    print(report.format())
    return EXIT_OK if report.passed else EXIT_INVARIANT


COMPARE_COLUMNS = ("mode", "seed", "coll_beacon", "coll_poll", "coll_cap", "coll_cfp", "gts_req_coll",
                   "gts_lat_mean_us", "gts_lat_max_us", "node_doze_mean", "charge_uas", "invariants")


def compare_rows(sc: Scenario, modes: Sequence[str], seeds: Sequence[int], until: int | None = None) -> list[dict]:
    rows = []
    for mode in modes:
        msc = with_mode(sc, mode)
        for seed in seeds:
            verifier = TraceVerifier(msc)
            counter = iter(range(2, 1 << 62))
            res = run_scenario(msc, seed=seed, until=until, sinks=[lambda r: verifier.feed(next(counter), r)],
                               keep=False)
            m = res.metrics
            dz = m.node_doze_fractions()
            rows.append({
                "mode": mode, "seed": seed,
                "coll_beacon": m.collisions["beacon"], "coll_poll": m.collisions["poll"],
                "coll_cap": m.collisions["CAP"], "coll_cfp": m.collisions["CFP"],
                "gts_req_coll": m.gts_request_collisions,
                "gts_lat_mean_us": round(m.gts_latency.mean), "gts_lat_max_us": round(m.gts_latency.max),
                "node_doze_mean": round(sum(dz.values()) / len(dz), 4) if dz else 0.0,
                "charge_uas": round(sum(e.charge_uas for e in m.energy.values()), 1),
                "invariants": "pass" if verifier.report().passed else "FAIL",
            })
    return rows


def format_table(rows: list[dict]) -> str:
    cells = [list(COMPARE_COLUMNS)] + [[str(r[c]) for c in COMPARE_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(COMPARE_COLUMNS))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells)


def cmd_compare(args) -> int:
    sc = _load(args.scenario)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in ("baseline", "extended"):
            raise ValueError(f"unknown mode {m!r}")
    try:
        seeds = _seed_range(args.seeds)
    except ValueError as e:
        raise ValueError(f"bad --seeds: {e}") from None
    rows = compare_rows(sc, modes, seeds, args.until)
    print(format_table(rows))
    return EXIT_OK if all(r["invariants"] == "pass" for r in rows) else EXIT_INVARIANT


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="detwpan", description="Deterministic beacon-enabled WPAN MAC simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate a scenario")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--until", type=int, default=None, help="stop time in microseconds")
    r.add_argument("--trace", help="write the CSV trace here")
    r.add_argument("--metrics", help="write per-device metrics CSV here")
    r.add_argument("--allow-hidden", action="store_true", help="warn instead of failing on hidden coordinators")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check a trace against the invariant suite")
    v.add_argument("trace")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("compare", help="side-by-side runs across modes and seeds")
    c.add_argument("scenario")
    c.add_argument("--modes", default="baseline,extended")
    c.add_argument("--seeds", default="0..9", help="inclusive range a..b or a comma list")
    c.add_argument("--until", type=int, default=None)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(str(e), file=sys.stderr)
    except (OSError, ValueError, SaturationError, ScenarioDesignError) as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
