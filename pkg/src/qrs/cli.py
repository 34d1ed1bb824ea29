"""Command line: ``qrs run`` and ``qrs compare``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .metrics import MetricsReport
from .netsim import run_with_trace
from .scenario import MODES, ScenarioInvalid, load_scenario

log = logging.getLogger("qrs")


def _out_dir(args) -> Path:
    return Path(os.environ.get("QRS_OUT") or args.out)


def _load(path, seed, mode=None):
    sc = load_scenario(path)
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if mode is not None:
        changes["mode"] = mode
    return sc.with_(**changes) if changes else sc


def cmd_run(args) -> int:
    sc = _load(args.scenario, args.seed, args.mode)
    report, trace = run_with_trace(sc)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(report.to_csv())
    (out / "summary.txt").write_text(report.summary())
    if args.trace:
        (out / "trace.bin").write_bytes(trace.to_bytes())
    print(report.summary(), end="")
    return 0


def _compare_rows(base: MetricsReport, prop: MetricsReport) -> list[tuple[str, float, float]]:
    def jit(r):
        return r.mean_jitter or 0.0

    return [
        ("packets_lost", base.total.lost, prop.total.lost),
        ("mean_delay_s", base.total.mean_delay, prop.total.mean_delay),
        ("max_delay_s", base.total.max_delay, prop.total.max_delay),
        ("mean_jitter_s", jit(base), jit(prop)),
        ("compound_lost_bits", base.compound_lost_bits, prop.compound_lost_bits),
        ("recovered_paths", base.recovered_paths, prop.recovered_paths),
        ("reservation_success_rate", base.reservation_success.value,
         prop.reservation_success.value),
        ("detector_utilization", base.detector.value, prop.detector.value),
        ("connector_utilization", base.connector.value, prop.connector.value),
        ("analyzer_utilization", base.analyzer.value, prop.analyzer.value),
        ("efficiency", base.efficiency.value, prop.efficiency.value),
        ("component_messages", base.messages, prop.messages),
    ]


def _num(v) -> str:
    return str(v) if isinstance(v, int) else format(v, ".9g")


def cmd_compare(args) -> int:
    sc = _load(args.scenario, args.seed)
    base, _ = run_with_trace(sc.with_(mode="baseline"))
    prop, _ = run_with_trace(sc.with_(mode="proposed"))
    rows = _compare_rows(base, prop)
    lines = ["metric,baseline,proposed,delta"]
    lines += [f"{name},{_num(b)},{_num(p)},{_num(p - b)}" for name, b, p in rows]
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.csv").write_text("\n".join(lines) + "\n")
    d = {name: p - b for name, b, p in rows}
    summary = (f"loss delta: {d['packets_lost']}\n"
               f"efficiency delta: {d['efficiency'] * 100:+.2f} points\n"
               f"jitter delta: {d['mean_jitter_s'] * 1e3:+.4f} ms\n")
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrs", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate one scenario in one mode")
    r.add_argument("scenario", help="scenario file or bundled name")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="out")
    r.add_argument("--trace", action="store_true", help="also write trace.bin")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run both modes on the same seed")
    c.add_argument("scenario")
    c.add_argument("--seed", type=int)
    c.add_argument("--out", default="out")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioInvalid as exc:
        print(f"qrs: invalid scenario\n{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qrs: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
