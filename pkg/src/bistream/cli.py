"""Command line: ``bistream run | sweep | bench | config``.

Exit status is 0 on success, 2 for a configuration or usage error and 3 when
the simulation trips one of its runtime invariants.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments, report
from .config import ScenarioConfig, load_config, parse_config, preset, serialize_config
from .engine import MODES, SCHEDULERS, InvariantViolation
from .mapping import STRATEGIES
from .model import ConfigurationError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3
log = logging.getLogger("bistream")


def parse_seeds(text: str) -> list[int]:
    """``7`` or ``1..10`` (inclusive) or ``1,4,9``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError
            return list(range(lo_i, hi_i + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"--seeds {text!r}: expected N, N..M or a comma list") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="scenario file (INI sections)")
    p.add_argument("--preset", choices=("ci", "paper"), help="start from a named preset")
    p.add_argument("--seed", type=int, help="single seed")
    p.add_argument("--seeds", metavar="N..M", help="seed range or list")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--scheduler", choices=SCHEDULERS)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config key")
    p.add_argument("--out", default="out", metavar="DIR")
    p.add_argument("--workers", type=int, default=1, help="worker processes for replications")
    p.add_argument("--no-figures", action="store_true", help="write CSVs only")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bistream", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one scenario over its seeds")
    _common(p)
    p = sub.add_parser("sweep", help="sweep one config key")
    _common(p)
    p.add_argument("--param", required=True, metavar="SECTION.KEY")
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--modes", help="comma separated modes (default: the configured one)")
    p = sub.add_parser("bench", help="heuristic quality and message-count benchmark")
    p.add_argument("--sizes", default="30,60,90,120")
    p.add_argument("--seeds", default="0..19")
    p.add_argument("--strategies", default=",".join(experiments.BENCH_STRATEGIES))
    p.add_argument("--out", default="out", metavar="DIR")
    p.add_argument("--no-figures", action="store_true")
    p = sub.add_parser("config", help="print the normalized configuration")
    _common(p)
    return ap


def resolve_config(args) -> tuple[ScenarioConfig, list[int]]:
    base = preset(args.preset) if args.preset else ScenarioConfig()
    cfg = load_config(args.config, base) if args.config else base
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set {item!r}: expected SECTION.KEY=VALUE")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.mode:
        overrides["engine.mode"] = args.mode
    if args.scheduler:
        overrides["scheduler.scheduler"] = args.scheduler
    if args.strategy:
        overrides["protocol.strategy"] = args.strategy
    if overrides:
        cfg = parse_config(serialize_config(cfg), overrides=overrides)
    if args.seeds:
        seeds = parse_seeds(args.seeds)
    elif args.seed is not None:
        seeds = [args.seed]
    else:
        seeds = cfg.seeds
    return cfg, seeds


def cmd_run(args) -> int:
    cfg, seeds = resolve_config(args)
    rows, summary, admissions = experiments.run_scenario(cfg, seeds, workers=args.workers)
    paths = report.write_metrics(args.out, rows, [summary])
    paths.append(report.write_admissions(args.out, admissions))
    if not args.no_figures:
        paths.append(report.plot_runs(args.out, rows))
    for r in rows:
        print(f"seed {r['seed']}: accepted {r['tasks_accepted']}/{r['tasks_offered']} "
              f"throughput {r['throughput_mbps']:.3f} Mbps deviation {r['sla_deviation']:.3f} elongation {r['mean_elongation']:.3f}")
    print("wrote " + ", ".join(paths))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, seeds = resolve_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    modes = [m.strip() for m in args.modes.split(",")] if args.modes else None
    for m in modes or []:
        if m not in MODES:
            raise ConfigurationError(f"--modes: unknown mode {m!r}")
    rows, summaries = experiments.run_sweep(cfg, args.param, values, modes, seeds, workers=args.workers)
    paths = report.write_metrics(args.out, rows, summaries)
    if not args.no_figures:
        paths += report.plot_sweep(args.out, summaries, args.param)
    for s in summaries:
        print(f"{args.param}={s['point']} {s['mode']}: acceptance {s['acceptance_ratio']:.3f} "
              f"ded util {s['ded_link_util']:.3f} deviation {s['sla_deviation']:.3f}")
    print("wrote " + ", ".join(paths))
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        sizes = [int(x) for x in args.sizes.split(",")]
    except ValueError:
        raise ConfigurationError(f"--sizes {args.sizes!r}: expected integers") from None
    for n in sizes:
        if not 30 <= n <= 120:
            raise ConfigurationError(f"--sizes: {n} outside [30, 120]")
    kinds = [k.strip() for k in args.strategies.split(",")]
    for k in kinds:
        if k not in STRATEGIES:
            raise ConfigurationError(f"--strategies: unknown strategy {k!r}")
    rows = experiments.run_heuristic_benchmark(sizes, kinds, parse_seeds(args.seeds))
    summary = experiments.benchmark_summary(rows)
    paths = report.write_benchmark(args.out, rows, summary)
    if not args.no_figures:
        paths += report.plot_benchmark(args.out, summary)
    for s in summary:
        ratio = "n/a" if s["mean_ratio"] is None else f"{s['mean_ratio']:.3f}"
        print(f"n={s['size']} {s['strategy']}: ratio {ratio} ({s['found']}/{s['instances']} found) messages {s['mean_map_messages']:.0f}")
    print("wrote " + ", ".join(paths))
    return EXIT_OK


def cmd_config(args) -> int:
    cfg, _ = resolve_config(args)
    sys.stdout.write(serialize_config(cfg))
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "sweep": cmd_sweep, "bench": cmd_bench, "config": cmd_config}[args.command]
    try:
        return handler(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
