"""Experiment harness: scenario runs, parameter sweeps and the heuristic benchmark.

Result rows are plain dicts whose keys follow the column lists below; the
report module writes them out. Replications are independent, so they can be
farmed out to worker processes; rows are always merged back in (point, seed)
order.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Sequence

import numpy as np

from .config import BY_PATH, ScenarioConfig, _get
from .diffusion import MappingView, run_diffusion
from .engine import MetricsReport, Simulation, simulate
from .mapping import ANNEALED, LEAST_COST, RANDOM_NEIGHBOR, Strategy
from .model import ConfigurationError, PricingPlan, ServiceType, TaskSpec, derive_requirements, make_catalog
from .oracle import Instance, canonical, enumerate_exact, lower_bound
from .topology import (
    DedicatedLink,
    ResourceGraph,
    ServerNode,
    Workload,
    assign_capacities,
    generate_benchmark_scenario,
    generate_catalog,
    generate_dedicated_topology,
    generate_workload,
    preferential_edges,
    public_delay_matrix,
)

METRIC_COLUMNS = (
    "tasks_offered",
    "tasks_accepted",
    "throughput_mbps",
    "tasks_per_hour",
    "acceptance_ratio",
    "cpu_util",
    "ded_link_util",
    "sla_deviation",
    "mean_elongation",
)
RUN_COLUMNS = ("scenario", "point", "seed", "mode", "scheduler", *METRIC_COLUMNS)
SUMMARY_COLUMNS = ("scenario", "point", "seed", "mode", "scheduler", "replications", *METRIC_COLUMNS, *(c + "_sd" for c in METRIC_COLUMNS))
ADMISSION_COLUMNS = ("seed", "task", "arrival", "mapping_duration", "maps_found", "probes", "map_messages", "outcome", "decided_at")
BENCH_COLUMNS = ("size", "seed", "strategy", "feasible", "cost", "lower_bound", "ratio", "map_messages")
BENCH_STRATEGIES = (LEAST_COST, ANNEALED, RANDOM_NEIGHBOR)


def build_scenario(cfg: ScenarioConfig, seed: int) -> tuple[ResourceGraph, dict[int, ServiceType], Workload]:
    s = cfg.scenario
    catalog = generate_catalog(cfg.catalog, seed)
    graph = generate_dedicated_topology(s.nodes, s.links, seed, s.attach)
    graph = assign_capacities(graph, catalog, cfg.platform, seed)
    workload = generate_workload(cfg.workload, catalog, graph, seed)
    return graph, catalog, workload


def run_once(cfg: ScenarioConfig, seed: int) -> tuple[MetricsReport, Simulation]:
    graph, catalog, workload = build_scenario(cfg, seed)
    return simulate(graph, catalog, workload, cfg.engine, seed)


def metrics_row(cfg: ScenarioConfig, seed: int, report: MetricsReport, point: str = "") -> dict:
    row = {
        "scenario": cfg.scenario.name,
        "point": point,
        "seed": seed,
        "mode": cfg.engine.mode,
        "scheduler": cfg.engine.scheduler,
    }
    row.update({k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in report.as_row().items()})
    return row


def admission_row(seed: int, rec) -> dict:
    return {
        "seed": seed,
        "task": rec.task,
        "arrival": rec.arrival,
        "mapping_duration": rec.mapping_duration,
        "maps_found": rec.maps_found,
        "probes": rec.probes,
        "map_messages": rec.map_messages,
        "outcome": rec.outcome,
        "decided_at": rec.decided_at,
    }


def summarize(rows: Sequence[dict]) -> dict:
    """Mean and sample standard deviation of every metric over ``rows``."""
    if not rows:
        raise ValueError("nothing to summarize")
    first = rows[0]
    out = {k: first[k] for k in ("scenario", "point", "mode", "scheduler")}
    out["seed"] = "summary"
    out["replications"] = len(rows)
    for c in METRIC_COLUMNS:
        vals = [float(r[c]) for r in rows]
        out[c] = statistics.fmean(vals)
        out[c + "_sd"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return out


def _job(args):
    cfg, seed, point = args
    report, sim = run_once(cfg, seed)
    return metrics_row(cfg, seed, report, point), [admission_row(seed, r) for r in sim.admission_rows()]


def _execute(jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def run_scenario(cfg: ScenarioConfig, seeds: Iterable[int] | None = None, workers: int = 1):
    """Per-seed metric rows, their summary row, and all admission records."""
    seeds = list(cfg.seeds if seeds is None else seeds)
    results = _execute([(cfg, s, "") for s in seeds], workers)
    rows = [r for r, _ in results]
    admissions = [a for _, adm in results for a in adm]
    return rows, summarize(rows), admissions


def run_sweep(
    cfg: ScenarioConfig,
    parameter: str,
    values: Sequence,
    modes: Sequence[str] | None = None,
    seeds: Iterable[int] | None = None,
    workers: int = 1,
):
    """Cross product of ``values`` x ``modes`` x ``seeds``.

    Returns the per-run rows and one summary row per (value, mode).
    """
    if parameter not in BY_PATH:
        raise ConfigurationError(f"cannot sweep unknown key {parameter}")
    seeds = list(cfg.seeds if seeds is None else seeds)
    modes = list(modes or [cfg.engine.mode])
    points = []
    for value in values:
        for mode in modes:
            c = cfg.with_value(parameter, value).with_value("engine.mode", mode)
            points.append((c, str(_get(c, BY_PATH[parameter].target)) if not isinstance(value, str) else value))
    jobs = [(c, s, label) for c, label in points for s in seeds]
    results = _execute(jobs, workers)
    rows = [r for r, _ in results]
    summaries = []
    for i in range(len(points)):
        summaries.append(summarize(rows[i * len(seeds):(i + 1) * len(seeds)]))
    return rows, summaries


def first_reaching(summaries: Sequence[dict], mode: str, column: str, threshold: float) -> float | None:
    """Smallest swept point (as a number) whose mean ``column`` reaches ``threshold``."""
    pts = sorted((float(r["point"]), r[column]) for r in summaries if r["mode"] == mode)
    for x, y in pts:
        if y >= threshold:
            return x
    return None


# ---------------------------------------------------------------------------
# heuristic benchmark


def benchmark_case(size: int, seed: int):
    b = generate_benchmark_scenario(size, seed)
    m = b.task.m
    plan = PricingPlan((0,) * m, 1, (b.max_null,) * (m + 1))
    view = MappingView.from_graph(b.graph)
    return Instance(view, b.task, b.reqs, plan)


def run_heuristic_benchmark(
    sizes: Sequence[int] = (30, 60, 90, 120),
    strategies: Sequence[str] = BENCH_STRATEGIES,
    seeds: Iterable[int] = range(20),
) -> list[dict]:
    """Cost, lower bound, cost ratio and map-message count for each case.

    A heuristic that finds no map leaves ``cost`` and ``ratio`` empty; such
    rows are left out of ratio means by :func:`benchmark_summary`.
    """
    rows = []
    seeds = list(seeds)
    for size in sizes:
        for seed in seeds:
            inst = benchmark_case(size, seed)
            lb = lower_bound(inst)
            for kind in strategies:
                res = run_diffusion(inst.view, inst.task, inst.reqs, inst.plan, Strategy(kind), seed=seed)
                cost = res.best_cost()
                ratio = None
                if cost is not None and math.isfinite(lb):
                    ratio = cost / lb if lb > 0 else (1.0 if cost == 0 else math.inf)
                rows.append({
                    "size": size,
                    "seed": seed,
                    "strategy": kind,
                    "feasible": cost is not None,
                    "cost": cost,
                    "lower_bound": lb,
                    "ratio": ratio,
                    "map_messages": res.map_messages,
                })
    return rows


def benchmark_summary(rows: Sequence[dict]) -> list[dict]:
    out = []
    keys = sorted({(r["size"], r["strategy"]) for r in rows}, key=lambda k: (k[0], BENCH_STRATEGIES.index(k[1]) if k[1] in BENCH_STRATEGIES else 99, k[1]))
    for size, kind in keys:
        sel = [r for r in rows if r["size"] == size and r["strategy"] == kind]
        ratios = [r["ratio"] for r in sel if r["ratio"] is not None and math.isfinite(r["ratio"])]
        out.append({
            "size": size,
            "strategy": kind,
            "instances": len(sel),
            "found": len(ratios),
            "mean_ratio": statistics.fmean(ratios) if ratios else None,
            "mean_map_messages": statistics.fmean(r["map_messages"] for r in sel),
        })
    return out


# ---------------------------------------------------------------------------
# small instances for the exact oracle


def random_small_instance(seed: int, max_nodes: int = 8, max_components: int = 5, services: int = 5) -> Instance:
    """A sparse random instance that the exact enumerator handles in milliseconds."""
    rng = np.random.default_rng([seed, 77])
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(1, max_components + 1))
    edges = preferential_edges(n, min(n * (n - 1) // 2, n - 1 + int(rng.integers(0, 3))), rng)
    nodes = []
    for i in range(n):
        hosted = frozenset(int(x) for x in rng.choice(services, size=int(rng.integers(1, 4)), replace=False))
        up = float(rng.uniform(0, 2)) if rng.random() < 0.5 else 0.0
        nodes.append(ServerNode(i, float(rng.uniform(0.5, 4)), hosted, up, 1.0))
    links = [DedicatedLink(a, b, float(rng.uniform(0.5, 3)), int(rng.integers(1, 4)), float(rng.uniform(0.001, 0.01))) for a, b in edges]
    graph = ResourceGraph(nodes, links, public_delay=public_delay_matrix(n, 0.01, 0.1, rng))
    catalog = make_catalog([ServiceType(i, float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.8, 1.25))) for i in range(services)])
    task = TaskSpec(seed, int(rng.integers(n)), int(rng.integers(n)), tuple(int(x) for x in rng.integers(0, services, size=m)), 1.0, 10.0, 10, 1.0)
    reqs = derive_requirements(task, catalog)
    plan = PricingPlan((0,) * m, 1, tuple(int(x) for x in rng.integers(0, 3, size=m + 1)))
    return Instance(MappingView.from_graph(graph), task, reqs, plan)


def eight_node_example() -> Instance:
    """Hand-built 8-node network with a three-service task from B to F.

    Nodes A..H are 0..7. B hosts the first two services, so both can sit on
    B with a zero-length first hop; the third service runs on D, two cheap
    links away from F through D. Every other placement pays more.
    """
    A, B, C, D, E, F, G, H = range(8)
    hosted = {
        A: {0},
        B: {0, 1},
        C: {0, 2},
        D: {2},
        E: {1, 2},
        F: set(),
        G: {2},
        H: {1},
    }
    nodes = [ServerNode(v, 4.0, frozenset(hosted[v]), 0.0, 0.0) for v in range(8)]
    spec = [
        (A, B, 1), (B, C, 2), (B, D, 1), (C, D, 2), (D, F, 1),
        (C, E, 1), (E, F, 3), (A, H, 1), (H, G, 2), (G, F, 2),
    ]
    links = [DedicatedLink(u, v, 2.0, w, 0.005) for u, v, w in spec]
    graph = ResourceGraph(nodes, links, public_delay=np.full((8, 8), 0.05) - np.eye(8) * 0.05)
    catalog = make_catalog([ServiceType(i, 1.0, 1.0) for i in range(3)])
    task = TaskSpec(0, B, F, (0, 1, 2), 1.0, 10.0, 30, 1.0)
    reqs = derive_requirements(task, catalog)
    plan = PricingPlan((0, 0, 0), 1, (1, 1, 1, 1))
    return Instance(MappingView.from_graph(graph), task, reqs, plan)


def exact_check(inst: Instance, seed: int = 0) -> tuple[bool, int | None, int | None]:
    """Exhaustive distributed search versus brute force: (same sets, exact cost, distributed cost)."""
    ex = enumerate_exact(inst)
    res = run_diffusion(inst.view, inst.task, inst.reqs, inst.plan, Strategy("exhaustive"), seed=seed)
    got = {canonical(f) for f in res.feasibles}
    same = got == ex.maps and len(got) == len(res.feasibles)
    return same, ex.cost, res.best_cost()
