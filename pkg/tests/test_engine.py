import math

import numpy as np
import pytest

from bistream import engine as engine_mod
from bistream.config import ScenarioConfig, parse_config
from bistream.engine import EngineParams, Simulation, TaskRun, perturb, simulate
from bistream.experiments import build_scenario, run_scenario
from bistream.mapping import D1, P, Z, FeasibleMap
from bistream.model import PricingPlan, ServiceType, TaskSpec, derive_requirements, make_catalog
from bistream.report import write_metrics
from bistream.scheduler import DIRECT, FlowRecord
from bistream.topology import DedicatedLink, ResourceGraph, ServerNode, Workload

M = 1e6
CAT = make_catalog([ServiceType(0, 1.0, 1.0)])


def line(bw=10 * M, delay=0.0, uplink=0.0):
    nodes = [
        ServerNode(0, 0.0, frozenset(), uplink, 10 * M),
        ServerNode(1, 10 * M, frozenset({0}), uplink, 10 * M),
        ServerNode(2, 0.0, frozenset(), uplink, 10 * M),
    ]
    links = [DedicatedLink(0, 1, bw, 1, delay), DedicatedLink(1, 2, bw, 1, delay)]
    return ResourceGraph(nodes, links, public_delay=np.full((3, 3), 0.02) * (1 - np.eye(3)))


def one_task(volume=1e6, rate=1 * M, arrival=0.0, tid=0):
    return TaskSpec(tid, 0, 2, (0,), rate, 10.0, 10, volume, arrival)


SMALL = """
[scenario]
nodes = 20
links = 19
replications = 2
[workload]
count = 8
components = 3
arrival_rate_per_hour = 600
volume_bytes = 1000000, 3000000
"""


def small_cfg(**over) -> ScenarioConfig:
    return parse_config(SMALL, overrides=over)


def test_single_task_closed_form():
    rep, sim = simulate(line(), CAT, Workload([one_task()]))
    run = sim.finished[0]
    # 1 MB at 1 Mbps over zero-delay links takes exactly 8 s
    assert run.done_at - run.start == pytest.approx(8.0)
    T = run.done_at  # horizon runs from time 0 to the completion
    assert rep.duration == pytest.approx(T)
    assert rep.throughput_mbps == pytest.approx(8.0 / T)
    assert rep.elongation == pytest.approx(0.0, abs=1e-12)
    assert rep.sla_deviation == pytest.approx(0.0, abs=1e-12)
    assert rep.cpu_utilization == pytest.approx(1 * M * 8.0 / (30 * M * T) * 3)
    # 8e6 bits over two links, against 2 directions x 20 Mbps
    assert rep.dedicated_link_utilization == pytest.approx(16e6 / (40e6 * T))
    assert sim.ent.is_pristine() and sim.phys.is_pristine()


def test_propagation_delay_elongates():
    rep, sim = simulate(line(delay=0.5), CAT, Workload([one_task()]))
    run = sim.finished[0]
    assert run.done_at - run.start == pytest.approx(9.0)
    assert rep.elongation == pytest.approx(1 / 8)


def test_downstream_never_overtakes_a_stalled_upstream():
    g = line()
    task = one_task()
    reqs = derive_requirements(task, CAT)
    fmap = FeasibleMap((1,), (((0, 1), D1), ((1, 2), D1)), 2)
    sim = Simulation(g, CAT, Workload([]))
    run = TaskRun(task, reqs, PricingPlan((10,), 1, (1, 1)), fmap, 0.0, np.zeros(2), [0.0, 0.0])
    for h, (a, b) in enumerate([(0, 1), (1, 2)]):
        run.flows[h] = FlowRecord(task.id, h, a, b, 1 * M, 10, 1, assignment=DIRECT, path=(a, b), rate=1 * M)
    sim.running[task.id] = run
    sim._advance(0.0, 2.0)
    assert run.progress == [2 * M, 2 * M]
    run.flows[0].rate = 0.0
    sim._advance(2.0, 4.0)
    assert run.progress == [2 * M, 2 * M]
    run.flows[0].rate = 2 * M
    run.flows[1].rate = 0.5 * M
    sim._advance(4.0, 5.0)
    assert run.progress == [4 * M, 2.5 * M]
    sim.audit()


def test_zero_hop_passes_through():
    g = line()
    task = TaskSpec(0, 1, 2, (0,), 1 * M, 10.0, 10, 1e6)
    reqs = derive_requirements(task, CAT)
    fmap = FeasibleMap((1,), (((1, 1), Z), ((1, 2), D1)), 1)
    sim = Simulation(g, CAT, Workload([]))
    run = TaskRun(task, reqs, PricingPlan((10,), 1, (1, 1)), fmap, 0.0, np.zeros(2), [0.0, 0.0])
    run.flows[1] = FlowRecord(task.id, 1, 1, 2, 1 * M, 10, 1, assignment=DIRECT, path=(1, 2), rate=1 * M)
    sim.running[task.id] = run
    sim._advance(0.0, 3.0)
    assert run.progress == [3 * M, 3 * M]


def test_window_deviation_of_a_steady_shortfall():
    task = one_task(volume=10 * 0.9 * M / 8 * 4)  # four 10 s windows at 0.9 B
    run = TaskRun(task, None, None, None, 0.0, np.zeros(1), [0.0])
    run.credit(36 * M, 0.0, 40.0, 10.0)
    run.done_at = 40.0
    assert run.windows == pytest.approx([9 * M] * 4)
    assert run.deviation(10.0) == pytest.approx(0.1)
    # a surplus window does not offset a short one
    run.windows = [12 * M, 8 * M, 10 * M, 10 * M]
    assert run.deviation(10.0) == pytest.approx(0.05)


def test_partial_last_window_is_time_weighted():
    run = TaskRun(one_task(), None, None, None, 0.0, np.zeros(1), [0.0])
    run.done_at = 15.0
    run.windows = [10 * M, 0.0]  # second window (5 s long) gets nothing
    assert run.deviation(10.0) == pytest.approx(5 / 15)


def test_perturbation_spread():
    rng = np.random.default_rng(12)
    obs = perturb(1.0, rng, 1.0, size=100_000)
    inside = np.mean((obs >= 0.25) & (obs <= 4.0))
    assert abs(inside - 0.954) <= 0.01
    assert np.median(obs) == pytest.approx(1.0, rel=0.02)
    assert np.all(perturb(2.0, rng, 0.0, size=10) == 2.0)


def test_empty_workload():
    rep, sim = simulate(line(), CAT, Workload([]))
    assert rep.acceptance_ratio == 1.0 and rep.offered == 0 and rep.throughput_mbps == 0.0


def test_static_mode_keeps_the_initial_allocation(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("static runs never reschedule")

    monkeypatch.setattr(engine_mod, "reschedule", boom)
    tasks = [one_task(tid=i, arrival=i * 0.5) for i in range(4)]
    rep, sim = simulate(line(bw=5 * M, uplink=5 * M), CAT, Workload(tasks), EngineParams(scheduler="static"))
    assert rep.accepted >= 1
    for run in sim.finished:
        for f in run.flows.values():
            assert f.rate == f.hop_rate


def test_modes_restrict_the_transport():
    tasks = [one_task(tid=i, arrival=i * 0.5) for i in range(3)]
    g = line(uplink=5 * M)
    _, ded = simulate(g, CAT, Workload(tasks), EngineParams(mode="dedicated-only"))
    _, pub = simulate(g, CAT, Workload(tasks), EngineParams(mode="public-only"))
    assert all(n.uplink_bw == 0 for n in ded.graph.nodes)
    assert not pub.graph.links
    for run in ded.finished:
        assert all(cls != P for _, cls in run.fmap.hops)
    assert pub.finished
    for run in pub.finished:
        assert all(cls in (P, Z) for _, cls in run.fmap.hops)


def test_unreachable_task_is_rejected():
    g = line()
    task = TaskSpec(0, 0, 2, (7,), 1 * M, 10.0, 10, 1e6)
    cat = make_catalog([ServiceType(0, 1.0, 1.0), ServiceType(7, 1.0, 1.0)])
    rep, sim = simulate(g, cat, Workload([task]))
    assert rep.accepted == 0 and rep.acceptance_ratio == 0.0
    assert sim.admission_rows()[0].outcome == "rejected"


def test_small_scenario_is_deterministic_and_clean(tmp_path):
    cfg = small_cfg()
    rows_a, summ_a, _ = run_scenario(cfg, [3, 4])
    rows_b, summ_b, _ = run_scenario(cfg, [3, 4])
    write_metrics(tmp_path / "a", rows_a, [summ_a])
    write_metrics(tmp_path / "b", rows_b, [summ_b])
    for name in ("metrics.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_small_scenario_conserves_and_releases():
    cfg = small_cfg(**{"engine.check_every": "5"})
    graph, catalog, workload = build_scenario(cfg, 5)
    rep, sim = simulate(graph, catalog, workload, cfg.engine, 5)
    assert rep.completed == rep.accepted
    assert sim.ent.is_pristine() and sim.phys.is_pristine()
    total = sum(r.volume_bits for r in sim.finished)
    assert sim._delivered == pytest.approx(total, rel=1e-9)
    for run in sim.finished:
        assert math.fsum(run.windows) == pytest.approx(run.volume_bits, rel=1e-9)
        assert run.elongation() >= -1e-9
    assert 0 <= rep.cpu_utilization <= 1 and 0 <= rep.dedicated_link_utilization <= 1


def test_report_row_columns():
    rep, _ = simulate(line(), CAT, Workload([one_task()]))
    assert list(rep.as_row()) == [
        "tasks_offered", "tasks_accepted", "throughput_mbps", "tasks_per_hour", "acceptance_ratio",
        "cpu_util", "ded_link_util", "sla_deviation", "mean_elongation",
    ]


def test_a_flow_that_can_never_move_is_reported(monkeypatch):
    monkeypatch.setattr(engine_mod, "STALL_LIMIT", 50.0)
    g = line()
    task = one_task()
    reqs = derive_requirements(task, CAT)
    fmap = FeasibleMap((1,), (((0, 1), D1), ((1, 2), D1)), 2)
    sim = Simulation(g, CAT, Workload([]))
    run = TaskRun(task, reqs, PricingPlan((10,), 1, (1, 1)), fmap, 0.0, np.zeros(2), [0.0, 0.0])
    for h, (a, b) in enumerate([(0, 1), (1, 2)]):
        run.flows[h] = FlowRecord(task.id, h, a, b, 1 * M, 10, 1, assignment=DIRECT, path=(a, b), rate=0.0)
    sim.running[task.id] = run
    sim.params = EngineParams(scheduler="static")
    with pytest.raises(engine_mod.InvariantViolation, match="no data moved"):
        sim.run()
