import pytest
from hypothesis import given, settings, strategies as st

from bistream.reservation import Ledger
from bistream.scheduler import DIRECT, MULTI, PUBLIC, FlowRecord, compute_required_rate, multi_hop_probe, net_budget, reschedule
from bistream.topology import DedicatedLink, ResourceGraph, ServerNode

M = 1e6


def make_graph(links, n=None, uplink=10 * M):
    n = n or 1 + max(max(u, v) for u, v, *_ in links)
    nodes = [ServerNode(i, 1.0, frozenset(), uplink, uplink) for i in range(n)]
    return ResourceGraph(nodes, [DedicatedLink(u, v, bw, cost, 0.001) for u, v, bw, cost in links])


def flow(task, receiver, rate, share, max_null=2, sender=0, hop=1):
    f = FlowRecord(task=task, hop=hop, sender=sender, receiver=receiver, hop_rate=rate, share=share, max_null=max_null, assignment=DIRECT, path=(sender, receiver))
    f.required_rate = rate
    return f


def test_required_rate_examples():
    assert compute_required_rate(1 * M, 0.0, 1.0) == 1 * M
    assert compute_required_rate(1 * M, 1 * M, 1.0) == 2 * M  # one epoch behind
    assert compute_required_rate(1 * M, 5 * M, 1.0) == 2 * M  # capped
    assert compute_required_rate(1 * M, -3 * M, 1.0) == 1 * M  # ahead of schedule
    assert compute_required_rate(1 * M, 1 * M, 1.0, backlog=0.25 * M) == 1.25 * M
    assert compute_required_rate(1 * M, 1 * M, 1.0, cap=3.0) == 2 * M


def test_budget_net_of_forwarding():
    assert net_budget(4, 1, 2) == 2.0
    assert net_budget(1, 1, 3) == 0.0
    assert net_budget(4, 1, 2, gross=True) == 4.0


def test_priority_decides_the_direct_link():
    g = make_graph([(0, 1, 3 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    a = flow(1, 1, 3 * M, share=2)  # priority 6
    b = flow(2, 1, 1 * M, share=5)  # priority 5
    reschedule(0, [a, b], led, g)
    assert (a.assignment, a.rate) == (DIRECT, 3 * M)
    assert b.assignment == PUBLIC and b.rate == 1 * M


def test_uncontended_flow_stays_direct():
    g = make_graph([(0, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    f = flow(1, 1, 2 * M, share=3)
    plan = reschedule(0, [f], led, g)
    assert f.assignment == DIRECT and f.rate == 2 * M
    assert led.residual(("up", 0)) == 10 * M
    assert plan.residual_direct[1] == 3 * M


def test_no_budget_means_public():
    g = make_graph([(0, 1, 1 * M, 1), (0, 2, 5 * M, 1), (2, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    hog = flow(1, 1, 1 * M, share=9)
    f = flow(2, 1, 1 * M, share=1, max_null=0)
    reschedule(0, [hog, f], led, g)
    assert f.assignment == PUBLIC


def test_multi_hop_detour_when_budget_allows():
    g = make_graph([(0, 1, 1 * M, 1), (0, 2, 5 * M, 1), (2, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    hog = flow(1, 1, 1 * M, share=9)
    f = flow(2, 1, 1 * M, share=3, max_null=1)
    reschedule(0, [hog, f], led, g)
    assert f.assignment == MULTI and f.path == (0, 2, 1)
    assert led.held(f.key, ("bw", 0, 2)) == 1 * M and led.held(f.key, ("bw", 2, 1)) == 1 * M
    # next epoch the forwarding fee comes off the budget
    reschedule(0, [hog, f], led, g)
    assert f.budget_per_byte == 2.0


def test_probe_three_node_fixture():
    g = make_graph([(0, 2, 5 * M, 1), (2, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    assert multi_hop_probe(led, g, "f", 0, 1, 1 * M, 2) == (0, 2, 1)


def test_probe_not_found_leaves_nothing():
    g = make_graph([(0, 2, 0.5 * M, 1), (2, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    assert multi_hop_probe(led, g, "f", 0, 1, 1 * M, 3) is None
    assert led.is_pristine()


def test_probe_prefers_cheap_then_low_ids():
    g = make_graph([(0, 2, 5 * M, 3), (2, 1, 5 * M, 1), (0, 3, 5 * M, 1), (3, 1, 5 * M, 1), (0, 4, 5 * M, 1), (4, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    assert multi_hop_probe(led, g, "f", 0, 1, 1 * M, 2) == (0, 3, 1)
    assert multi_hop_probe(led, g, "g", 0, 1, 1 * M, 2) == (0, 3, 1)
    led = Ledger.for_graph(g, cpu=False)
    assert led.try_lock("x", [(("bw", 3, 1), 4.5 * M)])
    assert multi_hop_probe(led, g, "h", 0, 1, 1 * M, 2) == (0, 4, 1)


def test_probe_respects_hop_limit():
    g = make_graph([(0, 2, 5 * M, 1), (2, 3, 5 * M, 1), (3, 1, 5 * M, 1)])
    led = Ledger.for_graph(g, cpu=False)
    assert multi_hop_probe(led, g, "f", 0, 1, 1 * M, 2) is None
    assert multi_hop_probe(led, g, "f", 0, 1, 1 * M, 3) == (0, 2, 3, 1)


# -- properties ---------------------------------------------------------------

STAR = [(0, 1, 3 * M, 1), (0, 2, 2 * M, 1), (0, 3, 4 * M, 1), (1, 2, 5 * M, 1), (2, 3, 5 * M, 2), (3, 4, 1 * M, 1)]

flows_strategy = st.lists(
    st.tuples(st.sampled_from([1, 2, 3, 4]), st.floats(0.1 * M, 3 * M), st.integers(0, 6), st.integers(0, 2)),
    min_size=1,
    max_size=8,
)


def build(spec, scale=1):
    return [flow(i, r, rate, share * scale, mn) for i, (r, rate, share, mn) in enumerate(spec)]


@settings(max_examples=150, deadline=None)
@given(flows_strategy, st.floats(0.0, 6 * M))
def test_plan_respects_capacity_priority_and_work_conservation(spec, uplink):
    g = make_graph(STAR, uplink=uplink)
    led = Ledger.for_graph(g, cpu=False)
    fl = build(spec)
    reschedule(0, fl, led, g)
    led.check(soft=())
    up = sum(f.rate for f in fl if f.assignment == PUBLIC)
    assert up <= uplink * (1 + 1e-9) + 1e-9
    for f in fl:
        assert f.assignment in (DIRECT, MULTI, PUBLIC)
        assert f.rate >= 0 and f.budget_per_byte >= 0
    for v in (1, 2, 3, 4):
        group = [f for f in fl if f.receiver == v]
        direct = [f for f in group if f.assignment == DIRECT]
        for hi in group:
            for lo in direct:
                if hi.priority > lo.priority:
                    assert hi.assignment == DIRECT and hi.rate == pytest.approx(hi.required_rate)
        if g.link(0, v) and led.residual(("bw", 0, v)) > 1e-6:
            assert all(f.assignment == DIRECT and f.rate == pytest.approx(f.required_rate) for f in group)


@settings(max_examples=100, deadline=None)
@given(flows_strategy, st.integers(2, 5))
def test_scaling_budgets_changes_nothing(spec, c):
    g = make_graph(STAR)
    out = []
    for scale in (1, c):
        led = Ledger.for_graph(g, cpu=False)
        fl = build(spec, scale)
        # the forwarding fee scales with the budgets so net budgets scale too
        reschedule(0, fl, led, g, forwarding_price=scale)
        out.append([(f.assignment, f.path, f.rate) for f in fl])
    assert out[0] == out[1]


@settings(max_examples=60, deadline=None)
@given(flows_strategy)
def test_repeated_epochs_release_cleanly(spec):
    g = make_graph(STAR)
    led = Ledger.for_graph(g, cpu=False)
    fl = build(spec)
    for _ in range(3):
        reschedule(0, fl, led, g)
    for f in fl:
        led.release(f.key)
    assert led.is_pristine()
