import itertools

import pytest
from hypothesis import given, settings, strategies as st

from bistream.mapping import D1, DM, P, Z, FeasibleMap
from bistream.model import DerivedRequirements, TaskSpec
from bistream.reservation import Accepted, Failed, Ledger, LedgerError, ReservationProbe, admit, probe, probe_steps, release
from bistream.topology import DedicatedLink, ResourceGraph, ServerNode

MB = 1e6


def graph():
    # 0 - 1 - 2 - 3 - 4 line, plus public last mile everywhere
    nodes = [ServerNode(i, 10.0, frozenset({0}), 5 * MB, 5 * MB) for i in range(5)]
    links = [DedicatedLink(i, i + 1, 3 * MB, 1, 0.001) for i in range(4)]
    return ResourceGraph(nodes, links)


def task(m, tid=0, src=0, dst=1):
    return TaskSpec(tid, src, dst, (0,) * m, 2 * MB, 10.0, 10, 1.0)


def reqs(m, bw=2 * MB, cpu=1.0):
    return DerivedRequirements((bw,) * m, (cpu,) * m, (bw,) * (m + 1))


def edge_map():
    # one component on node 0 feeding delivery node 1 over the dedicated link
    return FeasibleMap((0,), (((0, 0), Z), ((0, 1), D1)), 1)


def snapshot(ledger):
    return {k: ledger.residual(k) for k in ledger.capacity}


def test_uncontended_probe_takes_exactly_the_demand():
    led = Ledger.for_graph(graph())
    before = snapshot(led)
    out = probe(led, "t", edge_map(), task(1), reqs(1))
    assert isinstance(out, Accepted)
    after = snapshot(led)
    assert before[("bw", 0, 1)] - after[("bw", 0, 1)] == 2 * MB
    assert before[("cpu", 0)] - after[("cpu", 0)] == 1.0
    assert after[("bw", 1, 0)] == before[("bw", 1, 0)]
    assert out.commitment == {("bw", 0, 1): 2 * MB, ("cpu", 0): 1.0}


def interleavings(a, b):
    for pos in itertools.combinations(range(a + b), a):
        order = ["b"] * (a + b)
        for p in pos:
            order[p] = "a"
        yield order


def test_two_probes_on_one_edge_every_interleaving():
    fm = edge_map()
    n_steps = len(probe_steps(fm, task(1), reqs(1)))
    seen = 0
    for order in interleavings(n_steps, n_steps):
        led = Ledger.for_graph(graph())
        probes = {
            "a": ReservationProbe(led, "a", fm, task(1, 0), reqs(1)),
            "b": ReservationProbe(led, "b", fm, task(1, 1), reqs(1)),
        }
        for who in order:
            p = probes[who]
            if not p.done:
                p.step()
        outcomes = sorted(type(p.outcome).__name__ for p in probes.values())
        assert outcomes == ["Accepted", "Failed"], order
        assert led.residual(("bw", 0, 1)) == pytest.approx(1 * MB)
        loser = next(w for w, p in probes.items() if isinstance(p.outcome, Failed))
        assert led.holdings(loser) == {}
        seen += 1
    assert seen == 6


def long_map():
    # five hops: source 0 -> c0 on 1 -> c1 on 2 -> c2 on 3 -> c3 on 4 -> delivery 3
    hops = (((0, 1), D1), ((1, 2), D1), ((2, 3), D1), ((3, 4), D1), ((4, 3), D1))
    return FeasibleMap((1, 2, 3, 4), hops, 5)


def test_failure_midway_leaves_no_trace():
    led = Ledger.for_graph(graph())
    # someone else already holds most of link 1->2
    led.try_lock("other", [(("bw", 1, 2), 2.5 * MB)])
    before = snapshot(led)
    p = ReservationProbe(led, "t", long_map(), task(4, dst=3), reqs(4))
    out = p.run()
    assert isinstance(out, Failed)
    assert out.position == 3  # delivery-side hops 4, 3, 2 locked before the shortfall at 1->2
    assert snapshot(led) == before
    assert led.holdings("t") == {}


def test_probe_order_runs_from_delivery_to_source():
    steps = probe_steps(long_map(), task(4, dst=3), reqs(4))
    assert [s.node for s in steps] == [4, 3, 2, 1, 0]
    # each sender locks its outgoing edge together with the component it runs
    assert dict(steps[0].items) == {("bw", 4, 3): 2 * MB, ("cpu", 4): 1.0}
    assert dict(steps[-1].items) == {("bw", 0, 1): 2 * MB}


def test_multi_hop_and_public_steps():
    fm = FeasibleMap((2,), (((0, 1, 2), DM), ((2, 4), P)), 2)
    steps = probe_steps(fm, task(1, dst=4), reqs(1))
    assert [s.node for s in steps] == [2, 1, 0]
    assert dict(steps[0].items) == {("up", 2): 2 * MB, ("cpu", 2): 1.0}
    assert steps[0].soft == ((("down", 4), 2 * MB),)
    led = Ledger.for_graph(graph())
    assert isinstance(probe(led, "t", fm, task(1, dst=4), reqs(1)), Accepted)
    assert led.held("t", ("down", 4)) == 2 * MB
    release(led, "t")
    assert led.is_pristine()


def test_repeated_edge_of_one_task_aggregates():
    # both hops cross 0->1: 2 + 2 Mbps on a 3 Mbps link cannot fit
    fm = FeasibleMap((1,), (((0, 1), D1), ((1, 0, 1), DM)), 3)
    led = Ledger.for_graph(graph())
    out = probe(led, "t", fm, task(1, dst=1), reqs(1))
    assert isinstance(out, Failed)
    assert led.is_pristine()


def test_admit_empty_list_rejects():
    led = Ledger.for_graph(graph())
    assert admit(led, "t", task(1), reqs(1), []) == (None, 0)


def test_admit_falls_through_to_second_map():
    led = Ledger.for_graph(graph())
    led.try_lock("squatter", [(("cpu", 0), 9.5)])
    stale = edge_map()  # needs 1.0 CPU on node 0
    fresh = FeasibleMap((1,), (((0, 1), D1), ((1, 1), Z)), 1)
    out, tried = admit(led, "t", task(1), reqs(1), [stale, fresh])
    assert isinstance(out, Accepted) and out.fmap is fresh and tried == 2


def test_release_restores_bit_identical_residuals():
    led = Ledger.for_graph(graph())
    before = snapshot(led)
    for i in range(3):
        probe(led, i, FeasibleMap((1,), (((0, 1), D1), ((1, 1), Z)), 1), task(1, i), reqs(1, bw=0.3 * MB, cpu=0.1 + i / 7))
    for i in (1, 0, 2):
        release(led, i)
    assert snapshot(led) == before and led.is_pristine()


def test_double_release_is_an_error():
    led = Ledger.for_graph(graph())
    probe(led, "t", edge_map(), task(1), reqs(1))
    release(led, "t")
    with pytest.raises(LedgerError):
        release(led, "t")


def test_finished_probe_cannot_step():
    led = Ledger.for_graph(graph())
    p = ReservationProbe(led, "t", edge_map(), task(1), reqs(1))
    p.run()
    with pytest.raises(LedgerError):
        p.step()


def test_negative_lock_rejected():
    led = Ledger.for_graph(graph())
    with pytest.raises(LedgerError):
        led.try_lock("x", [(("cpu", 0), -1.0)])


amounts = st.floats(0.01, 4.0, allow_nan=False)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.sampled_from([("cpu", 0), ("cpu", 1), ("bw", 0, 1), ("bw", 1, 2), ("up", 3)]), amounts), max_size=40))
def test_ledger_never_oversubscribes_and_releases_exactly(ops):
    g = graph()
    led = Ledger.for_graph(g)
    led.capacity[("bw", 0, 1)] = 3.0
    led.capacity[("bw", 1, 2)] = 3.0
    led.capacity[("up", 3)] = 5.0
    before = snapshot(led)
    for owner, key, amount in ops:
        led.try_lock(owner, [(key, amount)])
        led.check()
    for owner in range(6):
        led.release(owner)
    assert snapshot(led) == before and led.is_pristine()
