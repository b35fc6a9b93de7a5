"""Periodic re-allocation of a node's outgoing link capacity among its flows.

A flow is one task hop leaving this node. Every epoch the node drops the
physical allocations of its own flows, groups them by next-hop server, hands
the direct dedicated link of each group to the highest-priority flows, tries
a short multi-hop dedicated detour for the rest when the forwarding budget
allows, and puts whatever is left on its public uplink.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .reservation import Ledger
from .topology import ResourceGraph

DIRECT, MULTI, PUBLIC = "direct", "multi", "public"


@dataclass
class FlowRecord:
    task: int
    hop: int
    sender: int
    receiver: int
    hop_rate: float  # target rate of this hop, bits/s
    share: int  # revenue per byte of the paying component
    max_null: int
    required_rate: float = 0.0
    budget_per_byte: float = 0.0
    assignment: str = PUBLIC
    path: tuple[int, ...] = ()
    rate: float = 0.0

    @property
    def key(self):
        return (self.task, self.hop)

    @property
    def priority(self) -> float:
        return self.budget_per_byte * self.required_rate


@dataclass
class EpochPlan:
    node: int
    groups: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    allocations: dict[tuple[int, int], tuple[str, tuple[int, ...], float]] = field(default_factory=dict)
    residual_direct: dict[int, float] = field(default_factory=dict)
    residual_uplink: float = 0.0


def compute_required_rate(hop_rate: float, deficit: float, epoch: float, cap: float = 2.0, backlog: float | None = None) -> float:
    """Rate that brings the hop back on schedule within one epoch.

    ``deficit`` and ``backlog`` are in bits of this hop's data; the catch-up
    never asks for more than the sender actually has buffered.
    """
    catch = max(0.0, deficit if backlog is None else min(deficit, backlog))
    return min(hop_rate + catch / epoch, cap * hop_rate)


def net_budget(share: int, forwarding_price: int, forwarders: int, gross: bool = False) -> float:
    if gross:
        return float(share)
    return float(max(0, share - forwarding_price * forwarders))


def multi_hop_probe(
    ledger: Ledger,
    graph: ResourceGraph,
    owner,
    src: int,
    dst: int,
    rate: float,
    k_max: int,
) -> tuple[int, ...] | None:
    """Reserve the cheapest simple dedicated path of 2..k_max edges carrying ``rate``.

    Ties on total cost go to the lexicographically smallest node sequence.
    Nothing is held when no path qualifies.
    """
    if k_max < 2 or rate <= 0 or src == dst:
        return None
    for _, path in graph.detours(src, dst, k_max):
        if all(ledger.fits(("bw", a, b), rate) for a, b in zip(path, path[1:])):
            items = [(("bw", a, b), rate) for a, b in zip(path, path[1:])]
            if ledger.try_lock(owner, items):
                return path
    return None


def _order(f: FlowRecord):
    return (-f.budget_per_byte * f.required_rate, f.task, f.hop)


def reschedule(
    node: int,
    flows: Sequence[FlowRecord],
    ledger: Ledger,
    graph: ResourceGraph,
    forwarding_price: int = 1,
    gross_budget: bool = False,
    multi_hop: bool = True,
) -> EpochPlan:
    """Re-assign every flow leaving ``node``. Mutates the flows and the ledger."""
    plan = EpochPlan(node)
    groups: dict[int, list[FlowRecord]] = {}
    for f in flows:
        ledger.release(f.key)
        forwarders = len(f.path) - 2 if f.assignment == MULTI else 0
        f.budget_per_byte = net_budget(f.share, forwarding_price, forwarders, gross_budget)
        groups.setdefault(f.receiver, []).append(f)

    leftover: list[FlowRecord] = []
    for v in sorted(groups):
        group = sorted(groups[v], key=_order)
        plan.groups[v] = [f.key for f in group]
        if graph.link(node, v) is None:
            leftover.extend(group)
            continue
        key = ("bw", node, v)
        pool = max(0.0, ledger.residual(key))
        for f in group:
            give = min(f.required_rate, pool)
            if give > 0:
                ledger.force(f.key, key, give)
                pool -= give
                f.assignment, f.path, f.rate = DIRECT, (node, v), give
            else:
                leftover.append(f)
        plan.residual_direct[v] = pool

    if len(leftover) > 1:
        leftover.sort(key=_order)
    public: list[FlowRecord] = []
    for f in leftover:
        path = None
        if multi_hop and f.max_null >= 1:
            wants = (f.required_rate,) if f.required_rate == f.hop_rate else (f.required_rate, f.hop_rate)
            for want in wants:
                path = multi_hop_probe(ledger, graph, f.key, node, f.receiver, want, f.max_null + 1)
                if path is not None:
                    f.assignment, f.path, f.rate = MULTI, path, want
                    break
        if path is None:
            public.append(f)

    up_key = ("up", node)
    pool = max(0.0, ledger.residual(up_key))
    for f in public:
        give = min(f.required_rate, pool)
        if give > 0:
            ledger.force(f.key, up_key, give)
            pool -= give
        f.assignment, f.path, f.rate = PUBLIC, (node, f.receiver), max(0.0, give)
    plan.residual_uplink = pool
    for f in flows:
        plan.allocations[f.key] = (f.assignment, f.path, f.rate)
    return plan
