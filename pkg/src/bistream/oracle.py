"""Centralized references for grading the distributed search.

``enumerate_exact`` lists every feasible map of a small instance by brute
force, following the same placement, forwarding-budget and public-link rules
the nodes apply locally, but written as a plain depth-first search over hops.

``lower_bound`` relaxes all bandwidth limits and solves the remaining
placement problem as a shortest path through a layered graph: one layer per
component, one vertex per server.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .diffusion import MappingView
from .mapping import D1, DM, P, Z, FeasibleMap
from .model import DerivedRequirements, PricingPlan, TaskSpec

MAX_NODES, MAX_COMPONENTS, MAX_NULL = 8, 5, 2


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    view: MappingView
    task: TaskSpec
    reqs: DerivedRequirements
    plan: PricingPlan


@dataclass(frozen=True)
class ExactResult:
    cost: int | None
    maps: frozenset

    @property
    def feasible(self) -> bool:
        return self.cost is not None


def canonical(fmap: FeasibleMap):
    return (tuple(fmap.assign), tuple((tuple(p), c) for p, c in fmap.hops))


def _walks(view: MappingView, start: int, max_edges: int, need: float, forbid_inner: int | None):
    """All dedicated walks from ``start`` with 1..max_edges edges that carry ``need``."""
    out = []
    stack = [((start,), 0)]
    while stack:
        path, cost = stack.pop()
        if len(path) - 1 >= max_edges:
            continue
        tail = path[-1]
        if len(path) > 1 and tail == forbid_inner:
            continue
        for k, bw, w, _ in view.adj[tail]:
            if bw >= need:
                nxt = (path + (k,), cost + w)
                out.append(nxt)
                stack.append(nxt)
    return out


def enumerate_exact(inst: Instance) -> ExactResult:
    view, task, reqs, plan = inst.view, inst.task, inst.reqs, inst.plan
    m = task.m
    if view.n > MAX_NODES or m > MAX_COMPONENTS or max(plan.max_null) > MAX_NULL:
        raise InstanceTooLarge(f"{view.n} nodes / {m} components / budget {max(plan.max_null)}")
    s, t = task.source, task.delivery
    found = set()
    best = [None]

    def options(h: int, a: int):
        last = h == m
        if last and a == t:
            # a complete map that reaches the delivery node stops there
            return [((t, t), Z, 0)]
        opts = [((a, a), Z, 0)]
        for path, c in _walks(view, a, plan.max_null[h] + 1, reqs.hop_bw[h], t if last else None):
            if path[-1] == a:
                continue
            opts.append((path, D1 if len(path) == 2 else DM, c))
        if view.uplink_avail[a] >= reqs.hop_bw[h]:
            targets = (t,) if last else view.directory.get(task.services[h], ())
            for b in targets:
                if b != a:
                    opts.append(((a, b), P, 0))
        return opts

    def rec(h: int, a: int, assign: tuple, hops: tuple, cost: int, load: dict):
        for path, cls, c in options(h, a):
            b = path[-1]
            if h == m:
                if b != t:
                    continue
                key = (assign, hops + ((path, cls),))
                found.add(key)
                total = cost + c
                if best[0] is None or total < best[0]:
                    best[0] = total
                continue
            if task.services[h] not in view.hosted[b]:
                continue
            here = load.get(b, [])
            if math.fsum(here + [reqs.cpu_req[h]]) > view.cpu_avail[b]:
                continue
            load2 = dict(load)
            load2[b] = here + [reqs.cpu_req[h]]
            rec(h + 1, b, assign + (b,), hops + ((path, cls),), cost + c, load2)

    rec(0, s, (), (), 0, {})
    return ExactResult(best[0], frozenset(found))


def bounded_costs(view: MappingView, max_edges: int) -> np.ndarray:
    """Cheapest dedicated walk cost with at most ``max_edges`` edges, all pairs."""
    n = view.n
    w = np.full((n, n), np.inf)
    for v in range(n):
        for k, _, c, _ in view.adj[v]:
            w[v, k] = min(w[v, k], c)
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for _ in range(max_edges):
        d = np.minimum(d, (d[:, :, None] + w[None, :, :]).min(axis=1))
    return d


def lower_bound(inst: Instance, public: bool | None = None) -> float:
    """Minimum cost over the bandwidth-relaxed problem (``inf`` if even that is infeasible).

    Each server's load is tracked over the run of consecutive components it
    holds; components that come back to a server after a detour are checked
    alone, which can only loosen the bound.
    """
    view, task, reqs, plan = inst.view, inst.task, inst.reqs, inst.plan
    m, n = task.m, view.n
    if public is None:
        public = bool((view.uplink_avail > 0).any())
    cache: dict[int, np.ndarray] = {}

    def trans(h: int) -> np.ndarray:
        k = plan.max_null[h] + 1
        if k not in cache:
            cache[k] = bounded_costs(view, k)
        d = cache[k]
        if public:
            d = np.where(np.eye(n, dtype=bool), d, 0.0)
        return d

    cap = view.cpu_avail
    cpu = reqs.cpu_req
    hosts = [np.array([task.services[i] in view.hosted[u] for u in range(n)]) for i in range(m)]
    # runs[k] -> best cost with components k..i all on the same server
    runs: dict[int, np.ndarray] = {}
    first = trans(0)[task.source].copy()
    first[~(hosts[0] & (cpu[0] <= cap))] = np.inf
    runs[0] = first
    for i in range(1, m):
        d = trans(i)
        nxt: dict[int, np.ndarray] = {}
        for k, f in runs.items():
            stay = f.copy()
            stay[~(hosts[i] & (math.fsum(cpu[k:i + 1]) <= cap))] = np.inf
            if np.isfinite(stay).any():
                nxt[k] = stay
        g = np.min(np.stack(list(runs.values())), axis=0)
        off = d.copy()
        np.fill_diagonal(off, np.inf)
        move = (g[:, None] + off).min(axis=0)
        move[~(hosts[i] & (cpu[i] <= cap))] = np.inf
        nxt[i] = move
        runs = nxt
    g = np.min(np.stack(list(runs.values())), axis=0)
    last = trans(m)[:, task.delivery]
    return float((g + last).min())
