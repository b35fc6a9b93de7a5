"""Decentralized map search as a diffusing computation.

Each server runs :meth:`Diffusion.process_map` on every map message and
:meth:`Diffusion.process_ack` on every acknowledgement. Termination is
detected by ack counting back along ``pred`` links to a virtual portal
(:data:`PORTAL`) that injects the first map at the data source on behalf of
the delivery node.

The runner here owns a private event heap so a whole search can be executed
on its own (unit tests, the heuristic benchmark) or replayed inside the
platform simulation from a resource snapshot taken when the task arrives.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .mapping import LEAST_COST, RANDOM_NEIGHBOR, Z, FeasibleMap, PartialMap, Strategy, apply_heuristic, hop_class, pick_neighbors
from .model import DerivedRequirements, PricingPlan, TaskSpec
from .topology import ANNEAL, ResourceGraph, rng_for

log = logging.getLogger(__name__)

PORTAL = -1
MAP, ACK = 0, 1


class ProtocolError(RuntimeError):
    pass


@dataclass
class MappingView:
    """What the nodes see of the platform while mapping one task.

    ``adj[v]`` lists ``(k, residual bandwidth v->k, cost, delay)`` sorted by
    ``k``; CPU and uplink figures are residuals net of committed reservations
    and of other searches' tentative uplink holds.
    """

    cpu_avail: np.ndarray
    hosted: list[frozenset[int]]
    adj: list[list[tuple[int, float, int, float]]]
    uplink_avail: np.ndarray
    directory: dict[int, tuple[int, ...]]
    public_delay: np.ndarray

    @property
    def n(self) -> int:
        return len(self.hosted)

    @classmethod
    def from_graph(
        cls,
        graph: ResourceGraph,
        cpu_used: Sequence[float] | None = None,
        bw_used: dict[tuple[int, int], float] | None = None,
        uplink_used: Sequence[float] | None = None,
        directory: dict[int, frozenset[int]] | None = None,
    ) -> "MappingView":
        n = graph.n
        cap = np.array([nd.cpu_capacity for nd in graph.nodes], dtype=float)
        up = np.array([nd.uplink_bw for nd in graph.nodes], dtype=float)
        if cpu_used is not None:
            cap = cap - np.asarray(cpu_used, dtype=float)
        if uplink_used is not None:
            up = up - np.asarray(uplink_used, dtype=float)
        bw_used = bw_used or {}
        adj = []
        for v in range(n):
            row = []
            for k, link in graph.neighbors(v):
                row.append((k, link.bandwidth - bw_used.get((v, k), 0.0), link.cost, link.delay))
            adj.append(row)
        d = directory if directory is not None else graph.directory
        return cls(
            cpu_avail=cap,
            hosted=[nd.hosted_services for nd in graph.nodes],
            adj=adj,
            uplink_avail=up,
            directory={s: tuple(sorted(h)) for s, h in d.items()},
            public_delay=graph.public_delay,
        )


@dataclass
class NodeState:
    pred: int
    pred_public: bool
    least_cost: list[float]
    count: int = 0
    knows: set[int] = field(default_factory=set)


class Message(NamedTuple):
    kind: int
    src: int
    dst: int
    pmap: PartialMap | None = None
    spec: bool = False
    public: bool = False
    final: bool = False


@dataclass
class DiffusionResult:
    feasibles: list[FeasibleMap]
    map_messages: int
    ack_messages: int
    started: float
    finished: float
    spec_misses: int = 0
    protocol_errors: int = 0
    uplink_holds: dict[int, float] = field(default_factory=dict)
    trace: list[tuple] | None = None

    @property
    def duration(self) -> float:
        return self.finished - self.started

    def best_cost(self) -> int | None:
        return min((f.cost for f in self.feasibles), default=None)


class Diffusion:
    def __init__(
        self,
        view: MappingView,
        task: TaskSpec,
        reqs: DerivedRequirements,
        plan: PricingPlan,
        strategy: Strategy,
        seed: int = 0,
        trace: bool = False,
        max_messages: int = 5_000_000,
    ):
        self.view = view
        self.task = task
        self.reqs = reqs
        self.plan = plan
        self.strategy = strategy
        self.seed = seed
        self.max_messages = max_messages
        self.states: dict[int, NodeState] = {}
        self.feasibles: list[FeasibleMap] = []
        self.map_messages = 0
        self.ack_messages = 0
        self.spec_misses = 0
        self.protocol_errors = 0
        self.holds: dict[int, float] = {}
        self.trace: list[tuple] | None = [] if trace else None
        self._rngs: dict[int, np.random.Generator] = {}
        self._heap: list = []
        self._seq = 0
        self._now = 0.0
        self._done_at: float | None = None
        self._delay = {(v, k): d for v in range(view.n) for k, _, _, d in view.adj[v]}
        self._least_cost_gate = strategy.kind == LEAST_COST
        self._max_null = list(plan.max_null)
        self._hop_bw = list(reqs.hop_bw)
        self._cpu_req = list(reqs.cpu_req)
        self._uplink = view.uplink_avail.tolist()
        self._cpu_avail = view.cpu_avail.tolist()
        self._pdelay = np.asarray(view.public_delay, dtype=float).tolist()
        # (neighbor, cost) pairs of every dedicated link able to carry hop p
        self._fanout = [
            [[(k, w) for k, bw, w, _ in view.adj[v] if bw >= need] for need in self._hop_bw]
            for v in range(view.n)
        ]

    # -- plumbing ---------------------------------------------------------

    def _rng(self, v: int) -> np.random.Generator:
        r = self._rngs.get(v)
        if r is None:
            r = self._rngs[v] = rng_for(self.seed, ANNEAL, self.task.id, v)
        return r

    def _latency(self, a: int, b: int, public: bool) -> float:
        if a == PORTAL or b == PORTAL:
            other = b if a == PORTAL else a
            return float(self.view.public_delay[self.task.delivery][other]) if other != self.task.delivery else 0.0
        if public:
            return float(self.view.public_delay[a][b])
        return self._delay[(a, b)]

    def _post(self, msg: Message):
        src, dst = msg.src, msg.dst
        if src == PORTAL or dst == PORTAL:
            d = self._latency(src, dst, msg.public)
        elif msg.public:
            d = self._pdelay[src][dst]
        else:
            d = self._delay[(src, dst)]
        heapq.heappush(self._heap, (self._now + d, self._seq, msg))
        self._seq += 1

    # -- protocol handlers ------------------------------------------------

    def _store(self, assign, hops, cost):
        self.feasibles.append(FeasibleMap(assign, hops, cost, seq=len(self.feasibles)))

    def process_map(self, v: int, u: int, pmap: PartialMap, spec: bool, public: bool = False) -> list[Message]:
        out: list[Message] = []
        st = self.states.get(v)
        if st is None:
            if not spec:
                # the sender believed we still held the task; fall back to the
                # search context, which every node can reach via the directory
                self.spec_misses += 1
            st = NodeState(pred=u, pred_public=public, least_cost=[math.inf] * (self.task.m + 1))
            if u != PORTAL:
                st.knows.add(u)
            self.states[v] = st
        else:
            out.append(Message(ACK, v, u, None, False, public))

        task, view, strategy = self.task, self.view, self.strategy
        cpu_req, hop_bw = self._cpu_req, self._hop_bw
        m, j = task.m, len(pmap.assign)
        t = task.delivery
        knows, least = st.knows, st.least_cost
        fanout = self._fanout[v]
        hosted = view.hosted[v]
        sent_maps = 0
        on_v = [cpu_req[i] for i, a in enumerate(pmap.assign) if a == v]
        for x in range(0, m - j + 1):
            p = j + x
            if x == 0:
                if v == t and j == m:
                    self._store(pmap.assign, pmap.hops + ((pmap.trail, hop_class(pmap.trail, pmap.trail_public)),), pmap.cost)
                    break
                if pmap.trail_public or len(pmap.trail) - 1 > self._max_null[j]:
                    continue
                mx = pmap
            else:
                if task.services[p - 1] not in hosted:
                    break
                if len(pmap.trail) > 1 and pmap.trail[0] == v and not pmap.trail_public:
                    # a dedicated detour back to where the hop started is a
                    # costlier copy of the zero-length hop
                    break
                on_v.append(cpu_req[p - 1])
                if math.fsum(on_v) > self._cpu_avail[v]:
                    break
                trail = pmap.trail if len(pmap.trail) > 1 else (v, v)
                closed = (trail, hop_class(trail, pmap.trail_public))
                hops = pmap.hops + (closed,) + (((v, v), Z),) * (x - 1)
                mx = PartialMap(pmap.assign + (v,) * x, hops, (v,), False, pmap.cost)
                if v == t and p == m:
                    self._store(mx.assign, mx.hops + (((t, t), Z),), mx.cost)
                    continue
            if self._least_cost_gate:
                if mx.cost < least[p]:
                    least[p] = mx.cost
                else:
                    continue
            elif not apply_heuristic(strategy, mx, least, self._rng(v)):
                continue
            links = fanout[p]
            if strategy.kind == RANDOM_NEIGHBOR and len(links) > strategy.k:
                keep = set(pick_neighbors(strategy, [k for k, _ in links], self._rng(v)))
                links = [kw for kw in links if kw[0] in keep]
            assign, mhops, mtrail, mcost = mx.assign, mx.hops, mx.trail, mx.cost
            for k, w in links:
                s = k not in knows
                if s:
                    knows.add(k)
                out.append(Message(MAP, v, k, PartialMap(assign, mhops, mtrail + (k,), False, mcost + w), s, False))
                sent_maps += 1
            # public sends need something of the task placed here: a
            # component, or the data source itself for the very first hop
            need_bw = hop_bw[p]
            origin = x > 0 or (p == 0 and v == task.source and len(mtrail) == 1)
            if origin and self._uplink[v] >= need_bw:
                targets = (t,) if p == m else view.directory.get(task.services[p], ())
                sent = False
                for k in targets:
                    if k == v:
                        continue
                    s = k not in knows
                    if s:
                        knows.add(k)
                    out.append(Message(MAP, v, k, PartialMap(assign, mhops, (v, k), True, mcost), s, True))
                    sent_maps += 1
                    sent = True
                if sent and self.holds.get(v, 0.0) < need_bw:
                    self.holds[v] = need_bw

        st.count += sent_maps
        if st.count == 0:
            out.append(Message(ACK, v, st.pred, None, False, st.pred_public, True))
            del self.states[v]
        return out

    def process_ack(self, v: int, u: int, final: bool) -> list[Message]:
        if v == PORTAL:
            if final:
                self._done_at = self._now
            return []
        st = self.states.get(v)
        if st is None:
            self.protocol_errors += 1
            log.warning("ack for task %s at node %s without state; dropped", self.task.id, v)
            return []
        st.count -= 1
        if st.count < 0:
            raise ProtocolError(f"ack count underflow at node {v}")
        if final:
            st.knows.discard(u)
        if st.count == 0:
            del self.states[v]
            return [Message(ACK, v, st.pred, None, False, st.pred_public, True)]
        return []

    # -- driver -----------------------------------------------------------

    def run(self, start: float = 0.0) -> DiffusionResult:
        self._now = start
        s = self.task.source
        first = PartialMap((), (), (s,), False, 0)
        self._post(Message(MAP, PORTAL, s, first, spec=True, public=True))
        while self._heap:
            t, _, msg = heapq.heappop(self._heap)
            self._now = t
            if msg.kind == MAP:
                self.map_messages += 1
                if self.map_messages > self.max_messages:
                    raise ProtocolError(f"map message budget exceeded for task {self.task.id}")
                if self.trace is not None:
                    self.trace.append((t, "map", msg.src, msg.dst, msg.pmap.prefix, msg.pmap.cost))
                out = self.process_map(msg.dst, msg.src, msg.pmap, msg.spec, msg.public)
            else:
                self.ack_messages += 1
                if self.trace is not None:
                    self.trace.append((t, "final" if msg.final else "ack", msg.src, msg.dst, -1, -1))
                out = self.process_ack(msg.dst, msg.src, msg.final)
            for o in out:
                self._post(o)
        if self._done_at is None or self.states:
            raise ProtocolError(f"search for task {self.task.id} did not terminate cleanly")
        return DiffusionResult(
            feasibles=self.feasibles,
            map_messages=self.map_messages,
            ack_messages=self.ack_messages,
            started=start,
            finished=self._done_at,
            spec_misses=self.spec_misses,
            protocol_errors=self.protocol_errors,
            uplink_holds=dict(self.holds),
            trace=self.trace,
        )


def run_diffusion(
    view: MappingView,
    task: TaskSpec,
    reqs: DerivedRequirements,
    plan: PricingPlan,
    strategy: Strategy,
    seed: int = 0,
    start: float = 0.0,
    trace: bool = False,
) -> DiffusionResult:
    return Diffusion(view, task, reqs, plan, strategy, seed=seed, trace=trace).run(start)
