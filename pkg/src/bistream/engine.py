"""Discrete-event platform simulation with a stepped fluid data plane.

Control traffic (arrivals, map searches, reservation probes) runs as timed
events. Streams are advanced in fixed data-plane steps. Progress of every
hop is measured in delivery-equivalent bits (what the bits on that hop will
become at the delivery node), which makes the causality rule a plain
``min`` along the chain. The source is live: it cannot release data faster
than the contracted delivery rate.

Public flows are perturbed at every tick (10 ms by default) by a log2-normal
factor; the ticks of one step are drawn in one batch, squeezed to the
sender's uplink and the receiver's downlink, and averaged into that step's
rate.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diffusion import MappingView, ProtocolError, run_diffusion
from .mapping import D1, DM, P, Z, FeasibleMap, Strategy, score_and_select, score_map, validate_map
from .model import (
    MBPS,
    ConfigurationError,
    DerivedRequirements,
    PricingPlan,
    ServiceType,
    TaskSpec,
    apportion_revenue,
    derive_requirements,
    hop_payer_share,
)
from .reservation import Accepted, Failed, Ledger, LedgerError, ReservationProbe
from .scheduler import DIRECT, MULTI, PUBLIC, FlowRecord, compute_required_rate, reschedule
from .topology import PERTURB, PHASE, ResourceGraph, Workload, rng_for, stale_directory, without_dedicated, without_public

MODES = ("bimodal", "dedicated-only", "public-only")
SCHEDULERS = ("adaptive", "static")


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineParams:
    mode: str = "bimodal"
    scheduler: str = "adaptive"
    strategy: Strategy = Strategy()
    forwarding_price: int = 1
    max_null: int | None = None
    epoch: float = 1.0
    catchup_cap: float = 2.0
    gross_budget: bool = False
    multi_hop: bool = True
    step: float = 1.0
    tick: float = 0.01
    sigma: float = 1.0
    downlink_squeeze: bool = True
    remap_on_failure: bool = False
    directory_staleness: float = 0.0
    tolerance: float = 0.1
    check_every: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(f"scheduler must be one of {SCHEDULERS}")
        if self.epoch <= 0 or self.step <= 0 or self.tick <= 0 or self.sigma < 0:
            raise ConfigurationError("epoch, step and tick must be > 0, sigma >= 0")
        if self.catchup_cap < 1:
            raise ConfigurationError("catchup_cap must be >= 1")


def perturb(rate, rng: np.random.Generator, sigma: float = 1.0, size=None):
    """Observed public rate: ``rate * 2**z`` with ``z ~ N(0, sigma^2)``."""
    z = rng.normal(0.0, sigma, size=size)
    return np.asarray(rate) * np.exp2(z)


@dataclass
class TaskRun:
    spec: TaskSpec
    reqs: DerivedRequirements
    plan: PricingPlan
    fmap: FeasibleMap
    start: float
    offsets: np.ndarray  # propagation delay accumulated up to and including hop h
    progress: list[float]  # delivery-equivalent bits through hop h
    flows: dict[int, FlowRecord] = field(default_factory=dict)
    windows: list[float] = field(default_factory=list)
    done_at: float | None = None

    def __post_init__(self):
        self.offsets_list = [float(o) for o in self.offsets]

    @property
    def volume_bits(self) -> float:
        return self.spec.volume * 8.0

    def released(self, h: int, t: float) -> float:
        """Delivery-equivalent bits the live source has pushed to hop ``h`` by ``t``."""
        age = t - self.start - self.offsets[h]
        return min(self.volume_bits, self.spec.delivery_rate * max(0.0, age))

    def credit(self, amount: float, a: float, b: float, window: float):
        """Spread ``amount`` delivered uniformly over ``[a, b]`` into windows."""
        if amount <= 0:
            return
        if b <= a:
            k = int((a - self.start) // window)
            self._add(k, amount)
            return
        rate = amount / (b - a)
        k = int((a - self.start) // window)
        t = a
        while t < b - 1e-12:
            edge = min(b, self.start + (k + 1) * window)
            self._add(k, rate * (edge - t))
            t = edge
            k += 1

    def _add(self, k: int, amount: float):
        while len(self.windows) <= k:
            self.windows.append(0.0)
        self.windows[k] += amount

    def deviation(self, window: float) -> float:
        """Time-weighted mean over windows of the clamped shortfall fraction."""
        end = self.done_at
        B = self.spec.delivery_rate
        total = end - self.start
        nwin = max(1, math.ceil(total / window - 1e-9))
        acc = 0.0
        weight = 0.0
        for k in range(nwin):
            length = min(window, total - k * window)
            if length <= 1e-9:
                continue
            got = self.windows[k] if k < len(self.windows) else 0.0
            acc += length * max(0.0, (B - got / length) / B)
            weight += length
        return acc / weight if weight else 0.0

    def elongation(self) -> float:
        ideal = self.volume_bits / self.spec.delivery_rate
        return (self.done_at - self.start) / ideal - 1.0


@dataclass
class AdmissionRecord:
    task: int
    arrival: float
    mapping_duration: float
    maps_found: int
    probes: int
    outcome: str
    map_messages: int
    decided_at: float = 0.0


@dataclass
class MetricsReport:
    offered: int
    accepted: int
    completed: int
    throughput_mbps: float
    tasks_per_hour: float
    acceptance_ratio: float
    cpu_utilization: float
    dedicated_link_utilization: float
    sla_deviation: float
    elongation: float
    duration: float
    map_messages: float
    spec_misses: int

    def as_row(self) -> dict:
        return {
            "tasks_offered": self.offered,
            "tasks_accepted": self.accepted,
            "throughput_mbps": self.throughput_mbps,
            "tasks_per_hour": self.tasks_per_hour,
            "acceptance_ratio": self.acceptance_ratio,
            "cpu_util": self.cpu_utilization,
            "ded_link_util": self.dedicated_link_utilization,
            "sla_deviation": self.sla_deviation,
            "mean_elongation": self.elongation,
        }


ARRIVE, MAPPED, PROBE_STEP = 0, 1, 2
STALL_LIMIT = 1e5  # simulated seconds without any data movement


class Simulation:
    def __init__(
        self,
        graph: ResourceGraph,
        catalog: dict[int, ServiceType],
        workload: Workload,
        params: EngineParams = EngineParams(),
        seed: int = 0,
    ):
        if params.mode == "dedicated-only":
            graph = without_public(graph)
        elif params.mode == "public-only":
            graph = without_dedicated(graph)
        self.graph = graph
        self.catalog = catalog
        self.tasks = list(workload.tasks)
        self.params = params
        self.seed = seed
        self.ent = Ledger.for_graph(graph)
        self.phys = Ledger.for_graph(graph, cpu=False)
        self.directory = graph.directory
        if params.directory_staleness > 0:
            self.directory = stale_directory(graph, params.directory_staleness, seed)
        self.now = 0.0
        self._events: list = []
        self._eseq = 0
        self.holds: dict[int, tuple[float, dict[int, float]]] = {}
        self.running: dict[int, TaskRun] = {}
        self.finished: list[TaskRun] = []
        self.admissions: dict[int, AdmissionRecord] = {}
        self.node_flows: dict[int, dict[tuple[int, int], FlowRecord]] = {}
        rng = rng_for(seed, PHASE)
        self.phase = rng.uniform(0.0, params.epoch, size=graph.n)
        self._prng = [rng_for(seed, PERTURB, v) for v in range(graph.n)]
        self._cpu_total = sum(n.cpu_capacity for n in graph.nodes)
        self._link_total = 2.0 * sum(l.bandwidth for l in graph.links)
        self._cpu_integral = 0.0
        self._cpu_mark = 0.0
        self._carried = 0.0
        self._delivered = 0.0
        self._map_messages = 0
        self._spec_misses = 0
        self._step_index = 0
        self._ticks = max(1, math.ceil(params.step / params.tick - 1e-9))

    # -- event plumbing -----------------------------------------------------

    def _push(self, t: float, kind: int, payload):
        if t < self.now - 1e-9:
            raise InvariantViolation(f"event scheduled in the past: {t} < {self.now}")
        heapq.heappush(self._events, (t, self._eseq, kind, payload))
        self._eseq += 1

    def _latency(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        link = self.graph.link(a, b)
        if link is not None:
            return link.delay
        return float(self.graph.public_delay[a][b])

    def _committed_cpu(self) -> float:
        return math.fsum(v for k, v in self.ent.used.items() if k[0] == "cpu")

    def _note_cpu(self):
        """Close the CPU-utilization integral up to ``now`` before CPU changes."""
        self._cpu_integral += self._cpu_level * (self.now - self._cpu_mark)
        self._cpu_mark = self.now

    def _refresh_cpu(self):
        self._cpu_level = self._committed_cpu()

    # -- control plane ----------------------------------------------------------

    def _view(self) -> MappingView:
        n = self.graph.n
        cpu_used = np.array([self.ent.used.get(("cpu", v), 0.0) for v in range(n)])
        up_used = np.array([self.ent.used.get(("up", v), 0.0) for v in range(n)])
        for _, per_node in self.holds.values():
            for v, amount in per_node.items():
                up_used[v] += amount
        bw_used = {(k[1], k[2]): u for k, u in self.ent.used.items() if k[0] == "bw"}
        return MappingView.from_graph(self.graph, cpu_used, bw_used, up_used, self.directory)

    def _arrive(self, task: TaskSpec, attempt: int = 0):
        reqs = derive_requirements(task, self.catalog)
        plan = apportion_revenue(task, reqs, self.params.forwarding_price, self.params.max_null)
        view = self._view()
        try:
            res = run_diffusion(view, task, reqs, plan, self.params.strategy, seed=self.seed * 7919 + attempt, start=self.now)
        except ProtocolError as exc:
            raise InvariantViolation(str(exc)) from exc
        self._map_messages += res.map_messages
        self._spec_misses += res.spec_misses
        if res.uplink_holds:
            self.holds[task.id] = (res.finished, res.uplink_holds)
        for f in res.feasibles:
            bad = validate_map(
                f, task.source, task.delivery, reqs.cpu_req, reqs.hop_bw,
                lambda v: view.cpu_avail[v],
                lambda a, b: next((bw for k, bw, _, _ in view.adj[a] if k == b), None),
                lambda v: view.uplink_avail[v],
                plan.max_null,
                lambda a, b: self.graph.link(a, b).cost,
            )
            if bad:
                raise InvariantViolation(f"task {task.id}: unsound map {bad}")
        prev = self.admissions.get(task.id)
        self.admissions[task.id] = AdmissionRecord(
            task.id, task.arrival_time, res.duration + (prev.mapping_duration if prev else 0.0),
            len(res.feasibles), prev.probes if prev else 0, "pending",
            res.map_messages + (prev.map_messages if prev else 0),
        )
        self._push(res.finished, MAPPED, (task, reqs, plan, res.feasibles, attempt))

    def _mapped(self, task: TaskSpec, reqs, plan, feasibles: list[FeasibleMap], attempt: int):
        self.holds.pop(task.id, None)
        if not feasibles:
            self._reject(task, attempt)
            return
        scores = [
            score_map(f, reqs.cpu_req, lambda v: self.ent.used.get(("cpu", v), 0.0), lambda v: self.graph.node(v).cpu_capacity)
            for f in feasibles
        ]
        order = score_and_select(feasibles, scores, self.params.tolerance)
        ranked = [feasibles[i] for i in order]
        self._start_probe(task, reqs, plan, ranked, 0, task.delivery, attempt)

    def _start_probe(self, task, reqs, plan, ranked, idx, at_node, attempt):
        if idx >= len(ranked):
            self._reject(task, attempt)
            return
        probe = ReservationProbe(self.ent, task.id, ranked[idx], task, reqs)
        self.admissions[task.id].probes += 1
        first = probe.steps[0].node
        self._push(self.now + self._latency(at_node, first), PROBE_STEP, (task, reqs, plan, ranked, idx, probe, attempt))

    def _probe_step(self, task, reqs, plan, ranked, idx, probe: ReservationProbe, attempt):
        node = probe.steps[probe.cursor].node
        touches_cpu = any(k[0] == "cpu" for k, _ in probe.steps[probe.cursor].items)
        pre = self._cpu_level
        if touches_cpu:
            self._note_cpu()
        out = probe.step()
        if isinstance(out, Failed):
            self._refresh_cpu()
            back = float(self.graph.public_delay[node][task.delivery]) if node != task.delivery else 0.0
            self._push(self.now + back, PROBE_STEP, ("retry", task, reqs, plan, ranked, idx + 1, attempt))
            return
        if touches_cpu or pre != self._cpu_level:
            self._refresh_cpu()
        if isinstance(out, Accepted):
            self._accept(task, reqs, plan, out.fmap)
            return
        nxt = probe.steps[probe.cursor].node
        self._push(self.now + self._latency(node, nxt), PROBE_STEP, (task, reqs, plan, ranked, idx, probe, attempt))

    def _reject(self, task: TaskSpec, attempt: int):
        if self.params.remap_on_failure and attempt == 0:
            self._arrive(task, attempt=1)
            return
        rec = self.admissions[task.id]
        rec.outcome = "rejected"
        rec.decided_at = self.now

    def _accept(self, task: TaskSpec, reqs, plan, fmap: FeasibleMap):
        rec = self.admissions[task.id]
        rec.outcome = "accepted"
        rec.decided_at = self.now
        m = task.m
        delays = []
        for path, cls in fmap.hops:
            if cls == Z:
                delays.append(0.0)
            elif cls == P:
                delays.append(float(self.graph.public_delay[path[0]][path[1]]))
            else:
                delays.append(sum(self.graph.link(a, b).delay for a, b in zip(path, path[1:])))
        run = TaskRun(
            spec=task, reqs=reqs, plan=plan, fmap=fmap, start=self.now,
            offsets=np.cumsum(delays), progress=[0.0] * (m + 1),
        )
        for h, (path, cls) in enumerate(fmap.hops):
            if cls == Z:
                continue
            f = FlowRecord(
                task=task.id, hop=h, sender=path[0], receiver=path[-1], hop_rate=reqs.hop_bw[h],
                share=hop_payer_share(plan, h), max_null=plan.max_null[h],
                assignment={D1: DIRECT, DM: MULTI, P: PUBLIC}[cls], path=tuple(path),
            )
            f.required_rate = f.hop_rate
            self._initial_allocation(f)
            run.flows[h] = f
            self.node_flows.setdefault(f.sender, {})[f.key] = f
        self.running[task.id] = run

    def _initial_allocation(self, f: FlowRecord):
        if f.assignment == PUBLIC:
            keys = [("up", f.sender)]
        else:
            keys = [("bw", a, b) for a, b in zip(f.path, f.path[1:])]
        if self.params.scheduler == "static":
            rate = f.hop_rate
            if not self.phys.try_lock(f.key, [(k, rate) for k in keys]):
                raise InvariantViolation(f"static allocation for {f.key} does not fit")
        else:
            rate = max(0.0, min([f.hop_rate] + [self.phys.residual(k) for k in keys]))
            for k in keys:
                if rate > 0:
                    self.phys.force(f.key, k, rate)
        f.rate = rate

    def _complete(self, run: TaskRun):
        tid = run.spec.id
        self._note_cpu()
        self.ent.release(tid)
        self._refresh_cpu()
        for f in run.flows.values():
            self.phys.release(f.key)
            self.node_flows[f.sender].pop(f.key)
            if not self.node_flows[f.sender]:
                del self.node_flows[f.sender]
        del self.running[tid]
        self.finished.append(run)

    # -- data plane -----------------------------------------------------------

    def _required(self, run: TaskRun, f: FlowRecord, t: float) -> float:
        h = f.hop
        B = run.spec.delivery_rate
        scale = f.hop_rate / B
        target = run.released(h, t)
        upstream = run.released(0, t) if h == 0 else run.progress[h - 1]
        deficit = (target - run.progress[h]) * scale
        backlog = (min(upstream, target) - run.progress[h]) * scale
        return compute_required_rate(f.hop_rate, deficit, self.params.epoch, self.params.catchup_cap, backlog)

    def _reschedule_due(self, t_prev: float, t: float):
        if self.params.scheduler != "adaptive":
            return
        E = self.params.epoch
        due = []
        for u in self.node_flows:
            ph = self.phase[u]
            if math.floor((t - ph) / E) > math.floor((t_prev - ph) / E):
                due.append((ph + math.floor((t - ph) / E) * E, u))
        for _, u in sorted(due):
            flows = [self.node_flows[u][k] for k in sorted(self.node_flows[u])]
            settled = True
            for f in flows:
                f.required_rate = self._required(self.running[f.task], f, t)
                settled = settled and f.assignment == DIRECT and f.rate == f.required_rate
            if settled:
                # every flow already holds exactly what it asks for on its
                # direct link; a fresh allocation would reproduce it
                continue
            reschedule(u, flows, self.phys, self.graph, self.params.forwarding_price, self.params.gross_budget, self.params.multi_hop)

    def _public_rates(self, runs: Sequence[TaskRun]) -> dict[tuple[int, int], float]:
        pub: dict[int, list[FlowRecord]] = {}
        for run in runs:
            for f in run.flows.values():
                if f.assignment == PUBLIC and f.rate > 0:
                    pub.setdefault(f.sender, []).append(f)
        if not pub:
            return {}
        K = self._ticks
        flows: list[FlowRecord] = []
        blocks = []
        for u in sorted(pub):
            fl = sorted(pub[u], key=lambda f: f.key)
            rates = np.array([f.rate for f in fl])
            obs = perturb(rates[:, None], self._prng[u], self.params.sigma, size=(len(fl), K))
            cap = self.graph.node(u).uplink_bw
            tot = obs.sum(axis=0)
            obs *= np.minimum(1.0, cap / np.maximum(tot, 1e-300))[None, :]
            flows.extend(fl)
            blocks.append(obs)
        obs = np.vstack(blocks)
        if self.params.downlink_squeeze:
            recv = np.array([f.receiver for f in flows])
            uniq, idx = np.unique(recv, return_inverse=True)
            tot = np.zeros((len(uniq), K))
            np.add.at(tot, idx, obs)
            down = np.array([self.graph.node(v).downlink_bw for v in uniq])
            scale = np.minimum(1.0, down[:, None] / np.maximum(tot, 1e-300))
            obs *= scale[idx]
        eff = obs.mean(axis=1)
        return {f.key: float(e) for f, e in zip(flows, eff)}

    def _advance(self, t0: float, t1: float):
        dt = t1 - t0
        runs = [self.running[k] for k in sorted(self.running)]
        pub = self._public_rates(runs)
        done = []
        for run in runs:
            B = run.spec.delivery_rate
            vol = run.volume_bits
            prog = run.progress
            before_last = prog[-1]
            limit = math.inf
            base = t1 - run.start
            olds = prog.copy()
            speeds = [0.0] * len(prog)
            for h, off in enumerate(run.offsets_list):
                age = base - off
                rel = vol if B * age >= vol else (B * age if age > 0 else 0.0)
                if rel < limit:
                    limit = rel
                f = run.flows.get(h)
                if f is None:
                    if limit > prog[h]:
                        self._moved = True
                    prog[h] = limit
                    speeds[h] = math.inf
                    continue
                rate = pub.get(f.key, 0.0) if f.assignment == PUBLIC else f.rate
                old = prog[h]
                speeds[h] = rate * B / f.hop_rate
                new = old + speeds[h] * dt
                if new > limit:
                    new = limit
                if new < old:
                    new = old
                elif new > old:
                    self._moved = True
                prog[h] = new
                if f.assignment != PUBLIC:
                    self._carried += (new - old) * f.hop_rate / B * (len(f.path) - 1)
                limit = new
            got = prog[-1] - before_last
            if got > 0:
                a = max(t0, run.start)
                self._delivered += got
                if prog[-1] >= vol * (1 - 1e-12):
                    run.done_at = self._finish_time(run, olds, speeds, a, t1)
                    run.credit(got, a, run.done_at, run.spec.window)
                    done.append(run)
                else:
                    run.credit(got, a, t1, run.spec.window)
        return done

    def _finish_time(self, run: TaskRun, olds: list[float], speeds: list[float], a: float, t1: float) -> float:
        """When the last hop reached the full volume inside ``[a, t1]``.

        Each hop finishes no earlier than its upstream, than its own release
        (source pacing plus propagation) and than its remaining volume at its
        rate for the step.
        """
        vol = run.volume_bits
        B = run.spec.delivery_rate
        upstream = a
        for h, off in enumerate(run.offsets_list):
            fin = max(upstream, run.start + off + vol / B)
            if speeds[h] != math.inf:
                fin = max(fin, a + (vol - olds[h]) / speeds[h] if speeds[h] > 0 else t1)
            upstream = fin
        return min(t1, max(a, upstream))

    # -- main loop --------------------------------------------------------------

    def run(self) -> MetricsReport:
        for task in self.tasks:
            if not (0 <= task.source < self.graph.n and 0 <= task.delivery < self.graph.n):
                raise ConfigurationError(f"task {task.id} refers to a missing node")
            self._push(task.arrival_time, ARRIVE, task)
        self._cpu_level = 0.0
        step = self.params.step
        k = 0
        last_move = 0
        while self._events or self.running:
            t0, t1 = k * step, (k + 1) * step
            if not self.running and self._events and self._events[0][0] >= t1:
                k = int(self._events[0][0] // step)
                continue
            self.now = t0
            self._reschedule_due((k - 1) * step, t0)
            while self._events and self._events[0][0] < t1:
                t, _, kind, payload = heapq.heappop(self._events)
                self.now = t
                if kind == ARRIVE:
                    self._arrive(payload)
                elif kind == MAPPED:
                    self._mapped(*payload)
                elif payload[0] == "retry":
                    _, task, reqs, plan, ranked, idx, attempt = payload
                    self._start_probe(task, reqs, plan, ranked, idx, task.delivery, attempt)
                else:
                    self._probe_step(*payload)
            self._moved = False
            for run in sorted(self._advance(t0, t1), key=lambda r: (r.done_at, r.spec.id)):
                self.now = max(self._cpu_mark, run.done_at)
                self._complete(run)
            if self._moved or not self.running:
                last_move = k
            elif (k - last_move) * step > STALL_LIMIT:
                raise InvariantViolation(f"no data moved for {STALL_LIMIT:g} s with {len(self.running)} tasks running")
            self.now = t1
            if self.params.check_every and k % self.params.check_every == 0:
                self.audit()
            k += 1
        # the horizon closes at the last completion or admission decision,
        # not at the boundary of the step that contained it
        self.end = max([0.0] + [r.done_at for r in self.finished] + [r.decided_at for r in self.admissions.values()])
        self.now = max(self._cpu_mark, self.end)
        self._note_cpu()
        self.audit(final=True)
        return self.report()

    def audit(self, final: bool = False):
        try:
            self.ent.check()
            self.phys.check(soft=())
        except LedgerError as exc:
            raise InvariantViolation(str(exc)) from exc
        for run in self.running.values():
            p = run.progress
            if np.any(np.diff(p) > 1e-6 * run.volume_bits):
                raise InvariantViolation(f"task {run.spec.id}: downstream ahead of upstream")
        if final:
            if not self.ent.is_pristine() or not self.phys.is_pristine():
                raise InvariantViolation("resources still held after the run")
            if self.running or self.holds:
                raise InvariantViolation("tasks still running after the run")

    def report(self) -> MetricsReport:
        offered = len(self.tasks)
        accepted = sum(1 for r in self.admissions.values() if r.outcome == "accepted")
        done = self.finished
        T = self.end if self.end > 0 else 1.0
        devs = [r.deviation(r.spec.window) for r in done]
        elong = [r.elongation() for r in done]
        return MetricsReport(
            offered=offered,
            accepted=accepted,
            completed=len(done),
            throughput_mbps=self._delivered / T / MBPS if self.end > 0 else 0.0,
            tasks_per_hour=len(done) / T * 3600.0 if self.end > 0 else 0.0,
            acceptance_ratio=accepted / offered if offered else 1.0,
            cpu_utilization=self._cpu_integral / (self._cpu_total * T) if self._cpu_total > 0 and self.end > 0 else 0.0,
            dedicated_link_utilization=self._carried / (self._link_total * T) if self._link_total > 0 and self.end > 0 else 0.0,
            sla_deviation=float(np.mean(devs)) if devs else 0.0,
            elongation=float(np.mean(elong)) if elong else 0.0,
            duration=self.end,
            map_messages=self._map_messages / offered if offered else 0.0,
            spec_misses=self._spec_misses,
        )

    def admission_rows(self) -> list[AdmissionRecord]:
        return [self.admissions[k] for k in sorted(self.admissions)]


def simulate(graph, catalog, workload, params: EngineParams = EngineParams(), seed: int = 0):
    sim = Simulation(graph, catalog, workload, params, seed)
    report = sim.run()
    return report, sim
