"""Resource network and workload generation, plus a line-oriented text format.

Every generator is a pure function of its parameters and a seed; each concern
draws from its own numpy stream (see :func:`rng_for`) so that switching one
feature on or off does not shift the random draws of another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .model import (
    MB,
    MBPS,
    ConfigurationError,
    DerivedRequirements,
    ServiceType,
    SpecificationError,
    TaskSpec,
)

# stream ids for rng_for
TOPOLOGY, CAPACITY, WORKLOAD, PERTURB, ANNEAL, PHASE, CATALOG, BENCH, NEIGHBOR = range(1, 10)


def rng_for(seed: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream, *map(int, extra)])


@dataclass(frozen=True)
class ServerNode:
    id: int
    cpu_capacity: float = 0.0
    hosted_services: frozenset[int] = frozenset()
    uplink_bw: float = 0.0
    downlink_bw: float = 0.0


@dataclass(frozen=True)
class DedicatedLink:
    u: int
    v: int
    bandwidth: float = 0.0
    cost: int = 1
    delay: float = 0.0

    def __post_init__(self):
        if self.u == self.v:
            raise SpecificationError("self-loop link")
        if self.u > self.v:
            a, b = self.v, self.u
            object.__setattr__(self, "u", a)
            object.__setattr__(self, "v", b)

    def other(self, node: int) -> int:
        return self.v if node == self.u else self.u


@dataclass
class ResourceGraph:
    nodes: list[ServerNode]
    links: list[DedicatedLink]
    public_delay: np.ndarray | None = None
    directory: dict[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        self._adj: dict[int, list[tuple[int, DedicatedLink]]] = {n.id: [] for n in self.nodes}
        self._edge: dict[tuple[int, int], DedicatedLink] = {}
        for link in self.links:
            if (link.u, link.v) in self._edge:
                raise SpecificationError(f"duplicate link {link.u}-{link.v}")
            self._edge[(link.u, link.v)] = link
            self._edge[(link.v, link.u)] = link
            self._adj[link.u].append((link.v, link))
            self._adj[link.v].append((link.u, link))
        for lst in self._adj.values():
            lst.sort(key=lambda t: t[0])
        if not self.directory:
            self.directory = build_directory(self.nodes)
        if self.public_delay is None:
            self.public_delay = np.zeros((len(self.nodes), len(self.nodes)))

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node(self, i: int) -> ServerNode:
        return self.nodes[i]

    def neighbors(self, u: int) -> list[tuple[int, DedicatedLink]]:
        return self._adj[u]

    def link(self, u: int, v: int) -> DedicatedLink | None:
        return self._edge.get((u, v))

    def degree(self, u: int) -> int:
        return len(self._adj[u])

    def degrees(self) -> list[int]:
        return [len(self._adj[n.id]) for n in self.nodes]

    def hosts(self, service: int) -> frozenset[int]:
        return self.directory.get(service, frozenset())

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v, _ in self._adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def hop_distance(self) -> np.ndarray:
        """All-pairs dedicated hop counts (``n + 1`` where unreachable), cached."""
        d = getattr(self, "_hops", None)
        if d is None:
            n = self.n
            d = np.full((n, n), n + 1, dtype=np.int64)
            for s in range(n):
                d[s, s] = 0
                frontier = [s]
                while frontier:
                    nxt = []
                    for u in frontier:
                        for v, _ in self._adj[u]:
                            if d[s, v] > d[s, u] + 1:
                                d[s, v] = d[s, u] + 1
                                nxt.append(v)
                    frontier = nxt
            self._hops = d
        return d

    def detours(self, src: int, dst: int, k_max: int) -> list[tuple[int, tuple[int, ...]]]:
        """Simple dedicated paths of 2..k_max edges from ``src`` to ``dst``, cheapest first.

        Returned as ``(cost, nodes)`` sorted by cost then node sequence; cached
        because the topology never changes during a run.
        """
        cache = self.__dict__.setdefault("_detours", {})
        key = (src, dst, k_max)
        out = cache.get(key)
        if out is None:
            hops = self.hop_distance()[:, dst].tolist()
            out = []
            stack = [(src, (src,), 0)]
            while stack:
                u, path, cost = stack.pop()
                for v, link in self._adj[u]:
                    if v in path or len(path) + hops[v] > k_max:
                        continue
                    if v == dst:
                        if len(path) >= 2:
                            out.append((cost + link.cost, path + (v,)))
                    else:
                        stack.append((v, path + (v,), cost + link.cost))
            out.sort()
            cache[key] = out
        return out

    def with_nodes(self, nodes: list[ServerNode]) -> "ResourceGraph":
        return ResourceGraph(nodes=nodes, links=list(self.links), public_delay=self.public_delay)


def build_directory(nodes: Iterable[ServerNode]) -> dict[int, frozenset[int]]:
    acc: dict[int, set[int]] = {}
    for n in nodes:
        for s in n.hosted_services:
            acc.setdefault(s, set()).add(n.id)
    return {s: frozenset(v) for s, v in acc.items()}


def stale_directory(graph: ResourceGraph, fraction: float, seed: int) -> dict[int, frozenset[int]]:
    """Directory where ``fraction`` of the (service, host) entries point to a wrong host."""
    rng = rng_for(seed, CATALOG, 99)
    out: dict[int, frozenset[int]] = {}
    for s in sorted(graph.directory):
        hosts = []
        for h in sorted(graph.directory[s]):
            hosts.append(int(rng.integers(graph.n)) if rng.random() < fraction else h)
        out[s] = frozenset(hosts)
    return out


# ---------------------------------------------------------------------------
# topology


def _pick_weighted(rng: np.random.Generator, weights: Sequence[float]) -> int:
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return int(rng.integers(len(w)))
    return int(rng.choice(len(w), p=w / total))


def preferential_edges(n: int, links: int, rng: np.random.Generator, m: int = 1) -> list[tuple[int, int]]:
    """Grow a graph by degree-preferential attachment.

    With ``m == 1`` and ``links >= n - 1`` this is a random tree plus
    ``links - (n - 1)`` extra edges whose endpoints are both sampled in
    proportion to degree. With fewer links than a spanning tree only a random
    subset of the arriving nodes attaches, leaving the rest isolated. With
    ``m > 1`` every arriving node brings ``m`` edges (Barabasi-Albert).
    """
    if n < 1:
        raise ConfigurationError("need at least one node")
    if links < 0 or links > n * (n - 1) // 2:
        raise ConfigurationError(f"{links} links infeasible for {n} nodes")
    deg = [0] * n
    edges: set[tuple[int, int]] = set()

    def add(a: int, b: int):
        edges.add((min(a, b), max(a, b)))
        deg[a] += 1
        deg[b] += 1

    if m == 1:
        growth = min(links, n - 1)
        attaching = set((rng.permutation(np.arange(1, n))[:growth]).tolist()) if growth < n - 1 else set(range(1, n))
        for i in range(1, n):
            if i not in attaching:
                continue
            w = deg[:i]
            target = _pick_weighted(rng, w) if sum(w) > 0 else int(rng.integers(i))
            add(i, target)
    else:
        core = m + 1
        for a in range(min(core, n)):
            for b in range(a):
                if len(edges) < links:
                    add(a, b)
        for i in range(core, n):
            chosen: set[int] = set()
            while len(chosen) < min(m, i):
                chosen.add(_pick_weighted(rng, deg[:i]))
            for t in sorted(chosen):
                if len(edges) < links:
                    add(i, t)
    # extra edges, both endpoints preferential
    misses = 0
    while len(edges) < links:
        a = _pick_weighted(rng, deg)
        b = _pick_weighted(rng, deg)
        key = (min(a, b), max(a, b))
        if a == b or key in edges:
            misses += 1
            if misses > 50 * n:
                free = [(x, y) for x in range(n) for y in range(x + 1, n) if (x, y) not in edges]
                a, b = free[int(rng.integers(len(free)))]
                misses = 0
            else:
                continue
        add(a, b)
    return sorted(edges)


def generate_dedicated_topology(n: int, links: int, seed: int, m: int = 1) -> ResourceGraph:
    if n < 1:
        raise ConfigurationError("need at least one node")
    edges = preferential_edges(n, links, rng_for(seed, TOPOLOGY), m=m)
    return ResourceGraph(nodes=[ServerNode(i) for i in range(n)], links=[DedicatedLink(a, b) for a, b in edges])


@dataclass(frozen=True)
class PlatformParams:
    k_instances: int = 2
    service_multiplier: float = 1.0
    mean_delivery_rate: float = 1.0 * MBPS
    lastmile_range: tuple[float, float] = (1.0 * MBPS, 2.0 * MBPS)
    dedicated_bw_range: tuple[float, float] = (1.0 * MBPS, 10.0 * MBPS)
    dedicated_delay_range: tuple[float, float] = (0.001, 0.010)
    public_delay_range: tuple[float, float] = (0.010, 0.100)
    base_cost: int = 1
    delay_cost: bool = False
    allow_replacement: bool = False


def mean_service_demand(catalog: dict[int, ServiceType], rate: float) -> float:
    return float(np.mean([s.cpu_usage_factor for s in catalog.values()])) * rate


def public_delay_matrix(n: int, lo: float, hi: float, rng: np.random.Generator) -> np.ndarray:
    d = rng.uniform(lo, hi, size=(n, n))
    d = np.triu(d, 1)
    d = d + d.T
    return d


def assign_capacities(
    graph: ResourceGraph,
    catalog: dict[int, ServiceType],
    params: PlatformParams,
    seed: int,
) -> ResourceGraph:
    rng = rng_for(seed, CAPACITY)
    ids = sorted(catalog)
    demand = mean_service_demand(catalog, params.mean_delivery_rate)
    nodes = []
    for node in graph.nodes:
        want = 1 + int(round(params.service_multiplier * graph.degree(node.id)))
        if want > len(ids) and not params.allow_replacement:
            raise ConfigurationError(
                f"catalog of {len(ids)} services too small for node {node.id} needing {want}"
            )
        if want <= len(ids):
            hosted = rng.choice(ids, size=want, replace=False)
        else:
            hosted = rng.choice(ids, size=want, replace=True)
        hosted_set = frozenset(int(s) for s in hosted)
        lo, hi = params.lastmile_range
        up = float(rng.uniform(lo, hi))
        down = float(rng.uniform(lo, hi))
        cpu = params.k_instances * len(hosted_set) * demand
        nodes.append(ServerNode(node.id, cpu, hosted_set, up, down))
    links = []
    for link in graph.links:
        bw = float(rng.uniform(*params.dedicated_bw_range))
        delay = float(rng.uniform(*params.dedicated_delay_range))
        cost = max(1, int(round(delay * 1000))) if params.delay_cost else params.base_cost
        links.append(replace(link, bandwidth=bw, delay=delay, cost=cost))
    pdelay = public_delay_matrix(graph.n, *params.public_delay_range, rng)
    return ResourceGraph(nodes=nodes, links=links, public_delay=pdelay)


def without_public(graph: ResourceGraph) -> ResourceGraph:
    nodes = [replace(n, uplink_bw=0.0, downlink_bw=0.0) for n in graph.nodes]
    return ResourceGraph(nodes=nodes, links=list(graph.links), public_delay=graph.public_delay)


def without_dedicated(graph: ResourceGraph) -> ResourceGraph:
    return ResourceGraph(nodes=list(graph.nodes), links=[], public_delay=graph.public_delay)


# ---------------------------------------------------------------------------
# workload


@dataclass(frozen=True)
class WorkloadParams:
    count: int = 500
    arrival_rate: float = 60.0  # tasks per hour
    components: int = 10
    rate_range: tuple[float, float] = (0.5 * MBPS, 1.5 * MBPS)
    volume_range: tuple[float, float] = (50 * MB, 150 * MB)
    window: float = 10.0
    price_range: tuple[int, int] = (20, 40)


@dataclass(frozen=True)
class CatalogParams:
    services: int = 25
    cpu_factor_range: tuple[float, float] = (0.5, 1.5)
    shrinkage_range: tuple[float, float] = (0.8, 1.25)


def generate_catalog(params: CatalogParams, seed: int) -> dict[int, ServiceType]:
    rng = rng_for(seed, CATALOG)
    lo, hi = params.shrinkage_range
    out = {}
    for i in range(params.services):
        cpu = float(rng.uniform(*params.cpu_factor_range))
        shrink = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        out[i] = ServiceType(i, cpu, shrink)
    return out


@dataclass
class Workload:
    tasks: list[TaskSpec]

    def __post_init__(self):
        times = [t.arrival_time for t in self.tasks]
        if any(b < a for a, b in zip(times, times[1:])):
            raise SpecificationError("arrival times must be non-decreasing")


def generate_workload(
    params: WorkloadParams,
    catalog: dict[int, ServiceType],
    graph: ResourceGraph,
    seed: int,
) -> Workload:
    if params.count < 0:
        raise ConfigurationError("task count must be >= 0")
    if params.arrival_rate <= 0:
        raise ConfigurationError("arrival rate must be > 0")
    rng = rng_for(seed, WORKLOAD)
    ids = sorted(catalog)
    mean_gap = 3600.0 / params.arrival_rate
    t = 0.0
    tasks = []
    for tid in range(params.count):
        t += float(rng.exponential(mean_gap))
        services = tuple(int(s) for s in rng.choice(ids, size=params.components, replace=True))
        src = int(rng.integers(graph.n))
        dst = int(rng.integers(graph.n))
        rate = float(rng.uniform(*params.rate_range))
        vol = float(rng.uniform(*params.volume_range))
        price = int(rng.integers(params.price_range[0], params.price_range[1] + 1))
        tasks.append(TaskSpec(tid, src, dst, services, rate, params.window, price, vol, t))
    return Workload(tasks)


# ---------------------------------------------------------------------------
# heuristic benchmark scenario


@dataclass(frozen=True)
class BenchmarkParams:
    attach: int = 2
    components: int = 10
    services: int = 25
    bw_range: tuple[float, float] = (10 * MBPS, 1000 * MBPS)
    bw_shape: float = 1.5
    capacity_range: tuple[float, float] = (1.0, 100.0)
    capacity_shape: float = 1.5
    requirement_fraction: float = 0.5
    requirement_cv: float = 0.25
    delay_range: tuple[float, float] = (0.001, 0.010)
    max_null: int = 2
    host_all: bool = True


def truncated_pareto(rng: np.random.Generator, lo: float, hi: float, shape: float, size=None):
    u = rng.random(size)
    tail = 1.0 - (lo / hi) ** shape
    return lo * (1.0 - u * tail) ** (-1.0 / shape)


def truncated_normal(rng: np.random.Generator, mean: float, sd: float) -> float:
    while True:
        x = float(rng.normal(mean, sd))
        if x > 0:
            return x


@dataclass(frozen=True)
class BenchmarkInstance:
    graph: ResourceGraph
    task: TaskSpec
    reqs: DerivedRequirements
    max_null: int


def generate_benchmark_scenario(n: int, seed: int, params: BenchmarkParams = BenchmarkParams()) -> BenchmarkInstance:
    if not 30 <= n <= 120:
        raise ConfigurationError("benchmark size must be within [30, 120]")
    rng = rng_for(seed, BENCH, n)
    m_attach = params.attach
    links = (m_attach * (m_attach + 1)) // 2 + (n - m_attach - 1) * m_attach
    edges = preferential_edges(n, links, rng, m=m_attach)
    bws = truncated_pareto(rng, *params.bw_range, params.bw_shape, size=len(edges))
    delays = rng.uniform(*params.delay_range, size=len(edges))
    caps = truncated_pareto(rng, *params.capacity_range, params.capacity_shape, size=n)
    deg = [0] * n
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    ids = list(range(params.services))
    nodes = []
    for i in range(n):
        want = min(params.services, 1 + deg[i])
        picked = rng.choice(ids, size=want, replace=False)
        hosted = frozenset(ids) if params.host_all else frozenset(int(s) for s in picked)
        nodes.append(ServerNode(i, float(caps[i]), hosted, 0.0, 0.0))
    graph = ResourceGraph(
        nodes=nodes,
        links=[DedicatedLink(a, b, float(bw), 1, float(d)) for (a, b), bw, d in zip(edges, bws, delays)],
        public_delay=public_delay_matrix(n, 0.01, 0.1, rng),
    )
    services = tuple(int(s) for s in rng.choice(ids, size=params.components, replace=True))
    src, dst = (int(x) for x in rng.choice(n, size=2, replace=False))
    mean_bw = float(np.mean(bws))
    mean_cap = float(np.mean(caps))
    f, cv = params.requirement_fraction, params.requirement_cv
    hop_bw = tuple(truncated_normal(rng, f * mean_bw, cv * f * mean_bw) for _ in range(params.components + 1))
    cpu = tuple(truncated_normal(rng, f * mean_cap, cv * f * mean_cap) for _ in range(params.components))
    task = TaskSpec(0, src, dst, services, hop_bw[-1], 10.0, 0, 1.0, 0.0)
    reqs = DerivedRequirements(input_rate=hop_bw[:-1], cpu_req=cpu, hop_bw=hop_bw)
    return BenchmarkInstance(graph, task, reqs, params.max_null)


# ---------------------------------------------------------------------------
# text format
#
#   node  <id> <cpu> <uplink> <downlink> <svc,svc,...|->
#   link  <u> <v> <bandwidth> <cost> <delay>
#   pdelay <u> <d(u,0)> ... <d(u,n-1)>
#   task  <id> <arrival> <source> <delivery> <rate> <window> <price> <volume> <svc,svc,...>
#
# floats are written with repr() so a dump/load round trip is bit-exact.


def _svc(s: Iterable[int]) -> str:
    s = sorted(s) if isinstance(s, (set, frozenset)) else list(s)
    return ",".join(map(str, s)) if s else "-"


def _unsvc(text: str) -> list[int]:
    return [] if text == "-" else [int(x) for x in text.split(",")]


def dump_scenario(out: TextIO, graph: ResourceGraph, tasks: Sequence[TaskSpec] = ()):
    out.write("# bistream scenario v1\n")
    for n in graph.nodes:
        out.write(f"node {n.id} {n.cpu_capacity!r} {n.uplink_bw!r} {n.downlink_bw!r} {_svc(n.hosted_services)}\n")
    for l in graph.links:
        out.write(f"link {l.u} {l.v} {l.bandwidth!r} {l.cost} {l.delay!r}\n")
    for u in range(graph.n):
        row = " ".join(repr(float(x)) for x in graph.public_delay[u])
        out.write(f"pdelay {u} {row}\n")
    for t in tasks:
        out.write(
            f"task {t.id} {t.arrival_time!r} {t.source} {t.delivery} {t.delivery_rate!r} "
            f"{t.window!r} {t.price_per_byte} {t.volume!r} {_svc(t.services)}\n"
        )


def load_scenario(lines: Iterable[str]) -> tuple[ResourceGraph, list[TaskSpec]]:
    nodes, links, rows, tasks = [], [], {}, []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, *f = line.split()
        try:
            if kind == "node":
                nodes.append(ServerNode(int(f[0]), float(f[1]), frozenset(_unsvc(f[4])), float(f[2]), float(f[3])))
            elif kind == "link":
                links.append(DedicatedLink(int(f[0]), int(f[1]), float(f[2]), int(f[3]), float(f[4])))
            elif kind == "pdelay":
                rows[int(f[0])] = [float(x) for x in f[1:]]
            elif kind == "task":
                tasks.append(
                    TaskSpec(int(f[0]), int(f[2]), int(f[3]), tuple(_unsvc(f[8])), float(f[4]), float(f[5]), int(f[6]), float(f[7]), float(f[1]))
                )
            else:
                raise SpecificationError(f"unknown record '{kind}'")
        except (IndexError, ValueError) as exc:
            raise SpecificationError(f"line {lineno}: {exc}") from None
    nodes.sort(key=lambda n: n.id)
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise SpecificationError("node ids must be 0..n-1")
    pd = np.array([rows[i] for i in range(len(nodes))]) if rows else None
    return ResourceGraph(nodes=nodes, links=links, public_delay=pd), tasks
