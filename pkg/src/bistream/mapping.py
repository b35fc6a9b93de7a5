"""Partial and feasible maps, pruning strategies, and map ranking.

A map places the task's components on servers (``assign``) and each task hop
on a route (``hops``). Hop ``h`` joins component ``h - 1`` (the data source
for ``h == 0``) to component ``h`` (the delivery node for ``h == m``). A route
is a node tuple plus a link class:

``Z``   zero-length, both ends on one server, written ``(v, v)``
``D1``  a single dedicated link
``DM``  a walk over several dedicated links (the inner nodes only forward)
``P``   an end-to-end public network connection
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

Z, D1, DM, P = "Z", "D1", "DM", "P"
DEDICATED = (D1, DM)


def hop_class(path: tuple[int, ...], public: bool = False) -> str:
    if public:
        return P
    if len(path) == 2 and path[0] == path[1]:
        return Z
    return D1 if len(path) == 2 else DM


class PartialMap(NamedTuple):
    """Map of the first ``prefix`` components, travelling as a message.

    ``trail`` is the route walked so far by the hop currently being mapped,
    starting at the node that holds the last placed component (or at the
    source). ``trail_public`` marks a trail that is a public connection.
    A named tuple rather than a dataclass: millions of these are built per
    simulated run.
    """

    assign: tuple[int, ...]
    hops: tuple[tuple[tuple[int, ...], str], ...]
    trail: tuple[int, ...]
    trail_public: bool = False
    cost: int = 0

    @property
    def prefix(self) -> int:
        return len(self.assign)

    @property
    def empty_hops(self) -> int:
        """Forward-only nodes in the current trail."""
        return max(0, len(self.trail) - 2)


@dataclass(frozen=True, slots=True)
class FeasibleMap:
    assign: tuple[int, ...]
    hops: tuple[tuple[tuple[int, ...], str], ...]
    cost: int
    seq: int = 0

    @property
    def key(self):
        return (self.assign, self.hops)

    @property
    def dedicated_hops(self) -> int:
        return sum(1 for _, c in self.hops if c in DEDICATED)

    @property
    def public_hops(self) -> int:
        return sum(1 for _, c in self.hops if c == P)

    def edges(self, hop: int) -> list[tuple[int, int]]:
        path, cls = self.hops[hop]
        if cls not in DEDICATED:
            return []
        return list(zip(path, path[1:]))

    def servers(self) -> list[int]:
        return sorted(set(self.assign))

    def cpu_by_node(self, cpu_req: Sequence[float]) -> dict[int, float]:
        out: dict[int, float] = {}
        for i, v in enumerate(self.assign):
            out[v] = out.get(v, 0.0) + cpu_req[i]
        return out


def walk_cost(path: Sequence[int], cost_of: Callable[[int, int], int]) -> int:
    return sum(cost_of(a, b) for a, b in zip(path, path[1:]))


def validate_map(
    fmap: FeasibleMap,
    source: int,
    delivery: int,
    cpu_req: Sequence[float],
    hop_bw: Sequence[float],
    cpu_avail: Callable[[int], float],
    bw_avail: Callable[[int, int], float | None],
    uplink_avail: Callable[[int], float],
    max_null: Sequence[int],
    cost_of: Callable[[int, int], int],
) -> list[str]:
    """Re-check a complete map against the capacity, bandwidth and budget rules.

    Returns a list of violations (empty when the map is sound).
    """
    problems = []
    m = len(cpu_req)
    if len(fmap.assign) != m or len(fmap.hops) != m + 1:
        return ["wrong shape"]
    ends = [source, *fmap.assign, delivery]
    for h, (path, cls) in enumerate(fmap.hops):
        if path[0] != ends[h] or path[-1] != ends[h + 1]:
            problems.append(f"hop {h} endpoints {path[0]}->{path[-1]} != {ends[h]}->{ends[h + 1]}")
        if cls == Z:
            if len(path) != 2 or path[0] != path[1]:
                problems.append(f"hop {h} is not zero-length")
        elif cls == P:
            if len(path) != 2 or path[0] == path[1]:
                problems.append(f"hop {h} bad public route")
            elif uplink_avail(path[0]) < hop_bw[h]:
                problems.append(f"hop {h} uplink short")
        else:
            if path[0] == path[-1]:
                problems.append(f"hop {h} returns to its start")
            if len(path) - 1 > max_null[h] + 1:
                problems.append(f"hop {h} exceeds forwarding budget")
            for a, b in zip(path, path[1:]):
                bw = bw_avail(a, b)
                if bw is None or bw < hop_bw[h]:
                    problems.append(f"hop {h} edge {a}-{b} short")
    for v, need in fmap.cpu_by_node(cpu_req).items():
        if need > cpu_avail(v):
            problems.append(f"node {v} over capacity")
    expect = sum(walk_cost(p, cost_of) for p, c in fmap.hops if c in DEDICATED)
    if expect != fmap.cost:
        problems.append(f"cost {fmap.cost} != {expect}")
    return problems


# ---------------------------------------------------------------------------
# pruning strategies

EXHAUSTIVE = "exhaustive"
LEAST_COST = "least-cost"
ANNEALED = "annealed"
RANDOM_NEIGHBOR = "random-neighbor"
STRATEGIES = (EXHAUSTIVE, LEAST_COST, ANNEALED, RANDOM_NEIGHBOR)


@dataclass(frozen=True)
class Strategy:
    kind: str = LEAST_COST
    p0: float = 0.5
    lam: float = 0.5
    k: int = 1

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if not 0.0 <= self.p0 <= 1.0 or self.lam < 0 or self.k < 1:
            raise ValueError("bad strategy parameters")

    @property
    def gated(self) -> bool:
        return self.kind != EXHAUSTIVE


def apply_heuristic(
    strategy: Strategy,
    candidate: PartialMap,
    least_cost: list[float],
    rng: np.random.Generator | None,
) -> bool:
    """Decide whether ``candidate`` is extended further, updating the table.

    The table is indexed by prefix length and lowered only on a strict
    improvement.
    """
    if not strategy.gated:
        return True
    j = candidate.prefix
    if candidate.cost < least_cost[j]:
        least_cost[j] = candidate.cost
        return True
    if strategy.kind == ANNEALED and strategy.p0 > 0:
        return bool(rng.random() < strategy.p0 * math.exp(-strategy.lam * j))
    return False


def pick_neighbors(strategy: Strategy, eligible: list[int], rng: np.random.Generator | None) -> list[int]:
    if strategy.kind != RANDOM_NEIGHBOR or len(eligible) <= strategy.k:
        return eligible
    idx = rng.choice(len(eligible), size=strategy.k, replace=False)
    return [eligible[i] for i in sorted(idx)]


# ---------------------------------------------------------------------------
# ranking


@dataclass(frozen=True)
class MapScore:
    load_balance: float
    dedicated_hops: int
    public_hops: int


def score_map(
    fmap: FeasibleMap,
    cpu_req: Sequence[float],
    committed: Callable[[int], float],
    capacity: Callable[[int], float],
) -> MapScore:
    loads = []
    for v, need in fmap.cpu_by_node(cpu_req).items():
        cap = capacity(v)
        loads.append(min(1.0, (committed(v) + need) / cap) if cap > 0 else 1.0)
    lb = float(np.mean(loads)) if loads else 0.0
    return MapScore(lb, fmap.dedicated_hops, fmap.public_hops)


def score_and_select(
    feasibles: Sequence[FeasibleMap],
    scores: Mapping[int, MapScore] | Sequence[MapScore],
    tolerance: float = 0.1,
) -> list[int]:
    """Indices of ``feasibles`` in preference order.

    Maps whose load-balance factor lies within ``tolerance`` of the best
    remaining one form a tier; inside a tier more dedicated hops win, then
    fewer public hops, then earlier discovery. Tiers are peeled repeatedly.
    """
    left = list(range(len(feasibles)))
    out: list[int] = []
    while left:
        best = min(scores[i].load_balance for i in left)
        tier = [i for i in left if scores[i].load_balance <= best + tolerance + 1e-12]
        tier.sort(key=lambda i: (-scores[i].dedicated_hops, scores[i].public_hops, feasibles[i].seq))
        out.extend(tier)
        chosen = set(tier)
        left = [i for i in left if i not in chosen]
    return out
