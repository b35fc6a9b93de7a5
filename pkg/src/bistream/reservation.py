"""Admission: lock a chosen map's resources hop by hop, or roll back.

Resources are keyed as ``("cpu", v)``, ``("bw", u, v)`` for the directed
half of a dedicated link, and ``("up", v)`` / ``("down", v)`` for the public
last mile. Usage on each key is always recomputed as an exact sum of the
holders' amounts, so releasing everything restores the initial residual bit
for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

from .mapping import DEDICATED, P, FeasibleMap
from .model import DerivedRequirements, TaskSpec
from .topology import ResourceGraph

Key = tuple
EPS = 1e-9


class LedgerError(AssertionError):
    pass


@dataclass
class Ledger:
    capacity: dict[Key, float]
    used: dict[Key, float] = field(default_factory=dict)
    holders: dict[Key, dict[Hashable, float]] = field(default_factory=dict)
    owned: dict[Hashable, set[Key]] = field(default_factory=dict)

    @classmethod
    def for_graph(cls, graph: ResourceGraph, cpu=True, links=True, public=True) -> "Ledger":
        cap: dict[Key, float] = {}
        for n in graph.nodes:
            if cpu:
                cap[("cpu", n.id)] = n.cpu_capacity
            if public:
                cap[("up", n.id)] = n.uplink_bw
                cap[("down", n.id)] = n.downlink_bw
        if links:
            for l in graph.links:
                cap[("bw", l.u, l.v)] = l.bandwidth
                cap[("bw", l.v, l.u)] = l.bandwidth
        return cls(cap)

    def residual(self, key: Key) -> float:
        return self.capacity.get(key, 0.0) - self.used.get(key, 0.0)

    def fits(self, key: Key, amount: float) -> bool:
        cap = self.capacity.get(key)
        if cap is None:
            return False
        return self.used.get(key, 0.0) + amount <= cap * (1 + EPS) + EPS

    def _set(self, owner, key: Key, amount: float):
        h = self.holders.setdefault(key, {})
        if amount > 0:
            h[owner] = amount
            self.owned.setdefault(owner, set()).add(key)
        else:
            h.pop(owner, None)
            keys = self.owned.get(owner)
            if keys is not None:
                keys.discard(key)
                if not keys:
                    del self.owned[owner]
        if len(h) == 1:
            self.used[key] = next(iter(h.values()))
        elif h:
            self.used[key] = math.fsum(h.values())
        else:
            self.used.pop(key, None)
            del self.holders[key]

    def held(self, owner, key: Key) -> float:
        return self.holders.get(key, {}).get(owner, 0.0)

    def try_lock(self, owner, items: Iterable[tuple[Key, float]]) -> bool:
        """Lock every item or none. Repeated keys in one call aggregate."""
        want: dict[Key, float] = {}
        for key, amount in items:
            if amount < 0:
                raise LedgerError("negative lock")
            want[key] = want.get(key, 0.0) + amount
        for key, amount in want.items():
            if not self.fits(key, amount):
                return False
        for key, amount in want.items():
            if amount > 0:
                self._set(owner, key, self.held(owner, key) + amount)
        return True

    def force(self, owner, key: Key, amount: float):
        """Set ``owner``'s holding on ``key`` without a capacity check (soft annotations)."""
        self._set(owner, key, amount)

    def release(self, owner) -> dict[Key, float]:
        keys = self.owned.pop(owner, None)
        if not keys:
            return {}
        freed = {}
        for k in sorted(keys):
            h = self.holders[k]
            freed[k] = h.pop(owner)
            if len(h) == 1:
                self.used[k] = next(iter(h.values()))
            elif h:
                self.used[k] = math.fsum(h.values())
            else:
                del self.used[k]
                del self.holders[k]
        return freed

    def holdings(self, owner) -> dict[Key, float]:
        return {k: self.held(owner, k) for k in self.owned.get(owner, ())}

    def is_pristine(self) -> bool:
        return not self.used and not self.holders and not self.owned

    def check(self, keys: Iterable[Key] | None = None, soft: Sequence[str] = ("down",)):
        """Raise if any hard resource is oversubscribed."""
        for key in keys if keys is not None else list(self.used):
            if key[0] in soft:
                continue
            if not self.fits(key, 0.0):
                raise LedgerError(f"oversubscribed {key}: {self.used[key]} > {self.capacity.get(key)}")


@dataclass(frozen=True)
class ProbeStep:
    node: int
    items: tuple[tuple[Key, float], ...]
    soft: tuple[tuple[Key, float], ...] = ()


def probe_steps(fmap: FeasibleMap, task: TaskSpec, reqs: DerivedRequirements) -> list[ProbeStep]:
    """The map's locks in the order a probe meets them, delivery side first.

    Each hop is visited from its receiving end back to its sending end; the
    sender locks its outgoing bandwidth (or uplink) together with the CPU of
    the component it runs, if it has not been locked yet.
    """
    m = task.m
    steps: list[ProbeStep] = []
    for h in range(m, -1, -1):
        path, cls = fmap.hops[h]
        sender = path[0]
        if cls in DEDICATED:
            for a, b in reversed(list(zip(path, path[1:]))):
                items: list[tuple[Key, float]] = [(("bw", a, b), reqs.hop_bw[h])]
                if a == sender and h > 0:
                    items.append((("cpu", a), reqs.cpu_req[h - 1]))
                steps.append(ProbeStep(a, tuple(items)))
        else:
            items = []
            soft = ()
            if cls == P:
                items.append((("up", sender), reqs.hop_bw[h]))
                soft = ((("down", path[-1]), reqs.hop_bw[h]),)
            if h > 0:
                items.append((("cpu", sender), reqs.cpu_req[h - 1]))
            steps.append(ProbeStep(sender, tuple(items), soft))
    return steps


@dataclass
class Accepted:
    commitment: dict[Key, float]
    fmap: FeasibleMap


@dataclass
class Failed:
    position: int


class ReservationProbe:
    """A probe walking one map; :meth:`step` performs one node's locks."""

    def __init__(self, ledger: Ledger, owner, fmap: FeasibleMap, task: TaskSpec, reqs: DerivedRequirements):
        self.ledger = ledger
        self.owner = owner
        self.fmap = fmap
        self.steps = probe_steps(fmap, task, reqs)
        self.cursor = 0
        self.committed: list[tuple[Key, float]] = []
        self.outcome: Accepted | Failed | None = None

    @property
    def done(self) -> bool:
        return self.outcome is not None

    def step(self) -> Accepted | Failed | None:
        if self.outcome is not None:
            raise LedgerError("probe already finished")
        st = self.steps[self.cursor]
        if not self.ledger.try_lock(self.owner, st.items):
            self.rollback()
            self.outcome = Failed(self.cursor)
            return self.outcome
        self.committed.extend(st.items)
        for key, amount in st.soft:
            self.ledger.force(self.owner, key, self.ledger.held(self.owner, key) + amount)
            self.committed.append((key, amount))
        self.cursor += 1
        if self.cursor == len(self.steps):
            self.outcome = Accepted(self.ledger.holdings(self.owner), self.fmap)
        return self.outcome

    def rollback(self):
        self.ledger.release(self.owner)
        self.committed.clear()

    def run(self) -> Accepted | Failed:
        while self.outcome is None:
            self.step()
        return self.outcome


def probe(ledger: Ledger, owner, fmap: FeasibleMap, task: TaskSpec, reqs: DerivedRequirements) -> Accepted | Failed:
    return ReservationProbe(ledger, owner, fmap, task, reqs).run()


def admit(ledger: Ledger, owner, task: TaskSpec, reqs: DerivedRequirements, ranked: Sequence[FeasibleMap]):
    """Probe maps in rank order; returns ``(outcome, probes attempted)``."""
    for i, fmap in enumerate(ranked, 1):
        out = probe(ledger, owner, fmap, task, reqs)
        if isinstance(out, Accepted):
            return out, i
    return None, len(ranked)


def release(ledger: Ledger, owner) -> dict[Key, float]:
    if owner not in ledger.owned:
        raise LedgerError(f"nothing held by {owner!r}")
    return ledger.release(owner)
