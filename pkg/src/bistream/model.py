"""Domain types shared across the simulator and the rate/revenue derivations.

Rates are bits per second, CPU amounts are in "rate units" (CPU usage factor
times input rate) and money is held as integer micro-units so that revenue
splits can be checked for exact conservation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

MBPS = 1e6
MB = 1e6


class SpecificationError(ValueError):
    """A task refers to something that does not exist or is malformed."""


class ConfigurationError(ValueError):
    """A scenario or pricing parameter is out of range."""


@dataclass(frozen=True)
class ServiceType:
    id: int
    cpu_usage_factor: float
    bandwidth_shrinkage_factor: float

    def __post_init__(self):
        if self.cpu_usage_factor <= 0 or self.bandwidth_shrinkage_factor <= 0:
            raise SpecificationError(f"service {self.id}: factors must be > 0")


def make_catalog(services: Sequence[ServiceType]) -> dict[int, ServiceType]:
    catalog: dict[int, ServiceType] = {}
    for s in services:
        if s.id in catalog:
            raise SpecificationError(f"duplicate service id {s.id}")
        catalog[s.id] = s
    return catalog


@dataclass(frozen=True)
class TaskSpec:
    id: int
    source: int
    delivery: int
    services: tuple[int, ...]
    delivery_rate: float
    window: float
    price_per_byte: int
    volume: float
    arrival_time: float = 0.0

    def __post_init__(self):
        if not self.services:
            raise SpecificationError(f"task {self.id}: empty service chain")
        if self.delivery_rate <= 0 or self.window <= 0 or self.volume <= 0:
            raise SpecificationError(f"task {self.id}: rate, window and volume must be > 0")
        if self.price_per_byte < 0:
            raise SpecificationError(f"task {self.id}: negative price")

    @property
    def m(self) -> int:
        return len(self.services)


@dataclass(frozen=True)
class DerivedRequirements:
    """Per-component input rate and CPU need, and per-hop bandwidth.

    ``hop_bw`` has ``m + 1`` entries: hop 0 is source -> first component and
    hop ``m`` is last component -> delivery node.
    """

    input_rate: tuple[float, ...]
    cpu_req: tuple[float, ...]
    hop_bw: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.cpu_req)


@dataclass(frozen=True)
class PricingPlan:
    per_component_revenue: tuple[int, ...]
    forwarding_price: int
    max_null: tuple[int, ...] = field(default=())

    def hop_budget(self, hop: int) -> int:
        return self.max_null[hop]


def derive_requirements(task: TaskSpec, catalog: Mapping[int, ServiceType]) -> DerivedRequirements:
    """Propagate the delivery rate backwards through the service chain."""
    try:
        chain = [catalog[s] for s in task.services]
    except KeyError as exc:
        raise SpecificationError(f"task {task.id}: unknown service {exc.args[0]}") from None
    m = len(chain)
    rates = [0.0] * m
    out = task.delivery_rate
    for i in range(m - 1, -1, -1):
        rates[i] = out / chain[i].bandwidth_shrinkage_factor
        out = rates[i]
    cpu = tuple(chain[i].cpu_usage_factor * rates[i] for i in range(m))
    hop_bw = tuple(rates) + (task.delivery_rate,)
    return DerivedRequirements(input_rate=tuple(rates), cpu_req=cpu, hop_bw=hop_bw)


def split_proportional(total: int, weights: Sequence[float]) -> tuple[int, ...]:
    """Integer split of ``total`` proportional to ``weights`` (largest remainder).

    Ties in the fractional part go to the lower index, so the result is
    deterministic and always sums to ``total``.
    """
    ws = [Fraction(w) for w in weights]
    wsum = sum(ws)
    if wsum <= 0:
        raise ConfigurationError("weights must have a positive sum")
    quotas = [total * w / wsum for w in ws]
    base = [q.numerator // q.denominator for q in quotas]
    left = total - sum(base)
    order = sorted(range(len(ws)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return tuple(base)


def apportion_revenue(
    task: TaskSpec,
    reqs: DerivedRequirements,
    forwarding_price: int,
    max_null_override: int | None = None,
) -> PricingPlan:
    """Split the per-byte price across components in proportion to CPU work.

    The forwarding budget of hop ``h`` is paid from the revenue of the
    component that sends it (component ``h``); hop 0 leaves the data source,
    which earns nothing, so it borrows the first component's share.
    """
    if forwarding_price <= 0:
        raise ConfigurationError("forwarding_price must be > 0")
    shares = split_proportional(task.price_per_byte, reqs.cpu_req)
    if max_null_override is not None:
        if max_null_override < 0:
            raise ConfigurationError("max_null must be >= 0")
        budget = (max_null_override,) * (reqs.m + 1)
    else:
        payer = [shares[0]] + list(shares)
        budget = tuple(max(0, p // forwarding_price) for p in payer)
    return PricingPlan(per_component_revenue=shares, forwarding_price=forwarding_price, max_null=budget)


def hop_payer_share(plan: PricingPlan, hop: int) -> int:
    """Revenue per byte of the component paying for ``hop``."""
    return plan.per_component_revenue[max(0, hop - 1)]
