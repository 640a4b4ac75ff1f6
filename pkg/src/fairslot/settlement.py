"""Payments, utilities and fairness diagnostics for a finished allocation.

The default payment rule charges the full budget once demand is met and
``u * (1 - gamma * I / sigma)`` otherwise. Note the direction: an unsatisfied
advertiser pays *more* the less influence they got, so utility jumps down by
``gamma * u`` exactly at ``I = sigma``. The ``"unmet_fraction"`` rule, which
discounts in proportion to the shortfall instead, is available for
experiments but is never the default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from . import oracle
from .algorithms import threshold_constant, valuations
from .influence import ExposureMatrix, influence
from .model import Advertiser, Allocation, Instance, validate_allocation

PAYMENT_RULES = ("discounted", "unmet_fraction")
TOL = 1e-9


class SettlementError(ValueError):
    pass


def payment(advertiser: Advertiser, achieved_influence: float, gamma: float,
            rule: str = "discounted") -> float:
    u, sigma = advertiser.budget, advertiser.demand
    if achieved_influence >= sigma:
        return u
    if rule == "discounted":
        return u * (1.0 - gamma * achieved_influence / sigma)
    if rule == "unmet_fraction":
        return u * (1.0 - gamma * (1.0 - achieved_influence / sigma))
    raise ValueError(f"unknown payment rule {rule!r}")


def utility(advertiser: Advertiser, achieved_influence: float, gamma: float,
            rule: str = "discounted") -> float:
    return advertiser.unit_value * achieved_influence - payment(
        advertiser, achieved_influence, gamma, rule)


@dataclass(frozen=True)
class AdvertiserSettlement:
    advertiser_id: str
    influence: float
    demand: float
    payment: float
    utility: float
    satisfied: bool
    empty_handed: bool

    @property
    def gap(self) -> float:
        return self.influence - self.demand


@dataclass(frozen=True)
class SettlementReport:
    rows: tuple[AdvertiserSettlement, ...]

    @property
    def total_payment(self) -> float:
        return sum(r.payment for r in self.rows)

    @property
    def total_utility(self) -> float:
        return sum(r.utility for r in self.rows)

    @property
    def mean_utility(self) -> float:
        return self.total_utility / len(self.rows) if self.rows else 0.0

    @property
    def n_satisfied(self) -> int:
        return sum(r.satisfied for r in self.rows)

    @property
    def n_empty_handed(self) -> int:
        return sum(r.empty_handed for r in self.rows)

    def csv_rows(self) -> list[list]:
        return [[r.advertiser_id, repr(r.influence), repr(r.demand), repr(r.payment),
                 repr(r.utility), int(r.satisfied), int(r.empty_handed)] for r in self.rows]


REPORT_HEADER = ["advertiser_id", "influence", "demand", "payment", "utility", "satisfied",
                 "empty_handed"]


def achieved_influences(instance: Instance, allocation: Allocation,
                        exposure: ExposureMatrix) -> list[float]:
    vals = valuations(instance, exposure)
    return [influence(vals[i], b) for i, b in enumerate(allocation.bundle_indices(instance))]


def settle(instance: Instance, allocation: Allocation, exposure: ExposureMatrix,
           rule: str = "discounted") -> SettlementReport:
    problems = validate_allocation(instance, allocation)
    if problems:
        raise SettlementError("; ".join(map(str, problems)))
    rows = []
    for adv, bundle, got in zip(instance.advertisers, allocation.bundles,
                                achieved_influences(instance, allocation, exposure)):
        rows.append(AdvertiserSettlement(
            adv.id, got, adv.demand, payment(adv, got, instance.gamma, rule),
            utility(adv, got, instance.gamma, rule), got >= adv.demand, not bundle))
    return SettlementReport(tuple(rows))


@dataclass(frozen=True)
class FairnessDiagnostic:
    """Maximin-share check per advertiser.

    ``own`` is the advertiser's utility for their bundle and ``rhs`` the share
    they are owed: in ``"exact"`` mode the best worst-bundle utility over all
    partitions, in ``"relaxed"`` mode their utility for the worst *other*
    bundle of the realized allocation. ``influence_pass`` is the influence
    form ``I_i(pi_i) >= c * M_i`` and is only filled when shares are given.
    """

    mode: str
    own: tuple[float, ...]
    rhs: tuple[float, ...]
    passed: tuple[bool, ...]
    worst_off: str
    influence_pass: tuple[bool, ...] | None = None
    c: float | None = None

    @property
    def all_pass(self) -> bool:
        ok = all(self.passed)
        return ok and (self.influence_pass is None or all(self.influence_pass))


def utility_valuation(advertiser: Advertiser, matrix: ExposureMatrix, gamma: float,
                      rule: str = "discounted") -> Callable[[Sequence[int]], float]:
    return lambda slots: utility(advertiser, influence(matrix, slots), gamma, rule)


def check_mms_fairness(instance: Instance, allocation: Allocation, exposure: ExposureMatrix,
                       oracle_mms: Sequence[float] | None = None, epsilon: float = 0.3,
                       rule: str = "discounted", budget=None) -> FairnessDiagnostic:
    vals = valuations(instance, exposure)
    bundles = allocation.bundle_indices(instance)
    gamma = instance.gamma
    n = instance.n_advertisers
    got = [influence(vals[i], b) for i, b in enumerate(bundles)]
    own = [utility(a, got[i], gamma, rule) for i, a in enumerate(instance.advertisers)]

    if oracle_mms is None:
        mode = "relaxed"
        rhs = []
        for i, a in enumerate(instance.advertisers):
            others = [utility(a, influence(vals[i], bundles[j]), gamma, rule)
                      for j in range(n) if j != i]
            rhs.append(min(others) if others else float("-inf"))
        inf_pass, c = None, None
    else:
        mode = "exact"
        fns = [utility_valuation(a, vals[i], gamma, rule) for i, a in enumerate(instance.advertisers)]
        rhs = list(oracle.exact_mms(exposure, fns, n, budget or oracle.OracleBudget()))
        c = threshold_constant(epsilon)
        inf_pass = tuple(got[i] >= c * oracle_mms[i] - TOL for i in range(n))
    passed = tuple(o >= r - TOL for o, r in zip(own, rhs))
    worst = min(range(n), key=lambda i: own[i])
    return FairnessDiagnostic(mode, tuple(own), tuple(rhs), passed,
                              instance.advertisers[worst].id, inf_pass, c)
