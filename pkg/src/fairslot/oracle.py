"""Brute-force references for small instances.

Nothing here shares code with the incremental engine: influence is
recomputed from the raw exposure entries with plain loops, and maximin
shares come from enumerating every assignment of slots to labelled bundles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .influence import ExposureMatrix, influence

Valuation = Union[ExposureMatrix, Callable[[Sequence[int]], float], None]


class OracleRefused(RuntimeError):
    """Instance too large to enumerate within the oracle budget."""


@dataclass(frozen=True)
class OracleBudget:
    max_slots: int = 12
    max_advertisers: int = 4
    max_partitions: int = 2 ** 24


def exhaustive_influence(exposure: ExposureMatrix, slot_set: Sequence[int]) -> float:
    # trajectories no chosen slot reaches contribute 1 - 1 = 0 and are skipped
    chosen = sorted(set(int(s) for s in slot_set))
    hits: dict[int, list[float]] = {}
    for s in chosen:
        lo, hi = int(exposure.indptr[s]), int(exposure.indptr[s + 1])
        for k in range(lo, hi):
            hits.setdefault(int(exposure.indices[k]), []).append(float(exposure.data[k]))
    terms = []
    for j in sorted(hits):
        miss = 1.0
        for p in hits[j]:
            miss *= 1.0 - p
        terms.append(1.0 - miss)
    return math.fsum(terms)


def subset_table(exposure: ExposureMatrix, valuation: Valuation = None) -> np.ndarray:
    """Value of every subset of slots, indexed by bitmask."""
    m = exposure.n_slots
    if valuation is None or isinstance(valuation, ExposureMatrix):
        mat = exposure if valuation is None else valuation
        dense = np.zeros((m, mat.n_trajectories))
        for s in range(m):
            lo, hi = mat.indptr[s], mat.indptr[s + 1]
            dense[s, mat.indices[lo:hi]] = mat.data[lo:hi]
        miss = np.ones((1 << m, mat.n_trajectories))
        for mask in range(1, 1 << m):
            low = (mask & -mask).bit_length() - 1
            miss[mask] = miss[mask & (mask - 1)] * (1.0 - dense[low])
        return (1.0 - miss).sum(axis=1)
    return np.array([valuation([s for s in range(m) if mask >> s & 1])
                     for mask in range(1 << m)], dtype=float)


def maximin_value(table: np.ndarray, m: int, n: int, chunk: int = 1 << 18) -> float:
    """max over labelled partitions into ``n`` bundles of the worst bundle value.

    Slot 0 is pinned to bundle 0; the min over bundles does not care about
    labels, so this drops a factor ``n`` without losing any partition.
    """
    if m == 0 or n == 1:
        return float(table[(1 << m) - 1]) if n == 1 else float(table[0])
    total = n ** (m - 1)
    weights = (1 << np.arange(1, m, dtype=np.int64))
    powers = n ** np.arange(m - 1, dtype=np.int64)
    best = -np.inf
    for start in range(0, total, chunk):
        a = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (a[:, None] // powers) % n
        worst = np.full(len(a), np.inf)
        for k in range(n):
            mask = ((digits == k) * weights).sum(axis=1)
            if k == 0:
                mask |= 1
            worst = np.minimum(worst, table[mask])
        best = max(best, float(worst.max()))
    return best


def exact_mms(exposure: ExposureMatrix, advertiser_valuation: Valuation | Sequence[Valuation],
              n: int, budget: OracleBudget = OracleBudget()) -> list[float]:
    """Exact maximin share of each of ``n`` advertisers.

    ``advertiser_valuation`` is one valuation shared by all, or a list with
    one per advertiser. A valuation is ``None`` (the exposure's own
    influence), an ``ExposureMatrix``, or a callable on a list of slot
    positions. Advertisers holding the same valuation object are solved once.
    """
    m = exposure.n_slots
    if m > budget.max_slots or n > budget.max_advertisers or n ** m > budget.max_partitions:
        raise OracleRefused(f"{m} slots x {n} advertisers exceeds {budget}")
    if n < 1:
        raise OracleRefused("need at least one advertiser")
    if isinstance(advertiser_valuation, (list, tuple)):
        vals = list(advertiser_valuation)
        if len(vals) != n:
            raise ValueError("one valuation per advertiser required")
    else:
        vals = [advertiser_valuation] * n
    solved: dict[int, float] = {}
    out = []
    for v in vals:
        key = id(v)
        if key not in solved:
            solved[key] = maximin_value(subset_table(exposure, v), m, n)
        out.append(solved[key])
    return out


@dataclass
class SubmodularityReport:
    trials: int
    violations: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_submodular(exposure: ExposureMatrix, trials: int, seed: int,
                     tol: float = 1e-9) -> SubmodularityReport:
    """Random S <= T, x not in T: nonnegativity, monotonicity, diminishing gains."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    m = exposure.n_slots
    report = SubmodularityReport(trials)
    for t in range(trials):
        if m == 0:
            break
        x = int(rng.integers(m))
        rest = np.array([s for s in range(m) if s != x], dtype=np.int64)
        T = rest[rng.random(len(rest)) < rng.random()]
        S = T[rng.random(len(T)) < rng.random()]
        iS, iT = influence(exposure, S), influence(exposure, T)
        gS = influence(exposure, np.append(S, x)) - iS
        gT = influence(exposure, np.append(T, x)) - iT
        case = {"trial": t, "S": S.tolist(), "T": T.tolist(), "x": x}
        if iS < -tol or iT < -tol:
            report.violations.append({**case, "property": "nonnegative", "I_S": iS, "I_T": iT})
        if iS > iT + tol:
            report.violations.append({**case, "property": "monotone", "I_S": iS, "I_T": iT})
        if gS < gT - tol:
            report.violations.append({**case, "property": "submodular", "gain_S": gS, "gain_T": gT})
    return report
