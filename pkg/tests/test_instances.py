import logging

import pytest
from hypothesis import given, settings, strategies as st

from fairslot.influence import build_exposure, influence
from fairslot.instances import (BaseData, GenerationError, GenParams, generate,
                                generate_with_exposure, slotify, synthetic_base, toy_market)
from fairslot.model import Billboard, Checkin, validate_instance

BASE = synthetic_base(n_billboards=30, n_windows=4, n_users=400, checkins_per_user=5, seed=3)


def crowd(counts):
    """One billboard per entry with ``counts[k]`` users standing right under it."""
    boards = [Billboard(f"b{k}", 40.7, -74.0 + 0.01 * k, 1.0) for k in range(len(counts))]
    checkins = [Checkin(f"u{k}_{r}", b.lat, b.lon, 10.0)
                for k, (b, c) in enumerate(zip(boards, counts)) for r in range(c)]
    return BaseData(tuple(boards), tuple(checkins), (0.0, 3600.0))


def test_default_advertiser_count():
    assert GenParams(alpha=1.0, beta=0.05).k == 20
    p = GenParams(alpha=0.8, n_advertisers=10)
    assert p.k == 10 and p.effective_beta == pytest.approx(0.08)


def test_demand_formula():
    inst = generate(crowd([1000]), GenParams(alpha=0.05, beta=0.05, omega_range=(1.0, 1.0),
                                             psi_range=(1.0, 1.0)))
    assert [(a.demand, a.budget) for a in inst.advertisers] == [(50.0, 50.0)]


def test_cost_formula():
    inst = generate(crowd([7, 25]), GenParams(tau_range=(1.0, 1.0)))
    assert [s.cost for s in inst.slots] == [0.0, 2.0]
    assert [s.influence_cached for s in inst.slots] == [7.0, 25.0]


def test_nothing_to_sell():
    base = BaseData((Billboard("b", 40.7, -74.0, 1.0),), (Checkin("u", 41.7, -74.0, 1.0),),
                    (0.0, 3600.0))
    with pytest.raises(GenerationError):
        generate(base, GenParams())


def test_slotify_counts(caplog):
    one = [Billboard("b", 0, 0, 1)]
    assert len(slotify(one, (0.0, 86400.0), 3600.0)) == 24
    two = [Billboard("b1", 0, 0, 1), Billboard("b2", 0, 1, 1)]
    assert len(slotify(two, (0.0, 7200.0), 3600.0)) == 4
    with caplog.at_level(logging.WARNING):
        slots = slotify(one, (0.0, 5400.0), 3600.0)
    assert len(slots) == 1
    assert "partial window" in caplog.text


def test_slotify_rejects_nonpositive_duration():
    with pytest.raises(GenerationError):
        slotify([Billboard("b", 0, 0, 1)], (0.0, 10.0), 0.0)


def test_slots_sorted_by_id():
    slots = slotify([Billboard(f"b{k}", 0, k, 1) for k in (3, 1, 2)], (0.0, 36000.0), 3600.0)
    assert [s.slot_id for s in slots] == sorted(s.slot_id for s in slots)


def test_horizon_from_checkins():
    base = BaseData((), (Checkin("u", 0, 0, 100.0), Checkin("u", 0, 0, 4000.0)))
    assert base.resolved_horizon(3600.0) == (100.0, 7300.0)


def test_toy_market():
    toy = toy_market()
    ex = build_exposure(toy)
    assert validate_instance(toy) == []
    assert [influence(ex, [s.slot_id]) for s in toy.slots] == [2, 6, 3, 7, 1, 1]
    assert influence(ex, range(6)) == 20
    assert sum(a.demand for a in toy.advertisers) / 20 == pytest.approx(1.15)
    assert [s.cost for s in toy.slots] == [4, 12, 6, 14, 2, 2]
    assert [a.budget for a in toy.advertisers] == [15, 15, 17, 6]
    assert toy.gamma == 0.5


def test_generate_deterministic():
    params = GenParams(alpha=0.8, beta=0.1, seed=9)
    assert generate(BASE, params) == generate(BASE, params)
    assert generate(BASE, params) != generate(BASE, GenParams(alpha=0.8, beta=0.1, seed=10))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([0.4, 0.6, 0.8, 1.0, 1.2]), st.sampled_from([0.01, 0.02, 0.05, 0.1, 0.2]),
       st.integers(0, 10**6))
def test_demand_ratio_within_spread(alpha, beta, seed):
    inst, ex = generate_with_exposure(BASE, GenParams(alpha=alpha, beta=beta, seed=seed))
    supply = float(ex.singletons.sum())
    total = sum(a.demand for a in inst.advertisers)
    # each floor loses less than one unit
    assert 0.8 * alpha * supply - inst.n_advertisers <= total <= 1.2 * alpha * supply
    assert validate_instance(inst) == []
