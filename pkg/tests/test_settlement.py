import pytest
from hypothesis import assume, given, strategies as st

from fairslot.algorithms import AllocParams, approx_mms, greedy_alloc
from fairslot.instances import toy_reference_allocation
from fairslot.model import Advertiser, Allocation
from fairslot.oracle import exact_mms
from fairslot.settlement import (REPORT_HEADER, SettlementError, check_mms_fairness, payment,
                                 settle, utility)

A2 = Advertiser("a2", 7.0, 15.0)
A3 = Advertiser("a3", 8.0, 17.0)


def test_payment_examples():
    assert payment(A2, 7.0, 0.5) == 15.0
    assert payment(A3, 7.0, 0.5) == pytest.approx(9.5625, abs=1e-12)
    assert payment(A3, 3.0, 0.0) == 17.0
    assert payment(A3, 4.0, 1.0) == pytest.approx(8.5)


def test_unmet_fraction_rule():
    assert payment(A3, 6.0, 0.5, rule="unmet_fraction") == pytest.approx(17 * (1 - 0.5 * 0.25))
    with pytest.raises(ValueError):
        payment(A3, 1.0, 0.5, rule="bogus")


def test_utility_examples():
    assert utility(A3, 7.0, 0.5) == pytest.approx(5.3125, abs=1e-12)
    assert utility(A3, 0.0, 0.0) == -17.0
    assert utility(A3, 8.0, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_reference_settlement(toy, toy_exposure):
    report = settle(toy, toy_reference_allocation(), toy_exposure)
    rows = report.rows
    assert [r.influence for r in rows] == [6, 7, 7, 0]
    assert [r.satisfied for r in rows] == [True, True, False, False]
    assert rows[2].gap == -1
    assert rows[2].payment == pytest.approx(9.5625, abs=1e-9)
    assert rows[3].empty_handed and not rows[2].empty_handed
    assert report.n_satisfied == 2 and report.n_empty_handed == 1
    assert report.total_payment == pytest.approx(sum(r.payment for r in rows), abs=1e-9)
    assert report.total_utility == pytest.approx(sum(r.utility for r in rows), abs=1e-9)
    assert len(report.csv_rows()[0]) == len(REPORT_HEADER)


def test_all_to_one_leaves_second_empty(toy, toy_exposure):
    inst = toy.replace(advertisers=toy.advertisers[:2])
    alloc = Allocation((frozenset(s.slot_id for s in toy.slots), frozenset()))
    rows = settle(inst, alloc, toy_exposure).rows
    assert rows[1].empty_handed and not rows[0].empty_handed


def test_settle_rejects_invalid_allocation(toy, toy_exposure):
    b = toy_reference_allocation().bundles
    with pytest.raises(SettlementError):
        settle(toy, Allocation((b[0], b[1], b[2] - {"bs6"}, b[3])), toy_exposure)


def test_fairness_single_advertiser(toy, toy_exposure):
    inst = toy.replace(advertisers=toy.advertisers[:1])
    alloc = Allocation((frozenset(s.slot_id for s in toy.slots),))
    assert check_mms_fairness(inst, alloc, toy_exposure).all_pass
    assert check_mms_fairness(inst, alloc, toy_exposure, oracle_mms=[20.0]).all_pass


def test_fairness_reference_fails_a4(toy, toy_exposure):
    shares = exact_mms(toy_exposure, None, 4)
    assert shares == [3, 3, 3, 3]
    diag = check_mms_fairness(toy, toy_reference_allocation(), toy_exposure, oracle_mms=shares)
    assert diag.mode == "exact"
    assert diag.influence_pass == (True, True, True, False)
    assert not diag.passed[3]
    assert diag.worst_off == "a4"


def test_fairness_relaxed_mode(toy, toy_exposure):
    diag = check_mms_fairness(toy, greedy_alloc(toy, toy_exposure), toy_exposure)
    assert diag.mode == "relaxed" and diag.influence_pass is None
    assert not diag.passed[3]


def test_fairness_mms_output_on_toy(toy, toy_exposure):
    alloc, _ = approx_mms(toy, toy_exposure, AllocParams(seed=42))
    diag = check_mms_fairness(toy, alloc, toy_exposure, oracle_mms=exact_mms(toy_exposure, None, 4))
    assert all(diag.influence_pass)


money = st.floats(0.0, 1e4, allow_nan=False)
positive = st.floats(0.01, 1e4, allow_nan=False)
gammas = st.floats(0.0, 1.0)


@given(positive, money, st.floats(0.0, 1.0), gammas)
def test_payment_bounds(sigma, u, frac, gamma):
    adv = Advertiser("a", sigma, u)
    p = payment(adv, frac * sigma, gamma)
    assert u * (1 - gamma) - 1e-9 <= p <= u + 1e-9
    assert payment(adv, sigma * (1 + frac), gamma) == u


@given(positive, money, gammas, st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_utility_monotone_below_demand(sigma, u, gamma, f1, f2):
    adv = Advertiser("a", sigma, u)
    lo, hi = sorted((f1, f2))
    assume(hi < 1.0)
    assert utility(adv, hi * sigma, gamma) >= utility(adv, lo * sigma, gamma) - 1e-9


@given(positive, money, gammas, st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_utility_monotone_above_demand(sigma, u, gamma, x1, x2):
    adv = Advertiser("a", sigma, u)
    lo, hi = sorted((x1, x2))
    assert utility(adv, sigma + hi, gamma) >= utility(adv, sigma + lo, gamma) - 1e-9


def test_utility_drops_at_demand():
    # just below demand the advertiser pays u(1 - gamma I / sigma); at demand the full u
    below = utility(A3, 8.0 - 1e-9, 0.5)
    at = utility(A3, 8.0, 0.5)
    assert below - at == pytest.approx(0.5 * 17.0, abs=1e-6)
