import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairslot.influence import (EARTH_RADIUS_M, ExposureMatrix, InvalidInput, InvalidOperation,
                                build_exposure, haversine_m, influence, load_or_build_exposure,
                                new_state, slot_probability)
from fairslot.model import Billboard, BillboardSlot, Checkin, Instance
from fairslot.oracle import exhaustive_influence

M_PER_DEG = EARTH_RADIUS_M * math.pi / 180


@pytest.mark.parametrize("size,biggest,expected", [(10, 10, 1.0), (5, 10, 0.5), (3, 7, 0.428571)])
def test_slot_probability(size, biggest, expected):
    p = slot_probability(Billboard("b", 0, 0, size), biggest)
    assert p == pytest.approx(expected, abs=1e-6)


def test_slot_probability_rejects_nonpositive():
    with pytest.raises(InvalidInput):
        slot_probability(Billboard("b", 0, 0, 0.0), 1.0)


def test_haversine_one_degree_of_latitude():
    assert haversine_m(10.0, 20.0, 11.0, 20.0) == pytest.approx(M_PER_DEG, rel=1e-12)
    assert haversine_m(0.0, 0.0, 0.0, 180.0) == pytest.approx(math.pi * EARTH_RADIUS_M)


def _one_checkin(dist_m, t, theta):
    b = Billboard("b", 40.7, -74.0, 2.0)
    slot = BillboardSlot("b#00", "b", 0.0, 3600.0)
    c = Checkin("u", 40.7 + dist_m / M_PER_DEG, -74.0, t)
    return Instance([b], [slot], [c], [], theta=theta, horizon=(0.0, 3600.0))


def test_checkin_inside_both_gates():
    m = build_exposure(_one_checkin(50.0, 100.0, 100.0))
    assert m.nnz == 1 and m.data[0] == 1.0


def test_checkin_outside_smaller_radius():
    assert build_exposure(_one_checkin(50.0, 100.0, 25.0)).nnz == 0


def test_checkin_at_window_end_is_outside():
    assert build_exposure(_one_checkin(0.0, 3600.0, 100.0)).nnz == 0
    assert build_exposure(_one_checkin(0.0, 3599.999, 100.0)).nnz == 1


def test_exposure_matches_brute_force():
    rng = np.random.default_rng(5)
    boards = [Billboard(f"b{k}", 40.7 + rng.uniform(-2e-3, 2e-3), -74 + rng.uniform(-2e-3, 2e-3),
                        float(rng.integers(1, 5))) for k in range(6)]
    slots = sorted((BillboardSlot(f"b{k}#{w}", f"b{k}", w * 600.0, 600.0)
                    for k in range(6) for w in range(3)), key=lambda s: s.slot_id)
    checkins = [Checkin(f"u{k % 40:02d}", 40.7 + rng.uniform(-2e-3, 2e-3),
                        -74 + rng.uniform(-2e-3, 2e-3), float(rng.uniform(0, 1800)))
                for k in range(200)]
    inst = Instance(boards, slots, checkins, [], theta=80.0, horizon=(0.0, 1800.0))
    m = build_exposure(inst)
    users = sorted({c.user_id for c in checkins})
    biggest = max(b.panel_size for b in boards)
    expected = {}
    for k, s in enumerate(slots):
        b = inst.billboard_by_id[s.billboard_id]
        for c in checkins:
            if (haversine_m(b.lat, b.lon, c.lat, c.lon) <= 80.0
                    and s.window_start <= c.timestamp < s.window_end):
                expected[(k, users.index(c.user_id))] = b.panel_size / biggest
    got = {(s, int(j)): p for s in range(m.n_slots) for j, p in zip(*m.row(s))}
    assert got == expected


def test_influence_examples(toy, toy_exposure):
    assert influence(toy_exposure, []) == 0.0
    two = ExposureMatrix.from_entries([(0, 0, 0.5), (1, 0, 0.5)], 2, 1)
    assert influence(two, [0, 1]) == pytest.approx(0.75)
    singles = [influence(toy_exposure, [s.slot_id]) for s in toy.slots]
    assert singles == [2, 6, 3, 7, 1, 1]
    assert influence(toy_exposure, [s.slot_id for s in toy.slots]) == 20


def test_unknown_slot_rejected(toy_exposure):
    with pytest.raises(InvalidInput):
        influence(toy_exposure, ["bs9"])
    with pytest.raises(InvalidInput):
        influence(toy_exposure, [6])


def test_state_examples(toy_exposure):
    st0 = new_state(toy_exposure)
    assert [st0.marginal_gain(s) for s in range(6)] == [2, 6, 3, 7, 1, 1]
    st0.add_slot(toy_exposure.slot_position["bs4"])
    assert st0.marginal_gain(toy_exposure.slot_position["bs2"]) == 6
    one = new_state(ExposureMatrix.from_entries([(0, 0, 0.5), (1, 0, 0.5)], 2, 1))
    one.add_slot(0)
    assert one.marginal_gain(1) == pytest.approx(0.25)


def test_adding_member_twice_fails(toy_exposure):
    state = new_state(toy_exposure).add_slot(1)
    with pytest.raises(InvalidOperation):
        state.add_slot(1)


def test_scaled_matrix():
    m = ExposureMatrix.from_entries([(0, 0, 0.5), (1, 1, 1.0)], 2, 2)
    assert influence(m.scaled(0.5), [0, 1]) == pytest.approx(0.75)
    with pytest.raises(InvalidInput):
        m.scaled(1.5)


def test_exposure_cache_round_trip(tmp_path):
    inst = _one_checkin(10.0, 5.0, 100.0)
    cache = tmp_path / "exposure.csv"
    first = load_or_build_exposure(inst, cache)
    assert cache.is_file()
    again = load_or_build_exposure(inst, cache)
    assert np.array_equal(first.indptr, again.indptr)
    assert np.array_equal(first.indices, again.indices)
    assert np.array_equal(first.data, again.data)


@st.composite
def matrices(draw, max_slots=8, max_traj=8):
    m = draw(st.integers(1, max_slots))
    t = draw(st.integers(1, max_traj))
    pairs = draw(st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, t - 1))))
    probs = draw(st.lists(st.floats(0.01, 1.0), min_size=len(pairs), max_size=len(pairs)))
    return ExposureMatrix.from_entries([(s, j, p) for (s, j), p in zip(sorted(pairs), probs)],
                                       m, t)


@settings(max_examples=200)
@given(matrices(), st.data())
def test_monotone_submodular_bounded(m, data):
    slots = list(range(m.n_slots))
    x = data.draw(st.sampled_from(slots))
    rest = [s for s in slots if s != x]
    T = data.draw(st.lists(st.sampled_from(rest), unique=True) if rest else st.just([]))
    S = data.draw(st.lists(st.sampled_from(T), unique=True) if T else st.just([]))
    iS, iT = influence(m, S), influence(m, T)
    assert 0 <= iS <= iT + 1e-12
    assert iT <= m.n_trajectories + 1e-12
    assert influence(m, S + [x]) - iS >= influence(m, T + [x]) - iT - 1e-12


@settings(max_examples=200)
@given(matrices(), st.randoms(use_true_random=False))
def test_incremental_equals_batch(m, rnd):
    order = list(range(m.n_slots))
    rnd.shuffle(order)
    state = new_state(m)
    for k, s in enumerate(order, start=1):
        gain = state.marginal_gain(s)
        before = state.total
        state.add_slot(s)
        assert state.total - before == pytest.approx(gain, abs=1e-12)
        assert state.total == pytest.approx(influence(m, order[:k]), abs=1e-9)
        assert state.total == pytest.approx(state.recomputed_total(), abs=1e-9)


@settings(max_examples=200)
@given(matrices(), st.data())
def test_matches_exhaustive(m, data):
    S = data.draw(st.lists(st.integers(0, m.n_slots - 1), unique=True))
    assert influence(m, S) == pytest.approx(exhaustive_influence(m, S), abs=1e-12)
