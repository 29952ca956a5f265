import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import sample_passing_tft, symmetric_tft_root
from incentive_net.dcrs import check_incentive_feasibility, run_dcrs
from incentive_net.tft import (TftProfile, best_symmetric_tft, simulate_tft,
                               symmetric_rating_welfare, tft_incentive_check, tft_next_action)
from incentive_net.topology import gen_topology
from incentive_net.utility import UtilityModel
from incentive_net.welfare import optimal_welfare, price_of_anarchy

M4 = UtilityModel(4.0)
LATTICE = gen_topology("circulant", 9, {"k": 2})  # 4-regular


def test_mirror_rule():
    assert tft_next_action(0.3, 0.4, None) == 0.3
    assert tft_next_action(0.3, 0.4, 0.0) == 0.0
    assert tft_next_action(0.3, 0.4, 0.4) == 0.3


def test_profile_rejects_zero_cooperation():
    with pytest.raises(ValueError):
        TftProfile([0.0, 0.5])


@pytest.mark.parametrize("a,delta,margin", [(0.25, 0.9, 0.9 * 2 / 7 - 0.25),
                                            (0.3, 0.9, 0.9 * (4 / 1.9 - 4 / 2.2) - 0.3)])
def test_symmetric_margins(a, delta, margin):
    ok, m = tft_incentive_check(TftProfile(np.full(LATTICE.n_arcs, a)), LATTICE, M4, delta)
    assert np.allclose(m, margin)
    assert ok.all() == (margin >= 0)


def test_tiny_actions_pass():
    ok, m = tft_incentive_check(TftProfile(np.full(LATTICE.n_arcs, 1e-9)), LATTICE, M4, 0.9)
    assert ok.all()


def test_best_symmetric_action_at_high_discount_is_unconstrained():
    a, w = best_symmetric_tft(4, M4, 0.9)
    assert a == pytest.approx(0.25)
    assert w == pytest.approx(1.0)


@pytest.mark.parametrize("delta", [0.5, 0.6, 0.7, 0.8])
def test_best_symmetric_action_matches_quadratic_root(delta):
    a, _ = best_symmetric_tft(4, M4, delta)
    assert a == pytest.approx(min(0.25, symmetric_tft_root(4, 4.0, delta)), abs=1e-9)


def test_binding_action_at_point_eight():
    a, w = best_symmetric_tft(4, M4, 0.8)
    assert a == pytest.approx(0.226, abs=5e-4)
    assert w < 1.0


def test_tiny_discount_gives_nothing():
    a, w = best_symmetric_tft(4, M4, 1e-6)
    assert a < 1e-5 and w < 1e-4


def test_rating_protocol_keeps_full_symmetric_optimum():
    s, w = symmetric_rating_welfare(4, M4, 0.8)
    assert s == pytest.approx(1.0) and w == pytest.approx(1.0)
    s, _ = symmetric_rating_welfare(4, M4, 0.4)
    assert s == pytest.approx(0.6)


@pytest.mark.parametrize("delta", [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
def test_rating_protocol_dominates_tft(delta):
    t = gen_topology("circulant", 20, {"k": 2})
    v_opt = optimal_welfare(t, M4)
    res = run_dcrs(t, M4, delta, record_trace=False)
    _, w_tft = best_symmetric_tft(4, M4, delta)
    poa_rating = price_of_anarchy(v_opt, res.V_star)
    poa_tft = price_of_anarchy(v_opt / t.n, w_tft)
    assert poa_rating <= poa_tft + 1e-9
    if delta == 0.8:
        assert poa_rating < poa_tft - 1e-3


def test_tft_poa_non_increasing_in_delta():
    poas = [price_of_anarchy(1.0, best_symmetric_tft(4, M4, d)[1]) for d in np.linspace(0.5, 1, 6)]
    assert np.all(np.diff(poas) <= 1e-12)


def test_passing_profiles_satisfy_rating_condition():
    for t, prof, r2, delta in sample_passing_tft(300, seed=1):
        slack = check_incentive_feasibility(prof.coop, t, UtilityModel(r2), delta)
        assert slack.min() >= -1e-9


@settings(max_examples=200, deadline=None)
@given(a=st.floats(1e-4, 1.0), d=st.integers(1, 8), r2=st.floats(0.5, 20), delta=st.floats(0.05, 1))
def test_symmetric_pass_implies_rating_condition(a, d, r2, delta):
    m = UtilityModel(r2)
    margin = delta * (m.benefit_of_sum(d * a) - m.benefit_of_sum((d - 1) * a)) - a
    if margin >= 0:
        assert delta * m.benefit_of_sum(d * a) >= d * a - 1e-12


def test_single_deviation_triggers_alternation():
    t = gen_topology("random", 2, {"p": 1.0})
    prof = TftProfile([0.4, 0.3])  # arc 0: 0->1, arc 1: 1->0
    hist = simulate_tft(t, prof, 14, {0: {0}})
    assert hist[0].tolist() == [0.0, 0.3]
    for p in range(1, 14):
        expected = [0.4, 0.0] if p % 2 else [0.0, 0.3]
        assert hist[p].tolist() == expected


def test_undisturbed_play_cooperates_forever():
    prof = TftProfile(np.full(LATTICE.n_arcs, 0.2))
    hist = simulate_tft(LATTICE, prof, 10)
    assert np.all(hist == 0.2)
