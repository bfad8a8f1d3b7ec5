import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crlflood.analysis import (RatioState, discrete_vs_fluid, fixed_point_profile,
                               fluid_integrate, h_star, monotonicity_check, one_hop_asymptote,
                               proportional_fixed_point_T, proportional_fluid_integrate,
                               q_series_profile, round1_closed_form, simulate_chain, solve_TF,
                               steady_tail, theorem1_bound)
from crlflood.analysis.fixedpoint import bisect

INF = math.inf
mpmath.mp.dps = 40


def tf_oracle(M):
    # x e^{-x/M} = 1/e, principal Lambert branch
    if math.isinf(M):
        return float(mpmath.e ** -1)
    return float(-M * mpmath.lambertw(-1 / (mpmath.e * M), 0).real)


# ---- per-hop limit ------------------------------------------------------

def test_tf_rateless_is_inverse_e():
    assert abs(solve_TF(INF)[0] - math.exp(-1)) <= 1e-9


@pytest.mark.parametrize("M", [2, 2.5, 3, 4, 6, 10, 1e6, INF])
def test_tf_matches_lambert_oracle(M):
    x, h = solve_TF(M)
    assert abs(x - tf_oracle(M)) <= 1e-11
    assert abs(-math.log(x) - 1 + (0 if math.isinf(M) else x / M)) <= 1e-12
    assert h == x


def test_tf_three_value():
    # independent root of -ln x = 1 - x/3; the commonly quoted 0.4235 is 1.8e-4 low
    assert solve_TF(3)[0] == pytest.approx(0.42368172296665, abs=1e-12)


@pytest.mark.parametrize("M", [2, 2.5, 3, 4, 6, 10, 1e6])
def test_tail_lower_bound(M):
    assert solve_TF(M)[1] >= M / (M * math.e - 1)


def test_steady_tail_inverts():
    T = 0.3
    h = steady_tail(T, 3)
    assert -h * math.log(h) / (1 - h / 3) == pytest.approx(T, abs=1e-12)
    with pytest.raises(ValueError):
        steady_tail(0.5, 3)


def test_bisect_edge_cases():
    assert bisect(lambda x: x, 0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        bisect(lambda x: x + 1, 0.0, 1.0)


# ---- closed-form bounds -------------------------------------------------

def bound_oracle(n, M):
    M = mpmath.mpf(M)
    return float(M * mpmath.log(M / (M - 1)) + (n - 1) * M * mpmath.log((2 * M - 1) / (2 * M - 2)))


@pytest.mark.parametrize("n", [1, 2, 5, 30])
@pytest.mark.parametrize("M", [2, 3, 5])
def test_theorem1_bound(n, M):
    assert theorem1_bound(n, M) == pytest.approx(bound_oracle(n, M), rel=1e-13)


def test_theorem1_bound_values():
    assert round(theorem1_bound(1, 3), 5) == 1.21640
    assert round(theorem1_bound(2, 3), 5) == 1.88583
    per_hop = theorem1_bound(2, 1e6) - theorem1_bound(1, 1e6)
    assert per_hop == pytest.approx(0.5, abs=1e-6)
    assert theorem1_bound(11, INF) == 6.0


@pytest.mark.parametrize("M,eps,value", [(3, 0.05, 1.28042), (3, 0.0, 1.21640)])
def test_one_hop_asymptote(M, eps, value):
    assert round(one_hop_asymptote(M, eps), 5) == value


def test_one_hop_large_rate_limit():
    assert abs(one_hop_asymptote(1e6) - 1.0) <= 1e-6
    assert one_hop_asymptote(INF) == 1.0


# ---- fluid trajectories -------------------------------------------------

def test_round_one_closed_form_rateless():
    traj = fluid_integrate(INF, 5, 1.0, 1e-4, record_every=1)
    # node 1 reaches 1 at t = 1 and is recorded after the snap
    before = traj.t < 1.0 - 1e-9
    expect = traj.t[before, None] / np.arange(1, 6)
    assert np.abs(traj.h[before] - expect).max() <= 1e-6
    assert traj.crossings[0] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("M", [2, 3, 6])
def test_round_one_closed_form_finite(M):
    traj = fluid_integrate(M, 6, 0.5, 1e-4, record_every=500)
    for t, row in zip(traj.t[1:], traj.h[1:]):
        np.testing.assert_allclose(row, round1_closed_form(t, 6, M), atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.05, 0.9), min_size=3, max_size=6), st.sampled_from([2.0, 3.0, INF]))
def test_q_series_matches_integrator(h0, M):
    h0 = sorted(h0, reverse=True)
    t = 0.05
    traj = fluid_integrate(M, len(h0), t, 1e-4, np.array(h0), record_every=1)
    assert traj.t[-1] == pytest.approx(t, abs=1e-12)
    np.testing.assert_allclose(traj.h[-1], q_series_profile(M, h0, t), atol=1e-8)


def test_rateless_rounds_decrease_toward_inverse_e():
    T = fluid_integrate(INF, 201, 1e4, 1e-4, max_rounds=200).round_times()
    assert len(T) == 200 and np.all(np.diff(T) < 0)
    gaps = T - math.exp(-1)
    assert np.all(gaps > 0) and gaps[-1] < gaps[99] < gaps[9]


@pytest.mark.xfail(strict=True, reason="the 200-round gap is 2.4e-3; convergence is too slow "
                                       "for a 1e-3 tolerance (see acceptance check 6)")
def test_rateless_rounds_within_1e3_by_200():
    T = fluid_integrate(INF, 201, 1e4, 1e-4, max_rounds=200).round_times()
    assert abs(T[-1] - math.exp(-1)) <= 1e-3


@pytest.mark.parametrize("M", [2, 3, 6, INF])
def test_fixed_point_profile_is_invariant(M):
    fp = fixed_point_profile(M, depth=80)
    T = fluid_integrate(M, 80, 1e3, 1e-4, fp.h0, max_rounds=10).round_times()
    assert np.abs(T - fp.T).max() <= 1e-6


@pytest.mark.parametrize("M", [2, 3, 6])
def test_head_of_fixed_point_profile(M):
    fp = fixed_point_profile(M)
    e = math.exp(fp.T / M)
    assert fp.h0[0] == pytest.approx(e - M * (e - 1), abs=1e-12)


def test_head_tail_relation_rateless():
    fp = fixed_point_profile(INF)
    assert fp.h_inf == pytest.approx(math.exp(-1), abs=1e-12)
    assert fp.h0[0] == pytest.approx((math.e - 1) * fp.h_inf, abs=1e-8)
    assert round(fp.h0[0], 5) == 0.63212
    assert np.all(np.diff(fp.h0) < 0) and fp.h0[-1] > fp.h_inf


@pytest.mark.xfail(strict=True, reason="h_1 = (e-1) h_inf needs M (e^{T/M} - 1) = T, "
                                       "exact only in the rateless limit")
@pytest.mark.parametrize("M", [2, 3, 6])
def test_head_tail_relation_finite(M):
    fp = fixed_point_profile(M)
    assert abs(fp.h0[0] - (math.e - 1) * fp.h_inf) <= 1e-8


def test_reference_profile():
    assert h_star(1) == 0.5 and h_star(2) == pytest.approx(1 / 3)
    assert h_star(0, 3) == 3 and h_star(0) == INF


@pytest.mark.parametrize("M", [2, 3, 6, INF])
def test_reference_ratio_recursion(M):
    # r[i] = h*_i / h*_{i-1}; with h*_0 = M the recursion links r_2 to r_3 onward
    r = {i: h_star(i, M) / h_star(i - 1, M) for i in range(1, 52)}
    for i in range(3, 52):
        assert r[i] == pytest.approx(1 / (2 - r[i - 1]), rel=1e-12)
    assert r[2] >= 1 / (2 - r[1])
    state = RatioState.from_profile([h_star(i, M) for i in range(1, 52)], M)
    np.testing.assert_allclose(state.r[2:], state.R[1:-1], rtol=1e-12)
    assert state.regularly_ordered(tol=1e-12)


# ---- proportional forwarding ---------------------------------------------

def test_proportional_root():
    T = proportional_fixed_point_T()
    assert T == pytest.approx(2 - math.sqrt(2), abs=1e-15)
    h1 = 1 - T
    assert h1 * T + T * T / 2 == pytest.approx(h1, abs=1e-15)


def test_proportional_long_run_and_ratio_cap():
    traj = proportional_fluid_integrate(201, 1e4, 1e-4, max_rounds=200)
    T = traj.round_times()
    assert 2 - math.sqrt(2) <= T[50:].mean() <= 0.6
    assert traj.max_ratio <= 0.5 + 1e-9


# ---- monotonicity -------------------------------------------------------

def test_equal_profiles_trivially_ordered():
    h = np.linspace(0.5, 0.1, 5)
    assert monotonicity_check(3, h, h, 2.0, 1e-3)


def test_fixed_point_dominates_empty():
    fp = fixed_point_profile(3, depth=12)
    assert monotonicity_check(3, fp.h0, np.zeros(12), 10.0, 1e-3)


def test_random_ordered_pairs_stay_ordered():
    rng = np.random.default_rng(13)
    for trial in range(100):
        M = [2.0, 3.0, INF][trial % 3]
        b = np.sort(rng.uniform(0.0, 0.6, 6))[::-1]
        # sorting keeps a >= b: the k-th largest of a dominates that of b
        a = np.sort(np.minimum(b + rng.uniform(0.0, 0.3, 6), 0.95))[::-1]
        rep = monotonicity_check(M, a, b, 3.0, 1e-3)
        assert rep, (trial, rep.first_violation)


def test_unordered_input_rejected():
    with pytest.raises(ValueError):
        monotonicity_check(3, [0.1, 0.1], [0.2, 0.0], 1.0)


# ---- discrete chain ------------------------------------------------------

def test_chain_small_cases():
    res = simulate_chain(10, 2, 0.0, 2, 0)
    assert res.decoded_at[1] >= 10
    with pytest.raises(ValueError):
        simulate_chain(10, 2, 0.0, 1, 0)


def test_chain_transition_frequencies(backend):
    # hop 2 gains a packet with probability (1-eps)(j-s)/j given the previous sizes
    k, eps = 12, 0.3
    counts = {}
    rng = np.random.default_rng(7)
    for _ in range(400):
        tr = simulate_chain(k, 2, eps, 3, rng, n_record=2).sizes
        for (j, s), (_, s_next) in zip(tr[:-1], tr[1:]):
            if 0 < j and s < j and s < 2 * k:
                seen, grew = counts.get((j, s), (0, 0))
                counts[(j, s)] = (seen + 1, grew + (s_next != s))
    checked = 0
    for (j, s), (n, g) in counts.items():
        if n < 150:
            continue
        p = (1 - eps) * (j - s) / j
        assert abs(g / n - p) <= 4.5 * math.sqrt(p * (1 - p) / n) + 1e-9, (j, s, g / n, p)
        checked += 1
    assert checked >= 15


def test_discrete_matches_fluid_at_large_k():
    assert discrete_vs_fluid(3, 0.0, 10_000, 5, rng=0) <= 0.05


def test_deviation_shrinks_with_k():
    small = [discrete_vs_fluid(3, 0.0, 1000, 3, rng=s) for s in range(10)]
    large = [discrete_vs_fluid(3, 0.0, 2000, 3, rng=s) for s in range(10)]
    assert np.mean(large) <= np.mean(small)


def test_tiny_k_deviation_is_finite():
    assert math.isfinite(discrete_vs_fluid(3, 0.0, 10, 5, rng=1))
