import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maoii import (INFINITE, NoRoot, Regime, ThresholdPolicy, VolatilityRequired, age_closed,
                   age_limit, avg_cost, brute_force_threshold, extract_threshold, lambda_limit,
                   lambda_n, make_params, optimal_threshold, r_limit, value_iteration)
from maoii.solver import PolicyVector

from conftest import OSC_SOURCES, RHOS, SMOOTH_SOURCES, grid


def chain_cost(params, act, J=400):
    """Exact average cost of an arbitrary stationary policy on a truncated ladder."""
    ages = age_closed(params, np.arange(J + 1))
    ages[0] = 0.0
    M = np.zeros((J + 1, J + 1))
    for j in range(J + 1):
        nx = min(j + 1, J)
        if act(j):
            M[j, 0] += params.rho
            M[j, nx] += 1 - params.rho
        else:
            M[j, nx] += 1.0
    A = M.T - np.eye(J + 1)
    A[-1, :] = 1.0
    b = np.zeros(J + 1)
    b[-1] = 1.0
    u = np.linalg.solve(A, b)
    d = sum(u[j] for j in range(J + 1) if act(j))
    return float(u @ ages + params.lam * d)


def test_r_limit_examples():
    assert r_limit(5, 0.5, 8.0) == pytest.approx(0.22122144504490263, rel=1e-14)
    # tiny penalty: the root is past 1/(N-1) and gets clamped
    assert r_limit(5, 0.5, 1e-6) == 0.25
    with pytest.raises(NoRoot):
        r_limit(5, 0.5, 0.0)


@settings(max_examples=100, deadline=None)
@given(N=st.integers(2, 12), rho=st.floats(0.01, 1.0), lam=st.floats(0.05, 1e4))
def test_r_limit_inverts_lambda_limit(N, rho, lam):
    r = r_limit(N, rho, lam)
    if r < 1.0 / (N - 1):
        assert lambda_limit(make_params(N, r, rho, lam)) == pytest.approx(lam, rel=1e-10)


def test_optimal_threshold_examples():
    b = make_params(5, 0.1, 0.5, 8.0)
    assert optimal_threshold(b) == ThresholdPolicy.finite(6)
    assert avg_cost(b, 6) == pytest.approx(3.8903707575757576, rel=1e-12)
    a = make_params(5, 0.25, 0.5, 8.0)
    assert optimal_threshold(a) == INFINITE
    assert avg_cost(a, INFINITE) == pytest.approx(3.2)
    assert optimal_threshold(b.with_lam(0.1)) == ThresholdPolicy.finite(0)
    assert optimal_threshold(b.with_lam(44.0)) == INFINITE


def test_volatility_required():
    with pytest.raises(VolatilityRequired):
        optimal_threshold(make_params(2, 0.7, 0.5, 1.0))


def _lams(params):
    lam0, lam_l = lambda_n(params, 0), lambda_limit(params)
    return [0.05, 0.5 * lam0, lam0, lam0 * 1.01, 1.0, 0.5 * (lam0 + lam_l), 8.0,
            lam_l * 0.999, lam_l, lam_l * 1.01, 2 * lam_l]


@pytest.mark.parametrize("params", grid(SMOOTH_SOURCES), ids=str)
def test_smooth_solver_matches_brute_force(params):
    for lam in _lams(params):
        q = params.with_lam(lam)
        n = optimal_threshold(q)
        bf = brute_force_threshold(q, 2000)
        if n.is_infinite or n.n <= 2000:
            # both are argmins; ties at a breakpoint may pick either neighbour
            assert avg_cost(q, n) == pytest.approx(avg_cost(q, bf), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("params", grid(OSC_SOURCES[1:]), ids=str)
def test_oscillating_solver_matches_brute_force(params):
    c0 = avg_cost(params.with_lam(0.0), 0)
    for lam in [0.01, 0.1, age_limit(params) - c0, age_limit(params) - c0 + 1e-3, 1.0, 5.0]:
        if lam < 0:
            continue
        q = params.with_lam(lam)
        n = optimal_threshold(q)
        assert avg_cost(q, n) == pytest.approx(avg_cost(q, brute_force_threshold(q, 400)), rel=1e-12)
        assert n in (ThresholdPolicy.finite(0), INFINITE)


@settings(max_examples=150, deadline=None)
@given(N=st.integers(2, 10), frac=st.floats(0.02, 1.0), rho=st.floats(0.05, 1.0),
       lam=st.floats(0.0, 200.0))
def test_solver_is_argmin(N, frac, rho, lam):
    r = frac / (N - 1) if N > 2 else frac * 0.66
    p = make_params(N, r, rho, lam)
    n = optimal_threshold(p)
    best = avg_cost(p, brute_force_threshold(p, 300))
    if n.is_infinite or n.n <= 300:
        assert avg_cost(p, n) <= best * (1 + 1e-12) + 1e-12


@pytest.mark.parametrize("params", grid([(5, 0.1), (3, 0.3), (10, 0.05), (2, 0.5)]), ids=str)
def test_threshold_monotone_in_lambda(params):
    lams = np.geomspace(1e-3, 3 * lambda_limit(params), 300)
    ns = [optimal_threshold(params.with_lam(float(l))).n for l in lams]
    assert all(b >= a for a, b in zip(ns, ns[1:]))


def test_threshold_brackets_lambda():
    p = make_params(5, 0.1, 0.5, 8.0)
    n = int(optimal_threshold(p).n)
    assert lambda_n(p, n - 1) < 8.0 <= lambda_n(p, n)


@pytest.mark.parametrize("src,n", [((5, 0.1, 0.5), 6), ((3, 0.2, 0.9), 3), ((10, 0.05, 0.1), 27),
                                   ((2, 0.4, 0.5), 1), ((5, 0.15, 1.0), 4)])
def test_value_iteration_smooth_threshold(src, n):
    # penalty in the middle of the bracket of n, away from discounting effects
    p = make_params(*src, 0.0)
    p = p.with_lam(0.5 * (lambda_n(p, n - 1) + lambda_n(p, n)))
    pv = value_iteration(p)
    assert extract_threshold(pv) == optimal_threshold(p) == ThresholdPolicy.finite(n)
    assert np.all(np.diff(pv.values) >= -1e-9)


def test_value_iteration_rejects_bad_beta():
    with pytest.raises(ValueError):
        value_iteration(make_params(5, 0.1, 0.5, 1.0), beta=1.0)


def test_extract_threshold_examples():
    ages = np.arange(6, dtype=float)
    mk = lambda acts, regime=Regime.SMOOTH, ages=ages: PolicyVector(
        np.array(acts, bool), np.zeros(len(acts)), ages, regime, 1)
    assert extract_threshold(mk([0, 0, 1, 1, 1, 1])) == ThresholdPolicy.finite(2)
    assert extract_threshold(mk([1] * 6)) == ThresholdPolicy.finite(0)
    assert extract_threshold(mk([0] * 6)) == INFINITE
    assert extract_threshold(mk([0, 1, 0, 1, 1, 1])) is None
    osc_ages = np.array([0.0, 0.9, 0.19, 0.73, 0.33, 0.62])
    osc = lambda acts: mk(acts, Regime.OSCILLATING, osc_ages)
    assert extract_threshold(osc([0, 1, 0, 1, 1, 1])) == ThresholdPolicy.finite(4)
    assert extract_threshold(osc([1, 1, 1, 1, 1, 1])) == ThresholdPolicy.finite(0)
    assert extract_threshold(osc([0, 1, 1, 1, 0, 1])) is None


def test_oscillating_vi_is_threshold_on_next_age():
    # in the oscillating regime the discounted optimum switches on a_{j+1}, the
    # only age the action affects, and it is not a threshold on a_j
    p = make_params(2, 0.9, 0.5, 0.1845)
    pv = value_iteration(p)
    act = pv.actions[:-1]
    nxt = age_closed(p, np.arange(1, act.size + 1))
    cut = nxt[act].min()
    assert np.array_equal(act, nxt >= cut)
    assert extract_threshold(pv) is None
    vi_cost = chain_cost(p, lambda j: bool(pv.actions[min(j, pv.actions.size - 1)]))
    admissible = min(chain_cost(p, lambda j, n=n: ThresholdPolicy.finite(n).transmits(j, p.regime))
                     for n in range(0, 20, 2))
    admissible = min(admissible, age_limit(p))
    assert vi_cost < admissible - 0.01
    assert avg_cost(p, optimal_threshold(p)) == pytest.approx(admissible, rel=1e-9)
