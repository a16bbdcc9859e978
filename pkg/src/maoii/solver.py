"""Optimal threshold for known source parameters, plus two independent oracles.

optimal_threshold walks the lambda intersection points with a jump step;
brute_force_threshold scans average costs; value_iteration solves the
discounted Bellman equation on a truncated ladder.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import NoRoot, NonConvergence, VolatilityRequired
from .model import Regime, SourceParams, age_limit, build_age_table
from .steady import (INFINITE, ThresholdPolicy, avg_cost, osc_avg_age,
                     osc_lambda_series, smooth_avg_age, smooth_lambda)


def r_limit(N: int, rho: float, lam: float) -> float:
    """Transition probability at which the limit penalty equals lam.

    Positive root of lam N^2 r^2 + (N-1) N rho r - (N-1)(N+1) rho = 0,
    clamped to (0, 1/(N-1)].
    """
    if not lam > 0:
        raise NoRoot(f"no positive root for lambda={lam!r}")
    a = lam * N * N
    b = (N - 1) * N * rho
    c = (N - 1) * (N + 1) * rho
    # stable form of (-b + sqrt(b^2 + 4ac)) / 2a
    root = 2.0 * c / (b + math.sqrt(b * b + 4.0 * a * c))
    return min(root, 1.0 / (N - 1))


def _jump_gain(N: int, r: float) -> float:
    p = 1.0 - (N - 1) * r
    bound = (1.0 - r) ** 2 - (p - r) ** 2
    if bound <= 0.0:
        return 1.0
    return 0.9 / bound


@lru_cache(maxsize=8192)
def _smooth_threshold(N: int, r: float, rho: float, lam: float) -> float:
    lam_at = lambda n: smooth_lambda(N, r, rho, n)
    if lam <= lam_at(0):
        return 0
    lam_l = (N - 1) * (N + 1 - N * r) * rho / (N ** 2 * r ** 2)
    if lam >= lam_l:
        return math.inf
    alpha = _jump_gain(N, r)
    # invariant: lam_at(lo) < lam
    lo, lam_lo = 0, lam_at(0)
    hi = None
    while hi is None:
        step = max(1, math.floor(alpha * (lam - lam_lo)))
        # never more than double the index, so a loose gain cannot run away
        step = min(step, max(16, lo))
        cand = lo + step
        v = lam_at(cand)
        if v < lam:
            lo, lam_lo = cand, v
        else:
            hi = cand
    # the jump may overshoot the target interval; bisect back onto it
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if lam_at(mid) < lam:
            lo = mid
        else:
            hi = mid
    return hi


_OSC_SCAN_CAP = 100_000


@lru_cache(maxsize=1024)
def _osc_threshold(N: int, r: float, rho: float, lam: float) -> float:
    a_l = (N - 1) / (N * r)
    q = 1.0 - rho
    # length over which the even-threshold sequence has numerically settled
    e = max(abs(1.0 - N * r), 1.0 - r, q)
    m_max = min(_OSC_SCAN_CAP, int(math.ceil(20.0 / max(1e-12, -math.log(e)))) + 2) if e > 0 else 2
    lams = np.array([osc_lambda_series(N, r, rho, m) for m in range(m_max)])
    if np.all(np.diff(lams) <= 0):
        # decreasing intersection points make the even-threshold cost
        # quasi-concave, so only the two ends can be optimal
        c0 = osc_avg_age(N, r, rho, 0) + lam
        return 0 if c0 <= a_l else math.inf
    costs = [osc_avg_age(N, r, rho, 2 * m) + lam / (2.0 - q ** m) for m in range(m_max)]
    best = int(np.argmin(costs))
    return 2 * best if costs[best] <= a_l else math.inf


def optimal_threshold(params: SourceParams) -> ThresholdPolicy:
    """Optimal threshold of the average-cost problem for known parameters."""
    N, r, rho, lam = params.N, params.r, params.rho, params.lam
    if params.regime is Regime.SMOOTH:
        n = _smooth_threshold(N, r, rho, lam)
    else:
        if not params.volatile:
            raise VolatilityRequired(
                f"oscillating source with (N-1)r={(N - 1) * r!r} < 4p={4 * params.p!r}")
        n = _osc_threshold(N, r, rho, lam)
    return INFINITE if n == math.inf else ThresholdPolicy.finite(n)


def brute_force_threshold(params: SourceParams, n_max: int = 200) -> ThresholdPolicy:
    """Argmin of the average cost over admissible n <= n_max and the infinite policy.

    Ties go to the smaller threshold.
    """
    if params.regime is Regime.SMOOTH:
        ns = list(range(n_max + 1))
    else:
        ns = list(range(0, n_max + 1, 2))
    costs = [avg_cost(params, n) for n in ns] + [age_limit(params)]
    k = int(np.argmin(costs))
    if k == len(ns):
        return INFINITE
    return ThresholdPolicy.finite(ns[k])


@dataclass(frozen=True)
class PolicyVector:
    """Discounted-optimal actions and values on the truncated ladder j = 0..j_max."""

    actions: np.ndarray
    values: np.ndarray
    ages: np.ndarray
    regime: Regime
    iterations: int


def value_iteration(params: SourceParams, beta: float = 0.999, j_max: Optional[int] = None,
                    tol: float = 1e-8, margin: int = 1000) -> PolicyVector:
    """Value iteration for the discounted problem.

    Stops once the MacQueen bounds pin every value within tol, which for
    this chain happens long before the plain beta^t contraction would.
    The last state loops onto itself when idle.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    if j_max is None:
        j_max = max(build_age_table(params, tol).j_max, 2)
    table = build_age_table(params, min(tol, 1e-9))
    ages = np.array([table[j] for j in range(j_max + 1)])
    lam, rho = params.lam, params.rho
    V = np.zeros(j_max + 1)
    nxt = np.empty_like(V)
    scale = max(1.0, float(ages.max()) + lam)
    cap = math.ceil(math.log(tol * (1.0 - beta)) / math.log(beta))
    cap += math.ceil(math.log(scale) / -math.log(beta)) + margin
    k = beta / (1.0 - beta)
    for it in range(1, cap + 1):
        nxt[:-1] = V[1:]
        nxt[-1] = V[-1]
        idle = ages + beta * nxt
        send = ages + lam + beta * (rho * V[0] + (1.0 - rho) * nxt)
        W = np.minimum(idle, send)
        diff = W - V
        lo, hi = float(diff.min()), float(diff.max())
        V = W
        if k * (hi - lo) < 2.0 * tol:
            V = V + k * 0.5 * (lo + hi)
            break
    else:
        raise NonConvergence(f"value iteration did not settle in {cap} sweeps")
    nxt[:-1] = V[1:]
    nxt[-1] = V[-1]
    idle = ages + beta * nxt
    send = ages + lam + beta * (rho * V[0] + (1.0 - rho) * nxt)
    return PolicyVector(actions=send <= idle, values=V, ages=ages,
                        regime=params.regime, iterations=it)


def extract_threshold(pv: PolicyVector) -> Optional[ThresholdPolicy]:
    """Read a threshold off an action vector, or None if it is not threshold-shaped."""
    act = np.asarray(pv.actions, dtype=bool)
    if not act.any():
        return INFINITE
    idx = np.arange(act.size)
    if pv.regime is Regime.SMOOTH:
        n = int(idx[act][0])
        return ThresholdPolicy.finite(n) if np.array_equal(act, idx >= n) else None
    # oscillating: the switch is on the age value, not the index
    ages = np.asarray(pv.ages)
    sent = idx[act]
    n = int(sent[np.argmin(ages[sent])])
    expect = np.array([ThresholdPolicy.finite(n).transmits(j, Regime.OSCILLATING) for j in idx])
    return ThresholdPolicy.finite(n) if np.array_equal(act, expect) else None
