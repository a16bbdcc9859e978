"""Steady-state quantities under a fixed threshold policy.

Stationary distribution of the ladder index, average age, average active
time, the lambda intersection points and the companion matrix Q that drives
the head of the distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoStationary, NonConvergence
from .model import Regime, SourceParams, age_limit

# below this r the closed forms lose digits to cancellation; sum instead
SMALL_R = 1e-2


@dataclass(frozen=True, order=True)
class ThresholdPolicy:
    """Finite threshold index n, or math.inf for the never-transmit policy."""

    n: float

    def __post_init__(self):
        n = self.n
        if n != math.inf and (n < 0 or int(n) != n):
            raise ValueError(f"threshold must be a nonnegative integer or inf, got {n!r}")

    @classmethod
    def finite(cls, n: int) -> "ThresholdPolicy":
        return cls(int(n))

    @property
    def is_infinite(self) -> bool:
        return self.n == math.inf

    def __str__(self) -> str:
        return "inf" if self.is_infinite else str(int(self.n))

    def transmits(self, j: int, regime: Regime = Regime.SMOOTH) -> bool:
        """Whether the policy schedules at ladder index j.

        In the oscillating regime the threshold is on the age value: odd
        indices carry ages above the limit and even ones below it, so an
        even n transmits at every odd j and at even j >= n, while an odd n
        only transmits at odd j <= n.
        """
        if self.is_infinite:
            return False
        n = int(self.n)
        if regime is Regime.SMOOTH:
            return j >= n
        if n % 2 == 0:
            return j % 2 == 1 or j >= n
        return j % 2 == 1 and j <= n


INFINITE = ThresholdPolicy(math.inf)


def as_policy(n) -> ThresholdPolicy:
    if isinstance(n, ThresholdPolicy):
        return n
    if n == math.inf:
        return INFINITE
    return ThresholdPolicy.finite(n)


@dataclass(frozen=True)
class StationaryDist:
    """Head probabilities u_0..u_{i0}; beyond i0 each entry shrinks by tail_ratio."""

    threshold: ThresholdPolicy
    head: np.ndarray
    tail_ratio: float
    tail_start: int

    def pmf(self, i: int) -> float:
        if i < self.tail_start:
            return float(self.head[i])
        return float(self.head[-1]) * self.tail_ratio ** (i - self.tail_start + 1)

    def pmf_array(self, length: int) -> np.ndarray:
        i = np.arange(length)
        out = np.empty(length)
        k = min(length, self.tail_start)
        out[:k] = self.head[:k]
        if length > k:
            out[k:] = self.head[-1] * self.tail_ratio ** (i[k:] - self.tail_start + 1)
        return out

    @property
    def tail_mass(self) -> float:
        q = self.tail_ratio
        if q == 0.0:
            return 0.0
        return float(self.head[-1]) * q / (1.0 - q)

    def total(self) -> float:
        return math.fsum(self.head.tolist()) + self.tail_mass


@dataclass(frozen=True)
class SteadyAverages:
    avg_age: float
    avg_active: float
    avg_cost: float


def _check(params: SourceParams, n: ThresholdPolicy) -> None:
    if params.regime is Regime.OSCILLATING and not n.is_infinite and int(n.n) % 2 == 1:
        raise NoStationary(f"odd threshold {n} leaves every state transient in the oscillating regime")


def stationary(params: SourceParams, n) -> StationaryDist:
    n = as_policy(n)
    if n.is_infinite:
        raise NoStationary("the infinite threshold has no stationary distribution")
    _check(params, n)
    k = int(n.n)
    rho = params.rho
    q = 1.0 - rho
    if params.regime is Regime.SMOOTH:
        head = np.full(k + 1, rho / (k * rho + 1.0))
    else:
        z = 2.0 - q ** (k // 2)
        i = np.arange(k + 1)
        head = q ** (i // 2) * rho / z
        head[k] = q ** (k // 2) * rho / z
    return StationaryDist(threshold=n, head=head, tail_ratio=q, tail_start=k + 1)


def _smooth_age_closed(N: int, r: float, rho: float, n: int) -> float:
    e1, e2 = 1.0 - r, 1.0 - N * r
    q = 1.0 - rho
    Nr = N * r
    C = e2 ** 2 / Nr ** 2 - e1 ** 2 / r ** 2 + (N - 1) * q / (Nr * rho)
    s = (n * (N - 1) / Nr - e2 ** (n + 2) / Nr ** 2 + e1 ** (n + 2) / r ** 2
         + q * e2 ** (n + 2) / (Nr * (1.0 - q * e2))
         - q * e1 ** (n + 2) / (r * (1.0 - q * e1)) + C)
    return rho / (n * rho + 1.0) * s


def _smooth_age_summed(N: int, r: float, rho: float, n: int) -> float:
    # built from increments a_{k+1} - a_k, which stay accurate for tiny r
    e1, e2 = 1.0 - r, 1.0 - N * r
    q = 1.0 - rho
    m = np.arange(1, n + 1, dtype=float)
    delta = e1 ** m - e2 ** m
    head = rho * float(np.sum(delta * (n - m + 1.0 / rho)))
    tail = e1 ** (n + 1) * q / (1.0 - e1 * q) - e2 ** (n + 1) * q / (1.0 - e2 * q)
    return (head + tail) / (n * rho + 1.0)


def smooth_avg_age(N: int, r: float, rho: float, n: int) -> float:
    if r < SMALL_R:
        return _smooth_age_summed(N, r, rho, n)
    return _smooth_age_closed(N, r, rho, n)


def osc_avg_age(N: int, r: float, rho: float, n: int) -> float:
    """Average age for an even threshold n in the oscillating regime."""
    p = 1.0 - (N - 1) * r
    e1, e2 = 1.0 - r, p - r
    q = 1.0 - rho
    h = q ** (n // 2)
    z = 2.0 - h
    Nr = N * r
    first = (rho * e2 / (z * Nr)
             * ((2.0 - Nr) * (1.0 - q * e2) - rho * (1.0 - Nr) ** (n + 1) * h)
             / ((1.0 - q * e2 ** 2) * (1.0 - q * e2)))
    second = (rho * e1 / (z * r)
              * ((2.0 - r) * (1.0 - q * e1) - rho * e1 ** (n + 1) * h)
              / ((1.0 - q * e1 ** 2) * (1.0 - q * e1)))
    return (N - 1) / Nr + first - second


def avg_age(params: SourceParams, n) -> float:
    n = as_policy(n)
    if n.is_infinite:
        return age_limit(params)
    _check(params, n)
    k = int(n.n)
    if params.regime is Regime.SMOOTH:
        return smooth_avg_age(params.N, params.r, params.rho, k)
    return osc_avg_age(params.N, params.r, params.rho, k)


def avg_active(params: SourceParams, n) -> float:
    n = as_policy(n)
    if n.is_infinite:
        return 0.0
    _check(params, n)
    k = int(n.n)
    if params.regime is Regime.SMOOTH:
        return 1.0 / (k * params.rho + 1.0)
    return 1.0 / (2.0 - (1.0 - params.rho) ** (k // 2))


def avg_cost(params: SourceParams, n) -> float:
    n = as_policy(n)
    if n.is_infinite:
        return age_limit(params)
    return avg_age(params, n) + params.lam * avg_active(params, n)


def averages(params: SourceParams, n) -> SteadyAverages:
    a, d = avg_age(params, n), avg_active(params, n)
    return SteadyAverages(a, d, a + params.lam * d)


def smooth_lambda(N: int, r: float, rho: float, n: int) -> float:
    """Scalar core of lambda_n, used directly by the solver."""
    a0 = smooth_avg_age(N, r, rho, n)
    a1 = smooth_avg_age(N, r, rho, n + 1)
    # d_n - d_{n+1} = rho / ((n rho + 1)((n+1) rho + 1))
    return (a1 - a0) * (n * rho + 1.0) * ((n + 1) * rho + 1.0) / rho


def osc_lambda(N: int, r: float, rho: float, m: int) -> float:
    a0 = osc_avg_age(N, r, rho, 2 * m)
    a1 = osc_avg_age(N, r, rho, 2 * m + 2)
    q = 1.0 - rho
    d0 = 1.0 / (2.0 - q ** m)
    d1 = 1.0 / (2.0 - q ** (m + 1))
    if d0 - d1 < 1e-6:
        # the two policies are nearly the same; the quotient is all rounding
        return osc_lambda_series(N, r, rho, m)
    return (a1 - a0) / (d0 - d1)


def osc_lambda_series(N: int, r: float, rho: float, m: int) -> float:
    """Expanded form of osc_lambda; stays accurate where the quotient cancels."""
    q = 1.0 - rho
    e1, e2 = 1.0 - r, 1.0 - N * r

    def part(e, c):
        k = rho * e / ((1.0 - e * e * q) * (1.0 - e * q))
        return k * (-c * (1.0 - q * e) + 2.0 * e ** (2 * m + 1) * (1.0 - q * e * e)
                    + q ** (m + 1) * e ** (2 * m + 1) * (e * e - 1.0))

    return part(e2, 2.0 - N * r) / (N * r) - part(e1, 2.0 - r) / r


def lambda_n(params: SourceParams, n: int) -> float:
    """Penalty at which thresholds n and n+1 cost the same (smooth regime)."""
    if params.regime is not Regime.SMOOTH:
        raise ValueError("lambda_n is defined for the smooth regime; use lambda_2n")
    return smooth_lambda(params.N, params.r, params.rho, int(n))


def lambda_2n(params: SourceParams, n: int) -> float:
    """Penalty at which even thresholds 2n and 2n+2 cost the same."""
    if params.regime is not Regime.OSCILLATING:
        raise ValueError("lambda_2n is defined for the oscillating regime")
    return osc_lambda(params.N, params.r, params.rho, int(n))


def lambda_limit(params: SourceParams) -> float:
    N, r, rho = params.N, params.r, params.rho
    return (N - 1) * (N + 1 - N * r) * rho / (N ** 2 * r ** 2)


def build_Q(n_star: int, rho: float) -> np.ndarray:
    """Update matrix of (u_0..u_{n*-1}) under threshold n*, affine offset (rho, 0, ...)."""
    if n_star < 1:
        raise ValueError("n_star must be >= 1")
    Q = np.zeros((n_star, n_star))
    Q[0, :] = -rho
    if n_star > 1:
        Q[np.arange(1, n_star), np.arange(n_star - 1)] = 1.0
    return Q


def spectral_radius(Q: np.ndarray) -> float:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be square")
    try:
        eig = np.linalg.eigvals(Q)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    return float(np.max(np.abs(eig)))
