"""Source parameters, belief sequence and the MAoII age ladder a_j."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OutOfRange


class Regime(enum.Enum):
    SMOOTH = "smooth"
    OSCILLATING = "oscillating"


@dataclass(frozen=True)
class SourceParams:
    """Symmetric N-state Markov source plus channel and scheduling cost.

    Only r is stored; the stay probability p is always derived from it so
    that p + (N-1) r = 1 holds without drift.
    """

    N: int
    r: float
    rho: float
    lam: float

    @property
    def p(self) -> float:
        return 1.0 - (self.N - 1) * self.r

    @property
    def regime(self) -> Regime:
        if 1.0 - self.r >= abs(self.p - self.r):
            return Regime.SMOOTH
        return Regime.OSCILLATING

    @property
    def volatile(self) -> bool:
        # (N-1) r >= 4 p, needed for the even/odd ladder ordering
        return (self.N - 1) * self.r >= 4.0 * self.p

    def with_lam(self, lam: float) -> "SourceParams":
        return make_params(self.N, self.r, self.rho, lam)

    def with_r(self, r: float) -> "SourceParams":
        return make_params(self.N, r, self.rho, self.lam)


def make_params(N: int, r: float, rho: float, lam: float) -> SourceParams:
    """Validate inputs and build a SourceParams.

    Raises OutOfRange naming the first offending field.
    """
    if isinstance(N, bool) or int(N) != N or N < 2:
        raise OutOfRange("N", N, "integer >= 2")
    N = int(N)
    r, rho, lam = float(r), float(rho), float(lam)
    if not (0.0 < r <= 1.0 / (N - 1)):
        raise OutOfRange("r", r, f"0 < r <= 1/(N-1) = {1.0 / (N - 1)!r}")
    if N == 2 and r == 1.0:
        # deterministic alternation: the ladder never settles
        raise OutOfRange("r", r, "r < 1 required when N = 2 (periodic source)")
    if not (0.0 < rho <= 1.0):
        raise OutOfRange("rho", rho, "0 < rho <= 1")
    if not (lam >= 0.0) or math.isinf(lam):
        raise OutOfRange("lambda", lam, "finite and >= 0")
    return SourceParams(N, r, rho, lam)


def belief(params: SourceParams, k: int) -> float:
    """Probability that the source still sits in the last delivered state k slots later."""
    if k < 0:
        raise ValueError("k must be >= 0")
    N = params.N
    return 1.0 / N + (N - 1) / N * (params.p - params.r) ** k


@lru_cache(maxsize=64)
def _sum_powers(N: int, r: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    # k (1-p)(1-r)^(k-1) for k = 1..size, and (p-r)^m for m = 0..size-1
    p = 1.0 - (N - 1) * r
    k = np.arange(1, size + 1, dtype=float)
    return k * (1.0 - p) * (1.0 - r) ** (k - 1), (p - r) ** np.arange(size, dtype=float)


def age_by_sum(params: SourceParams, j: int) -> float:
    """a_j from its defining sum over the time k since the source left x_hat."""
    if j < 0:
        raise ValueError("j must be >= 0")
    if j == 0:
        return 0.0
    size = 1 << max(6, (j - 1).bit_length())
    lead, e2 = _sum_powers(params.N, params.r, size)
    N = params.N
    # pi_{j-k} for k = 1..j
    pi = 1.0 / N + (N - 1) / N * e2[j - 1::-1]
    return math.fsum((lead[:j] * pi).tolist())


def age_closed(params: SourceParams, j):
    """Closed form of a_j.  Accepts a scalar or an integer array."""
    N, r = params.N, params.r
    e1, e2 = 1.0 - r, params.p - r
    jj = np.asarray(j)
    out = (N - 1) / (N * r) + e2 ** (jj + 1) / (N * r) - e1 ** (jj + 1) / r
    if np.ndim(out) == 0:
        return float(out)
    return out


def age_limit(params: SourceParams) -> float:
    return (params.N - 1) / (params.N * params.r)


def age_increment(params: SourceParams, j):
    """a_{j+1} - a_j."""
    jj = np.asarray(j)
    return (1.0 - params.r) ** (jj + 1) - (params.p - params.r) ** (jj + 1)


def _envelope(params: SourceParams, j: int) -> float:
    r = params.r
    return (1.0 - r) ** (j + 1) / r + abs(params.p - r) ** (j + 1) / (params.N * r)


MAX_TABLE = 10_000_000


@dataclass(frozen=True)
class AgeTable:
    values: np.ndarray
    limit: float
    j_max: int
    tail_tol: float

    def __getitem__(self, j: int) -> float:
        if j <= self.j_max:
            return float(self.values[j])
        return self.limit


def table_size(params: SourceParams, tail_tol: float) -> int:
    """Smallest j with the geometric tail envelope below tail_tol."""
    if tail_tol <= 0:
        raise ValueError("tail_tol must be > 0")
    if _envelope(params, 0) < tail_tol:
        return 0
    hi = 1
    while _envelope(params, hi) >= tail_tol:
        hi *= 2
        if hi > 4 * MAX_TABLE:
            raise OutOfRange("r", params.r, "too small for a tabulated ladder")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _envelope(params, mid) < tail_tol:
            hi = mid
        else:
            lo = mid
    return hi


def build_age_table(params: SourceParams, tail_tol: float = 1e-9) -> AgeTable:
    j_max = table_size(params, tail_tol)
    if j_max > MAX_TABLE:
        raise OutOfRange("r", params.r, "too small for a tabulated ladder")
    values = age_closed(params, np.arange(j_max + 1))
    values[0] = 0.0
    return AgeTable(values=values, limit=age_limit(params), j_max=j_max, tail_tol=tail_tol)
