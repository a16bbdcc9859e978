"""Schedulers that learn the transition probability from piggybacked observations.

The proposed learner keeps transmitting at threshold 0 until a confidence
interval around the estimate clears the critical value r_l, and only then
commits: to never transmitting if r sits above r_l, or to the optimal
finite threshold of the current estimate otherwise.  The greedy baseline
plugs the raw estimate into the solver at every delivery.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import make_params
from .sim import Trajectory, simulate
from .solver import _smooth_threshold, r_limit
from .steady import smooth_lambda

EPS_R = 1e-9
TRACE_HEADER = ["t", "cost", "phase", "i", "r_hat", "threshold"]


class LearnerPhase(enum.Enum):
    EXPLORE = "explore"
    REFINE = "refine"
    COMMIT_FINITE = "commit_finite"
    COMMIT_INFINITE = "commit_infinite"


_ORDER = {LearnerPhase.EXPLORE: 0, LearnerPhase.REFINE: 1,
          LearnerPhase.COMMIT_FINITE: 2, LearnerPhase.COMMIT_INFINITE: 2}


def confidence_radius(i: int, T: int) -> float:
    """Half-width sqrt(ln T / i) of the confidence interval after i observations."""
    if i == 0:
        raise ZeroDivisionError("confidence radius needs at least one observation")
    if i < 0 or T < 3:
        raise ValueError("need i >= 1 and T >= 3")
    return math.sqrt(math.log(T) / i)


@dataclass
class EstimatorState:
    """Running mean of the transition bits, scaled by 1/(N-1)."""

    N: int
    i: int = 0
    count: int = 0
    r_hat: float = 0.0

    def update(self, p_obs: int) -> float:
        self.i += 1
        self.count += p_obs
        i = self.i
        self.r_hat = (i - 1) / i * self.r_hat + p_obs / ((self.N - 1) * i)
        return self.r_hat

    def clamped(self, eps: float = EPS_R) -> float:
        return min(max(self.r_hat, eps), 1.0 / (self.N - 1))


@dataclass
class LearnerTrace:
    algo: str
    T: int
    trajectory: Trajectory
    # one row per rule change point: the initial rule and every delivery
    log_t: np.ndarray
    log_i: np.ndarray
    log_r: np.ndarray
    log_phase: list
    log_threshold: np.ndarray
    T0: Optional[int] = None
    T1: Optional[int] = None

    @property
    def total_cost(self) -> float:
        return self.trajectory.total_cost

    @property
    def final_phase(self) -> LearnerPhase:
        return self.log_phase[-1]

    @property
    def final_threshold(self) -> float:
        return float(self.log_threshold[-1])

    def rule_at(self, t) -> np.ndarray:
        """Index of the log row in force at slot(s) t."""
        return np.searchsorted(self.log_t, t, side="right") - 1


class _Learner:
    """Shared plumbing: estimator, rule bookkeeping and the delivery log."""

    name = "base"

    def __init__(self, N: int, rho: float, lam: float, T: int):
        make_params(N, 1.0 / (N - 1), rho, lam)
        if N <= 2:
            raise ValueError("learning requires N > 2")
        if T < 3:
            raise ValueError("T must be >= 3")
        self.N, self.rho, self.lam, self.T = N, rho, lam, T
        self.r_l = r_limit(N, rho, lam)
        self.est = EstimatorState(N)
        self.phase = LearnerPhase.EXPLORE
        self.threshold: float = 0
        self.mask, self.tail = [], True
        self.halted = False
        self.T0: Optional[int] = None
        self.T1: Optional[int] = None
        self._log = [(0, 0, 0.0, self.phase, 0.0)]

    def _apply(self, n: float) -> None:
        self.threshold = n
        if n == math.inf:
            self.mask, self.tail, self.halted = [], False, True
        else:
            self.mask, self.tail = [False] * int(n), True

    def _n_of(self, r: float) -> float:
        """Optimal threshold for estimate r, reusing the current one when it still fits."""
        N, rho, lam = self.N, self.rho, self.lam
        n = self.threshold
        if 0 < n < math.inf:
            if smooth_lambda(N, r, rho, n - 1) < lam <= smooth_lambda(N, r, rho, n):
                lam_l = (N - 1) * (N + 1 - N * r) * rho / (N ** 2 * r ** 2)
                if lam < lam_l:
                    return n
        return _smooth_threshold(N, r, rho, lam)

    def _record(self, t: int) -> None:
        self._log.append((t, self.est.i, self.est.r_hat, self.phase, float(self.threshold)))

    def on_delivery(self, t: int, obs: Optional[int]) -> None:
        if obs is not None:
            self.est.update(obs)
            self._step(t)
        self._record(t)

    def _step(self, t: int) -> None:
        raise NotImplementedError

    def trace(self, traj: Trajectory) -> LearnerTrace:
        lt, li, lr, lp, ln = zip(*self._log)
        return LearnerTrace(algo=self.name, T=self.T, trajectory=traj,
                            log_t=np.array(lt, dtype=np.int64), log_i=np.array(li, dtype=np.int64),
                            log_r=np.array(lr), log_phase=list(lp),
                            log_threshold=np.array(ln, dtype=float), T0=self.T0, T1=self.T1)


class ProposedLearner(_Learner):
    name = "proposed"

    def __init__(self, N, rho, lam, T):
        super().__init__(N, rho, lam, T)
        self._ready = False

    def _step(self, t: int) -> None:
        r, r_l = self.est.r_hat, self.r_l
        rad = confidence_radius(self.est.i, self.T)
        if self.phase is LearnerPhase.EXPLORE:
            if r >= r_l and r - rad >= r_l:
                self.phase = LearnerPhase.COMMIT_INFINITE
                self.T0 = t
                self._apply(math.inf)
            elif r < r_l and r + rad < r_l:
                self.phase = LearnerPhase.REFINE
                self.T0 = t
                self._refine_test(t, r, rad)
        elif self.phase is LearnerPhase.REFINE:
            if self._ready:
                self.phase = LearnerPhase.COMMIT_FINITE
                self._commit(r)
            else:
                self._refine_test(t, r, rad)
        elif self.phase is LearnerPhase.COMMIT_FINITE:
            self._commit(r)

    def _refine_test(self, t, r, rad):
        # the commit itself waits for the next delivery
        if r + 2.0 * rad < self.r_l:
            self._ready = True
            self.T1 = t

    def _commit(self, r: float) -> None:
        if r < self.r_l:
            self._apply(self._n_of(self.est.clamped()))
        else:
            self._apply(0)


class GreedyLearner(_Learner):
    """Applies the optimal threshold of the raw estimate at every delivery."""

    name = "greedy"

    def _step(self, t: int) -> None:
        n = self._n_of(self.est.clamped())
        self._apply(n)
        self.phase = LearnerPhase.COMMIT_INFINITE if n == math.inf else LearnerPhase.COMMIT_FINITE
        if self.T0 is None:
            self.T0 = t


LEARNERS = {"proposed": ProposedLearner, "greedy": GreedyLearner}


def run_learner(algo: str, true_r: float, N: int, rho: float, lam: float, T: int, seed,
                *, record: bool = True, record_every: int = 1, table=None) -> LearnerTrace:
    params = make_params(N, true_r, rho, lam)
    learner = LEARNERS[algo](N, rho, lam, T)
    traj = simulate(params, learner, T, seed, record=record, record_every=record_every, table=table)
    return learner.trace(traj)


def run_proposed(true_r, N, rho, lam, T, seed, **kw) -> LearnerTrace:
    return run_learner("proposed", true_r, N, rho, lam, T, seed, **kw)


def run_greedy(true_r, N, rho, lam, T, seed, **kw) -> LearnerTrace:
    return run_learner("greedy", true_r, N, rho, lam, T, seed, **kw)


def check_phases(trace: LearnerTrace) -> None:
    """Raise AssertionError if phase order or absorption is violated."""
    seen = trace.log_phase
    for a, b in zip(seen, seen[1:]):
        if a is LearnerPhase.COMMIT_INFINITE:
            assert b is LearnerPhase.COMMIT_INFINITE, "infinite commitment was left"
        if trace.algo == "proposed":
            assert _ORDER[b] >= _ORDER[a], f"phase moved back from {a} to {b}"
            assert not (a is LearnerPhase.COMMIT_FINITE and b is LearnerPhase.COMMIT_INFINITE)


def write_trace_csv(trace: LearnerTrace, fh) -> None:
    traj = trace.trajectory
    if not traj.recorded:
        raise ValueError("trace was run without per-slot records")
    rows = trace.rule_at(traj.t)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t, c, k in zip(traj.t.tolist(), traj.cost.tolist(), rows.tolist()):
        n = trace.log_threshold[k]
        w.writerow((t, repr(c), trace.log_phase[k].value, int(trace.log_i[k]),
                    repr(float(trace.log_r[k])), "inf" if n == math.inf else int(n)))
