"""Slot-level simulation of source, channel, monitor estimate and age ladder.

Within slot t the engine records the state, asks the policy, draws the
channel, moves the source, and only then applies a successful delivery:
the monitor reads the fresh state X(t+1), so the next slot starts at
j = 0 with a correct estimate.  The sensor stores whether the source moved
right after each delivery and piggybacks that bit on the next one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .model import AgeTable, Regime, SourceParams, build_age_table
from .steady import SteadyAverages, ThresholdPolicy

CHUNK = 1 << 14
TRAJECTORY_HEADER = ["t", "x", "x_hat", "j", "action", "success", "cost"]


def streams(seed) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent source and channel generators for one run.

    seed is an int, a sequence of ints such as (base_seed, run_index), or a
    SeedSequence.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    src, ch = seed.spawn(2)
    return np.random.Generator(np.random.Philox(src)), np.random.Generator(np.random.Philox(ch))


def decision_rule(threshold: ThresholdPolicy, regime: Regime) -> tuple[list, bool]:
    """Action list for small j plus the action taken at every larger j."""
    if threshold.is_infinite:
        return [], False
    n = int(threshold.n)
    if regime is Regime.SMOOTH:
        return [False] * n, True
    if n % 2 == 0:
        return [j % 2 == 1 for j in range(n)], True
    return [j % 2 == 1 for j in range(n + 1)], False


class FixedThreshold:
    """Stationary threshold policy in the form the engine consumes."""

    def __init__(self, threshold: ThresholdPolicy, regime: Regime = Regime.SMOOTH):
        self.threshold = threshold
        self.mask, self.tail = decision_rule(threshold, regime)
        self.halted = threshold.is_infinite

    def __call__(self, j: int, t: int) -> bool:
        return self.mask[j] if j < len(self.mask) else self.tail


@dataclass
class Trajectory:
    T: int
    seed: object
    total_cost: float
    age_sum: float
    n_scheduled: int
    n_success: int
    lam: float
    record_every: int = 1
    t: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None
    j: Optional[np.ndarray] = None
    action: Optional[np.ndarray] = None
    success: Optional[np.ndarray] = None
    cost: Optional[np.ndarray] = None
    obs_t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    obs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int8))
    delivery_t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def recorded(self) -> bool:
        return self.j is not None


def _prefix_ages(table: AgeTable) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(table.values)])


def _age_sum(prefix: np.ndarray, table: AgeTable, j0: int, j1: int) -> float:
    """Sum of a_j for j0 <= j < j1, using the limit beyond the table."""
    def upto(j):
        if j <= table.j_max + 1:
            return float(prefix[j])
        return float(prefix[-1]) + (j - table.j_max - 1) * table.limit
    return upto(j1) - upto(j0)


def simulate(params: SourceParams, policy, T: int, seed, *, record: bool = True,
             record_every: int = 1, table: Optional[AgeTable] = None, x0: int = 0) -> Trajectory:
    """Run T slots under policy and return the trajectory.

    policy is either a callable (j, t) -> bool, or an object with a ``mask``
    list and ``tail`` flag describing its current rule (read again after
    every delivery).  If it has ``on_delivery(t, obs)`` the engine calls it
    at each successful delivery with the piggybacked transition bit (None
    for the first delivery).  A policy whose ``halted`` attribute is true
    never transmits again, so unrecorded runs finish in closed form.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    if table is None:
        table = build_age_table(params, 1e-12)
    rng_src, rng_ch = streams(seed)
    ages = table.values.tolist()
    j_cap, a_l = table.j_max, table.limit
    N, rho, lam = params.N, params.rho, params.lam
    leave = (N - 1) * params.r

    fast = hasattr(policy, "mask")
    notify = getattr(policy, "on_delivery", None)
    if fast:
        mask, tail = policy.mask, policy.tail
        L = len(mask)
        call = None
    else:
        call = policy

    rec = record
    cols = ([], [], [], [], [], [], []) if rec else None
    if rec:
        r_t, r_x, r_xh, r_j, r_a, r_s, r_c = (c.append for c in cols)
    obs_t, obs_v, del_t = [], [], []

    x = int(x0)
    x_hat = x
    g = 0
    pending = None
    delivered = 0
    total = 0.0
    age_total = 0.0
    n_sched = 0
    n_succ = 0
    t = 0
    prefix = None
    while t < T:
        if not rec and getattr(policy, "halted", False):
            if prefix is None:
                prefix = _prefix_ages(table)
            s = _age_sum(prefix, table, t - g, T - g)
            total += s
            age_total += s
            t = T
            break
        uc = rng_ch.random(CHUNK).tolist()
        us = rng_src.random(CHUNK).tolist()
        off = rng_src.integers(1, N, CHUNK).tolist() if N > 2 else None
        stop = min(T, t + CHUNK)
        k = 0
        while t < stop:
            j = t - g
            a = ages[j] if j <= j_cap else a_l
            if fast:
                act = mask[j] if j < L else tail
            else:
                act = bool(call(j, t))
            ok = act and uc[k] < rho
            c = a + lam if act else a
            total += c
            age_total += a
            if act:
                n_sched += 1
            if rec and t % record_every == 0:
                r_t(t); r_x(x); r_xh(x_hat); r_j(j); r_a(act); r_s(ok); r_c(c)
            # source moves
            xn = x
            if us[k] < leave:
                xn = (x + (off[k] if off is not None else 1)) % N
            if j == 0 and delivered:
                pending = 1 if xn != x else 0
            x = xn
            t += 1
            k += 1
            if ok:
                n_succ += 1
                g = t
                x_hat = x
                delivered += 1
                del_t.append(t)
                o = pending
                pending = None
                if o is not None:
                    obs_t.append(t)
                    obs_v.append(o)
                if notify is not None:
                    notify(t, o)
                    if fast:
                        mask, tail = policy.mask, policy.tail
                        L = len(mask)
                    if not rec and getattr(policy, "halted", False):
                        break

    traj = Trajectory(T=T, seed=seed, total_cost=total, age_sum=age_total,
                      n_scheduled=n_sched, n_success=n_succ, lam=lam, record_every=record_every,
                      obs_t=np.array(obs_t, dtype=np.int64), obs=np.array(obs_v, dtype=np.int8),
                      delivery_t=np.array(del_t, dtype=np.int64))
    if rec:
        traj.t = np.array(cols[0], dtype=np.int64)
        traj.x = np.array(cols[1], dtype=np.int64)
        traj.x_hat = np.array(cols[2], dtype=np.int64)
        traj.j = np.array(cols[3], dtype=np.int64)
        traj.action = np.array(cols[4], dtype=bool)
        traj.success = np.array(cols[5], dtype=bool)
        traj.cost = np.array(cols[6], dtype=float)
    return traj


def empirical_cost(traj: Trajectory) -> SteadyAverages:
    """Time averages of the age ladder value and the scheduling indicator."""
    a = traj.age_sum / traj.T
    d = traj.n_scheduled / traj.T
    return SteadyAverages(a, d, traj.total_cost / traj.T)


def empirical_occupancy(traj: Trajectory) -> dict[int, float]:
    if not traj.recorded:
        raise ValueError("occupancy needs a recorded trajectory")
    vals, counts = np.unique(traj.j, return_counts=True)
    total = counts.sum()
    return {int(v): float(c / total) for v, c in zip(vals, counts)}


def tv_distance(freq: dict[int, float], pmf: Callable[[int], float], tail_mass_beyond=None) -> float:
    """Total variation distance between an empirical map and a pmf on the integers."""
    top = max(freq) if freq else 0
    s = 0.0
    covered = 0.0
    for i in range(top + 1):
        u = pmf(i)
        covered += u
        s += abs(freq.get(i, 0.0) - u)
    s += max(0.0, 1.0 - covered)
    return 0.5 * s


def realized_age(traj: Trajectory) -> np.ndarray:
    """Per-slot incorrectness age t - V(t), V(t) the last slot with X == x_hat."""
    if not traj.recorded or traj.record_every != 1:
        raise ValueError("realized age needs every slot recorded")
    match = traj.x == traj.x_hat
    last = np.where(match, traj.t, -1)
    last = np.maximum.accumulate(last)
    # slot 0 starts with a correct estimate, so last >= 0 everywhere
    return traj.t - last


def conditional_realized_age(traj: Trajectory, j_max: Optional[int] = None) -> dict[int, tuple[float, float, int]]:
    """Map j -> (mean realized age, standard error, sample count) over slots at index j."""
    age = realized_age(traj)
    js = traj.j
    top = int(js.max()) if j_max is None else j_max
    out = {}
    for jj in range(top + 1):
        sel = age[js == jj]
        if sel.size == 0:
            continue
        se = float(sel.std(ddof=1) / math.sqrt(sel.size)) if sel.size > 1 else math.inf
        out[jj] = (float(sel.mean()), se, int(sel.size))
    return out


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    if not traj.recorded:
        raise ValueError("trajectory was run without records")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for row in zip(traj.t.tolist(), traj.x.tolist(), traj.x_hat.tolist(), traj.j.tolist(),
                   traj.action.tolist(), traj.success.tolist(), traj.cost.tolist()):
        t, x, xh, j, a, s, c = row
        w.writerow((t, x, xh, j, int(a), int(s), repr(c)))
