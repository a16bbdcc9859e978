"""Monte Carlo regret curves against the known-parameter optimum."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientCheckpoints
from .learning import LEARNERS
from .model import SourceParams, build_age_table, make_params
from .sim import FixedThreshold, simulate
from .solver import optimal_threshold
from .steady import avg_cost

DEFAULT_CHECKPOINTS = (100, 300, 1_000, 3_000, 10_000, 30_000, 100_000)
ALGOS = ("proposed", "greedy", "fixed")
REGRET_HEADER = ["algo", "T", "mean_regret", "stderr", "n_runs"]


def optimal_cost(params: SourceParams) -> float:
    return avg_cost(params, optimal_threshold(params))


@dataclass
class RegretCurve:
    algo: str
    checkpoints: list
    mean_regret: np.ndarray
    stderr: np.ndarray
    n_runs: int
    config: dict
    per_run: np.ndarray = field(repr=False, default=None)  # shape (n_runs, len(checkpoints))


def _seed(base_seed: int, T: int, run: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, T, run])


def _learner_regret(task) -> float:
    algo, r, N, rho, lam, T, base_seed, run, c_star = task
    if T == 0:
        return 0.0
    params = make_params(N, r, rho, lam)
    learner = LEARNERS[algo](N, rho, lam, T)
    traj = simulate(params, learner, T, _seed(base_seed, T, run), record=False,
                    table=_table(params))
    return traj.total_cost - T * c_star


def _fixed_regret(task) -> list:
    r, N, rho, lam, checkpoints, base_seed, run, c_star = task
    params = make_params(N, r, rho, lam)
    T = max(checkpoints)
    out = []
    if T == 0:
        return [0.0] * len(checkpoints)
    policy = FixedThreshold(optimal_threshold(params), params.regime)
    traj = simulate(params, policy, T, _seed(base_seed, 0, run), table=_table(params))
    cum = np.concatenate([[0.0], np.cumsum(traj.cost)])
    return [float(cum[k]) - k * c_star for k in checkpoints]


_TABLES: dict = {}


def _table(params):
    key = (params.N, params.r)
    if key not in _TABLES:
        _TABLES[key] = build_age_table(params, 1e-12)
    return _TABLES[key]


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def regret_curve(true_r: float, N: int, rho: float, lam: float, checkpoints: Sequence[int] = DEFAULT_CHECKPOINTS,
                 n_runs: int = 200, base_seed: int = 0, algo: str = "proposed",
                 workers: int = 1) -> RegretCurve:
    """Mean regret over n_runs independent runs at each checkpoint horizon.

    Learners take the horizon as an input, so every checkpoint gets its own
    runs.  The fixed optimal policy shares one trajectory across checkpoints.
    Results do not depend on the worker count.
    """
    checkpoints = [int(c) for c in checkpoints]
    if any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if algo not in ALGOS:
        raise ValueError(f"unknown algo {algo!r}")
    params = make_params(N, true_r, rho, lam)
    c_star = optimal_cost(params)
    if algo == "fixed":
        tasks = [(true_r, N, rho, lam, tuple(checkpoints), base_seed, k, c_star) for k in range(n_runs)]
        per_run = np.array(_map(_fixed_regret, tasks, workers), dtype=float)
    else:
        tasks = [(algo, true_r, N, rho, lam, T, base_seed, k, c_star)
                 for T in checkpoints for k in range(n_runs)]
        flat = _map(_learner_regret, tasks, workers)
        per_run = np.array(flat, dtype=float).reshape(len(checkpoints), n_runs).T
    mean = np.array([math.fsum(col) / n_runs for col in per_run.T.tolist()])
    if n_runs > 1:
        se = per_run.std(axis=0, ddof=1) / math.sqrt(n_runs)
    else:
        se = np.full(len(checkpoints), math.nan)
    config = dict(true_r=true_r, N=N, rho=rho, lam=lam, base_seed=base_seed, c_star=c_star)
    return RegretCurve(algo=algo, checkpoints=checkpoints, mean_regret=mean, stderr=se,
                       n_runs=n_runs, config=config, per_run=per_run)


@dataclass
class FitReport:
    log_slope: float
    log_intercept: float
    log_r2: float
    lin_slope: float
    lin_intercept: float
    lin_r2: float
    lin_slope_ci_low: float
    lin_slope_ci_high: float
    reference_slope: Optional[float]
    log_like: bool

    def to_text(self) -> str:
        lines = []
        for k, v in self.__dict__.items():
            if isinstance(v, bool):
                v = str(v).lower()
            elif isinstance(v, float):
                v = repr(v)
            elif v is None:
                v = "none"
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"


def log_linearity_check(curve, reference_slope: Optional[float] = None, level: float = 0.95) -> FitReport:
    """Least-squares fits of regret against ln T and against T.

    The curve counts as log-like when the ln T fit explains more variance
    than the linear one and, if a reference slope (the greedy learner's
    linear slope on the same configuration) is given, the confidence
    interval of the linear slope reaches down to 10% of it.
    """
    if isinstance(curve, RegretCurve):
        T, R = np.asarray(curve.checkpoints, float), np.asarray(curve.mean_regret, float)
    else:
        T, R = (np.asarray(a, float) for a in curve)
    keep = T > 0
    T, R = T[keep], R[keep]
    if T.size < 4 or T.max() / T.min() < 100.0 * (1 - 1e-12):
        raise InsufficientCheckpoints("need >= 4 positive checkpoints spanning >= 2 decades")
    lg = stats.linregress(np.log(T), R)
    ln = stats.linregress(T, R)
    tq = stats.t.ppf(0.5 + level / 2.0, T.size - 2)
    lo, hi = ln.slope - tq * ln.stderr, ln.slope + tq * ln.stderr
    like = lg.rvalue ** 2 > ln.rvalue ** 2
    if reference_slope is not None:
        like = like and lo <= 0.1 * reference_slope
    return FitReport(log_slope=float(lg.slope), log_intercept=float(lg.intercept),
                     log_r2=float(lg.rvalue ** 2), lin_slope=float(ln.slope),
                     lin_intercept=float(ln.intercept), lin_r2=float(ln.rvalue ** 2),
                     lin_slope_ci_low=float(lo), lin_slope_ci_high=float(hi),
                     reference_slope=None if reference_slope is None else float(reference_slope),
                     log_like=bool(like))


def write_regret_csv(curves: Sequence[RegretCurve], fh) -> None:
    import csv
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(REGRET_HEADER)
    for c in curves:
        for T, m, s in zip(c.checkpoints, c.mean_regret.tolist(), c.stderr.tolist()):
            w.writerow((c.algo, T, repr(float(m)), repr(float(s)), c.n_runs))
