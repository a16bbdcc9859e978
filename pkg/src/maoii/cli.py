"""Command line front end: solve, steady, simulate, learn, regret.

Data goes to --out (or stdout); the resolved configuration and any fit
report go to sidecar files next to --out (or stderr).  Progress is logged
to stderr only.
"""
from __future__ import annotations

import argparse
import io
import logging
import math
import sys
from pathlib import Path

import tomli

from . import learning, regret, sim
from .errors import InsufficientCheckpoints, NoRoot, NoStationary, OutOfRange, VolatilityRequired
from .model import Regime, make_params
from .solver import brute_force_threshold, optimal_threshold
from .steady import (INFINITE, ThresholdPolicy, averages, lambda_2n, lambda_limit, lambda_n)

log = logging.getLogger("maoii")

EXIT_PARAMS = 2
EXIT_ORACLE = 3
EXIT_IO = 4

DEFAULTS = {
    "common": dict(N=5, r=0.1, rho=0.5, lam=8.0, seed=0, tail_tol=1e-9),
    "solve": dict(n_max=200),
    "steady": dict(n_max=200),
    "simulate": dict(T=10_000, threshold="opt", record_every=1),
    "learn": dict(T=10_000, algo="proposed", record_every=1),
    "regret": dict(algos=["proposed", "greedy"], checkpoints=list(regret.DEFAULT_CHECKPOINTS), runs=200),
}


class ConfigError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "nan")
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return str(v)


def resolved_toml(cfg: dict) -> str:
    lines = ["[resolved_config]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in sorted(cfg.items())]
    return "\n".join(lines) + "\n"


def _parse_threshold(v) -> ThresholdPolicy | str:
    if isinstance(v, str):
        s = v.strip().lower()
        if s == "opt":
            return "opt"
        if s in ("inf", "infinite"):
            return INFINITE
        v = s
    try:
        n = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"threshold must be an integer, 'inf' or 'opt', got {v!r}")
    if n < 0:
        raise ConfigError("threshold must be >= 0")
    return ThresholdPolicy.finite(n)


def _int_list(v) -> list:
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    try:
        return [int(float(x)) for x in v]
    except (TypeError, ValueError):
        raise ConfigError(f"expected a list of integers, got {v!r}")


def build_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = dict(DEFAULTS["common"])
    cfg.update(DEFAULTS[cmd])
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise exc
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file: {exc}")
        section = data.pop(cmd, {})
        for k, v in list(data.items()) + list(section.items()):
            if isinstance(v, dict):
                continue
            if k not in cfg:
                raise ConfigError(f"unknown config key {k!r} for {cmd}")
            cfg[k] = v
    for k in cfg:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    # normalize types
    try:
        cfg["N"] = int(cfg["N"])
        for k in ("r", "rho", "lam", "tail_tol"):
            cfg[k] = float(cfg[k])
        cfg["seed"] = int(cfg["seed"])
        for k in ("n_max", "T", "runs", "record_every"):
            if k in cfg:
                cfg[k] = int(cfg[k])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))
    if cfg["seed"] < 0 or cfg["seed"] >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if "checkpoints" in cfg:
        cfg["checkpoints"] = _int_list(cfg["checkpoints"])
    if "algos" in cfg:
        algos = cfg["algos"]
        cfg["algos"] = [a.strip() for a in algos.split(",")] if isinstance(algos, str) else list(algos)
        bad = [a for a in cfg["algos"] if a not in regret.ALGOS]
        if bad:
            raise ConfigError(f"unknown algos {bad}")
    if "algo" in cfg and cfg["algo"] not in learning.LEARNERS:
        raise ConfigError(f"unknown algo {cfg['algo']!r}")
    if "threshold" in cfg:
        cfg["threshold"] = str(cfg["threshold"])
        _parse_threshold(cfg["threshold"])
    for k in ("T", "runs", "record_every"):
        if k in cfg and cfg[k] < 1:
            raise ConfigError(f"{k} must be >= 1")
    return cfg


def _params(cfg):
    return make_params(cfg["N"], cfg["r"], cfg["rho"], cfg["lam"])


def _lambda0(p):
    return lambda_n(p, 0) if p.regime is Regime.SMOOTH else lambda_2n(p, 0)


def cmd_solve(cfg, out):
    p = _params(cfg)
    n = optimal_threshold(p)
    bf = brute_force_threshold(p, cfg["n_max"])
    c = averages(p, n).avg_cost
    # a brute-force miss only counts when the optimum lies inside its range
    in_range = n.is_infinite or n.n <= cfg["n_max"]
    match = (bf == n) if in_range else True
    rows = [("regime", p.regime.value), ("volatile", p.volatile), ("threshold", str(n)),
            ("lambda_a0", _lambda0(p)), ("lambda_limit", lambda_limit(p)), ("c_star", c),
            ("brute_force_threshold", str(bf)), ("oracle_match", match)]
    out.write("".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}\n" for k, v in rows))
    return 0 if match else EXIT_ORACLE


def cmd_steady(cfg, out):
    import csv
    p = _params(cfg)
    step = 1 if p.regime is Regime.SMOOTH else 2
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "avg_age", "avg_active", "avg_cost"])
    for n in list(range(0, cfg["n_max"] + 1, step)) + [math.inf]:
        s = averages(p, n)
        w.writerow(("inf" if n == math.inf else n, repr(s.avg_age), repr(s.avg_active), repr(s.avg_cost)))
    return 0


def cmd_simulate(cfg, out):
    p = _params(cfg)
    th = _parse_threshold(cfg["threshold"])
    if th == "opt":
        th = optimal_threshold(p)
    log.info("simulating %d slots under threshold %s", cfg["T"], th)
    traj = sim.simulate(p, sim.FixedThreshold(th, p.regime), cfg["T"], [cfg["seed"], 0],
                        record_every=cfg["record_every"])
    sim.write_trajectory_csv(traj, out)
    return 0


def cmd_learn(cfg, out):
    log.info("running %s learner for %d slots", cfg["algo"], cfg["T"])
    tr = learning.run_learner(cfg["algo"], cfg["r"], cfg["N"], cfg["rho"], cfg["lam"], cfg["T"],
                              [cfg["seed"], 0], record_every=cfg["record_every"])
    learning.write_trace_csv(tr, out)
    return 0


def cmd_regret(cfg, out, threads=1, side=None):
    curves = []
    for algo in cfg["algos"]:
        log.info("regret curve for %s: %d runs x %d checkpoints", algo, cfg["runs"], len(cfg["checkpoints"]))
        curves.append(regret.regret_curve(cfg["r"], cfg["N"], cfg["rho"], cfg["lam"], cfg["checkpoints"],
                                          cfg["runs"], cfg["seed"], algo, workers=threads))
    regret.write_regret_csv(curves, out)
    ref = next((c for c in curves if c.algo == "greedy"), None)
    ref_slope = None
    fit_lines = []
    for c in curves:
        try:
            if ref is not None and c is not ref:
                ref_slope = regret.log_linearity_check(ref).lin_slope
            rep = regret.log_linearity_check(c, ref_slope if c is not ref else None)
        except InsufficientCheckpoints as exc:
            fit_lines.append(f"{c.algo}.error={exc}\n")
            continue
        fit_lines += [f"{c.algo}.{line}\n" for line in rep.to_text().splitlines()]
    if side is not None:
        side("fit", "".join(fit_lines))
    return 0


COMMANDS = {"solve": cmd_solve, "steady": cmd_steady, "simulate": cmd_simulate,
            "learn": cmd_learn, "regret": cmd_regret}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maoii", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML file; flags override it")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--runs", type=int)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--N", type=int)
        sp.add_argument("--r", type=float)
        sp.add_argument("--rho", type=float)
        sp.add_argument("--lam", "--lambda", dest="lam", type=float)
        sp.add_argument("--tail-tol", dest="tail_tol", type=float)
        if name in ("solve", "steady"):
            sp.add_argument("--n-max", dest="n_max", type=int)
        if name in ("simulate", "learn"):
            sp.add_argument("--T", type=int)
            sp.add_argument("--record-every", dest="record_every", type=int)
        if name == "simulate":
            sp.add_argument("--threshold", help="integer, 'inf' or 'opt'")
        if name == "learn":
            sp.add_argument("--algo", choices=sorted(learning.LEARNERS))
        if name == "regret":
            sp.add_argument("--algos", help="comma list of proposed, greedy, fixed")
            sp.add_argument("--checkpoints", help="comma list of horizons")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS

    buf = io.StringIO()
    sides = {}

    def side(kind, text):
        sides[kind] = text

    try:
        if args.command == "regret":
            code = cmd_regret(cfg, buf, threads=max(1, args.threads), side=side)
        else:
            code = COMMANDS[args.command](cfg, buf)
    except (OutOfRange, NoStationary, VolatilityRequired, NoRoot, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS

    meta = resolved_toml(cfg)
    try:
        if args.out:
            out = Path(args.out)
            out.write_text(buf.getvalue())
            Path(str(out) + ".resolved.toml").write_text(meta)
            for kind, text in sides.items():
                Path(f"{out}.{kind}.txt").write_text(text)
        else:
            sys.stdout.write(buf.getvalue())
            sys.stdout.flush()
            sys.stderr.write(meta)
            for text in sides.values():
                sys.stderr.write(text)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if code == EXIT_ORACLE:
        print("error: brute-force oracle disagrees with the solver", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
