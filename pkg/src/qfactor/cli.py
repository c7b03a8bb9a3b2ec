"""Command-line interface.

Subcommands: estimate, select-k, test-alpha, simulate, evaluate.
Each accepts an optional JSON config file (--config); command-line flags
override config values. Unknown config keys are rejected. Exit codes:
0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bootstrap, evaluate, mc, selectk
from .errors import DataError, NumericalError, UsageError
from .estimator import fit, select_k_auto, stage_one
from .panel import load_panel, rank_transform
from .sieve import Basis, spec_from_config

_FLOAT_FMT = "%.17g"


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not getattr(args, "command", None):
        parser.print_help()
        return 1
    try:
        cfg = _merge_config(args)
        return args.func(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="qfactor",
        description="Quantile factor extraction, inference and simulation.",
    )
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (results are thread-count invariant)")

    p = sub.add_parser("estimate", help="fit the quantile factor model")
    add_common(p)
    p.add_argument("--panel", help="long-format panel CSV")
    p.add_argument("--schema", help="JSON column-name mapping")
    p.add_argument("--basis", help="JSON basis spec")
    p.add_argument("--taus", help="comma-separated quantile indices")
    p.add_argument("--k", help='number of factors, or "auto"')
    p.add_argument("--rank-transform", action="store_true", dest="rank_transform",
                   default=None, help="rank-transform characteristics per period")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_estimate, _keys={
        "panel", "schema", "basis", "taus", "k", "rank_transform", "out", "threads"})

    p = sub.add_parser("select-k", help="estimate the number of factors")
    add_common(p)
    p.add_argument("--panel", help="long-format panel CSV")
    p.add_argument("--schema", help="JSON column-name mapping")
    p.add_argument("--basis", help="JSON basis spec")
    p.add_argument("--tau", type=float, help="quantile index")
    p.add_argument("--eigvals", help="CSV of eigenvalues (alternative to --panel)")
    p.add_argument("--kmax", type=int, help="override K_max")
    p.add_argument("--threshold", type=float, help="override the eigenvalue threshold")
    p.set_defaults(func=cmd_select_k, _keys={
        "panel", "schema", "basis", "tau", "eigvals", "kmax", "threshold", "threads"})

    p = sub.add_parser("test-alpha", help="bootstrap test of a zero intercept function")
    add_common(p)
    p.add_argument("--panel", help="long-format panel CSV")
    p.add_argument("--schema", help="JSON column-name mapping")
    p.add_argument("--basis", help="JSON basis spec")
    p.add_argument("--tau", type=float, help="quantile index")
    p.add_argument("--k", type=int, help="number of factors")
    p.add_argument("--draws", type=int, help="bootstrap draws")
    p.add_argument("--level", type=float, help="significance level")
    p.add_argument("--seed", type=int, help="master seed")
    p.set_defaults(func=cmd_test_alpha, _keys={
        "panel", "schema", "basis", "tau", "k", "draws", "level", "seed", "threads"})

    p = sub.add_parser("simulate", help="run seeded Monte Carlo replications")
    add_common(p)
    p.add_argument("--dgp", choices=["dgp1", "dgp2", "dgp3"])
    p.add_argument("--nu", type=int, help="dgp1 error degrees of freedom")
    p.add_argument("--error-model", dest="error_model", choices=["M1", "M2", "M3"])
    p.add_argument("--n", type=int, help="cross-section size")
    p.add_argument("--t", type=int, help="number of periods")
    p.add_argument("--taus", help="comma-separated quantile indices")
    p.add_argument("--reps", type=int, help="replications")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--test", action="store_true", default=None,
                   help="also run the zero-intercept bootstrap test")
    p.add_argument("--draws", type=int, help="bootstrap draws for --test")
    p.add_argument("--level", type=float, help="test significance level")
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_simulate, _keys={
        "dgp", "nu", "error_model", "n", "t", "taus", "reps", "seed",
        "test", "draws", "level", "out", "threads"})

    p = sub.add_parser("evaluate", help="R-squared suite for a factor series")
    add_common(p)
    p.add_argument("--returns", help="CSV, one row per portfolio, one column per period")
    p.add_argument("--factors", help="CSV, one row per period, one column per factor")
    p.add_argument("--burn-in", dest="burn_in", type=int, help="OOS burn-in window")
    p.set_defaults(func=cmd_evaluate, _keys={
        "returns", "factors", "burn_in", "threads"})

    return parser


def _merge_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - args._keys
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key in args._keys:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _require(cfg, *keys):
    for key in keys:
        if cfg.get(key) is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")


def _load(cfg):
    schema = cfg.get("schema")
    if isinstance(schema, str):
        schema = json.loads(schema)
    panel = load_panel(cfg["panel"], schema=schema)
    if cfg.get("rank_transform"):
        panel = rank_transform(panel)
    basis_cfg = cfg.get("basis", {"family": "polynomial", "degree": 2,
                                  "intercept": False})
    if isinstance(basis_cfg, str):
        basis_cfg = json.loads(basis_cfg)
    basis = Basis(spec_from_config(basis_cfg), panel.M)
    return panel, basis


def _parse_taus(value):
    if isinstance(value, (list, tuple)):
        taus = [float(v) for v in value]
    else:
        taus = [float(v) for v in str(value).split(",") if v.strip()]
    if not taus or any(not 0.0 < tau < 1.0 for tau in taus):
        raise UsageError(f"invalid quantile indices: {value!r}")
    return taus


def _emit(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_estimate(cfg) -> int:
    import os

    _require(cfg, "panel", "taus", "out")
    panel, basis = _load(cfg)
    taus = _parse_taus(cfg["taus"])
    k_rule = cfg.get("k", "auto")
    os.makedirs(cfg["out"], exist_ok=True)
    summary = {}
    for tau in taus:
        stage = stage_one(panel, basis, tau)
        if k_rule == "auto":
            K = select_k_auto(stage, panel).k_ratio
        else:
            K = int(k_rule)
        fit_ = fit(stage, K)
        tag = f"tau{tau:g}".replace(".", "p")
        sub = os.path.join(cfg["out"], tag)
        os.makedirs(sub, exist_ok=True)
        np.savetxt(os.path.join(sub, "a_hat.csv"), fit_.a_hat, fmt=_FLOAT_FMT)
        np.savetxt(os.path.join(sub, "B_hat.csv"), fit_.B_hat,
                   fmt=_FLOAT_FMT, delimiter=",")
        np.savetxt(os.path.join(sub, "F_hat.csv"), fit_.F_hat,
                   fmt=_FLOAT_FMT, delimiter=",")
        np.savetxt(os.path.join(sub, "eigvals.csv"), fit_.eigvals, fmt=_FLOAT_FMT)
        summary[str(tau)] = {
            "K": K,
            "converged_periods": int(np.count_nonzero(stage.per_period_converged)),
            "T": panel.T,
            "P": basis.P,
        }
    _emit(summary, os.path.join(cfg["out"], "summary.json"))
    return 0


def cmd_select_k(cfg) -> int:
    if cfg.get("eigvals"):
        eigvals = np.atleast_1d(np.loadtxt(cfg["eigvals"]))
        if cfg.get("kmax") is None or cfg.get("threshold") is None:
            raise UsageError("--kmax and --threshold are required with --eigvals")
        kmax, lam = int(cfg["kmax"]), float(cfg["threshold"])
        sel = selectk.KSelection(
            k_ratio=selectk.k_by_ratio(eigvals, kmax),
            k_threshold=selectk.k_by_threshold(eigvals, lam),
            ratios=eigvals[:kmax] / eigvals[1:kmax + 1],
            threshold_used=lam,
        )
    else:
        _require(cfg, "panel", "tau")
        panel, basis = _load(cfg)
        stage = stage_one(panel, basis, float(cfg["tau"]))
        eigvals = stage.eigvals
        sel = select_k_auto(stage, panel, k_max=cfg.get("kmax"))
        if cfg.get("threshold") is not None:
            lam = float(cfg["threshold"])
            sel = selectk.KSelection(sel.k_ratio,
                                     selectk.k_by_threshold(eigvals, lam),
                                     sel.ratios, lam)
    _emit({
        "k_ratio": int(sel.k_ratio),
        "k_threshold": int(sel.k_threshold),
        "ratios": list(np.asarray(sel.ratios, dtype=float)),
        "threshold_used": sel.threshold_used,
        "eigvals": list(np.asarray(eigvals, dtype=float)),
    })
    return 0


def cmd_test_alpha(cfg) -> int:
    _require(cfg, "panel", "tau", "k", "draws")
    if int(cfg["draws"]) < 19:
        raise UsageError("--draws must be at least 19")
    panel, basis = _load(cfg)
    result = bootstrap.alpha_zero_test(
        panel, basis, float(cfg["tau"]), int(cfg["k"]),
        int(cfg["draws"]), float(cfg.get("level", 0.05)),
        int(cfg.get("seed", 0)),
    )
    _emit({
        "statistic": result.statistic,
        "critical_value": result.critical_value,
        "p_value": result.p_value,
        "reject": result.reject,
        "n_draws": result.n_draws,
    })
    return 0


def cmd_simulate(cfg) -> int:
    _require(cfg, "dgp", "n", "t", "taus", "reps")
    spec = mc.DgpSpec(
        kind=cfg["dgp"], N=int(cfg["n"]), T=int(cfg["t"]),
        nu=int(cfg.get("nu", 3)), error_model=cfg.get("error_model", "M1"),
    )
    report = mc.run_replications(
        spec, _parse_taus(cfg["taus"]), int(cfg["reps"]),
        int(cfg.get("seed", 0)),
        with_test=bool(cfg.get("test")),
        n_draws=int(cfg.get("draws", 199)),
        level=float(cfg.get("level", 0.05)),
        threads=int(cfg.get("threads", 1)),
    )
    out = report.to_dict()
    out["wall_time"] = None   # excluded so reports are byte-reproducible
    _emit(out, cfg.get("out"))
    return 0


def cmd_evaluate(cfg) -> int:
    _require(cfg, "returns", "factors")
    returns = np.atleast_2d(np.loadtxt(cfg["returns"], delimiter=","))
    factors = np.atleast_2d(np.loadtxt(cfg["factors"], delimiter=","))
    report = evaluate.evaluate_factors(returns, factors,
                                       burn_in=int(cfg.get("burn_in", 240)))
    _emit(report.to_dict())
    return 0


if __name__ == "__main__":
    sys.exit(main())
