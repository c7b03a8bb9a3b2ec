"""Monte Carlo harness: data generating processes with ground truth,
seeded replication driver, and the simulation metrics (factor-number
correct rates, rotation-adjusted mean square errors, rejection rates).

Three DGPs are supported:

* dgp1 -- two mean factors, heavy-tailed t_nu errors, quadratic
  polynomial basis without intercept (P = 6).
* dgp2 -- the dgp1 structure plus a common volatility scale |g_t| on the
  error, so quantiles away from the median carry a third factor;
  intercepted quadratic basis (P = 7). Error models: M1 (iid normal),
  M2 (iid t_3), M3 (AR and cross-sectionally correlated normal).
* dgp3 -- no intercept function at the median; AR(0.3) normal errors;
  intercepted quadratic basis (P = 7). Used for the zero-intercept test.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, t as student_t

from . import bootstrap, rngcore, selectk, spectral
from .errors import NumericalError, SingularGram
from .estimator import fit, stage_one
from .panel import CrossSection, Panel
from .sieve import BasisSpec, Basis, BlockSpec

_BURN_IN = 50
_AR_RHO_F = 0.3


@dataclass(frozen=True)
class DgpSpec:
    kind: str                  # "dgp1" | "dgp2" | "dgp3"
    N: int
    T: int
    nu: int = 3                # dgp1: error degrees of freedom (1, 2 or 3)
    error_model: str = "M1"    # dgp2: M1 | M2 | M3

    def __post_init__(self):
        if self.kind not in ("dgp1", "dgp2", "dgp3"):
            raise ValueError(f"unknown DGP kind {self.kind!r}")
        if self.kind == "dgp1" and self.nu not in (1, 2, 3):
            raise ValueError(f"dgp1 supports nu in {{1,2,3}}, got {self.nu}")
        if self.kind == "dgp2" and self.error_model not in ("M1", "M2", "M3"):
            raise ValueError(f"unknown error model {self.error_model!r}")


def dgp_basis(spec: DgpSpec) -> Basis:
    intercept = spec.kind in ("dgp2", "dgp3")
    return Basis(BasisSpec(BlockSpec("polynomial", degree=2),
                           include_intercept=intercept), M=3)


class SimTruth:
    """Ground-truth intercept/loadings/factors per quantile index."""

    def __init__(self, spec: DgpSpec, F2: np.ndarray, g: np.ndarray | None):
        self.spec = spec
        self.F2 = F2          # (T, 2) mean factors
        self.g = g            # (T,) volatility draws, dgp2 only

    # -- quantiles of the error distribution -----------------------------

    def error_quantile(self, tau: float) -> float:
        spec = self.spec
        if spec.kind == "dgp1":
            return float(student_t.ppf(tau, spec.nu))
        if spec.kind == "dgp3":
            return float(math.sqrt(1.0 / 0.91) * norm.ppf(tau))
        if spec.error_model == "M1":
            return float(norm.ppf(tau))
        if spec.error_model == "M2":
            return float(student_t.ppf(tau, 3))
        rho, omega, L = 0.2, 0.2, 3
        sd = math.sqrt((1.0 + 2 * L * omega ** 2) / (1.0 - rho ** 2))
        return float(sd * norm.ppf(tau))

    # -- identified truth -------------------------------------------------

    def K_true(self, tau: float) -> int:
        if self.spec.kind == "dgp2" and tau != 0.5:
            return 3
        return 2

    def a_true(self, tau: float):
        kind = self.spec.kind
        if kind == "dgp1":
            # The tau-shift is a constant the intercept-free basis cannot
            # represent, so the truth is recorded at the median only.
            if tau != 0.5:
                return None
            return np.array([1.0, 0.5, 0.0, 0.0, 0.0, 0.0])
        if kind == "dgp2":
            return np.array([0.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0])
        return self.error_quantile(tau) * np.eye(7)[0]

    def B_true(self, tau: float) -> np.ndarray:
        kind = self.spec.kind
        if kind == "dgp1":
            cols = [np.array([0, 0, 1.0, 0.5, 0, 0]),
                    np.array([0, 0, 0, 0, 2.0, 1.0])]
        else:
            cols = [np.array([0, 0, 0, 1.0, 0.5, 0, 0]),
                    np.array([0, 0, 0, 0, 0, 2.0, 1.0])]
            if self.K_true(tau) == 3:
                cols.append(3.0 * self.error_quantile(tau) * np.eye(7)[0])
        return np.column_stack(cols)

    def F_true(self, tau: float) -> np.ndarray:
        if self.K_true(tau) == 3:
            return np.column_stack([self.F2, np.abs(self.g)])
        return self.F2


def generate(spec: DgpSpec, seed: int):
    """Generate one panel with its ground truth under a fixed seed."""
    rng = rngcore.Stream(seed)
    N, T = spec.N, spec.T

    f0 = rng.normal(2) * math.sqrt(1.0 / 0.91)
    eta = rng.normal((T, 2))
    F2 = np.empty((T, 2))
    prev = f0
    for t_ in range(T):
        prev = _AR_RHO_F * prev + eta[t_]
        F2[t_] = prev

    sigma = rng.uniform(1.0, 2.0, T)
    u = rng.normal((N, T, 3))
    z20 = rng.normal(N)
    z1 = sigma[None, :] * u[:, :, 0]
    z2 = np.empty((N, T))
    prev = z20
    for t_ in range(T):
        prev = 0.3 * prev + u[:, t_, 1]
        z2[:, t_] = prev
    z3 = u[:, :, 2]

    alpha = z1 + 0.5 * z1 ** 2
    beta1 = z2 + 0.5 * z2 ** 2
    beta2 = 2.0 * z3 + z3 ** 2
    common = beta1 * F2[None, :, 0] + beta2 * F2[None, :, 1]

    g = None
    if spec.kind == "dgp1":
        e = rng.student_t(spec.nu, (N, T))
        y = alpha + common + e
    elif spec.kind == "dgp2":
        g = rng.uniform(0.0, 1.0, T)
        if spec.error_model == "M1":
            e = _correlated_errors(rng, N, T, rho=0.0, omega=0.0, L=0, heavy=False)
        elif spec.error_model == "M2":
            e = _correlated_errors(rng, N, T, rho=0.0, omega=0.0, L=0, heavy=True)
        else:
            e = _correlated_errors(rng, N, T, rho=0.2, omega=0.2, L=3, heavy=False)
        y = alpha + common + 3.0 * np.abs(g)[None, :] * e
    else:
        e = _correlated_errors(rng, N, T, rho=0.3, omega=0.0, L=0, heavy=False)
        y = common + e

    Z = np.stack([z1, z2, z3], axis=2)   # (N, T, 3)
    panel = _panel_from_arrays(y, Z)
    return panel, SimTruth(spec, F2, g)


def _correlated_errors(rng, N, T, rho, omega, L, heavy):
    """AR(rho) errors with neighbor-spillover innovations, 50-period burn-in."""
    total = T if rho == 0.0 else T + _BURN_IN
    v = rng.student_t(3, (N, total)) if heavy else rng.normal((N, total))
    if omega > 0.0:
        spill = np.zeros_like(v)
        for off in range(1, L + 1):
            spill[off:] += v[:-off]
            spill[:-off] += v[off:]
        innov = v + omega * spill
    else:
        innov = v
    if rho == 0.0:
        return innov[:, -T:]
    e = np.zeros(N)
    out = np.empty((N, T))
    for t_ in range(total):
        e = rho * e + innov[:, t_]
        if t_ >= total - T:
            out[:, t_ - (total - T)] = e
    return out


def _panel_from_arrays(y: np.ndarray, Z: np.ndarray) -> Panel:
    """Balanced panel with integer units 0..N-1 and periods 1..T."""
    N, T = y.shape
    units = tuple(range(N))
    data = {}
    for t_ in range(T):
        data[t_ + 1] = CrossSection(t_ + 1, units, y[:, t_].copy(), Z[:, t_, :].copy())
    return Panel(units=units, periods=tuple(range(1, T + 1)), M=Z.shape[2], data=data)


# -- metrics --------------------------------------------------------------

def mse_metrics(fit_, truth: SimTruth, tau: float):
    """Rotation-adjusted errors against the ground truth.

    Returns (mse_a, mse_B, mse_F); mse_a is None when the truth does not
    pin down the intercept coefficients at this quantile.
    """
    F_true = truth.F_true(tau)
    if F_true.shape[1] != fit_.K:
        raise ValueError(f"fit K={fit_.K} does not match truth K={F_true.shape[1]}")
    H = spectral.rotation_H(F_true, fit_.F_hat)
    B_true = truth.B_true(tau)
    mse_B = float(np.sum((fit_.B_hat - B_true @ H) ** 2))
    mse_F = float(np.sum((fit_.F_hat - F_true @ np.linalg.inv(H.T)) ** 2)
                  / fit_.F_hat.shape[0])
    a_true = truth.a_true(tau)
    mse_a = None if a_true is None else float(np.sum((fit_.a_hat - a_true) ** 2))
    return mse_a, mse_B, mse_F


@dataclass
class SimReport:
    config: dict
    n_reps: int
    metrics: dict               # tau -> {metric name -> value}
    n_failures: int
    failures: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self):
        return {
            "config": self.config,
            "n_reps": self.n_reps,
            "metrics": {str(tau): m for tau, m in self.metrics.items()},
            "n_failures": self.n_failures,
            "failures": self.failures,
            "wall_time": self.wall_time,
        }


def run_replications(spec: DgpSpec, taus, n_reps, master_seed,
                     with_test=False, n_draws=199, level=0.05,
                     k_for_mse="true", threads=1) -> SimReport:
    """Run seeded replications and aggregate the simulation metrics.

    Replication r uses the child seed (master_seed, r); the bootstrap in
    replication r at quantile index j uses (master_seed, r, 7, j).
    Results are reduced in replication order, so they do not depend on
    the thread count.
    """
    taus = list(taus)
    basis = dgp_basis(spec)
    P = basis.P

    def one_rep(r):
        seed_r = rngcore.child_seed(master_seed, r)
        panel, truth = generate(spec, seed_r)
        kmax = max(1, min(P // 2, spec.T - 2))
        lam = 1.0 / math.log(panel.min_period_size)
        out = {}
        for j, tau in enumerate(taus):
            stage = stage_one(panel, basis, tau)
            if not stage.per_period_converged.all():
                bad = int(np.count_nonzero(~stage.per_period_converged))
                raise NumericalError(
                    f"stage one failed to converge in {bad} period(s) at tau={tau}"
                )
            eigvals = stage.eigvals
            k_true = truth.K_true(tau)
            rec = {
                "khat_correct": selectk.k_by_ratio(eigvals, kmax) == k_true,
                "ktilde_correct": selectk.k_by_threshold(eigvals, lam) == k_true,
            }
            k_fit = k_true if k_for_mse == "true" else int(k_for_mse)
            fit_ = fit(stage, k_fit)
            try:
                mse_a, mse_B, mse_F = mse_metrics(fit_, truth, tau)
                rec.update(mse_a=mse_a, mse_B=mse_B, mse_F=mse_F)
            except (SingularGram, ValueError):
                rec.update(mse_a=None, mse_B=None, mse_F=None)
            if with_test:
                test = bootstrap.alpha_zero_test(
                    panel, basis, tau, k_fit, n_draws, level,
                    rngcore.child_seed(master_seed, r, 7, j), base_fit=fit_)
                rec["reject"] = test.reject
            out[tau] = rec
        return out

    t0 = time.monotonic()
    results = [None] * n_reps
    failures = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {r: pool.submit(_safe, one_rep, r) for r in range(n_reps)}
            for r in range(n_reps):
                results[r] = futs[r].result()
    else:
        for r in range(n_reps):
            results[r] = _safe(one_rep, r)
    for r, res in enumerate(results):
        if isinstance(res, Exception):
            failures.append({"replication": r, "error": f"{type(res).__name__}: {res}"})
            results[r] = None

    metrics = {tau: _aggregate([res[tau] for res in results if res is not None])
               for tau in taus}
    report = SimReport(
        config={"dgp": spec.kind, "N": spec.N, "T": spec.T, "nu": spec.nu,
                "error_model": spec.error_model, "taus": taus,
                "n_reps": n_reps, "seed": master_seed,
                "with_test": with_test, "n_draws": n_draws, "level": level},
        n_reps=n_reps,
        metrics=metrics,
        n_failures=len(failures),
        failures=failures,
        wall_time=time.monotonic() - t0,
    )
    return report


def _safe(func, r):
    try:
        return func(r)
    except NumericalError as exc:
        return exc


def _aggregate(records):
    out = {}
    n = len(records)
    out["n_effective"] = n
    if n == 0:
        return out
    for rate_key, src in (("correct_rate_khat", "khat_correct"),
                          ("correct_rate_ktilde", "ktilde_correct"),
                          ("rejection_rate", "reject")):
        vals = [rec[src] for rec in records if src in rec]
        if vals:
            p = float(np.mean(vals))
            out[rate_key] = p
            out[rate_key + "_se"] = float(math.sqrt(p * (1 - p) / len(vals)))
    for key in ("mse_a", "mse_B", "mse_F"):
        vals = [rec[key] for rec in records if rec.get(key) is not None]
        if vals:
            out["mean_" + key] = float(np.mean(vals))
    return out
