"""Goodness-of-fit suite for evaluating extracted factors on return panels.

In-sample: total, time-series-averaged, and cross-sectionally-averaged
R-squared, each in two flavors (fitted value with or without the
per-portfolio intercept). Out-of-sample: expanding-window betas, a
cross-sectional risk-premium regression without intercept, and the three
analogous predictive R-squared measures. All denominators are raw sums
of squared returns (no demeaning).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory, RankDeficient

_RCOND = 1e-10

IN_SAMPLE_KEYS = ("r2_total", "r2_ts_avg", "r2_cs_avg",
                  "r2f_total", "r2f_ts_avg", "r2f_cs_avg")
OOS_KEYS = ("r2_oos_total", "r2_oos_ts_avg", "r2_oos_cs_avg")


@dataclass(frozen=True)
class R2Report:
    in_sample: dict
    out_of_sample: dict

    def to_dict(self):
        return {**self.in_sample, **self.out_of_sample}


def _validate(returns, factors):
    R = np.asarray(returns, dtype=float)
    F = np.asarray(factors, dtype=float)
    if R.ndim != 2 or F.ndim != 2:
        raise ValueError("returns must be (N, T) and factors (T, K)")
    if R.shape[1] != F.shape[0]:
        raise ValueError(
            f"returns have T={R.shape[1]} periods but factors have {F.shape[0]}"
        )
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(F))):
        raise ValueError("non-finite entries")
    return R, F


def _design(F):
    A = np.hstack([np.ones((F.shape[0], 1)), F])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] < _RCOND * max(sv[0], 1.0):
        raise RankDeficient("constant-plus-factors design is rank deficient")
    return A


def r2_insample(returns, factors) -> dict:
    """Six in-sample R-squared values for a factor series on a return panel."""
    R, F = _validate(returns, factors)
    N, T = R.shape
    K = F.shape[1]
    if T < K + 2:
        raise ValueError(f"need T >= K+2, got T={T}, K={K}")
    A = _design(F)
    coef, *_ = np.linalg.lstsq(A, R.T, rcond=None)    # (K+1, N)
    fitted_full = (A @ coef).T                        # (N, T)
    fitted_f = (F @ coef[1:]).T

    def three(fitted):
        resid2 = (R - fitted) ** 2
        denom2 = R ** 2
        total = 1.0 - resid2.sum() / denom2.sum()
        ts_avg = float(np.mean(1.0 - resid2.sum(axis=1) / denom2.sum(axis=1)))
        cs_avg = float(np.mean(1.0 - resid2.sum(axis=0) / denom2.sum(axis=0)))
        return float(total), ts_avg, cs_avg

    full = three(fitted_full)
    fonly = three(fitted_f)
    return dict(zip(IN_SAMPLE_KEYS, full + fonly))


def r2_oos(returns, factors, burn_in: int = 240) -> dict:
    """Out-of-sample predictive R-squared with expanding-window risk premia.

    For each window length s >= burn_in, per-portfolio betas come from a
    time-series regression on constant plus factors over periods 1..s,
    the risk premium from a cross-sectional regression of average
    returns through s on those betas (no intercept), and the predictor
    of the period-(s+1) return is beta' premium.
    """
    R, F = _validate(returns, factors)
    N, T = R.shape
    burn_in = int(burn_in)
    if burn_in < F.shape[1] + 2:
        raise ValueError("burn_in too small for the factor dimension")
    if T <= burn_in:
        raise InsufficientHistory(f"need T > burn_in, got T={T}, burn_in={burn_in}")

    preds = np.empty((N, T - burn_in))
    actual = np.empty((N, T - burn_in))
    for j, s in enumerate(range(burn_in, T)):
        A = _design(F[:s])
        coef, *_ = np.linalg.lstsq(A, R[:, :s].T, rcond=None)
        betas = coef[1:].T                     # (N, K)
        mean_ret = R[:, :s].mean(axis=1)
        sv = np.linalg.svd(betas, compute_uv=False)
        if sv[-1] < _RCOND * max(sv[0], 1.0):
            raise RankDeficient(f"beta matrix rank deficient at window {s}")
        premium, *_ = np.linalg.lstsq(betas, mean_ret, rcond=None)
        preds[:, j] = betas @ premium
        actual[:, j] = R[:, s]

    resid2 = (actual - preds) ** 2
    denom2 = actual ** 2
    return {
        "r2_oos_total": float(1.0 - resid2.sum() / denom2.sum()),
        "r2_oos_ts_avg": float(np.mean(1.0 - resid2.sum(axis=1) / denom2.sum(axis=1))),
        "r2_oos_cs_avg": float(np.mean(1.0 - resid2.sum(axis=0) / denom2.sum(axis=0))),
    }


def evaluate_factors(returns, factors, burn_in: int = 240) -> R2Report:
    """All nine R-squared values."""
    return R2Report(r2_insample(returns, factors),
                    r2_oos(returns, factors, burn_in=burn_in))
