"""Weighted bootstrap inference.

Each bootstrap draw reweights every period's quantile regression with one
shared set of unit-level standard-exponential weights, then rebuilds the
loading/intercept/factor estimates around the *fixed* real-world factor
estimate. The loading-space extraction is deliberately a linear projection
on the base fit's factors, never a fresh eigendecomposition: re-extracting
eigenvectors in the bootstrap world changes the rotation and invalidates
the comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rngcore
from .errors import SingularGram, TooFewDraws
from .estimator import QrpcaFit, _stage_one_from_designs, fit, stage_one
from .panel import Panel
from .sieve import Basis, eval_basis

_RCOND = 1e-10


@dataclass(frozen=True)
class BootstrapDraw:
    a_star: np.ndarray     # (P,)
    B_star: np.ndarray     # (P, K), not orthonormal in general
    F_star: np.ndarray     # (T, K)


@dataclass(frozen=True)
class AlphaTest:
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    n_draws: int


def draw_weights(stream: rngcore.Stream, units) -> dict:
    """One standard-exponential weight per unit of the full unit universe.

    The same map is reused for every period of a draw so temporal
    dependence is preserved; unbalanced panels simply look up the units
    present in each period.
    """
    units = list(units)
    if not units:
        raise ValueError("empty unit set")
    w = stream.exponential(len(units))
    return dict(zip(units, w))


class BootstrapEngine:
    """Caches per-period designs and base-fit projections across draws."""

    def __init__(self, panel: Panel, basis: Basis, tau: float, base_fit: QrpcaFit):
        self.panel = panel
        self.tau = tau
        self.base_fit = base_fit
        self.P = basis.P
        self.designs = []
        self.unit_index = []   # row positions into the unit universe
        unit_pos = {u: i for i, u in enumerate(panel.units)}
        for t in panel.periods:
            cs = panel.slice_period(t)
            self.designs.append((eval_basis(basis, cs.Z), cs.y))
            self.unit_index.append(np.array([unit_pos[u] for u in cs.units]))

        F = base_fit.F_hat
        Fc = F - F.mean(axis=0, keepdims=True)
        G = F.T @ Fc
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] < _RCOND * max(sv[0], 1.0):
            raise SingularGram("Fhat' M_T Fhat numerically singular")
        # Ystar M_T Fhat (Fhat' M_T Fhat)^{-1} = Ystar @ proj
        self.proj = Fc @ np.linalg.inv(G)

    def run(self, weight_vector: np.ndarray) -> BootstrapDraw:
        """One draw given weights aligned with the panel's unit universe."""
        weights = [weight_vector[idx] for idx in self.unit_index]
        stage = _stage_one_from_designs(self.designs, self.tau, self.P, weights=weights)
        Ystar = stage.Ytilde
        B_star = Ystar @ self.proj
        G = B_star.T @ B_star
        sv = np.linalg.svd(G, compute_uv=False)
        if sv[-1] < _RCOND * max(sv[0], 1.0):
            raise SingularGram("Bstar' Bstar numerically singular")
        Ginv = np.linalg.inv(G)
        ybar = Ystar.mean(axis=1)
        a_star = ybar - B_star @ (Ginv @ (B_star.T @ ybar))
        F_star = Ystar.T @ B_star @ Ginv
        return BootstrapDraw(a_star, B_star, F_star)


def bootstrap_draw(panel, basis, tau, base_fit, weights) -> BootstrapDraw:
    """One bootstrap replicate from a unit -> weight map."""
    engine = BootstrapEngine(panel, basis, tau, base_fit)
    wvec = np.array([weights[u] for u in panel.units])
    return engine.run(wvec)


def bootstrap_draws(panel, basis, tau, base_fit, n_draws, seed):
    """Seeded sequence of draws; draw b uses the child stream (seed, b)."""
    engine = BootstrapEngine(panel, basis, tau, base_fit)
    n_units = len(panel.units)
    out = []
    for b in range(n_draws):
        w = rngcore.stream(seed, b).exponential(n_units)
        out.append(engine.run(w))
    return out


def critical_index(n_draws: int, level: float) -> int:
    """1-based order-statistic index for the empirical (1-level) quantile."""
    return math.ceil((1.0 - level) * (n_draws + 1))


def alpha_zero_test(panel, basis, tau, K, n_draws, level, seed,
                    base_fit=None) -> AlphaTest:
    """Bootstrap test of a zero intercept function.

    Compares the squared norm of the intercept coefficients against the
    empirical (1-level) quantile of the squared bootstrap deviations.
    The common sample-size factor cancels between the two sides and is
    omitted from both.
    """
    if n_draws < 19:
        raise TooFewDraws(f"need >= 19 draws, got {n_draws}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0,1), got {level}")
    if base_fit is None:
        base_fit = fit(stage_one(panel, basis, tau), K)
    a_hat = base_fit.a_hat
    statistic = float(a_hat @ a_hat)
    draws = bootstrap_draws(panel, basis, tau, base_fit, n_draws, seed)
    dev = np.array([(d.a_star - a_hat) @ (d.a_star - a_hat) for d in draws])
    k = critical_index(n_draws, level)
    if k > n_draws:
        critical = np.inf
    else:
        critical = float(np.sort(dev)[k - 1])
    p_value = (1.0 + int(np.count_nonzero(dev >= statistic))) / (n_draws + 1.0)
    return AlphaTest(statistic, critical, p_value, statistic > critical, n_draws)


@dataclass(frozen=True)
class Bands:
    a_lower: np.ndarray
    a_upper: np.ndarray
    B_lower: np.ndarray
    B_upper: np.ndarray
    row_statistics: np.ndarray    # squared row norms of B_hat
    row_critical: np.ndarray
    row_reject: np.ndarray
    level: float


def bootstrap_bands(draws, base_fit: QrpcaFit, level: float) -> Bands:
    """Basic-bootstrap coordinate intervals for the intercept and loadings.

    Interval endpoints are empirical quantiles of 2*estimate - replicate.
    Row-joint significance uses the squared Euclidean row norm with
    bootstrap critical values.
    """
    if len(draws) < 19:
        raise TooFewDraws(f"need >= 19 draws, got {len(draws)}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0,1), got {level}")
    a_hat, B_hat = base_fit.a_hat, base_fit.B_hat
    a_rep = np.stack([d.a_star for d in draws])         # (B, P)
    B_rep = np.stack([d.B_star for d in draws])         # (B, P, K)
    lo, hi = level / 2.0, 1.0 - level / 2.0

    a_basic = 2.0 * a_hat[None, :] - a_rep
    B_basic = 2.0 * B_hat[None, :, :] - B_rep
    a_lower = np.quantile(a_basic, lo, axis=0)
    a_upper = np.quantile(a_basic, hi, axis=0)
    B_lower = np.quantile(B_basic, lo, axis=0)
    B_upper = np.quantile(B_basic, hi, axis=0)

    row_stat = np.sum(B_hat * B_hat, axis=1)
    row_dev = np.sum((B_rep - B_hat[None, :, :]) ** 2, axis=2)   # (B, P)
    k = critical_index(len(draws), level)
    if k > len(draws):
        row_crit = np.full(row_stat.shape, np.inf)
    else:
        row_crit = np.sort(row_dev, axis=0)[k - 1]
    return Bands(a_lower, a_upper, B_lower, B_upper,
                 row_stat, row_crit, row_stat > row_crit, level)
