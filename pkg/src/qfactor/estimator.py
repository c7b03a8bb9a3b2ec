"""Two-step quantile factor extraction.

Stage one runs a cross-sectional sieve quantile regression per period,
stacking the coefficient vectors into a P x T matrix. Stage two applies
PCA to the time-demeaned coefficient matrix: the top-K eigenvectors give
the loading-coefficient matrix B_hat, the intercept coefficients are the
residual of the time mean after projecting out B_hat, and factors are
the coefficient paths projected on B_hat.

A sklearn-style wrapper (:class:`QuantileFactorPCA`) exposes the same
pipeline with fit/predict semantics and get_params/set_params.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import qreg, selectk, spectral
from .errors import DimensionMismatch, InsufficientObservations, KOutOfRange
from .panel import Panel
from .sieve import Basis, eval_basis


@dataclass(frozen=True)
class StageOne:
    """Per-period quantile regression coefficients, one column per period."""

    tau: float
    Ytilde: np.ndarray                 # (P, T)
    per_period_converged: np.ndarray   # (T,) bool

    @property
    def eigvals(self) -> np.ndarray:
        """Spectrum of Ytilde M_T Ytilde' / T, descending."""
        Yc = spectral.demean_time(self.Ytilde)
        S = Yc @ Yc.T / self.Ytilde.shape[1]
        return spectral.sym_eig(S).values


@dataclass(frozen=True)
class QrpcaFit:
    tau: float
    K: int
    a_hat: np.ndarray      # (P,)
    B_hat: np.ndarray      # (P, K), orthonormal columns
    F_hat: np.ndarray      # (T, K)
    eigvals: np.ndarray    # full spectrum, descending


def stage_one(panel: Panel, basis: Basis, tau: float) -> StageOne:
    """Run the period-by-period sieve quantile regressions."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0,1), got {tau}")
    P = basis.P
    designs = []
    for t in panel.periods:
        cs = panel.slice_period(t)
        if len(cs.y) < P:
            raise InsufficientObservations(t, len(cs.y), P)
        designs.append((eval_basis(basis, cs.Z), cs.y))
    return _stage_one_from_designs(designs, tau, P)


def _stage_one_from_designs(designs, tau, P, weights=None) -> StageOne:
    """Solve all period problems, batching periods of equal size.

    ``weights`` optionally maps each period index to a weight vector
    aligned with that period's rows.
    """
    T = len(designs)
    Ytilde = np.empty((P, T))
    converged = np.zeros(T, dtype=bool)
    by_size: dict = {}
    for t, (Phi, y) in enumerate(designs):
        by_size.setdefault(len(y), []).append(t)
    for n, idxs in by_size.items():
        Xb = np.stack([designs[t][0] for t in idxs])
        yb = np.stack([designs[t][1] for t in idxs])
        wb = None
        if weights is not None:
            wb = np.stack([weights[t] for t in idxs])
        coefs, _, conv = qreg.solve_qr_batch(Xb, yb, tau, weights=wb)
        for j, t in enumerate(idxs):
            Ytilde[:, t] = coefs[j]
            converged[t] = conv[j]
    return StageOne(tau, Ytilde, converged)


def fit(stage: StageOne, K: int) -> QrpcaFit:
    """Extract the rank-K structure from the stage-one coefficient matrix."""
    P, T = stage.Ytilde.shape
    if not 1 <= K <= min(P, T - 1):
        raise KOutOfRange(f"K={K} outside [1, min(P, T-1)] = [1, {min(P, T - 1)}]")
    Yc = spectral.demean_time(stage.Ytilde)
    S = Yc @ Yc.T / T
    eig = spectral.sym_eig(S)
    B = eig.vectors[:, :K]
    ybar = stage.Ytilde.mean(axis=1)
    a = ybar - B @ (B.T @ ybar)
    F = stage.Ytilde.T @ B
    return QrpcaFit(stage.tau, K, a, B, F, eig.values)


def predict_alpha(fit_: QrpcaFit, basis: Basis, z) -> float:
    """Intercept function value a_hat' phi(z)."""
    phi = eval_basis(basis, z)
    if phi.shape[-1] != fit_.a_hat.shape[0]:
        raise DimensionMismatch(
            f"basis dimension {phi.shape[-1]} != fit dimension {fit_.a_hat.shape[0]}"
        )
    return phi @ fit_.a_hat


def predict_beta(fit_: QrpcaFit, basis: Basis, z) -> np.ndarray:
    """Loading function value B_hat' phi(z)."""
    phi = eval_basis(basis, z)
    if phi.shape[-1] != fit_.B_hat.shape[0]:
        raise DimensionMismatch(
            f"basis dimension {phi.shape[-1]} != fit dimension {fit_.B_hat.shape[0]}"
        )
    return phi @ fit_.B_hat


def fit_quantile_path(panel: Panel, basis: Basis, taus, k_rule="auto", k_max=None):
    """Fit one model per quantile index.

    ``k_rule`` is either a fixed positive integer or "auto", in which
    case the eigenvalue-ratio selector picks K per quantile with the
    default tuning (K_max = floor(P/2) clamped to T-2 unless overridden).
    """
    taus = list(taus)
    if not taus:
        raise ValueError("taus must be nonempty")
    fits = {}
    for tau in taus:
        stage = stage_one(panel, basis, tau)
        if k_rule == "auto":
            K = select_k_auto(stage, panel, k_max=k_max).k_ratio
        else:
            K = int(k_rule)
        fits[tau] = fit(stage, K)
    return fits


def select_k_auto(stage: StageOne, panel: Panel, k_max=None) -> "selectk.KSelection":
    """Apply both factor-number selectors with default tuning to a stage."""
    P, T = stage.Ytilde.shape
    n_min = panel.min_period_size
    kmax_def, lam = selectk.default_tuning(n_min, P)
    kmax = min(kmax_def, T - 2) if k_max is None else int(k_max)
    kmax = max(1, kmax)
    eigvals = stage.eigvals
    return selectk.KSelection(
        k_ratio=selectk.k_by_ratio(eigvals, kmax),
        k_threshold=selectk.k_by_threshold(eigvals, lam),
        ratios=_adjacent_ratios(eigvals, kmax),
        threshold_used=lam,
    )


def _adjacent_ratios(eigvals, kmax):
    ev = np.asarray(eigvals, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return ev[:kmax] / ev[1:kmax + 1]


class QuantileFactorPCA(BaseEstimator):
    """Sklearn-style front end for the two-step quantile factor extractor.

    Parameters
    ----------
    basis_spec : BasisSpec
        Sieve specification applied to each characteristic.
    tau : float
        Quantile index in (0, 1).
    n_factors : int or "auto"
        Number of factors; "auto" uses the eigenvalue-ratio selector.
    k_max : int or None
        Override for the selector's K_max.
    """

    def __init__(self, basis_spec=None, tau=0.5, n_factors="auto", k_max=None):
        self.basis_spec = basis_spec
        self.tau = tau
        self.n_factors = n_factors
        self.k_max = k_max

    def fit(self, panel: Panel, y=None):
        from .sieve import BasisSpec

        spec = self.basis_spec if self.basis_spec is not None else BasisSpec()
        basis = Basis(spec, panel.M)
        stage = stage_one(panel, basis, self.tau)
        if self.n_factors == "auto":
            K = select_k_auto(stage, panel, k_max=self.k_max).k_ratio
        else:
            K = int(self.n_factors)
        result = fit(stage, K)
        self.basis_ = basis
        self.stage_ = stage
        self.result_ = result
        self.n_factors_ = K
        self.a_hat_ = result.a_hat
        self.B_hat_ = result.B_hat
        self.F_hat_ = result.F_hat
        self.eigvals_ = result.eigvals
        return self

    def predict_alpha(self, z):
        return predict_alpha(self.result_, self.basis_, z)

    def predict_beta(self, z):
        return predict_beta(self.result_, self.basis_, z)

    def transform(self, panel: Panel):
        """Factor series for a panel under the fitted loading space."""
        stage = stage_one(panel, self.basis_, self.tau)
        return stage.Ytilde.T @ self.B_hat_
