"""Weighted linear quantile regression.

The solver is a Mehrotra-style primal-dual interior point method on the
LP dual of the check-loss problem (the classic Frisch-Newton approach),
vectorized over a batch of problems that share the same shape. Weights
enter by row scaling: w * rho_tau(y - x'b) = rho_tau(w*y - (w*x)'b).

``oracle_qr`` is an independent brute-force oracle for testing: an
optimal basic solution of the QR linear program interpolates P points,
so enumerating all nonsingular P-subsets finds the global minimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateProblem, GuardExceeded, NoNonsingularSubset, RankDeficient

_RCOND = 1e-10          # rank threshold: smallest sv < 1e-10 * largest
_GAP_TOL = 1e-9         # relative duality-gap tolerance
_MAX_ITER = 100


@dataclass(frozen=True)
class QrSolution:
    coef: np.ndarray
    objective: float
    iterations: int
    converged: bool


def check_loss(tau: float, u) -> float:
    """Asymmetric absolute loss (tau - 1{u <= 0}) * u."""
    u = np.asarray(u, dtype=float)
    return np.where(u > 0, tau * u, (tau - 1.0) * u)


def check_objective(tau, X, y, coef, weights=None) -> float:
    r = np.asarray(y, float) - np.asarray(X, float) @ np.asarray(coef, float)
    loss = check_loss(tau, r)
    if weights is not None:
        loss = loss * np.asarray(weights, float)
    return float(np.sum(loss))


def solve_qr(X, y, tau, weights=None, tol=_GAP_TOL, max_iter=_MAX_ITER) -> QrSolution:
    """Solve one weighted quantile regression problem."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    w = None if weights is None else np.asarray(weights, dtype=float)[None, :]
    coefs, iters, conv = solve_qr_batch(
        X[None, :, :], y[None, :], tau, weights=w, tol=tol, max_iter=max_iter
    )
    obj = check_objective(tau, X, y, coefs[0], None if weights is None else weights)
    return QrSolution(coefs[0], obj, int(iters[0]), bool(conv[0]))


def solve_qr_batch(X, y, tau, weights=None, tol=_GAP_TOL, max_iter=_MAX_ITER):
    """Solve a batch of quantile regression problems of identical shape.

    Parameters
    ----------
    X : (B, n, p) design matrices
    y : (B, n) responses
    tau : quantile index in (0, 1)
    weights : optional (B, n) positive weights

    Returns
    -------
    coefs : (B, p), iterations : (B,), converged : (B,) bool
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0,1), got {tau}")
    B, n, p = X.shape
    if n < p:
        raise DegenerateProblem(f"n={n} < p={p}")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        X = X * w[:, :, None]
        y = y * w
    _check_rank(X)
    return _frisch_newton(X, y, tau, tol, max_iter)


def _check_rank(X):
    sv = np.linalg.svd(X, compute_uv=False)
    bad = sv[:, -1] < _RCOND * sv[:, 0]
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise RankDeficient(
            f"design matrix numerically rank deficient (batch index {idx}, "
            f"sv ratio {sv[idx, -1] / sv[idx, 0]:.2e})"
        )


def _frisch_newton(X, y, tau, tol, max_iter):
    """Batched Mehrotra predictor-corrector on the bounded dual.

    Dual LP: max y'a  s.t.  X'a = (1-tau) X'1,  0 <= a <= 1.
    KKT: with residual r = y - X beta, the multipliers split as
    zpos = r^-, zneg = r^+, and complementarity ties them to a, s = 1 - a.
    """
    B, n, p = X.shape
    Xt = X.transpose(0, 2, 1)

    a = np.full((B, n), 1.0 - tau)
    s = np.full((B, n), tau)

    # Initial beta from least squares; multipliers from the residual split.
    gram = Xt @ X
    beta = np.linalg.solve(gram, (Xt @ y[:, :, None]))[:, :, 0]
    r = y - np.einsum("bnp,bp->bn", X, beta)
    delta = 0.1 * (1.0 + np.mean(np.abs(r), axis=1, keepdims=True))
    zneg = np.maximum(r, 0.0) + delta          # multiplier for s >= 0
    zpos = np.maximum(-r, 0.0) + delta         # multiplier for a >= 0

    rhs = (1.0 - tau) * np.sum(Xt, axis=2)     # (B, p)

    coefs = beta.copy()
    best_obj = _objectives(X, y, beta, tau)
    iters = np.zeros(B, dtype=int)
    active = np.ones(B, dtype=bool)

    for it in range(1, max_iter + 1):
        gap = np.sum(a * zpos + s * zneg, axis=1)
        scale = 1.0 + np.abs(np.sum(y * a, axis=1))
        newly_done = active & (gap <= tol * scale)
        active &= ~newly_done
        if not np.any(active):
            break

        k = active
        ak, sk, zp, zn = a[k], s[k], zpos[k], zneg[k]
        Xk, Xtk, yk, bk = X[k], Xt[k], y[k], beta[k]
        nb = ak.shape[0]

        r1 = rhs[k] - np.einsum("bpn,bn->bp", Xtk, ak)
        r2 = 1.0 - ak - sk
        r3 = yk - np.einsum("bnp,bp->bn", Xk, bk) + zp - zn

        q = zn / sk + zp / ak                      # (nb, n)
        inv_q = 1.0 / q
        M = np.einsum("bpn,bn,bnq->bpq", Xtk, inv_q, Xk)

        def _solve_dirs(rc_a, rc_s):
            rhs_vec = r3 + rc_a / ak - (rc_s - zn * r2) / sk
            b_rhs = np.einsum("bpn,bn->bp", Xtk, rhs_vec * inv_q) - r1
            dbeta = np.linalg.solve(M, b_rhs[:, :, None])[:, :, 0]
            da = inv_q * (rhs_vec - np.einsum("bnp,bp->bn", Xk, dbeta))
            ds = r2 - da
            dzp = (rc_a - zp * da) / ak
            dzn = (rc_s - zn * ds) / sk
            return dbeta, da, ds, dzp, dzn

        # Affine (predictor) step
        dbeta, da, ds, dzp, dzn = _solve_dirs(-ak * zp, -sk * zn)
        ap_aff = _step_len(np.concatenate([ak, sk], 1), np.concatenate([da, ds], 1))
        ad_aff = _step_len(np.concatenate([zp, zn], 1), np.concatenate([dzp, dzn], 1))

        mu = np.sum(ak * zp + sk * zn, axis=1) / (2 * Xk.shape[1])
        mu_aff = (
            np.sum((ak + ap_aff[:, None] * da) * (zp + ad_aff[:, None] * dzp), axis=1)
            + np.sum((sk + ap_aff[:, None] * ds) * (zn + ad_aff[:, None] * dzn), axis=1)
        ) / (2 * Xk.shape[1])
        sigma = np.clip((mu_aff / np.maximum(mu, 1e-300)) ** 3, 0.0, 1.0)
        target = (sigma * mu)[:, None]

        # Corrector step
        dbeta, da, ds, dzp, dzn = _solve_dirs(
            target - ak * zp - da * dzp, target - sk * zn - ds * dzn
        )
        ap = np.minimum(1.0, 0.9995 * _step_len(
            np.concatenate([ak, sk], 1), np.concatenate([da, ds], 1)))
        ad = np.minimum(1.0, 0.9995 * _step_len(
            np.concatenate([zp, zn], 1), np.concatenate([dzp, dzn], 1)))

        a[k] = ak + ap[:, None] * da
        s[k] = sk + ap[:, None] * ds
        zpos[k] = zp + ad[:, None] * dzp
        zneg[k] = zn + ad[:, None] * dzn
        beta[k] = bk + ad[:, None] * dbeta
        iters[k] = it

        obj_k = _objectives(X[k], y[k], beta[k], tau)
        better = obj_k < best_obj[k]
        idx = np.flatnonzero(k)[better]
        coefs[idx] = beta[k][better]
        best_obj[idx] = obj_k[better]

    converged = ~active
    return coefs, iters, converged


def _objectives(X, y, beta, tau):
    r = y - np.einsum("bnp,bp->bn", X, beta)
    return np.sum(np.where(r > 0, tau * r, (tau - 1.0) * r), axis=1)


def _step_len(v, dv):
    """Largest alpha in (0, 1] keeping v + alpha*dv positive, per batch row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dv < 0, -v / dv, np.inf)
    return np.minimum(1.0, np.min(ratio, axis=1))


def oracle_qr(X, y, tau, weights=None, n_max=14, p_max=3) -> QrSolution:
    """Exhaustive-enumeration oracle for tiny problems.

    Valid because some optimal basic solution of the QR linear program
    interpolates exactly P observations; ties are broken by the
    lexicographically smallest subset.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n > n_max or p > p_max:
        raise GuardExceeded(f"oracle guard: n={n} (max {n_max}), p={p} (max {p_max})")
    if n < p:
        raise DegenerateProblem(f"n={n} < p={p}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    best = None
    best_obj = np.inf
    for subset in combinations(range(n), p):
        Xs = X[list(subset)]
        sv = np.linalg.svd(Xs, compute_uv=False)
        if sv[-1] < _RCOND * max(sv[0], 1.0):
            continue
        coef = np.linalg.solve(Xs, y[list(subset)])
        obj = check_objective(tau, X, y, coef, w)
        if obj < best_obj - 0.0:   # strict: lexicographic tie-break via order
            best_obj = obj
            best = coef
    if best is None:
        raise NoNonsingularSubset("no nonsingular P-subset of rows")
    return QrSolution(best, float(best_obj), 0, True)
