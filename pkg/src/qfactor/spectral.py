"""Shared dense linear-algebra kernels.

Symmetric eigendecomposition (LAPACK via numpy, with a deterministic
sign convention), time demeaning, the factor rotation matrix, and
ordinary least squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInput, RankDeficient, SingularGram

_RCOND = 1e-10


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray    # descending
    vectors: np.ndarray   # orthonormal columns, sign-fixed


def sym_eig(S) -> EigenPairs:
    """Full eigendecomposition of a symmetric matrix, descending order.

    Sign convention: in each eigenvector the entry of largest absolute
    value is made positive (ties broken by lowest index), so output is
    deterministic up to degenerate eigenvalue clusters.
    """
    S = np.asarray(S, dtype=float)
    if not np.all(np.isfinite(S)):
        raise NonFiniteInput("non-finite entries in symmetric matrix")
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    fix_signs(vecs)
    return EigenPairs(vals, vecs)


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns in place so the max-|entry| coordinate is positive."""
    for k in range(vectors.shape[1]):
        i = int(np.argmax(np.abs(vectors[:, k])))
        if vectors[i, k] < 0:
            vectors[:, k] = -vectors[:, k]
    return vectors


def demean_time(Y) -> np.ndarray:
    """Right-multiply by M_T = I - 11'/T: subtract each row's time mean."""
    Y = np.asarray(Y, dtype=float)
    return Y - Y.mean(axis=-1, keepdims=True)


def rotation_H(F_true, F_hat) -> np.ndarray:
    """Alignment matrix H = (F'M_T Fhat)(Fhat'M_T Fhat)^{-1}."""
    F_true = np.asarray(F_true, dtype=float)
    F_hat = np.asarray(F_hat, dtype=float)
    Fc = demean_time(F_hat.T).T
    G = F_hat.T @ Fc
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] < _RCOND * max(sv[0], 1.0):
        raise SingularGram("Fhat' M_T Fhat numerically singular")
    return np.linalg.solve(G.T, (F_true.T @ Fc).T).T


def ols(X, y, intercept=False) -> np.ndarray:
    """Least-squares coefficients; raises on rank-deficient design."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and np.asarray(y).shape[0] != 1:
        X = X.T
    y = np.asarray(y, dtype=float)
    if intercept:
        X = np.hstack([np.ones((X.shape[0], 1)), X])
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[-1] < _RCOND * max(sv[0], 1.0):
        raise RankDeficient("design matrix numerically rank deficient")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef
