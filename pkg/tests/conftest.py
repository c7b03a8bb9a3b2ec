"""Shared fixtures and invariant helpers for the test suite."""

import numpy as np
import pytest

from qfactor import Basis, BasisSpec, BlockSpec, make_panel


def assert_fit_normalized(fit_, tol_orth=1e-10, tol_diag=1e-8):
    """Check the identification constraints on a fitted model.

    B_hat has orthonormal columns, a_hat is orthogonal to them, and
    F_hat' M_T F_hat / T is diagonal.
    """
    B, a, F = fit_.B_hat, fit_.a_hat, fit_.F_hat
    K = B.shape[1]
    assert np.max(np.abs(B.T @ B - np.eye(K))) <= tol_orth
    assert np.max(np.abs(a @ B)) <= tol_orth
    T = F.shape[0]
    Fc = F - F.mean(axis=0, keepdims=True)
    G = F.T @ Fc / T
    off = G - np.diag(np.diag(G))
    assert np.max(np.abs(off)) <= tol_diag


def toy_records(n_units=30, n_periods=6, M=2, seed=11, noise=0.1):
    """Small synthetic long-format records with a planted factor structure."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n_periods, 1))
    records = []
    for t in range(1, n_periods + 1):
        Z = rng.uniform(-0.5, 0.5, size=(n_units, M))
        beta = Z[:, 0]
        y = 0.3 + beta * f[t - 1, 0] + noise * rng.standard_normal(n_units)
        for i in range(n_units):
            records.append((f"u{i:03d}", t, y[i], Z[i]))
    return records


@pytest.fixture
def toy_panel():
    return make_panel(toy_records())


@pytest.fixture
def quad_basis():
    def build(panel, intercept=True):
        return Basis(BasisSpec(BlockSpec("polynomial", degree=2),
                               include_intercept=intercept), panel.M)
    return build
