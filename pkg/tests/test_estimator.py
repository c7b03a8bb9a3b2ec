"""Two-step extraction: stage-one regressions, PCA step, invariants,
exact recovery, and the sklearn wrapper."""

import numpy as np
import pytest

from qfactor import (
    Basis,
    BasisSpec,
    BlockSpec,
    QuantileFactorPCA,
    fit,
    fit_quantile_path,
    make_panel,
    predict_alpha,
    predict_beta,
    stage_one,
)
from qfactor.errors import (
    DimensionMismatch,
    InsufficientObservations,
    KOutOfRange,
)
from qfactor.estimator import StageOne
from qfactor.spectral import rotation_H

from conftest import assert_fit_normalized, toy_records


def _noise_free_panel(seed=0, N=40, T=8):
    """y is an exact linear function of phi(z): stage one must recover it."""
    rng = np.random.default_rng(seed)
    a = np.array([0.4, 1.0, -0.5])
    b = np.array([0.0, 2.0, 1.0])
    f = rng.standard_normal(T)
    records = []
    for t in range(1, T + 1):
        z = rng.uniform(-0.5, 0.5, N)
        phi = np.column_stack([np.ones(N), z, z * z])
        y = phi @ (a + b * f[t - 1])
        for i in range(N):
            records.append((f"u{i:02d}", t, y[i], [z[i]]))
    return make_panel(records), a, b, f


def test_stage_one_recovers_exact_coefficients():
    panel, a, b, f = _noise_free_panel()
    basis = Basis(BasisSpec(BlockSpec("polynomial", degree=2),
                            include_intercept=True), 1)
    stage = stage_one(panel, basis, 0.5)
    assert stage.per_period_converged.all()
    expected = a[:, None] + b[:, None] * f[None, :]
    np.testing.assert_allclose(stage.Ytilde, expected, atol=1e-6)


def test_stage_one_tau_monotone():
    # Coefficient paths at higher tau dominate for an intercept shift
    rng = np.random.default_rng(7)
    records = []
    for t in range(1, 5):
        z = rng.uniform(-0.5, 0.5, 200)
        y = z + rng.standard_normal(200)
        records.extend((f"u{i}", t, y[i], [z[i]]) for i in range(200))
    panel = make_panel(records)
    basis = Basis(BasisSpec(BlockSpec("polynomial", degree=1),
                            include_intercept=True), 1)
    lo = stage_one(panel, basis, 0.25).Ytilde[0]
    hi = stage_one(panel, basis, 0.75).Ytilde[0]
    assert np.all(hi > lo)


def test_stage_one_insufficient_observations():
    panel = make_panel([("a", 1, 1.0, [0.1]), ("b", 1, 2.0, [0.2])])
    basis = Basis(BasisSpec(BlockSpec("polynomial", degree=2),
                            include_intercept=True), 1)
    with pytest.raises(InsufficientObservations):
        stage_one(panel, basis, 0.5)


def test_stage_one_bad_tau():
    panel = make_panel(toy_records())
    basis = Basis(BasisSpec(BlockSpec("polynomial", degree=1)), panel.M)
    with pytest.raises(ValueError):
        stage_one(panel, basis, 0.0)


def _synthetic_stage(P=6, T=12, K=2, seed=0, with_mean=True):
    """Exact low-rank stage-one matrix with known (a, B, F)."""
    rng = np.random.default_rng(seed)
    B0 = np.linalg.qr(rng.standard_normal((P, K)))[0]
    a0 = rng.standard_normal(P)
    a0 -= B0 @ (B0.T @ a0)
    if not with_mean:
        a0 = np.zeros(P)
    F0 = rng.standard_normal((T, K)) * np.array([3.0, 1.0])
    Y = a0[:, None] + B0 @ F0.T
    return StageOne(0.5, Y, np.ones(T, dtype=bool)), a0, B0, F0


def test_exact_low_rank_recovery():
    stage, a0, B0, F0 = _synthetic_stage()
    fit_ = fit(stage, 2)
    assert_fit_normalized(fit_)
    H = rotation_H(F0, fit_.F_hat)
    assert np.sum((fit_.a_hat - a0) ** 2) <= 1e-18
    assert np.sum((fit_.B_hat - B0 @ H) ** 2) <= 1e-18
    assert np.sum((fit_.F_hat - F0 @ np.linalg.inv(H.T)) ** 2) <= 1e-18


def test_fit_eigvals_match_factor_scale():
    stage, _, _, F0 = _synthetic_stage()
    fit_ = fit(stage, 2)
    # [DERIVED] nonzero spectrum equals the eigenvalues of B F' M_T F B'/T
    Fc = F0 - F0.mean(axis=0, keepdims=True)
    want = np.sort(np.linalg.eigvalsh(F0.T @ Fc / F0.shape[0]))[::-1]
    np.testing.assert_allclose(fit_.eigvals[:2], want, atol=1e-10)
    np.testing.assert_allclose(fit_.eigvals[2:], 0.0, atol=1e-10)


def test_fit_k_out_of_range():
    stage, *_ = _synthetic_stage(P=6, T=12)
    for K in (0, 7, 12):
        with pytest.raises(KOutOfRange):
            fit(stage, K)


def test_fit_invariants_with_noise():
    rng = np.random.default_rng(3)
    stage, a0, B0, F0 = _synthetic_stage(seed=4)
    noisy = StageOne(0.5, stage.Ytilde + 0.1 * rng.standard_normal(
        stage.Ytilde.shape), stage.per_period_converged)
    for K in (1, 2, 3):
        assert_fit_normalized(fit(noisy, K))


def test_column_permutation_stability():
    # permuting periods permutes F rows and leaves a, B unchanged
    stage, *_ = _synthetic_stage(seed=5)
    perm = np.random.default_rng(0).permutation(stage.Ytilde.shape[1])
    permuted = StageOne(0.5, stage.Ytilde[:, perm],
                        stage.per_period_converged[perm])
    f1, f2 = fit(stage, 2), fit(permuted, 2)
    np.testing.assert_allclose(f1.a_hat, f2.a_hat, atol=1e-10)
    np.testing.assert_allclose(f1.B_hat, f2.B_hat, atol=1e-10)
    np.testing.assert_allclose(f1.F_hat[perm], f2.F_hat, atol=1e-10)


def test_predict_alpha_beta():
    panel, a, b, f = _noise_free_panel()
    basis = Basis(BasisSpec(BlockSpec("polynomial", degree=2),
                            include_intercept=True), 1)
    fit_ = fit(stage_one(panel, basis, 0.5), 1)
    z = np.array([0.2])
    phi = np.array([1.0, 0.2, 0.04])
    # alpha_hat + beta_hat f_t reproduces the planted surface
    recon = predict_alpha(fit_, basis, z) + predict_beta(fit_, basis, z) @ fit_.F_hat.T
    want = phi @ (a[:, None] + b[:, None] * f[None, :])
    np.testing.assert_allclose(recon, want, atol=1e-5)


def test_predict_dimension_mismatch():
    panel, *_ = _noise_free_panel()
    basis = Basis(BasisSpec(BlockSpec("polynomial", degree=2),
                            include_intercept=True), 1)
    fit_ = fit(stage_one(panel, basis, 0.5), 1)
    wrong = Basis(BasisSpec(BlockSpec("polynomial", degree=3),
                            include_intercept=True), 1)
    with pytest.raises(DimensionMismatch):
        predict_alpha(fit_, wrong, np.array([0.1]))
    with pytest.raises(DimensionMismatch):
        predict_beta(fit_, wrong, np.array([0.1]))


def test_fit_quantile_path(toy_panel, quad_basis):
    basis = quad_basis(toy_panel)
    fits = fit_quantile_path(toy_panel, basis, [0.25, 0.75], k_rule=1)
    assert set(fits) == {0.25, 0.75}
    for f in fits.values():
        assert f.K == 1
        assert_fit_normalized(f)
    with pytest.raises(ValueError):
        fit_quantile_path(toy_panel, basis, [])


def test_sklearn_wrapper(toy_panel):
    spec = BasisSpec(BlockSpec("polynomial", degree=2), include_intercept=True)
    est = QuantileFactorPCA(basis_spec=spec, tau=0.5, n_factors=1)
    assert est.get_params()["tau"] == 0.5
    est.fit(toy_panel)
    assert est.n_factors_ == 1
    assert est.F_hat_.shape == (toy_panel.T, 1)
    assert_fit_normalized(est.result_)
    # transform on the training panel reproduces the fitted factors
    np.testing.assert_allclose(est.transform(toy_panel), est.F_hat_,
                               atol=1e-8)
    assert np.ndim(est.predict_alpha(np.array([0.1, 0.2]))) == 0
    assert est.predict_beta(np.array([0.1, 0.2])).shape == (1,)


def test_sklearn_auto_k():
    # low noise makes the single planted factor unambiguous
    panel = make_panel(toy_records(n_units=60, n_periods=10, noise=0.005,
                                   seed=21))
    spec = BasisSpec(BlockSpec("polynomial", degree=2), include_intercept=True)
    est = QuantileFactorPCA(basis_spec=spec, n_factors="auto").fit(panel)
    assert est.n_factors_ == 1


def test_set_params_round_trip():
    est = QuantileFactorPCA()
    est.set_params(tau=0.3, n_factors=2)
    assert est.get_params()["tau"] == 0.3
    assert est.get_params()["n_factors"] == 2
