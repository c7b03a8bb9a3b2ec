"""Quantile factor extraction for characteristic-based panels.

Per-period sieve quantile regression, PCA on the stacked coefficient
paths, weighted-bootstrap inference, factor-number selection, a Monte
Carlo harness, and an R-squared suite for evaluating factor series.
"""

from . import errors
from .bootstrap import (
    AlphaTest,
    BootstrapDraw,
    alpha_zero_test,
    bootstrap_bands,
    bootstrap_draw,
    bootstrap_draws,
    draw_weights,
)
from .estimator import (
    QrpcaFit,
    QuantileFactorPCA,
    StageOne,
    fit,
    fit_quantile_path,
    predict_alpha,
    predict_beta,
    select_k_auto,
    stage_one,
)
from .evaluate import evaluate_factors, r2_insample, r2_oos
from .mc import DgpSpec, SimReport, SimTruth, generate, mse_metrics, run_replications
from .panel import CrossSection, Panel, load_panel, make_panel, rank_transform, save_panel
from .qreg import QrSolution, check_loss, oracle_qr, solve_qr, solve_qr_batch
from .rngcore import Stream, child_seed, stream
from .selectk import KSelection, default_tuning, k_by_ratio, k_by_threshold
from .sieve import Basis, BasisSpec, BlockSpec, basis_dimension, eval_basis
from .spectral import EigenPairs, demean_time, ols, rotation_H, sym_eig

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
