"""Factor-number selection from the stage-one eigenvalue spectrum.

Two selectors: the adjacent-eigenvalue-ratio maximizer and the count of
eigenvalues above a vanishing threshold, with the default tuning
K_max = floor(P/2) and lambda = 1/log(N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooFewEigenvalues


@dataclass(frozen=True)
class KSelection:
    k_ratio: int
    k_threshold: int
    ratios: np.ndarray
    threshold_used: float


def k_by_ratio(eigvals, k_max: int) -> int:
    """argmax over k in 1..k_max of eigvals[k]/eigvals[k+1] (1-based).

    Ties go to the smallest k. A zero denominator under a nonzero
    numerator wins outright; 0/0 positions are skipped.
    """
    ev = np.asarray(eigvals, dtype=float)
    k_max = int(k_max)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if ev.shape[0] < k_max + 1:
        raise TooFewEigenvalues(
            f"need at least {k_max + 1} eigenvalues, got {ev.shape[0]}"
        )
    best_k, best_ratio = None, -np.inf
    for k in range(1, k_max + 1):
        num, den = ev[k - 1], ev[k]
        if num == 0.0 and den == 0.0:
            continue
        with np.errstate(over="ignore"):
            ratio = np.inf if den == 0.0 else num / den
        if ratio > best_ratio:
            best_k, best_ratio = k, ratio
    return 1 if best_k is None else best_k


def k_by_threshold(eigvals, lambda_n: float) -> int:
    """Count of eigenvalues >= lambda_n (inclusive)."""
    ev = np.asarray(eigvals, dtype=float)
    return int(np.count_nonzero(ev >= lambda_n))


def default_tuning(n: int, p: int):
    """Default (K_max, lambda) = (floor(P/2), 1/log N).

    ``n`` should be the smallest period size for unbalanced panels.
    The caller clamps K_max to the time dimension.
    """
    if n < 3:
        raise ValueError("need N >= 3 for the default threshold")
    if p < 2:
        raise ValueError("need P >= 2")
    return p // 2, 1.0 / math.log(n)
