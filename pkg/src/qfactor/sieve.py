"""Sieve basis construction.

The basis maps a characteristic vector z in R^M to phi(z) in R^P by
stacking one univariate block per characteristic, with an optional global
intercept. Supported families: polynomial, linear spline, cubic spline.

Layout of phi(z): [1 (if intercept)] ++ block_1 ++ ... ++ block_M.
Polynomial blocks of degree d are (z, z^2, ..., z^d) with no per-block
constant; the global intercept flag supplies the constant. Spline blocks
are B-spline bases on [lo, hi] with the given internal knots; when the
global intercept is on, the first basis function of each spline block is
dropped to avoid the partition-of-unity collinearity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import NonFiniteInput

_FAMILIES = ("polynomial", "linear_spline", "cubic_spline")
_SPLINE_ORDER = {"linear_spline": 2, "cubic_spline": 4}  # order = degree + 1


@dataclass(frozen=True)
class BlockSpec:
    """Univariate basis specification for one characteristic."""

    family: str = "polynomial"
    degree: int = 2                      # polynomial family only
    knots: tuple = ()                    # internal knots, strictly increasing
    boundary: tuple = (-0.5, 0.5)        # spline support [lo, hi]

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.family == "polynomial":
            if self.degree < 1:
                raise ValueError("polynomial degree must be >= 1")
        else:
            knots = tuple(float(k) for k in self.knots)
            if any(b <= a for a, b in zip(knots, knots[1:])):
                raise ValueError("knots must be strictly increasing")
            lo, hi = self.boundary
            if not lo < hi:
                raise ValueError("boundary interval must be nondegenerate")
            object.__setattr__(self, "knots", knots)

    def size(self, drop_first: bool) -> int:
        if self.family == "polynomial":
            return self.degree
        order = _SPLINE_ORDER[self.family]
        n_funcs = len(self.knots) + order
        return n_funcs - 1 if drop_first else n_funcs


@dataclass(frozen=True)
class BasisSpec:
    """Full basis: per-characteristic blocks plus optional global intercept.

    ``blocks`` is either a single BlockSpec shared by all characteristics
    or a tuple of M BlockSpecs.
    """

    blocks: object = field(default_factory=BlockSpec)
    include_intercept: bool = False

    def block_for(self, m: int, M: int):
        if isinstance(self.blocks, BlockSpec):
            return self.blocks
        blocks = tuple(self.blocks)
        if len(blocks) != M:
            raise ValueError(f"expected {M} block specs, got {len(blocks)}")
        return blocks[m]


@dataclass(frozen=True)
class Basis:
    """A BasisSpec bound to a number of characteristics M."""

    spec: BasisSpec
    M: int

    @property
    def P(self) -> int:
        return basis_dimension(self.spec, self.M)

    def __call__(self, z):
        return eval_basis(self, z)


def basis_dimension(spec: BasisSpec, M: int) -> int:
    """Total output dimension P of the stacked basis."""
    drop = spec.include_intercept
    p = 1 if spec.include_intercept else 0
    for m in range(M):
        p += spec.block_for(m, M).size(drop_first=drop)
    return p


def eval_basis(basis: Basis, z) -> np.ndarray:
    """Evaluate phi at one point (shape (M,)) or many (shape (n, M))."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = z[None, :] if single else z
    if Z.shape[1] != basis.M:
        _dim_error(basis.M, Z.shape[1])
    if not np.all(np.isfinite(Z)):
        raise NonFiniteInput("non-finite characteristic value")
    spec = basis.spec
    cols = []
    if spec.include_intercept:
        cols.append(np.ones((Z.shape[0], 1)))
    for m in range(basis.M):
        block = spec.block_for(m, basis.M)
        cols.append(_eval_block(block, Z[:, m], drop_first=spec.include_intercept))
    out = np.hstack(cols)
    return out[0] if single else out


def _eval_block(block: BlockSpec, x: np.ndarray, drop_first: bool) -> np.ndarray:
    if block.family == "polynomial":
        return np.vander(x, block.degree + 1, increasing=True)[:, 1:]
    order = _SPLINE_ORDER[block.family]
    lo, hi = block.boundary
    t = np.concatenate([np.full(order, lo), block.knots, np.full(order, hi)])
    n_funcs = len(block.knots) + order
    xc = np.clip(x, lo, hi)  # evaluate at the boundary outside the support
    dm = BSpline.design_matrix(xc, t, order - 1, extrapolate=False).toarray()
    assert dm.shape[1] == n_funcs
    return dm[:, 1:] if drop_first else dm


def _dim_error(expected, got):
    from .errors import DimensionMismatch

    raise DimensionMismatch(f"expected {expected} characteristics, got {got}")


def spec_from_config(cfg: dict, M: int | None = None) -> BasisSpec:
    """Build a BasisSpec from its JSON form.

    Example: {"family": "polynomial", "degree": 2, "intercept": false}
    or {"family": "linear_spline", "knots": [0.0], "boundary": [-0.5, 0.5],
    "intercept": true}.
    """
    cfg = dict(cfg)
    family = cfg.pop("family", "polynomial")
    intercept = bool(cfg.pop("intercept", False))
    kwargs = {"family": family}
    if family == "polynomial":
        kwargs["degree"] = int(cfg.pop("degree", 2))
    else:
        kwargs["knots"] = tuple(cfg.pop("knots", ()))
        if "boundary" in cfg:
            kwargs["boundary"] = tuple(cfg.pop("boundary"))
    if cfg:
        raise ValueError(f"unknown basis config keys: {sorted(cfg)}")
    return BasisSpec(blocks=BlockSpec(**kwargs), include_intercept=intercept)


def equally_spaced_knots(n_internal: int, boundary=(-0.5, 0.5)) -> tuple:
    """Default knot placement: equally spaced inside the boundary interval."""
    lo, hi = boundary
    return tuple(np.linspace(lo, hi, n_internal + 2)[1:-1])
