"""
advlab - Ridge Engine
Kernel-form ridge θ̂ = Xᵀ(XXᵀ + nλI)†y and the min-norm interpolator along λ-grids
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from advlab.models.errors import InvalidArgumentError
from advlab.models.reports import RidgeFit

logger = logging.getLogger(__name__)

PINV_RTOL = 1e-12


def _check_inputs(X: np.ndarray, y: Optional[np.ndarray] = None) -> None:
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidArgumentError(f"X must be a 2-D array with at least one row, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("X contains non-finite entries")
    if y is not None:
        if y.shape != (X.shape[0],):
            raise InvalidArgumentError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError("y contains non-finite entries")


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise InvalidArgumentError(f"regularization must be a finite λ >= 0, got {lam}")
    return lam


class RidgeFactorization:
    """
    SHARED GRAM FACTORIZATION
    - one symmetric eigendecomposition A = XXᵀ = U diag(μ) Uᵀ
    - solve(y, λ) reuses it for any λ >= 0
    - eigenvalues below PINV_RTOL·μ₁ are treated as zero when λ = 0
    """

    def __init__(self, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        _check_inputs(X)
        self.X = X
        self.n = X.shape[0]
        gram = X @ X.T
        mu, vecs = linalg.eigh(gram)
        self.gram_eigs = np.clip(mu, 0.0, None)
        self.gram_vecs = vecs
        self.cutoff = PINV_RTOL * float(self.gram_eigs[-1]) if self.gram_eigs.size else 0.0
        self.rank = int(np.count_nonzero(self.gram_eigs > self.cutoff))

    def inverse_eigs(self, lam: float) -> np.ndarray:
        """Spectrum of (A + nλI)†"""
        shifted = self.gram_eigs + self.n * lam
        inv = np.zeros_like(shifted)
        keep = shifted > (self.cutoff if lam == 0 else 0.0)
        inv[keep] = 1.0 / shifted[keep]
        return inv

    def coefficients(self, y: np.ndarray, lam: float) -> np.ndarray:
        """c = (A + nλI)†y so that θ̂ = Xᵀc"""
        inv = self.inverse_eigs(lam)
        return self.gram_vecs @ (inv * (self.gram_vecs.T @ y))

    def condition(self, lam: float) -> float:
        shifted = self.gram_eigs + self.n * lam
        low = float(shifted[0])
        return float(shifted[-1]) / low if low > 0 else float("inf")

    def solve(self, y: np.ndarray, lam: float) -> RidgeFit:
        y = np.asarray(y, dtype=float)
        _check_inputs(self.X, y)
        lam = _check_lambda(lam)
        coef = self.coefficients(y, lam)
        theta_hat = self.X.T @ coef
        residual = float(np.linalg.norm(self.X @ theta_hat - y))
        if lam == 0 and self.rank < self.n:
            logger.warning(f"⚠️ Gram matrix rank {self.rank} < n={self.n}; pseudoinverse cutoff applied")
        return RidgeFit(
            theta_hat=theta_hat,
            lam=lam,
            residual_norm=residual,
            gram_condition=self.condition(lam),
            solver_tolerance=self.cutoff,
        )


def fit_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> RidgeFit:
    """θ̂ = Xᵀ(XXᵀ + nλI)†y"""
    _check_lambda(lam)
    return RidgeFactorization(X).solve(y, lam)


def fit_minnorm(X: np.ndarray, y: np.ndarray) -> RidgeFit:
    """Minimum-norm interpolator (λ = 0)"""
    return fit_ridge(X, y, 0.0)


def ridge_path(X: np.ndarray, y: np.ndarray, lambda_grid: Sequence[float]) -> List[RidgeFit]:
    """One fit per λ, all sharing a single factorization"""
    grid = [_check_lambda(lam) for lam in lambda_grid]
    if not grid:
        raise InvalidArgumentError("lambda grid must be non-empty")
    if any(b < a for a, b in zip(grid[:-1], grid[1:])):
        raise InvalidArgumentError(f"lambda grid must be sorted, got {grid}")
    factor = RidgeFactorization(X)
    return [factor.solve(y, lam) for lam in grid]


def fit_primal(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """(XᵀX + nλI)⁻¹Xᵀy, the p×p form (λ > 0)"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_inputs(X, y)
    lam = _check_lambda(lam)
    if lam == 0:
        raise InvalidArgumentError("primal form needs λ > 0")
    n, p = X.shape
    system = X.T @ X + n * lam * np.eye(p)
    return linalg.solve(system, X.T @ y, assume_a="pos")
