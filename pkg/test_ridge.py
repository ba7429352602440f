#!/usr/bin/env python3
"""
Tests for the ridge / minimum-norm estimators
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import linalg

from advlab.engines.ridge import RidgeFactorization, fit_minnorm, fit_primal, fit_ridge, ridge_path
from advlab.models.errors import InvalidArgumentError


def _instance(seed, n=20, p=60):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, p)), rng.standard_normal(n)


@pytest.mark.parametrize("seed", range(50))
def test_minnorm_interpolates_and_is_minimal(seed):
    X, y = _instance(seed)
    fit = fit_minnorm(X, y)
    assert_allclose(X @ fit.theta_hat, y, rtol=1e-8, atol=1e-8 * np.linalg.norm(y))
    null = linalg.null_space(X)
    assert np.linalg.norm(null.T @ fit.theta_hat) <= 1e-8 * np.linalg.norm(fit.theta_hat)
    rng = np.random.default_rng(1000 + seed)
    base = np.linalg.norm(fit.theta_hat)
    for _ in range(100):
        v = null @ rng.standard_normal(null.shape[1])
        assert base <= np.linalg.norm(fit.theta_hat + v) + 1e-12
    assert fit.lam == 0.0
    assert fit.residual_norm <= 1e-8 * np.linalg.norm(y)


@pytest.mark.parametrize("lam", [1e-3, 0.1, 10.0])
def test_kernel_form_matches_primal(lam):
    X, y = _instance(3, n=15, p=40)
    assert_allclose(fit_ridge(X, y, lam).theta_hat, fit_primal(X, y, lam), rtol=1e-8, atol=1e-12)


def test_single_observation():
    x = np.array([[1.0, 2.0, 2.0]])
    fit = fit_ridge(x, np.array([3.0]), 0.5)
    assert_allclose(fit.theta_hat, x[0] * 3.0 / (9.0 + 0.5))


def test_heavy_regularization_shrinks_to_zero():
    X, y = _instance(4)
    assert np.linalg.norm(fit_ridge(X, y, 1e12).theta_hat) < 1e-9


def test_path_shares_factorization_and_validates_grid():
    X, y = _instance(5)
    grid = [0.0, 0.01, 1.0]
    path = ridge_path(X, y, grid)
    assert [f.lam for f in path] == grid
    for fit in path:
        assert_allclose(fit.theta_hat, fit_ridge(X, y, fit.lam).theta_hat, rtol=1e-10, atol=1e-12)
    norms = [np.linalg.norm(f.theta_hat) for f in path]
    assert norms[0] >= norms[1] >= norms[2]
    with pytest.raises(InvalidArgumentError):
        ridge_path(X, y, [1.0, 0.1])
    with pytest.raises(InvalidArgumentError):
        ridge_path(X, y, [])


def test_invalid_inputs():
    X, y = _instance(6)
    with pytest.raises(InvalidArgumentError):
        fit_ridge(X, y, -1.0)
    with pytest.raises(InvalidArgumentError):
        fit_ridge(X, y[:-1], 0.1)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(InvalidArgumentError):
        fit_ridge(bad, y, 0.1)
    with pytest.raises(InvalidArgumentError):
        fit_primal(X, y, 0.0)


def test_rank_deficient_gram_uses_pseudoinverse():
    X, y = _instance(7, n=6, p=10)
    X = np.vstack([X, X[0]])
    y = np.append(y, y[0])
    factor = RidgeFactorization(X)
    assert factor.rank == 6
    fit = factor.solve(y, 0.0)
    assert_allclose(X @ fit.theta_hat, y, atol=1e-8)
    assert fit.gram_condition > 1e10


if __name__ == "__main__":
    pytest.main([__file__])
