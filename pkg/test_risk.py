#!/usr/bin/env python3
"""
Tests for conditional risks, the adversarial sandwich and the Monte Carlo cross-checks
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from advlab.engines.datagen import sample_design, sample_theta
from advlab.engines.ridge import fit_ridge
from advlab.engines.risk import (
    adversarial_risk_gaussian,
    adversarial_sup,
    build_cache,
    conditional_moments,
    mc_risks,
    risk_path,
    risk_report,
    sandwich_bounds,
    woodbury_terms,
)
from advlab.engines.spectra import make_spectrum
from advlab.models.errors import InvalidArgumentError, PreconditionError
from advlab.models.reports import DesignDistribution


@pytest.fixture(scope="module")
def poly_setup():
    spec, weights, _ = make_spectrum("PolyDecay(a=1.5,p=300)", n=60)
    design = sample_design(spec, 60, seed=4)
    return spec, weights, design.X


def _direct_moments(X, spec, weights, lam):
    n = X.shape[0]
    R = np.linalg.pinv(X @ X.T + n * lam * np.eye(n))
    H = X.T @ R @ X
    M = np.eye(X.shape[1]) - H
    eig, wsq = spec.eigenvalues, weights.weights_sq
    bias = float(np.sum(wsq * np.sum(eig[:, None] * M ** 2, axis=0)))
    norm_bias = float(np.sum(wsq * np.sum(H ** 2, axis=0)))
    variance = float(np.trace(R @ (X * eig) @ X.T @ R))
    norm_variance = float(np.trace(R @ X @ X.T @ R))
    return bias, variance, norm_bias, norm_variance


@pytest.mark.parametrize("lam", [0.0, 1e-3, 0.1])
def test_moments_match_direct_formulas(poly_setup, lam):
    X = poly_setup[2][:25, :80]
    spec, weights, _ = make_spectrum("PolyDecay(a=1.5,p=80)", n=25)
    report = conditional_moments(X, lam, spec, weights, sigma2=1.0)
    bias, variance, norm_bias, norm_variance = _direct_moments(X, spec, weights, lam)
    assert report.std_bias == pytest.approx(bias, rel=1e-8, abs=1e-12)
    assert report.std_variance == pytest.approx(variance, rel=1e-8)
    assert report.norm_bias == pytest.approx(norm_bias, rel=1e-8)
    assert report.norm_variance == pytest.approx(norm_variance, rel=1e-8)


def test_noise_free_has_no_variance(poly_setup):
    spec, weights, X = poly_setup
    report = conditional_moments(X, 0.01, spec, weights, sigma2=0.0)
    assert report.std_variance == 0.0
    assert report.norm_variance == 0.0
    assert report.std_bias > 0.0


def test_interpolation_limit_is_continuous(poly_setup):
    spec, weights, X = poly_setup
    cache = build_cache(X, spec, weights)
    at_zero, tiny = risk_path(cache, [0.0, 1e-12], 0.5, 0.1)
    assert tiny.std_total == pytest.approx(at_zero.std_total, rel=1e-4)
    assert tiny.norm_total == pytest.approx(at_zero.norm_total, rel=1e-4)


def test_woodbury_terms_sum_to_traces():
    rng = np.random.default_rng(11)
    for seed in range(20):
        n = int(rng.integers(5, 21))
        p = int(rng.integers(10, 61))
        a = float(rng.choice([1.2, 1.5, 2.5]))
        lam = float(rng.choice([1e-3, 0.05, 1.0]))
        spec, weights, _ = make_spectrum(f"PolyDecay(a={a},p={p})", n=n)
        X = sample_design(spec, n, seed=seed).X
        cache = build_cache(X, spec, weights)
        terms = woodbury_terms(cache, lam)
        report = cache.moments(lam, 1.0)
        _, variance, _, norm_variance = _direct_moments(X, spec, weights, lam)
        assert np.sum(terms["variance"]) == pytest.approx(report.std_variance, rel=1e-6)
        assert np.sum(terms["norm_variance"]) == pytest.approx(report.norm_variance, rel=1e-6)
        assert np.sum(terms["variance"]) == pytest.approx(variance, rel=1e-6)
        assert np.sum(terms["norm_variance"]) == pytest.approx(norm_variance, rel=1e-6)
        assert np.sum(terms["bias_lower"]) <= report.std_bias * (1 + 1e-9)
        assert np.sum(terms["norm_bias_lower"]) <= report.norm_bias * (1 + 1e-9)
        assert np.all(terms["variance"] >= 0)
        assert np.all(terms["norm_variance"] >= 0)


def _unit_directions(rng, count, d):
    raw = rng.standard_normal((count, d))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def test_adversarial_sup_matches_direction_search():
    rng = np.random.default_rng(0)
    angles = np.linspace(0.0, 2 * np.pi, 200001)
    circle = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    sphere = _unit_directions(rng, 200000, 3)
    for case in range(20):
        d = (2, 3, 5, 10)[case % 4]
        theta_hat, theta, x = rng.standard_normal((3, d))
        alpha = float(rng.uniform(0.1, 2.0))
        closed = adversarial_sup(theta_hat, theta, x, alpha)

        directions = {2: circle, 3: sphere}.get(d)
        if directions is None:
            directions = _unit_directions(rng, 50000, d)
        searched = np.max(((x + alpha * directions) @ theta_hat - x @ theta) ** 2)
        assert searched <= closed * (1 + 1e-12)
        if d <= 3:
            assert searched == pytest.approx(closed, rel=1e-3 if d == 3 else 1e-6)

        # the sup is attained on the sphere along ±θ̂
        sign = np.sign(x @ (theta_hat - theta)) or 1.0
        best = x + alpha * sign * theta_hat / np.linalg.norm(theta_hat)
        assert (best @ theta_hat - x @ theta) ** 2 == pytest.approx(closed, rel=1e-12)
        inside = x + 0.5 * alpha * directions[:1000]
        assert np.all((inside @ theta_hat - x @ theta) ** 2 <= closed * (1 + 1e-12))


def test_sandwich_contains_gaussian_closed_form(poly_setup):
    spec, weights, X = poly_setup
    theta = sample_theta(weights, seed=1)
    y = X @ theta
    theta_hat = fit_ridge(X, y, 0.01).theta_hat
    for alpha in (0.0, 0.1, 1.0, 10.0):
        lower, upper = sandwich_bounds(theta_hat, theta, spec, alpha)
        exact = adversarial_risk_gaussian(theta_hat, theta, spec, alpha)
        assert lower <= exact <= upper * (1 + 1e-12)
    with pytest.raises(PreconditionError):
        adversarial_risk_gaussian(theta_hat, theta, spec, 0.1, DesignDistribution.RADEMACHER)
    with pytest.raises(InvalidArgumentError):
        sandwich_bounds(theta_hat, theta, spec, -1.0)


def test_report_exact_value_inside_sandwich(poly_setup):
    spec, weights, X = poly_setup
    report = risk_report(X, 0.01, spec, weights, 0.5, alpha=0.3, trials=200, seed=2)
    assert report.adv_lower <= report.adv_exact_gaussian <= report.adv_upper
    row = report.to_row()
    assert row["adv_upper"] == pytest.approx(2 * row["adv_lower"])
    assert row["std_total"] == pytest.approx(report.std_bias + report.std_variance)


def test_monte_carlo_agrees_with_closed_form(poly_setup):
    spec, weights, X = poly_setup
    sigma2, lam, alpha = 0.5, 0.01, 0.3
    std, adv, norm = mc_risks(spec, weights, sigma2, 60, lam, alpha, trials=4000, seed=8, X=X)
    report = risk_report(X, lam, spec, weights, sigma2, alpha, trials=4000, seed=9)
    assert abs(std.mean - report.std_total) <= 4 * std.std_error
    assert abs(norm.mean - report.norm_total) <= 4 * norm.std_error
    assert abs(adv.mean - report.adv_exact_gaussian) <= 4 * adv.std_error + 0.02 * report.adv_exact_gaussian
    assert report.adv_lower - 4 * adv.std_error <= adv.mean <= report.adv_upper + 4 * adv.std_error


def test_monte_carlo_matches_example1_draw():
    spec, weights, sigma2 = make_spectrum("Example1", 100, p=500)
    X = sample_design(spec, 100, seed=0).X
    report = conditional_moments(X, 0.0, spec, weights, sigma2)
    std, _, _ = mc_risks(spec, weights, sigma2, 100, 0.0, 0.1, trials=2000, seed=1, X=X)
    assert abs(std.mean - report.std_total) <= 3 * std.std_error


def test_sandwich_holds_on_random_fits():
    rng = np.random.default_rng(12)
    families = ["Example1", "Example2", "PolyDecay(a=2,p=120)", "Isotropic(d=90)"]
    violations = 0
    for trial in range(200):
        spec, weights, _ = make_spectrum(families[trial % 4], 30)
        X = sample_design(spec, 30, seed=trial).X
        theta = sample_theta(weights, seed=trial)
        lam = float(rng.choice([0.0, 1e-3, 0.1, 10.0]))
        theta_hat = fit_ridge(X, X @ theta + rng.standard_normal(30), lam).theta_hat
        alpha = float(rng.uniform(0.0, 3.0))
        lower, upper = sandwich_bounds(theta_hat, theta, spec, alpha)
        exact = adversarial_risk_gaussian(theta_hat, theta, spec, alpha)
        violations += not (lower <= exact <= upper * (1 + 1e-12))
    assert violations == 0


def test_mc_and_moment_arguments_validated(poly_setup):
    spec, weights, X = poly_setup
    with pytest.raises(InvalidArgumentError):
        mc_risks(spec, weights, 1.0, 60, 0.1, 0.1, trials=1, X=X)
    with pytest.raises(InvalidArgumentError):
        conditional_moments(X, -0.1, spec, weights, 1.0)
    with pytest.raises(InvalidArgumentError):
        conditional_moments(X[:, :10], 0.1, spec, weights, 1.0)


def test_path_norm_decreases_with_lambda(poly_setup):
    spec, weights, X = poly_setup
    reports = risk_path(build_cache(X, spec, weights), [0.0, 0.01, 0.1, 1.0], 0.5, 0.1)
    norms = [r.norm_total for r in reports]
    assert all(a >= b for a, b in zip(norms[:-1], norms[1:]))
    assert_allclose([r.budget for r in reports], 0.1)


if __name__ == "__main__":
    pytest.main([__file__])
