#!/usr/bin/env python3
"""
Tests for design sampling, parameter draws, labels and RNG stream derivation
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from advlab.engines.datagen import export_design_csv, sample_design, sample_labels, sample_theta
from advlab.engines.spectra import make_spectrum
from advlab.models.errors import InvalidArgumentError
from advlab.models.reports import DesignDistribution
from advlab.utils.seeding import derive_rng


@pytest.fixture
def small_spectrum():
    spec, weights, _ = make_spectrum("Custom(values=1;0.5;0.25)", n=2)
    return spec, weights


def test_derived_streams_are_reproducible():
    a = derive_rng(7, "design", 3).standard_normal(5)
    b = derive_rng(7, "design", 3).standard_normal(5)
    c = derive_rng(7, "design", 4).standard_normal(5)
    d = derive_rng(8, "design", 3).standard_normal(5)
    assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_design_is_deterministic_in_seed(small_spectrum):
    spec, _ = small_spectrum
    first = sample_design(spec, 10, seed=3)
    again = sample_design(spec, 10, seed=3)
    other = sample_design(spec, 10, seed=4)
    assert first.X.shape == (10, 3)
    assert first.p == 3
    assert_array_equal(first.X, again.X)
    assert not np.array_equal(first.X, other.X)
    assert first.spectrum_ref == spec.ref


def test_rademacher_design_magnitudes(small_spectrum):
    spec, _ = small_spectrum
    design = sample_design(spec, 50, DesignDistribution.RADEMACHER, seed=1)
    assert_allclose(np.abs(design.X), np.broadcast_to(np.sqrt(spec.eigenvalues), (50, 3)))


@pytest.mark.parametrize("dist", list(DesignDistribution))
def test_column_variances_follow_spectrum(small_spectrum, dist):
    spec, _ = small_spectrum
    design = sample_design(spec, 20000, dist, seed=11)
    assert_allclose(design.X.var(axis=0), spec.eigenvalues, rtol=0.05)
    assert np.all(np.abs(design.X.mean(axis=0)) < 0.05)


def test_theta_signs(small_spectrum):
    _, weights = small_spectrum
    theta = sample_theta(weights, seed=5)
    assert_allclose(theta ** 2, weights.weights_sq)
    assert_array_equal(theta, sample_theta(weights, seed=5))


def test_noiseless_labels_are_exact(small_spectrum):
    spec, weights = small_spectrum
    design = sample_design(spec, 8, seed=2)
    theta = sample_theta(weights, seed=2)
    labeled = sample_labels(design, theta, 0.0, seed=2)
    assert_array_equal(labeled.y, design.X @ theta)
    noisy = sample_labels(design, theta, 0.5, seed=2)
    assert not np.array_equal(noisy.y, labeled.y)
    assert noisy.noise_variance == 0.5


def test_label_arguments_validated(small_spectrum):
    spec, weights = small_spectrum
    design = sample_design(spec, 4, seed=0)
    with pytest.raises(InvalidArgumentError):
        sample_labels(design, np.ones(2), 1.0)
    with pytest.raises(InvalidArgumentError):
        sample_labels(design, sample_theta(weights), -1.0)
    with pytest.raises(InvalidArgumentError):
        sample_design(spec, 0)


def test_export_design_csv(small_spectrum, tmp_path):
    spec, _ = small_spectrum
    design = sample_design(spec, 6, seed=9)
    path = export_design_csv(design, tmp_path / "designs" / "x.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x1,x2,x3"
    assert len(lines) == 7
    loaded = np.loadtxt(path, delimiter=",", skiprows=1)
    assert_array_equal(loaded, design.X)


if __name__ == "__main__":
    pytest.main([__file__])
