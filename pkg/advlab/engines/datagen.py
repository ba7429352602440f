"""
advlab - Data Generation Engine
Designs xᵢ = Λ^{1/2}ηᵢ (eigenbasis V = I), sign-flip parameters and noisy labels
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from advlab.models.errors import InvalidArgumentError
from advlab.models.reports import DesignDistribution, DesignSample, LabeledSample
from advlab.models.spectrum import ParameterWeights, Spectrum
from advlab.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

_UNIFORM_HALF_WIDTH = np.sqrt(3.0)


def draw_unit_entries(rng: np.random.Generator, shape, dist: DesignDistribution) -> np.ndarray:
    """Independent mean-zero, unit-variance entries"""
    dist = DesignDistribution(dist)
    if dist == DesignDistribution.GAUSSIAN:
        return rng.standard_normal(shape)
    if dist == DesignDistribution.RADEMACHER:
        return rng.integers(0, 2, size=shape).astype(float) * 2.0 - 1.0
    return rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, size=shape)


def sample_design(
    spec: Spectrum,
    n: int,
    dist: DesignDistribution = DesignDistribution.GAUSSIAN,
    seed: int = 0,
) -> DesignSample:
    """n×p design with rows Λ^{1/2}ηᵢ; deterministic in (seed, n, spec)"""
    if n < 1:
        raise InvalidArgumentError(f"design needs n >= 1 rows, got {n}")
    dist = DesignDistribution(dist)
    rng = derive_rng(seed, "design", n)
    eta = draw_unit_entries(rng, (n, spec.truncation_dim), dist)
    X = eta * np.sqrt(spec.eigenvalues)
    logger.debug(f"Sampled {dist.value} design n={n}, p={spec.truncation_dim} from {spec.ref}")
    return DesignSample(X=X, n=n, spectrum_ref=spec.ref, seed=int(seed), dist=dist)


def sample_theta(weights: ParameterWeights, seed: int = 0) -> np.ndarray:
    """θᵢ = ±√θ̃ᵢ² with independent fair signs"""
    rng = derive_rng(seed, "theta")
    signs = rng.integers(0, 2, size=weights.weights_sq.shape[0]).astype(float) * 2.0 - 1.0
    return signs * np.sqrt(weights.weights_sq)


def sample_labels(
    design: DesignSample,
    theta: np.ndarray,
    sigma2: float,
    seed: int = 0,
    noise_dist: DesignDistribution = DesignDistribution.GAUSSIAN,
) -> LabeledSample:
    """y = Xθ + ε with Var(εᵢ) = σ²"""
    if sigma2 < 0:
        raise InvalidArgumentError(f"noise variance must be non-negative, got {sigma2}")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (design.p,):
        raise InvalidArgumentError(f"theta has shape {theta.shape}, design expects ({design.p},)")
    rng = derive_rng(seed, "noise", design.n)
    signal = design.X @ theta
    if sigma2 == 0:
        y = signal
    else:
        y = signal + np.sqrt(sigma2) * draw_unit_entries(rng, design.n, noise_dist)
    return LabeledSample(design=design, y=y, theta_true=theta, noise_variance=float(sigma2))


def export_design_csv(design: DesignSample, path: Union[str, Path]) -> Path:
    """Write X as CSV (one row per observation) for inspection"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(f"x{j + 1}" for j in range(design.p))
    np.savetxt(path, design.X, delimiter=",", fmt="%.17g", header=header, comments="")
    logger.info(f"Exported design {design.n}x{design.p} to {path}")
    return path
