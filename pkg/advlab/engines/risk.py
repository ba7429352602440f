"""
advlab - Risk Engine
Conditional (fixed-X) standard risk, parameter norm and adversarial risk for ridge fits,
plus the Monte Carlo estimators that cross-check them
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from advlab.engines.datagen import draw_unit_entries, sample_design
from advlab.engines.ridge import RidgeFactorization
from advlab.models.errors import InvalidArgumentError, NumericalError, PreconditionError
from advlab.models.reports import DesignDistribution, McEstimate, RiskReport
from advlab.models.spectrum import ParameterWeights, Spectrum
from advlab.utils.seeding import derive_rng

logger = logging.getLogger(__name__)

HALF_NORMAL_MEAN = math.sqrt(2.0 / math.pi)
MC_CHUNK = 256


def _check_alignment(X: np.ndarray, spec: Spectrum, weights: Optional[ParameterWeights] = None) -> None:
    p = spec.truncation_dim
    if X.ndim != 2 or X.shape[1] != p:
        raise InvalidArgumentError(f"design has {X.shape[-1]} columns but spectrum has p={p}")
    if weights is not None and weights.weights_sq.shape[0] != p:
        raise InvalidArgumentError(f"weights have length {weights.weights_sq.shape[0]}, spectrum has p={p}")


def _check_nonneg(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise InvalidArgumentError(f"{name} must be a finite value >= 0, got {value}")
    return value


class EigenbasisCache:
    """
    FIXED-DESIGN RISK CACHE
    - A = XXᵀ = U diag(μ) Uᵀ from the shared ridge factorization
    - rotated design Y = UᵀX and the n×n blocks UᵀXΣXᵀU, UᵀXDXᵀU (D = diag θ̃²)
    - every λ then costs O(n²)
    """

    def __init__(self, X: np.ndarray, spec: Spectrum, weights: ParameterWeights):
        X = np.asarray(X, dtype=float)
        _check_alignment(X, spec, weights)
        self.spec = spec
        self.weights = weights
        self.factor = RidgeFactorization(X)
        self.n, self.p = X.shape
        lam = spec.eigenvalues
        wsq = weights.weights_sq
        self.Y = self.factor.gram_vecs.T @ X
        self.sigma_rot = (self.Y * lam) @ self.Y.T
        self.weight_rot = (self.Y * wsq) @ self.Y.T
        self.energy_diag = (self.Y ** 2) @ (lam * wsq)
        self.cross_rot = self.weight_rot * self.sigma_rot
        self.signal_power = float(np.sum(lam * wsq))

    @property
    def X(self) -> np.ndarray:
        return self.factor.X

    @property
    def gram_eigs(self) -> np.ndarray:
        return self.factor.gram_eigs

    @property
    def Z(self) -> np.ndarray:
        """Columns zᵢ = xᵢ/√λᵢ (V = I)"""
        return self.X / np.sqrt(self.spec.eigenvalues)

    def resolvent(self, lam: float, power: int = 1) -> np.ndarray:
        """(XXᵀ + nλI)^(-power), pseudo-inverse at λ = 0"""
        g = self.factor.inverse_eigs(lam) ** power
        U = self.factor.gram_vecs
        return (U * g) @ U.T

    def moments(self, lam: float, sigma2: float) -> RiskReport:
        lam = _check_nonneg("λ", lam)
        sigma2 = _check_nonneg("σ²", sigma2)
        g = self.factor.inverse_eigs(lam)
        mu = self.gram_eigs
        variance = float(np.sum(g ** 2 * np.diag(self.sigma_rot)))
        norm_variance = float(np.sum(mu * g ** 2))
        norm_bias = float(np.sum(mu * g ** 2 * np.diag(self.weight_rot)))
        bias = self.signal_power - 2.0 * float(g @ self.energy_diag) + float(g @ self.cross_rot @ g)
        if bias < -1e-10 * max(self.signal_power, 1.0):
            raise NumericalError(f"negative bias {bias:.3e} at λ={lam}")
        return RiskReport(
            std_bias=max(bias, 0.0),
            std_variance=sigma2 * variance,
            norm_bias=norm_bias,
            norm_variance=sigma2 * norm_variance,
        )

    def draw_prior(self, trials: int, sigma2: float, seed: int) -> Dict[str, np.ndarray]:
        """θ sign-flips and Gaussian noise for `trials` draws, expressed in the rotated basis"""
        lam = self.spec.eigenvalues
        root_w = np.sqrt(self.weights.weights_sq)
        rotated_y = np.empty((self.n, trials))
        rotated_signal = np.empty((self.n, trials))
        power = np.empty(trials)
        for start in range(0, trials, MC_CHUNK):
            stop = min(start + MC_CHUNK, trials)
            thetas = np.empty((stop - start, self.p))
            noise = np.empty((stop - start, self.n))
            for row, t in enumerate(range(start, stop)):
                rng = derive_rng(seed, "prior", t)
                thetas[row] = (rng.integers(0, 2, size=self.p) * 2.0 - 1.0) * root_w
                noise[row] = rng.standard_normal(self.n)
            rotated_y[:, start:stop] = self.Y @ thetas.T + math.sqrt(sigma2) * (self.factor.gram_vecs.T @ noise.T)
            rotated_signal[:, start:stop] = self.Y @ (thetas * lam).T
            power[start:stop] = (thetas ** 2) @ lam
        return {"y": rotated_y, "signal": rotated_signal, "power": power}

    def adversarial_cross_term(self, lam: float, alpha: float, prior: Dict[str, np.ndarray]) -> McEstimate:
        """Per-draw 2α√(2/π)‖θ̂‖‖θ̂−θ‖_Σ over a prior sample"""
        g = self.factor.inverse_eigs(lam)
        coef = g[:, None] * prior["y"]
        norm_sq = np.sum(self.gram_eigs[:, None] * coef ** 2, axis=0)
        quad = np.sum(coef * (self.sigma_rot @ coef), axis=0)
        cross = np.sum(coef * prior["signal"], axis=0)
        err_sq = np.maximum(quad - 2.0 * cross + prior["power"], 0.0)
        samples = 2.0 * alpha * HALF_NORMAL_MEAN * np.sqrt(norm_sq) * np.sqrt(err_sq)
        return McEstimate.from_samples(samples)


def build_cache(X: np.ndarray, spec: Spectrum, weights: ParameterWeights) -> EigenbasisCache:
    return EigenbasisCache(X, spec, weights)


def conditional_moments(
    X: np.ndarray,
    lam: float,
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
) -> RiskReport:
    """B, σ²V, Nb, σ²Nv for the ridge fit at λ given X (expectation over θ and y)"""
    _check_nonneg("λ", lam)
    return EigenbasisCache(X, spec, weights).moments(lam, sigma2)


def woodbury_terms(cache: EigenbasisCache, lam: float) -> Dict[str, np.ndarray]:
    """
    Per-index leave-one-out decomposition of the risk traces.

    variance[i] sums to tr{XΣXᵀ(A+nλI)⁻²}, norm_variance[i] to tr{A(A+nλI)⁻²};
    bias_lower and norm_bias_lower are index-wise lower bounds on B and Nb.
    """
    lam = _check_nonneg("λ", lam)
    eig = cache.spec.eigenvalues
    wsq = cache.weights.weights_sq
    Z = cache.Z
    n = cache.n
    gram = cache.X @ cache.X.T
    shift = n * lam * np.eye(n)
    full_inv = cache.resolvent(lam, 1)
    variance = np.empty(cache.p)
    norm_variance = np.empty(cache.p)
    bias_lower = np.empty(cache.p)
    norm_bias_lower = np.empty(cache.p)
    for i in range(cache.p):
        z = Z[:, i]
        loo = gram - eig[i] * np.outer(z, z) + shift
        try:
            solved = np.linalg.solve(loo, z)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"leave-one-out system singular at index {i} (λ={lam}): {e}")
        quad1 = float(z @ solved)
        quad2 = float(solved @ solved)
        denom = (1.0 + eig[i] * quad1) ** 2
        variance[i] = eig[i] ** 2 * quad2 / denom
        norm_variance[i] = eig[i] * quad2 / denom
        full_quad = float(z @ full_inv @ z)
        bias_lower[i] = wsq[i] * eig[i] * (1.0 - eig[i] * full_quad) ** 2
        norm_bias_lower[i] = wsq[i] * eig[i] ** 2 * full_quad ** 2
    return {
        "variance": variance,
        "norm_variance": norm_variance,
        "bias_lower": bias_lower,
        "norm_bias_lower": norm_bias_lower,
    }


def adversarial_sup(theta_hat: np.ndarray, theta: np.ndarray, x: np.ndarray, alpha: float) -> float:
    """sup_{‖δ‖≤α} ((x+δ)ᵀθ̂ − xᵀθ)² = (|xᵀ(θ̂−θ)| + α‖θ̂‖)²"""
    alpha = _check_nonneg("α", alpha)
    gap = abs(float(np.dot(x, np.asarray(theta_hat) - np.asarray(theta))))
    return (gap + alpha * float(np.linalg.norm(theta_hat))) ** 2


def _sigma_norm(v: np.ndarray, spec: Spectrum) -> float:
    if v.shape[0] != spec.truncation_dim:
        raise InvalidArgumentError(f"vector length {v.shape[0]} does not match p={spec.truncation_dim}")
    return math.sqrt(float(np.sum(spec.eigenvalues * v * v)))


def adversarial_risk_gaussian(
    theta_hat: np.ndarray,
    theta: np.ndarray,
    spec: Spectrum,
    alpha: float,
    design: DesignDistribution = DesignDistribution.GAUSSIAN,
) -> float:
    """E_x sup-risk under x ~ N(0, Σ): α²‖θ̂‖² + 2α‖θ̂‖√(2/π)‖θ̂−θ‖_Σ + ‖θ̂−θ‖²_Σ"""
    if DesignDistribution(design) != DesignDistribution.GAUSSIAN:
        raise PreconditionError(f"closed-form adversarial risk needs a Gaussian design, got {design}")
    alpha = _check_nonneg("α", alpha)
    theta_hat = np.asarray(theta_hat, dtype=float)
    err = _sigma_norm(theta_hat - np.asarray(theta, dtype=float), spec)
    norm = float(np.linalg.norm(theta_hat))
    return alpha ** 2 * norm ** 2 + 2.0 * alpha * norm * HALF_NORMAL_MEAN * err + err ** 2


def sandwich_bounds(theta_hat: np.ndarray, theta: np.ndarray, spec: Spectrum, alpha: float) -> Tuple[float, float]:
    """(α²‖θ̂‖² + ‖θ̂−θ‖²_Σ, twice that) for a single fit"""
    alpha = _check_nonneg("α", alpha)
    theta_hat = np.asarray(theta_hat, dtype=float)
    err = _sigma_norm(theta_hat - np.asarray(theta, dtype=float), spec)
    lower = alpha ** 2 * float(theta_hat @ theta_hat) + err ** 2
    return lower, 2.0 * lower


def risk_report(
    X: np.ndarray,
    lam: float,
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
    alpha: float,
    trials: int = 0,
    seed: int = 0,
    design: DesignDistribution = DesignDistribution.GAUSSIAN,
    cache: Optional[EigenbasisCache] = None,
) -> RiskReport:
    """
    Conditional moments plus the adversarial sandwich.
    With a Gaussian design and trials >= 2 the exact value is added: the closed
    form averaged over the θ/noise prior, written as the sandwich lower value
    plus the MC mean of the non-negative cross term.
    """
    alpha = _check_nonneg("α", alpha)
    cache = cache or EigenbasisCache(X, spec, weights)
    report = cache.moments(lam, sigma2)
    report.budget = alpha
    if trials >= 2 and DesignDistribution(design) == DesignDistribution.GAUSSIAN:
        prior = cache.draw_prior(trials, sigma2, seed)
        cross = cache.adversarial_cross_term(lam, alpha, prior)
        report.adv_exact_gaussian = report.adv_lower + cross.mean
    return report


def risk_path(
    cache: EigenbasisCache,
    lambda_grid: Sequence[float],
    sigma2: float,
    alpha: float,
    trials: int = 0,
    seed: int = 0,
    design: DesignDistribution = DesignDistribution.GAUSSIAN,
) -> List[RiskReport]:
    """risk_report along a λ-grid with one shared prior sample"""
    alpha = _check_nonneg("α", alpha)
    prior = None
    if trials >= 2 and DesignDistribution(design) == DesignDistribution.GAUSSIAN:
        prior = cache.draw_prior(trials, sigma2, seed)
    reports = []
    for lam in lambda_grid:
        report = cache.moments(lam, sigma2)
        report.budget = alpha
        if prior is not None:
            report.adv_exact_gaussian = report.adv_lower + cache.adversarial_cross_term(lam, alpha, prior).mean
        reports.append(report)
    return reports


def mc_risks(
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
    n: int,
    lam: float,
    alpha: float,
    trials: int,
    seed: int = 0,
    dist: DesignDistribution = DesignDistribution.GAUSSIAN,
    X: Optional[np.ndarray] = None,
) -> Tuple[McEstimate, McEstimate, McEstimate]:
    """
    (std, adversarial, norm) Monte Carlo estimates on a fixed design.
    Each trial draws its own θ, noise and test point from the stream (seed, trial).
    """
    if trials < 2:
        raise InvalidArgumentError(f"Monte Carlo needs trials >= 2, got {trials}")
    lam = _check_nonneg("λ", lam)
    sigma2 = _check_nonneg("σ²", sigma2)
    alpha = _check_nonneg("α", alpha)
    dist = DesignDistribution(dist)
    if X is None:
        X = sample_design(spec, n, dist, seed).X
    X = np.asarray(X, dtype=float)
    _check_alignment(X, spec, weights)
    factor = RidgeFactorization(X)
    root_w = np.sqrt(weights.weights_sq)
    root_lam = np.sqrt(spec.eigenvalues)
    p = spec.truncation_dim
    std_s = np.empty(trials)
    adv_s = np.empty(trials)
    norm_s = np.empty(trials)
    for t in range(trials):
        rng = derive_rng(seed, "mc", t)
        theta = (rng.integers(0, 2, size=p) * 2.0 - 1.0) * root_w
        y = X @ theta + math.sqrt(sigma2) * rng.standard_normal(X.shape[0])
        theta_hat = X.T @ factor.coefficients(y, lam)
        x_star = draw_unit_entries(rng, p, dist) * root_lam
        err = float(x_star @ (theta_hat - theta))
        std_s[t] = err * err
        adv_s[t] = adversarial_sup(theta_hat, theta, x_star, alpha)
        norm_s[t] = float(theta_hat @ theta_hat)
    logger.debug(f"MC risks: n={X.shape[0]}, p={p}, λ={lam}, trials={trials}")
    return McEstimate.from_samples(std_s), McEstimate.from_samples(adv_s), McEstimate.from_samples(norm_s)
