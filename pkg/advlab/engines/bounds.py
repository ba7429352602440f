"""
advlab - Bounds Engine
Shapes of the ridge / min-norm / NTK risk bounds (up to multipliers C₁…C₁₁) and λ-regime classification
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from advlab.engines.spectra import (
    critical_index,
    effective_ranks,
    tradeoff_index,
    weighted_norms,
)
from advlab.models.errors import InvalidArgumentError, PreconditionError
from advlab.models.reports import BoundConstants, BoundReport, Regime
from advlab.models.spectrum import ParameterWeights, Spectrum

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _Split:
    """Head/tail quantities at the critical index"""

    k_star: int
    mass: float          # λ_{k*+1}·r_{k*} = Σ_{i>k*} λᵢ
    big_r: float         # R_{k*}
    tail_energy: float   # Σ_{i>k*} λᵢθ̃ᵢ²
    head_inv: float      # Σ_{i≤k*} θ̃ᵢ²/λᵢ
    tail_sq: float       # Σ_{i>k*} λᵢ²
    tail_wsq: float      # Σ_{i>k*} θ̃ᵢ²λᵢ²
    head_eig: np.ndarray
    head_w: np.ndarray


def _split(spec: Spectrum, weights: ParameterWeights, n: int, b: float) -> _Split:
    k_star = critical_index(spec, b, n)
    if k_star is None:
        raise PreconditionError(f"no critical index k* for b={b}, n={n} within p={spec.truncation_dim}")
    eig, wsq = spec.eigenvalues, weights.weights_sq
    r_k, big_r = effective_ranks(spec, k_star)
    tail_energy, head_inv, _ = weighted_norms(spec, weights, k_star)
    return _Split(
        k_star=k_star,
        mass=float(eig[k_star]) * r_k,
        big_r=big_r,
        tail_energy=tail_energy,
        head_inv=head_inv,
        tail_sq=float(np.sum(eig[k_star:] ** 2) + (spec.tail_sum_sq or 0.0)),
        tail_wsq=float(np.sum(wsq[k_star:] * eig[k_star:] ** 2) + weights.tail_weighted_sq),
        head_eig=eig[:k_star],
        head_w=wsq[:k_star],
    )


def _check_inputs(n: int, lam: float, sigma2: float) -> None:
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if lam < 0:
        raise InvalidArgumentError(f"λ must be >= 0, got {lam}")
    if sigma2 < 0:
        raise InvalidArgumentError(f"σ² must be >= 0, got {sigma2}")


def _regime(spec: Spectrum, split: _Split, n: int, lam: float) -> Regime:
    if lam <= split.mass / n:
        return Regime.SMALL_REG
    if lam >= float(spec.eigenvalues[0]):
        return Regime.LARGE_REG
    return Regime.INTERMEDIATE


def thm_ridge_bounds(
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
    n: int,
    lam: float,
    consts: BoundConstants = BoundConstants(),
) -> BoundReport:
    """Standard-risk upper and norm lower shapes valid for every λ >= 0"""
    _check_inputs(n, lam, sigma2)
    s = _split(spec, weights, n, consts.b)
    shifted = s.mass + n * lam
    reg_sq = s.mass ** 2 + (n * lam) ** 2
    damp = np.minimum(1.0 / n, n * s.head_eig ** 2 / shifted ** 2)
    terms = {
        "bias_tail": s.tail_energy,
        "bias_head": reg_sq / n ** 2 * s.head_inv,
        "var_head": sigma2 * s.k_star / n,
        "var_tail": sigma2 * n * s.tail_sq / shifted ** 2,
        "norm_head_noise": float(np.sum(sigma2 / s.head_eig * damp)),
        "norm_head_signal": float(np.sum(n * s.head_w * damp)),
        "norm_tail_noise": n * sigma2 * s.mass / reg_sq,
        "norm_tail_signal": n ** 2 * s.tail_wsq / reg_sq,
    }
    srisk = consts.c1 * (terms["bias_tail"] + terms["bias_head"] + terms["var_head"] + terms["var_tail"])
    norm = consts.c2 * (terms["norm_head_noise"] + terms["norm_head_signal"]
                        + terms["norm_tail_noise"] + terms["norm_tail_signal"])
    return BoundReport(
        srisk_upper=srisk,
        norm_lower=norm,
        regime=_regime(spec, s, n, lam),
        boundary_low=s.mass / n,
        boundary_high=float(spec.eigenvalues[0]),
        terms=terms,
    )


def small_reg_bounds(
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
    n: int,
    consts: BoundConstants = BoundConstants(),
    lam: float = 0.0,
) -> BoundReport:
    """Bounds for every λ <= λ_{k*+1}r_{k*}/n (min-norm included)"""
    _check_inputs(n, lam, sigma2)
    s = _split(spec, weights, n, consts.b)
    boundary = s.mass / n
    if lam > boundary:
        raise PreconditionError(f"λ={lam:.6g} is above the small-regularization boundary {boundary:.6g}")
    damp = np.minimum(1.0 / n, n * s.head_eig ** 2 / s.mass ** 2)
    terms = {
        "bias_tail": s.tail_energy,
        "bias_head": (s.mass / n) ** 2 * s.head_inv,
        "var_head": sigma2 * s.k_star / n,
        "var_tail": sigma2 * n / s.big_r,
        "norm_head_noise": float(np.sum(sigma2 / s.head_eig * damp)),
        "norm_head_signal": float(np.sum(n * s.head_w * damp)),
        "norm_tail_noise": n * sigma2 / s.mass,
        "norm_tail_signal": n ** 2 * s.tail_wsq / s.mass ** 2,
    }
    return BoundReport(
        srisk_upper=consts.c3 * (terms["bias_tail"] + terms["bias_head"] + terms["var_head"] + terms["var_tail"]),
        norm_lower=consts.c4 * (terms["norm_head_noise"] + terms["norm_head_signal"]
                                + terms["norm_tail_noise"] + terms["norm_tail_signal"]),
        regime=Regime.SMALL_REG,
        boundary_low=boundary,
        boundary_high=float(spec.eigenvalues[0]),
        terms=terms,
    )


def small_reg_adversarial_lower(
    spec: Spectrum,
    sigma2: float,
    n: int,
    alpha: float,
    consts: BoundConstants = BoundConstants(),
) -> float:
    """A ≥ C₇·nα²σ²/(λ_{k*+1}r_{k*}) for small λ"""
    k_star = critical_index(spec, consts.b, n)
    if k_star is None:
        raise PreconditionError(f"no critical index k* for b={consts.b}, n={n}")
    r_k, _ = effective_ranks(spec, k_star)
    return consts.c7 * n * alpha ** 2 * sigma2 / (float(spec.eigenvalues[k_star]) * r_k)


def large_reg_lower(
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
    n: int,
    lam: float,
    consts: BoundConstants = BoundConstants(),
) -> BoundReport:
    """Lower bounds on standard risk and norm for λ >= λ_{k*+1}r_{k*}/n"""
    _check_inputs(n, lam, sigma2)
    s = _split(spec, weights, n, consts.b)
    boundary = s.mass / n
    if lam < boundary:
        raise PreconditionError(f"λ={lam:.6g} is below the large-regularization boundary {boundary:.6g}")
    eig, wsq = spec.eigenvalues, weights.weights_sq
    if spec.has_tail and lam <= float(eig[-1]):
        logger.warning(f"⚠️ λ={lam:.4g} does not exceed λ_p={eig[-1]:.4g}; analytic tail counted below λ")
    above = eig >= lam
    below = ~above
    tail_mass = spec.tail_sum or 0.0
    tail_sq = spec.tail_sum_sq or 0.0
    terms = {
        "bias_above": float(np.sum(wsq[above] * lam ** 2 / eig[above])),
        "bias_below": float(np.sum(wsq[below] * eig[below]) + weights.tail_weighted),
        "var_above": sigma2 / n * float(np.count_nonzero(above)),
        "var_below": sigma2 / n * (float(np.sum(eig[below] ** 2)) + tail_sq) / lam ** 2,
        "norm_above_signal": float(np.sum(wsq[above])),
        "norm_below_signal": (float(np.sum(wsq[below] * eig[below] ** 2)) + weights.tail_weighted_sq) / lam ** 2,
        "norm_above_noise": sigma2 / n * float(np.sum(1.0 / eig[above])),
        "norm_below_noise": sigma2 / n * (float(np.sum(eig[below])) + tail_mass) / lam ** 2,
    }
    return BoundReport(
        srisk_upper=None,
        srisk_lower=consts.c5 * (terms["bias_above"] + terms["bias_below"] + terms["var_above"] + terms["var_below"]),
        norm_lower=consts.c6 * (terms["norm_above_signal"] + terms["norm_below_signal"]
                                + terms["norm_above_noise"] + terms["norm_below_noise"]),
        regime=_regime(spec, s, n, lam),
        boundary_low=boundary,
        boundary_high=float(eig[0]),
        terms=terms,
    )


def delta_lambda(
    spec: Spectrum,
    weights: ParameterWeights,
    n: int,
    lam: float,
    alpha: float,
    adv_risk_ref: float,
    consts: BoundConstants = BoundConstants(),
) -> float:
    """Δ(λ): the smaller of the relative bias inflation and α²/(A_ref·√max(k*/n, n/R_{k*}))"""
    if not adv_risk_ref > 0:
        raise InvalidArgumentError(f"adv_risk_ref must be positive, got {adv_risk_ref}")
    s = _split(spec, weights, n, consts.b)
    eig, wsq = spec.eigenvalues, weights.weights_sq
    above = eig > lam
    numerator = lam ** 2 * float(np.sum(wsq[above] / eig[above])) \
        + float(np.sum(wsq[~above] * eig[~above])) + weights.tail_weighted
    lam_next = float(eig[s.k_star])
    denominator = weights.norm_sq * (lam_next ** 2 * s.head_inv + s.tail_energy)
    rate = math.sqrt(max(s.k_star / n, n / s.big_r))
    return min(numerator / denominator, alpha ** 2 / (adv_risk_ref * rate))


def regime_classify(
    spec: Spectrum,
    weights: ParameterWeights,
    sigma2: float,
    n: int,
    lam: float,
    alpha: float,
    consts: BoundConstants = BoundConstants(),
    minnorm_srisk_ref: Optional[float] = None,
    adv_risk_ref: Optional[float] = None,
) -> BoundReport:
    """
    REGIME CLASSIFIER
    - SmallReg: λ <= λ_{k*+1}r_{k*}/n (adversarial lower bound grows like nα²σ²/Σ_{i>k*}λᵢ)
    - LargeReg: λ >= λ₁ (standard risk stays above ‖θ‖²_Σ)
    - Intermediate: in between; Δ(λ) reported below λ_{w*}
    """
    _check_inputs(n, lam, sigma2)
    report = thm_ridge_bounds(spec, weights, sigma2, n, lam, consts)
    regime = report.regime
    if regime == Regime.SMALL_REG:
        report.adv_lower = small_reg_adversarial_lower(spec, sigma2, n, alpha, consts)
    else:
        lower = large_reg_lower(spec, weights, sigma2, n, lam, consts)
        report.srisk_lower = lower.srisk_lower
        report.adv_lower = alpha ** 2 * lower.norm_lower + lower.srisk_lower
        if regime == Regime.LARGE_REG:
            _, _, energy = weighted_norms(spec, weights, 0)
            report.srisk_lower = max(report.srisk_lower, consts.c8 * energy)
        else:
            w_star = tradeoff_index(spec, weights, n, consts.b, consts.threshold_multiplier)
            if w_star is None:
                report.note = "intermediate regime unavailable: no trade-off index w*"
                logger.warning(f"⚠️ No w* for n={n}; Δ(λ) not reported at λ={lam:.4g}")
            else:
                lam_w = float(spec.eigenvalues[max(w_star - 1, 0)])
                if lam < lam_w and adv_risk_ref is not None:
                    report.delta_lambda = delta_lambda(spec, weights, n, lam, alpha, adv_risk_ref, consts)
                elif lam >= lam_w:
                    report.note = f"λ >= λ_w*={lam_w:.6g}: standard risk dominates ‖θ‖²·S(0)"
    if minnorm_srisk_ref and adv_risk_ref is not None and alpha > 0 and weights.norm_sq > 0:
        report.tradeoff_score = report.srisk_upper / (weights.norm_sq * minnorm_srisk_ref) + adv_risk_ref / alpha ** 2
    return report


def ntk_bounds(
    spec: Spectrum,
    sigma2: float,
    n: int,
    p: int,
    radius: float,
    alpha: float,
    consts: BoundConstants = BoundConstants(),
) -> BoundReport:
    """NTK fit: S ≤ C₁₀[R²√l/(√p·n^{1/4}) + σ²(n^{-1/8} + k*/n + nΣ_{j>k*}λⱼ²/l²)], A ≥ C₁₁α²σ²nΣ_{j>k*}λⱼ/l²"""
    k_star = critical_index(spec, consts.b, n)
    if k_star is None:
        raise PreconditionError(f"no critical index k* for b={consts.b}, n={n}")
    l_trace = spec.trace
    eig = spec.eigenvalues
    tail_sq = float(np.sum(eig[k_star:] ** 2) + (spec.tail_sum_sq or 0.0))
    mass = float(np.sum(eig[k_star:]) + (spec.tail_sum or 0.0))
    terms = {
        "approx": radius ** 2 * math.sqrt(l_trace) / (math.sqrt(p) * n ** 0.25),
        "var_width": sigma2 * n ** -0.125,
        "var_head": sigma2 * k_star / n,
        "var_tail": sigma2 * n * tail_sq / l_trace ** 2,
        "adv": alpha ** 2 * sigma2 * n * mass / l_trace ** 2,
    }
    return BoundReport(
        srisk_upper=consts.c10 * (terms["approx"] + terms["var_width"] + terms["var_head"] + terms["var_tail"]),
        norm_lower=None,
        regime=Regime.SMALL_REG,
        adv_lower=consts.c11 * terms["adv"],
        terms=terms,
    )


def calibrate_constant(measured: float, shape: float) -> float:
    """Multiplier C with C·shape = measured at the calibration point"""
    if not shape > 0:
        raise InvalidArgumentError(f"bound shape must be positive to calibrate, got {shape}")
    if measured < 0:
        raise InvalidArgumentError(f"measured value must be non-negative, got {measured}")
    return float(measured) / float(shape)


def dominance_holds(measured: float, shape: float, constant: float, upper: bool = True) -> bool:
    """upper: measured <= C·shape; lower: measured >= C·shape"""
    scaled = constant * shape
    return measured <= scaled if upper else measured >= scaled


def bound_summary(report: BoundReport) -> Dict[str, Optional[float]]:
    return {
        "srisk_upper": report.srisk_upper,
        "srisk_lower": report.srisk_lower,
        "norm_lower": report.norm_lower,
        "adv_lower": report.adv_lower,
        "delta_lambda": report.delta_lambda,
    }
