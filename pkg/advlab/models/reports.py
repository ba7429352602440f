"""
advlab - Result records
Fits, samples, risk and bound reports shared by the engines and the runner
"""

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from advlab.models.errors import InvalidArgumentError


class DesignDistribution(str, Enum):
    GAUSSIAN = "Gaussian"
    RADEMACHER = "Rademacher"
    UNIFORM = "Uniform"


class Regime(str, Enum):
    SMALL_REG = "SmallReg"
    INTERMEDIATE = "Intermediate"
    LARGE_REG = "LargeReg"


@dataclass(frozen=True)
class DesignSample:
    X: np.ndarray
    n: int
    spectrum_ref: str
    seed: int
    dist: DesignDistribution = DesignDistribution.GAUSSIAN

    @property
    def p(self) -> int:
        return int(self.X.shape[1])


@dataclass(frozen=True)
class LabeledSample:
    design: DesignSample
    y: np.ndarray
    theta_true: np.ndarray
    noise_variance: float


@dataclass(frozen=True)
class RidgeFit:
    theta_hat: np.ndarray
    lam: float
    residual_norm: float
    gram_condition: float
    solver_tolerance: float


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    trials: int

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "McEstimate":
        samples = np.asarray(samples, dtype=float)
        trials = int(samples.shape[0])
        mean = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
        return cls(mean=mean, std_error=se, trials=trials)


@dataclass
class RiskReport:
    """
    RISK REPORT
    - standard risk split into bias and σ²-scaled variance
    - expected squared parameter norm split the same way
    - adversarial sandwich bounds (linear model) or gradient-norm proxy (NTK model)
    """

    std_bias: float
    std_variance: float
    norm_bias: float
    norm_variance: float
    budget: float = 0.0
    adv_exact_gaussian: Optional[float] = None
    mc_estimate: Optional[McEstimate] = None
    model: str = "linear"
    grad_proxy: Optional[McEstimate] = None
    grad_shift: Optional[McEstimate] = None
    grad_baseline: Optional[McEstimate] = None

    @property
    def std_total(self) -> float:
        return self.std_bias + self.std_variance

    @property
    def norm_total(self) -> float:
        return self.norm_bias + self.norm_variance

    @property
    def adv_lower(self) -> Optional[float]:
        if self.model != "linear":
            return None
        return self.budget ** 2 * self.norm_total + self.std_total

    @property
    def adv_upper(self) -> Optional[float]:
        lower = self.adv_lower
        return None if lower is None else 2.0 * lower

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {
            "model": self.model,
            "std_bias": self.std_bias,
            "std_variance": self.std_variance,
            "std_total": self.std_total,
            "norm_bias": self.norm_bias,
            "norm_variance": self.norm_variance,
            "norm_total": self.norm_total,
            "adv_lower": self.adv_lower,
            "adv_upper": self.adv_upper,
            "adv_exact_gaussian": self.adv_exact_gaussian,
            "budget": self.budget,
            "mc_mean": None,
            "mc_se": None,
            "mc_trials": None,
            "grad_proxy": None,
            "grad_proxy_se": None,
            "grad_shift": None,
            "grad_shift_se": None,
            "grad_baseline": None,
            "grad_baseline_se": None,
        }
        if self.mc_estimate is not None:
            row.update(mc_mean=self.mc_estimate.mean, mc_se=self.mc_estimate.std_error,
                       mc_trials=self.mc_estimate.trials)
        if self.grad_proxy is not None:
            row.update(grad_proxy=self.grad_proxy.mean, grad_proxy_se=self.grad_proxy.std_error)
        if self.grad_shift is not None:
            row.update(grad_shift=self.grad_shift.mean, grad_shift_se=self.grad_shift.std_error)
        if self.grad_baseline is not None:
            row.update(grad_baseline=self.grad_baseline.mean,
                       grad_baseline_se=self.grad_baseline.std_error)
        return row

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RiskReport":
        def mc(mean_key: str, se_key: str, trials_key: Optional[str] = None) -> Optional[McEstimate]:
            if data.get(mean_key) is None:
                return None
            trials = int(data[trials_key]) if trials_key and data.get(trials_key) is not None else 0
            return McEstimate(float(data[mean_key]), float(data[se_key]), trials)

        return cls(
            std_bias=float(data["std_bias"]),
            std_variance=float(data["std_variance"]),
            norm_bias=float(data["norm_bias"]),
            norm_variance=float(data["norm_variance"]),
            budget=float(data.get("budget") or 0.0),
            adv_exact_gaussian=data.get("adv_exact_gaussian"),
            mc_estimate=mc("mc_mean", "mc_se", "mc_trials"),
            model=data.get("model", "linear"),
            grad_proxy=mc("grad_proxy", "grad_proxy_se"),
            grad_shift=mc("grad_shift", "grad_shift_se"),
            grad_baseline=mc("grad_baseline", "grad_baseline_se"),
        )


@dataclass(frozen=True)
class BoundConstants:
    """Multipliers C₁…C₁₁ (non-explicit in the theory, default 1) and the critical-index constant b"""

    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    c5: float = 1.0
    c6: float = 1.0
    c7: float = 1.0
    c8: float = 1.0
    c9: float = 1.0
    c10: float = 1.0
    c11: float = 1.0
    c: float = 1.0
    b: float = 2.0
    threshold_multiplier: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise InvalidArgumentError(f"bound constant {name} must be positive, got {value}")

    def scaled(self, **updates: float) -> "BoundConstants":
        values = asdict(self)
        values.update(updates)
        return BoundConstants(**values)


@dataclass
class BoundReport:
    srisk_upper: Optional[float]
    norm_lower: Optional[float]
    regime: Regime
    srisk_lower: Optional[float] = None
    adv_lower: Optional[float] = None
    delta_lambda: Optional[float] = None
    tradeoff_score: Optional[float] = None
    boundary_low: Optional[float] = None
    boundary_high: Optional[float] = None
    terms: Dict[str, float] = field(default_factory=dict)
    note: Optional[str] = None

    def to_row(self) -> Dict[str, Any]:
        return {
            "bound_regime": self.regime.value,
            "bound_srisk_upper": self.srisk_upper,
            "bound_srisk_lower": self.srisk_lower,
            "bound_norm_lower": self.norm_lower,
            "bound_adv_lower": self.adv_lower,
            "bound_delta_lambda": self.delta_lambda,
            "bound_note": self.note,
        }


@dataclass(frozen=True)
class NtkModel:
    """
    TWO-LAYER RELU NETWORK AT INITIALIZATION
    - w0 layout is neuron-major: row j of w0.reshape(m, p + 1) is [θⱼ; uⱼ]
    """

    m: int
    p: int
    w0: np.ndarray
    seed: int
    radius: float = 1.0

    @property
    def scale(self) -> float:
        return 1.0 / np.sqrt(self.m * self.p)

    @property
    def theta0(self) -> np.ndarray:
        return self.w0.reshape(self.m, self.p + 1)[:, : self.p]

    @property
    def u0(self) -> np.ndarray:
        return self.w0.reshape(self.m, self.p + 1)[:, self.p]


@dataclass(frozen=True)
class KernelTriple:
    K_emp: np.ndarray
    K_arc: np.ndarray
    K_lin: np.ndarray
    op_norm_errors: Tuple[float, float]


@dataclass(frozen=True)
class NtkFit:
    w_hat: np.ndarray
    coef: np.ndarray
    solve_residual: float
    kernel: np.ndarray
    gd_trace: Optional[List[float]] = None
