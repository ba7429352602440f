"""
advlab - Spectrum models
Covariance spectra, parameter weights and the rank / condition reports derived from them
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from advlab.models.errors import InvalidArgumentError


class SpectrumFamily(str, Enum):
    EXAMPLE1 = "Example1"
    EXAMPLE2 = "Example2"
    NTK_EXAMPLE = "NtkExample"
    POLY_DECAY = "PolyDecay"
    ISOTROPIC = "Isotropic"
    CUSTOM = "Custom"


class ConditionKind(str, Enum):
    BENIGN = "Benign"
    TRADE_OFF = "TradeOff"
    NTK_BENIGN = "NtkBenign"
    NTK_HIGH_DIM = "NtkHighDim"


class Verdict(str, Enum):
    TRENDS_TO_ZERO = "TrendsToZero"
    VIOLATED = "Violated"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class FamilyDescription:
    """Family tag plus named parameters, text form ``Family(key=value,...)``"""

    family: SpectrumFamily
    params: Dict[str, object] = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.params.get(key, default)

    def describe(self) -> str:
        parts = []
        for key in sorted(self.params):
            value = self.params[key]
            if isinstance(value, (list, tuple, np.ndarray)):
                value = ";".join(format(float(v), ".17g") for v in value)
            elif isinstance(value, float):
                value = format(value, ".17g")
            parts.append(f"{key}={value}")
        return f"{self.family.value}({','.join(parts)})"


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Spectrum:
    """
    COVARIANCE SPECTRUM
    - eigenvalues: materialized, strictly positive, non-increasing
    - tail_sum / tail_sum_sq: analytic Σλᵢ and Σλᵢ² beyond the truncation (None when finite)
    """

    eigenvalues: np.ndarray
    family: FamilyDescription
    tail_sum: Optional[float] = None
    tail_sum_sq: Optional[float] = None

    def __post_init__(self):
        eig = _frozen(self.eigenvalues)
        if eig.ndim != 1 or eig.shape[0] < 1:
            raise InvalidArgumentError(f"eigenvalues must be a non-empty 1-d sequence, got shape {eig.shape}")
        if not np.all(np.isfinite(eig)) or np.any(eig <= 0):
            raise InvalidArgumentError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(eig) > 0):
            raise InvalidArgumentError("eigenvalues must be non-increasing")
        for name in ("tail_sum", "tail_sum_sq"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"{name} must be finite and non-negative, got {value}")
        if self.tail_sum_sq is not None and self.tail_sum_sq > (self.tail_sum or 0.0) * eig[-1] * (1 + 1e-9) + 1e-15:
            raise InvalidArgumentError(
                f"tail_sum_sq={self.tail_sum_sq:.6g} exceeds tail_sum·λ_p={(self.tail_sum or 0.0) * eig[-1]:.6g}"
            )
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def truncation_dim(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def family_tag(self) -> SpectrumFamily:
        return self.family.family

    @property
    def has_tail(self) -> bool:
        return self.tail_sum is not None

    @property
    def trace(self) -> float:
        """l = Σλᵢ including the analytic tail"""
        return float(np.sum(self.eigenvalues) + (self.tail_sum or 0.0))

    @property
    def trace_sq(self) -> float:
        return float(np.sum(self.eigenvalues ** 2) + (self.tail_sum_sq or 0.0))

    @property
    def ref(self) -> str:
        return self.family.describe()


@dataclass(frozen=True)
class ParameterWeights:
    """
    Squared eigenbasis weights θ̃ᵢ² of the ground-truth parameter.
    Tail fields hold Σ_{i>p} θ̃ᵢ², Σ_{i>p} λᵢθ̃ᵢ² and Σ_{i>p} λᵢ²θ̃ᵢ² for infinite families.
    """

    weights_sq: np.ndarray
    tail_norm_sq: float = 0.0
    tail_weighted: float = 0.0
    tail_weighted_sq: float = 0.0

    def __post_init__(self):
        weights_sq = _frozen(self.weights_sq)
        if weights_sq.ndim != 1:
            raise InvalidArgumentError(f"weights must be a 1-d sequence, got shape {weights_sq.shape}")
        if not np.all(np.isfinite(weights_sq)) or np.any(weights_sq < 0):
            raise InvalidArgumentError("squared weights must be finite and non-negative")
        for name in ("tail_norm_sq", "tail_weighted", "tail_weighted_sq"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"{name} must be finite and non-negative, got {value}")
        object.__setattr__(self, "weights_sq", weights_sq)

    @property
    def norm_sq(self) -> float:
        return float(np.sum(self.weights_sq) + self.tail_norm_sq)


@dataclass(frozen=True)
class RankReport:
    k: int
    r_k: float
    R_k: float
    b: float
    n: int
    s_k: Optional[float] = None
    k_star: Optional[int] = None
    w_star: Optional[int] = None


@dataclass
class ConditionReport:
    """
    CONDITION REPORT
    - terms: term name -> value per grid point
    - details: term name -> fitted log-log slope over the grid
    - directions: term name -> "zero" (must decrease) or "infinity" (must increase)
    """

    condition_id: ConditionKind
    n_grid: List[int]
    terms: Dict[str, List[Optional[float]]]
    verdict: Verdict
    details: Dict[str, Optional[float]] = field(default_factory=dict)
    directions: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "condition": self.condition_id.value,
            "n_grid": list(self.n_grid),
            "verdict": self.verdict.value,
            "terms": {k: list(v) for k, v in self.terms.items()},
            "slopes": dict(self.details),
            "directions": dict(self.directions),
            "notes": list(self.notes),
        }

    def render(self) -> str:
        lines = [f"Condition {self.condition_id.value}: {self.verdict.value}"]
        header = "  term".ljust(28) + "".join(f"n={n}".rjust(14) for n in self.n_grid) + "   slope"
        lines.append(header)
        for name, values in self.terms.items():
            cells = "".join(("-" if v is None else f"{v:.4g}").rjust(14) for v in values)
            slope = self.details.get(name)
            slope_txt = "-" if slope is None else f"{slope:+.3f}"
            lines.append(f"  {name}".ljust(28) + cells + f"   {slope_txt}")
        for note in self.notes:
            lines.append(f"  note: {note}")
        return "\n".join(lines)


SpectrumBundle = Tuple[Spectrum, ParameterWeights, float]
