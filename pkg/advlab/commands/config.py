"""
advlab - Experiment configuration
Key-value config files (dotenv syntax), environment overrides, CLI overrides and scenario presets
"""

import logging
import os
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from dotenv import dotenv_values

from advlab.engines.spectra import parse_family
from advlab.models.errors import ConfigError, InvalidArgumentError
from advlab.models.reports import BoundConstants, DesignDistribution
from advlab.models.spectrum import ConditionKind, SpectrumFamily

logger = logging.getLogger(__name__)


class Scenario(str, Enum):
    EXAMPLE1 = "Example1"
    EXAMPLE2 = "Example2"
    NTK_EXAMPLE = "NtkExample"
    CUSTOM_LINEAR = "CustomLinear"
    CUSTOM_NTK = "CustomNtk"

    @property
    def is_ntk(self) -> bool:
        return self in (Scenario.NTK_EXAMPLE, Scenario.CUSTOM_NTK)


# Family text used when the config does not give FAMILY
DEFAULT_FAMILIES = {
    Scenario.EXAMPLE1: SpectrumFamily.EXAMPLE1.value,
    Scenario.EXAMPLE2: SpectrumFamily.EXAMPLE2.value,
    Scenario.NTK_EXAMPLE: SpectrumFamily.NTK_EXAMPLE.value,
}

DEFAULT_CONDITIONS = {
    Scenario.EXAMPLE1: [ConditionKind.BENIGN, ConditionKind.TRADE_OFF],
    Scenario.EXAMPLE2: [ConditionKind.BENIGN, ConditionKind.TRADE_OFF],
    Scenario.CUSTOM_LINEAR: [ConditionKind.BENIGN, ConditionKind.TRADE_OFF],
    Scenario.NTK_EXAMPLE: [ConditionKind.NTK_BENIGN, ConditionKind.NTK_HIGH_DIM],
    Scenario.CUSTOM_NTK: [ConditionKind.NTK_BENIGN, ConditionKind.NTK_HIGH_DIM],
}


@dataclass
class ExperimentConfig:
    """
    EXPERIMENT CONFIGURATION
    - lambda_grid None means the default geometric grid per n (25 points from λ_{k*+1}r_{k*}/(10n) to 10λ₁)
    - budget is the adversarial radius α
    - replicates counts independent designs X per n
    """

    scenario: Scenario
    n_grid: List[int]
    lambda_grid: Optional[List[float]] = None
    budget: float = 0.1
    trials: int = 64
    replicates: int = 5
    master_seed: int = 0
    b: float = 2.0
    output_path: Path = Path("results/experiment.csv")
    constants: BoundConstants = field(default_factory=BoundConstants)
    family: Optional[str] = None
    sigma2: Optional[float] = None
    design: DesignDistribution = DesignDistribution.GAUSSIAN
    workers: int = field(default_factory=lambda: min(4, os.cpu_count() or 1))
    strict: bool = False
    tradeoff: bool = False
    lambda_points: int = 25
    keep_extra: int = 1
    ntk_width: int = 4096
    ntk_radius: float = 0.5
    ntk_holdout: int = 16
    conditions: Optional[List[ConditionKind]] = None
    condition_grid: Optional[List[int]] = None

    def __post_init__(self):
        self.validate()

    @property
    def family_text(self) -> str:
        if self.family:
            return self.family
        return DEFAULT_FAMILIES[self.scenario]

    @property
    def condition_kinds(self) -> List[ConditionKind]:
        return list(self.conditions) if self.conditions else DEFAULT_CONDITIONS[self.scenario]

    def validate(self) -> None:
        try:
            self.scenario = Scenario(self.scenario)
        except ValueError:
            raise ConfigError("scenario", f"must be one of {[s.value for s in Scenario]}", self.scenario)
        _check_grid("n_grid", self.n_grid, minimum=2)
        if self.lambda_grid is not None:
            _check_grid("lambda_grid", self.lambda_grid, minimum=0)
        if self.condition_grid is not None:
            _check_grid("condition_grid", self.condition_grid, minimum=2)
        if self.trials < 2:
            raise ConfigError("trials", "must be >= 2", self.trials)
        if self.budget < 0:
            raise ConfigError("budget", "α must be >= 0", self.budget)
        if self.replicates < 1:
            raise ConfigError("replicates", "must be >= 1", self.replicates)
        if self.master_seed < 0:
            raise ConfigError("master_seed", "must be >= 0", self.master_seed)
        if self.b <= 1:
            raise ConfigError("b", "critical-index constant must exceed 1", self.b)
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1", self.workers)
        if self.lambda_points < 2:
            raise ConfigError("lambda_points", "must be >= 2", self.lambda_points)
        if self.keep_extra < 1:
            raise ConfigError("keep_extra", "must be >= 1", self.keep_extra)
        if self.sigma2 is not None and self.sigma2 < 0:
            raise ConfigError("sigma2", "must be >= 0", self.sigma2)
        if self.ntk_width < 1 or self.ntk_holdout < 1:
            raise ConfigError("ntk_width", "width and holdout size must be >= 1", (self.ntk_width, self.ntk_holdout))
        if self.ntk_radius <= 0:
            raise ConfigError("ntk_radius", "must be positive", self.ntk_radius)
        if self.scenario in (Scenario.CUSTOM_LINEAR, Scenario.CUSTOM_NTK) and not self.family:
            raise ConfigError("family", f"scenario {self.scenario.value} needs an explicit spectrum family")
        if self.family:
            try:
                parse_family(self.family)
            except InvalidArgumentError as e:
                raise ConfigError("family", str(e), self.family)
        if self.constants.b != self.b:
            self.constants = self.constants.scaled(b=self.b)


def _check_grid(name: str, grid: List[Any], minimum: float) -> None:
    if not grid:
        raise ConfigError(name, "grid must be non-empty")
    if any(v < minimum for v in grid):
        raise ConfigError(name, f"entries must be >= {minimum}", grid)
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise ConfigError(name, "grid must be strictly increasing", grid)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _int_list(text: str) -> List[int]:
    return [int(float(part)) for part in _split(text)]


def _float_list(text: str) -> Optional[List[float]]:
    if str(text).strip().lower() == "auto":
        return None
    return [float(part) for part in _split(text)]


def _split(text: str) -> List[str]:
    return [part.strip() for part in str(text).replace(";", ",").split(",") if part.strip()]


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


def _conditions(text: str) -> List[ConditionKind]:
    return [ConditionKind(part) for part in _split(text)]


def _constants(text: str) -> Dict[str, float]:
    """'c1=2, c7=0.5' -> {'c1': 2.0, 'c7': 0.5}"""
    values: Dict[str, float] = {}
    for part in _split(text):
        key, _, value = part.partition("=")
        values[key.strip().lower()] = float(value)
    return values


# config key -> (field name, parser)
CONFIG_KEYS: Dict[str, tuple] = {
    "SCENARIO": ("scenario", Scenario),
    "N_GRID": ("n_grid", _int_list),
    "LAMBDA_GRID": ("lambda_grid", _float_list),
    "ALPHA": ("budget", float),
    "BUDGET": ("budget", float),
    "TRIALS": ("trials", int),
    "REPLICATES": ("replicates", int),
    "MASTER_SEED": ("master_seed", int),
    "B": ("b", float),
    "OUTPUT": ("output_path", Path),
    "OUTPUT_PATH": ("output_path", Path),
    "FAMILY": ("family", str),
    "SPECTRUM": ("family", str),
    "SIGMA2": ("sigma2", float),
    "DESIGN": ("design", DesignDistribution),
    "WORKERS": ("workers", int),
    "STRICT": ("strict", _bool),
    "TRADEOFF": ("tradeoff", _bool),
    "LAMBDA_POINTS": ("lambda_points", int),
    "KEEP_EXTRA": ("keep_extra", int),
    "NTK_WIDTH": ("ntk_width", int),
    "NTK_RADIUS": ("ntk_radius", float),
    "NTK_HOLDOUT": ("ntk_holdout", int),
    "CONDITIONS": ("conditions", _conditions),
    "CONDITION_GRID": ("condition_grid", _int_list),
    "CONSTANTS": ("constants", _constants),
}


def parse_values(raw: Dict[str, Optional[str]]) -> Dict[str, Any]:
    """Map raw key-value strings to ExperimentConfig fields"""
    parsed: Dict[str, Any] = {}
    for key, text in raw.items():
        upper = key.strip().upper()
        if upper not in CONFIG_KEYS:
            raise ConfigError(key, f"unknown key; expected one of {sorted(CONFIG_KEYS)}")
        name, parser = CONFIG_KEYS[upper]
        if text is None or str(text).strip() == "":
            continue
        try:
            parsed[name] = parser(text)
        except (ValueError, TypeError) as e:
            raise ConfigError(name, f"cannot parse: {e}", text)
    if "constants" in parsed:
        try:
            parsed["constants"] = BoundConstants().scaled(**parsed["constants"])
        except (TypeError, InvalidArgumentError) as e:
            raise ConfigError("constants", str(e))
    return parsed


def _env_overrides() -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    workers = os.getenv("ADVLAB_WORKERS")
    if workers:
        try:
            overrides["workers"] = int(workers)
        except ValueError:
            raise ConfigError("ADVLAB_WORKERS", "must be an integer", workers)
    return overrides


def _apply_output_dir(config: ExperimentConfig) -> ExperimentConfig:
    out_dir = os.getenv("ADVLAB_OUTPUT_DIR")
    if out_dir and not config.output_path.is_absolute():
        config.output_path = Path(out_dir) / config.output_path
    return config


def build_config(values: Dict[str, Any]) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "not a configuration field")
    for required in ("scenario", "n_grid"):
        if required not in values:
            raise ConfigError(required, "missing required key")
    return ExperimentConfig(**values)


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """File values, then ADVLAB_* environment, then explicit (CLI) overrides"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", "file not found", str(path))
    values = parse_values(dotenv_values(path))
    values.update(_env_overrides())
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = _apply_output_dir(build_config(values))
    logger.info(f"📋 Loaded config {path} (scenario={config.scenario.value}, n_grid={config.n_grid})")
    return config


# ---------------------------------------------------------------------------
# Presets for `repro`
# ---------------------------------------------------------------------------

PRESETS: Dict[Scenario, Callable[[], Dict[str, Any]]] = {
    Scenario.EXAMPLE1: lambda: dict(
        scenario=Scenario.EXAMPLE1, n_grid=[256, 1024, 4096], replicates=5, trials=32,
        budget=1.0, tradeoff=True, output_path=Path("results/example1.csv"),
        condition_grid=[256, 1024, 4096, 16384],
    ),
    Scenario.EXAMPLE2: lambda: dict(
        scenario=Scenario.EXAMPLE2, n_grid=[256, 1024, 4096], replicates=5, trials=32,
        budget=1.0, tradeoff=True, output_path=Path("results/example2.csv"),
        condition_grid=[256, 1024, 4096, 16384],
    ),
    Scenario.NTK_EXAMPLE: lambda: dict(
        scenario=Scenario.NTK_EXAMPLE, n_grid=[8, 16, 32], replicates=6, trials=400,
        budget=0.1, ntk_width=4096, ntk_radius=0.5, output_path=Path("results/ntk_example.csv"),
        condition_grid=[8, 16, 32],
    ),
}


def preset(scenario: Union[Scenario, str], overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    try:
        scenario = Scenario(scenario)
    except ValueError:
        raise ConfigError("scenario", f"must be one of {[s.value for s in Scenario]}", scenario)
    if scenario not in PRESETS:
        raise ConfigError("scenario", f"{scenario.value} has no preset; use `sweep --config`", scenario.value)
    values = PRESETS[scenario]()
    values.update(_env_overrides())
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return _apply_output_dir(build_config(values))


def with_overrides(config: ExperimentConfig, **updates: Any) -> ExperimentConfig:
    updated = replace(config, **{k: v for k, v in updates.items() if v is not None})
    updated.validate()
    return updated
