"""
advlab - Experiment Runner
Fans (n, replicate) tasks out over a bounded worker pool and gathers deterministic result tables
"""

import asyncio
import logging
from dataclasses import asdict
from pathlib import Path
from statistics import median
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from advlab.commands.config import ExperimentConfig
from advlab.engines.bounds import ntk_bounds, regime_classify
from advlab.engines.datagen import export_design_csv, sample_design
from advlab.engines.ntk import init_network, kernels, make_target, ntk_fixed_point, ntk_risks, sample_ntk_task
from advlab.engines.risk import build_cache, risk_path
from advlab.engines.spectra import (
    check_conditions,
    design_spectrum,
    effective_ranks,
    make_spectrum,
    rank_report,
)
from advlab.models.errors import AdvlabError
from advlab.models.results import ResultsTable
from advlab.models.spectrum import ConditionReport, ParameterWeights, Spectrum
from advlab.utils.results_factory import ResultsFactory
from advlab.utils.seeding import derive_seed_sequence

logger = logging.getLogger(__name__)


def replicate_seed(master_seed: int, replicate: int) -> int:
    """32-bit seed of one replicate's streams, derived from (master_seed, replicate)"""
    return int(derive_seed_sequence(master_seed, "replicate", replicate).generate_state(1)[0])


def default_lambda_grid(spec: Spectrum, n: int, k_star: Optional[int], points: int = 25) -> List[float]:
    """Geometric grid from λ_{k*+1}r_{k*}/(10n) to 10λ₁"""
    lam1 = float(spec.eigenvalues[0])
    top = 10.0 * lam1
    if k_star is None:
        logger.warning(f"⚠️ No k* at n={n}; λ-grid starts at 1e-4·λ₁")
        low = 1e-4 * lam1
    else:
        r_k, _ = effective_ranks(spec, k_star)
        low = float(spec.eigenvalues[k_star]) * r_k / (10.0 * n)
    return [float(v) for v in np.geomspace(low, top, points)]


def tradeoff_summary(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Per (scenario, n): min over λ of the median-over-replicates score"""
    grouped: Dict[Tuple[str, int], Dict[float, List[float]]] = {}
    for row in rows:
        if row.get("status") != "ok" or row.get("score") is None:
            continue
        per_lam = grouped.setdefault((row["scenario"], row["n"]), {})
        per_lam.setdefault(row["lam"], []).append(row["score"])
    summary = []
    for (scenario, n), per_lam in sorted(grouped.items()):
        medians = {lam: median(scores) for lam, scores in per_lam.items()}
        best_lam = min(sorted(medians), key=lambda lam: medians[lam])
        summary.append({
            "scenario": scenario,
            "n": n,
            "min_score": medians[best_lam],
            "argmin_lam": best_lam,
            "score_at_zero": medians.get(0.0),
            "replicates": max(len(scores) for scores in per_lam.values()),
        })
    return summary


def _optional_float(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


class ExperimentRunner:
    """
    EXPERIMENT RUNNER
    - one worker task per (n, replicate); λ-grids share the eigenbasis cache inside a task
    - per-point failures become error rows, never aborts
    - rows are sorted by (scenario, n, λ, replicate) before anything is written
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.semaphore = asyncio.Semaphore(config.workers)
        logger.info(f"📋 b={config.b}, threshold multiplier={config.constants.threshold_multiplier}, "
                    f"constants={asdict(config.constants)}, master_seed={config.master_seed}")

    async def _bounded(self, fn, *args):
        async with self.semaphore:
            return await asyncio.to_thread(fn, *args)

    def _base_row(self, n: int, lam: Optional[float], replicate: int, seed: int) -> Dict[str, Any]:
        return {
            "scenario": self.config.scenario.value,
            "n": int(n),
            "lam": _optional_float(lam),
            "replicate": int(replicate),
            "seed": int(seed),
        }

    def _error_rows(self, n: int, grid: Sequence[Optional[float]], replicate: int, seed: int,
                    error: Exception) -> List[Dict[str, Any]]:
        logger.error(f"❌ {self.config.scenario.value} n={n} replicate={replicate}: {error}")
        rows = []
        for lam in grid:
            data = self._base_row(n, lam, replicate, seed)
            data["error"] = f"{type(error).__name__}: {error}"
            rows.append(ResultsFactory.build("error", data))
        return rows

    # ------------------------------------------------------------------
    # linear scenarios
    # ------------------------------------------------------------------

    def _spectrum(self, n: int) -> Tuple[Spectrum, ParameterWeights, float]:
        spec, weights, sigma2 = make_spectrum(self.config.family_text, n)
        if self.config.sigma2 is not None:
            sigma2 = self.config.sigma2
        return spec, weights, sigma2

    def _lambda_grid(self, spec: Spectrum, n: int, k_star: Optional[int], with_zero: bool) -> List[float]:
        if self.config.lambda_grid is not None:
            grid = list(self.config.lambda_grid)
        else:
            grid = default_lambda_grid(spec, n, k_star, self.config.lambda_points)
        if with_zero and grid[0] != 0.0:
            grid = [0.0] + grid
        return grid

    def _linear_task(self, n: int, replicate: int, with_zero: bool) -> List[Dict[str, Any]]:
        cfg = self.config
        seed = replicate_seed(cfg.master_seed, replicate)
        grid: List[Optional[float]] = list(cfg.lambda_grid) if cfg.lambda_grid is not None else [None]
        try:
            spec, weights, sigma2 = self._spectrum(n)
            rank = rank_report(spec, weights, n, cfg.b, multiplier=cfg.constants.threshold_multiplier)
            grid = self._lambda_grid(spec, n, rank.k_star, with_zero)
            keep = spec.truncation_dim if rank.k_star is None else min(spec.truncation_dim, rank.k_star + cfg.keep_extra)
            dspec, dweights = design_spectrum(spec, weights, keep=keep)
            design = sample_design(dspec, n, cfg.design, seed)
            cache = build_cache(design.X, dspec, dweights)
            reports = risk_path(cache, grid, sigma2, cfg.budget, cfg.trials, seed, cfg.design)
        except (AdvlabError, np.linalg.LinAlgError, ValueError) as e:
            return self._error_rows(n, grid, replicate, seed, e)

        std_zero = reports[0].std_total if grid[0] == 0.0 else None
        theta_norm_sq = weights.norm_sq
        rows = []
        for lam, report in zip(grid, reports):
            data = self._base_row(n, lam, replicate, seed)
            data.update(
                spectrum=spec.ref,
                p=dspec.truncation_dim,
                k_star=rank.k_star,
                w_star=rank.w_star,
                r_k=rank.r_k,
                R_k=rank.R_k,
                sigma2=float(sigma2),
                theta_norm_sq=theta_norm_sq,
            )
            data.update(report.to_row())
            if std_zero and cfg.budget > 0:
                data["score"] = report.std_total / (theta_norm_sq * std_zero) + report.adv_lower / cfg.budget ** 2
            try:
                bound = regime_classify(
                    spec, weights, sigma2, n, lam, cfg.budget, cfg.constants,
                    minnorm_srisk_ref=std_zero, adv_risk_ref=report.adv_lower,
                )
                data.update(bound.to_row())
            except AdvlabError as e:
                data["bound_note"] = f"bounds unavailable: {e}"
            rows.append(ResultsFactory.build("point", data))
        logger.debug(f"n={n} replicate={replicate}: {len(rows)} rows")
        return rows

    async def _linear_rows(self, with_zero: bool) -> List[Dict[str, Any]]:
        cfg = self.config
        tasks = [
            self._bounded(self._linear_task, n, r, with_zero)
            for n in cfg.n_grid
            for r in range(cfg.replicates)
        ]
        rows: List[Dict[str, Any]] = []
        for chunk in await asyncio.gather(*tasks):
            rows.extend(chunk)
        return rows

    async def run_experiment(self) -> ResultsTable:
        """Risks, sandwich values, bound shapes and rank diagnostics per (n, λ, replicate)"""
        if self.config.scenario.is_ntk:
            return await self.ntk_sweep()
        logger.info(f"🚀 Running {self.config.scenario.value} over n={self.config.n_grid} "
                    f"with {self.config.replicates} replicates")
        rows = await self._linear_rows(with_zero=False)
        table = ResultsTable(self.config.scenario.value, rows).sort()
        self._log_outcome(table)
        return table

    async def tradeoff_curve(self) -> ResultsTable:
        """run_experiment with λ = 0 added to the grid, plus the per-n trade-off summary"""
        cfg = self.config
        logger.info(f"🚀 Trade-off curve for {cfg.scenario.value} over n={cfg.n_grid}")
        if cfg.budget == 0:
            logger.warning("⚠️ α = 0: the trade-off score is undefined, summary will be empty")
        rows = await self._linear_rows(with_zero=True)
        table = ResultsTable(cfg.scenario.value, rows).sort()
        self._check_regime_coverage(table)
        table.summary = tradeoff_summary(table.rows)
        self._log_outcome(table)
        return table

    def _check_regime_coverage(self, table: ResultsTable) -> None:
        for n in self.config.n_grid:
            ok = [row for row in table.rows if row["n"] == n and row.get("status") == "ok"]
            if not ok:
                continue
            regimes = {row.get("bound_regime") for row in ok}
            missing = {"SmallReg", "Intermediate", "LargeReg"} - regimes
            if missing:
                logger.warning(f"⚠️ λ-grid at n={n} does not reach regimes {sorted(missing)}")

    # ------------------------------------------------------------------
    # conditions
    # ------------------------------------------------------------------

    def _conditions_task(self) -> List[ConditionReport]:
        cfg = self.config
        grid = cfg.condition_grid or cfg.n_grid
        reports = []
        for kind in cfg.condition_kinds:
            reports.append(check_conditions(
                kind, cfg.family_text, sigma2=cfg.sigma2, n_grid=grid, b=cfg.b,
                multiplier=cfg.constants.threshold_multiplier,
            ))
        return reports

    async def report_conditions(self) -> List[ConditionReport]:
        logger.info(f"📊 Checking conditions {[k.value for k in self.config.condition_kinds]} "
                    f"for {self.config.family_text}")
        reports = await self._bounded(self._conditions_task)
        for report in reports:
            logger.info(f"Condition {report.condition_id.value}: {report.verdict.value}")
        return reports

    # ------------------------------------------------------------------
    # NTK sweep
    # ------------------------------------------------------------------

    def _ntk_task(self, n: int, replicate: int) -> List[Dict[str, Any]]:
        cfg = self.config
        seed = replicate_seed(cfg.master_seed, replicate)
        try:
            spec, weights, sigma2 = self._spectrum(n)
            p = spec.truncation_dim
            model = init_network(cfg.ntk_width, p, seed=seed, radius=cfg.ntk_radius)
            holdout = sample_design(spec, cfg.ntk_holdout, cfg.design, seed=seed + 1)
            w_star = make_target(model, holdout.X, cfg.ntk_radius, seed)
            design, y = sample_ntk_task(model, spec, n, sigma2, w_star, seed, cfg.design)
            fit = ntk_fixed_point(model, design.X, y)
            report = ntk_risks(model, fit, w_star, sigma2, cfg.budget, cfg.trials, seed, spec, X=design.X)
            triple = kernels(model, design.X, spec)
        except (AdvlabError, np.linalg.LinAlgError, ValueError) as e:
            return self._error_rows(n, [0.0], replicate, seed, e)

        data = self._base_row(n, 0.0, replicate, seed)
        data.update(
            spectrum=spec.ref,
            p=p,
            sigma2=float(sigma2),
            m=cfg.ntk_width,
            kernel_emp_arc_err=triple.op_norm_errors[0],
            kernel_arc_lin_err=triple.op_norm_errors[1],
            fit_residual=fit.solve_residual,
        )
        data.update(report.to_row())
        try:
            rank = rank_report(spec, weights, n, cfg.b)
            data.update(k_star=rank.k_star, r_k=rank.r_k, R_k=rank.R_k)
            data.update(ntk_bounds(spec, sigma2, n, p, cfg.ntk_radius, cfg.budget, cfg.constants).to_row())
        except AdvlabError as e:
            data["bound_note"] = f"bounds unavailable: {e}"
        return [ResultsFactory.build("point", data)]

    async def ntk_sweep(self) -> ResultsTable:
        """Fixed point, MC std risk, gradient-norm proxy, kernel errors and NTK bound shapes per n"""
        cfg = self.config
        logger.info(f"🚀 NTK sweep {cfg.family_text} over n={cfg.n_grid}, m={cfg.ntk_width}")
        tasks = [self._bounded(self._ntk_task, n, r) for n in cfg.n_grid for r in range(cfg.replicates)]
        rows: List[Dict[str, Any]] = []
        for chunk in await asyncio.gather(*tasks):
            rows.extend(chunk)
        table = ResultsTable(cfg.scenario.value, rows).sort()
        self._log_outcome(table)
        return table

    # ------------------------------------------------------------------
    # misc
    # ------------------------------------------------------------------

    async def export_design(self, n: int, replicate: int, path: Path) -> Path:
        cfg = self.config

        def work() -> Path:
            spec, weights, _ = self._spectrum(n)
            rank = rank_report(spec, weights, n, cfg.b)
            keep = spec.truncation_dim if rank.k_star is None else min(spec.truncation_dim, rank.k_star + cfg.keep_extra)
            dspec, _ = design_spectrum(spec, weights, keep=keep)
            design = sample_design(dspec, n, cfg.design, replicate_seed(cfg.master_seed, replicate))
            return export_design_csv(design, path)

        return await self._bounded(work)

    async def write(self, table: ResultsTable) -> Dict[str, Path]:
        extra = {"config": {"scenario": self.config.scenario.value, "master_seed": self.config.master_seed,
                            "n_grid": list(self.config.n_grid), "budget": self.config.budget}}
        return await ResultsFactory.write_table(table, self.config.output_path, extra)

    async def write_conditions(self, reports: List[ConditionReport]) -> Dict[str, Path]:
        return await ResultsFactory.write_conditions(reports, self.config.output_path)

    @staticmethod
    def _log_outcome(table: ResultsTable) -> None:
        failed = len(table.error_rows)
        if failed:
            logger.warning(f"⚠️ {failed}/{len(table.rows)} rows failed")
        else:
            logger.info(f"✅ {len(table.rows)} rows computed")

