"""
advlab - Results Factory
Centralized rendering of result rows, summaries and condition reports as CSV / JSON,
written atomically (temp file + rename)
"""

import csv
import io
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import aiofiles

from advlab.models.results import SCHEMA_VERSION, ResultsTable
from advlab.models.spectrum import ConditionReport

logger = logging.getLogger(__name__)


class ResultsFactory:
    """
    Single place that knows the table layout:
    fixed column order, '.17g' floats, empty cells for missing values
    """

    # Column groups in output order
    COLUMNS = {
        'key': ['scenario', 'n', 'lam', 'replicate', 'seed', 'spectrum', 'status', 'error'],
        'rank': ['p', 'k_star', 'w_star', 'r_k', 'R_k', 'sigma2', 'theta_norm_sq'],
        'risk': [
            'model', 'std_bias', 'std_variance', 'std_total', 'norm_bias', 'norm_variance',
            'norm_total', 'adv_lower', 'adv_upper', 'adv_exact_gaussian', 'budget',
            'mc_mean', 'mc_se', 'mc_trials', 'grad_proxy', 'grad_proxy_se', 'grad_shift', 'grad_shift_se',
            'grad_baseline', 'grad_baseline_se', 'score',
        ],
        'bound': [
            'bound_regime', 'bound_srisk_upper', 'bound_srisk_lower', 'bound_norm_lower',
            'bound_adv_lower', 'bound_delta_lambda', 'bound_note',
        ],
        'ntk': ['m', 'kernel_emp_arc_err', 'kernel_arc_lin_err', 'fit_residual'],
        'meta': ['schema_version'],
    }

    SUMMARY_COLUMNS = ['scenario', 'n', 'min_score', 'argmin_lam', 'score_at_zero', 'replicates']

    @classmethod
    def columns(cls) -> List[str]:
        ordered: List[str] = []
        for group in cls.COLUMNS.values():
            ordered.extend(group)
        return ordered

    @classmethod
    def build(cls, row_type: str, data: Dict[str, Any]) -> Dict[str, Any]:
        """Full row with every documented column present"""
        if row_type == 'point':
            return cls._build_point(data)
        elif row_type == 'error':
            return cls._build_error(data)
        raise ValueError(f"unknown row type {row_type!r}")

    @classmethod
    def _build_point(cls, data: Dict[str, Any]) -> Dict[str, Any]:
        row = {name: None for name in cls.columns()}
        unknown = set(data) - set(row)
        if unknown:
            raise ValueError(f"columns outside the schema: {sorted(unknown)}")
        row.update(data)
        row['status'] = data.get('status', 'ok')
        row['schema_version'] = SCHEMA_VERSION
        return row

    @classmethod
    def _build_error(cls, data: Dict[str, Any]) -> Dict[str, Any]:
        keys = {k: data.get(k) for k in cls.COLUMNS['key']}
        keys['status'] = 'error'
        return cls._build_point(keys)

    @staticmethod
    def format_value(value: Any) -> str:
        if value is None:
            return ''
        if isinstance(value, bool):
            return 'true' if value else 'false'
        if isinstance(value, int):
            return str(value)
        if isinstance(value, float):
            return format(value, '.17g')
        try:
            return format(float(value), '.17g') if hasattr(value, 'dtype') else str(value)
        except (TypeError, ValueError):
            return str(value)

    @classmethod
    def render_csv(cls, rows: Iterable[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
        columns = columns or cls.columns()
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([cls.format_value(row.get(col)) for col in columns])
        return buffer.getvalue()

    @classmethod
    def _json_safe(cls, value: Any) -> Any:
        """Strict-JSON value: non-finite floats become null, containers are walked"""
        if isinstance(value, dict):
            return {k: cls._json_safe(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [cls._json_safe(v) for v in value]
        if hasattr(value, 'item') and hasattr(value, 'dtype'):
            value = value.item()
        if isinstance(value, float) and not math.isfinite(value):
            return None
        return value

    @classmethod
    def render_json(cls, table: ResultsTable, extra: Optional[Dict[str, Any]] = None) -> str:
        payload = {
            'schema_version': table.schema_version,
            'scenario': table.scenario,
            'columns': cls.columns(),
            'rows': [{k: cls._json_safe(v) for k, v in row.items()} for row in table.rows],
            'summary': cls._json_safe(table.summary),
        }
        if extra:
            payload.update(cls._json_safe(extra))
        return json.dumps(payload, indent=2, sort_keys=False, allow_nan=False, default=str)

    @classmethod
    def render_conditions(cls, reports: List[ConditionReport]) -> Dict[str, str]:
        text = "\n\n".join(report.render() for report in reports) + "\n"
        payload = {
            'schema_version': SCHEMA_VERSION,
            'conditions': [
                cls._json_safe(report.to_dict()) for report in reports
            ],
        }
        return {'text': text, 'json': json.dumps(payload, indent=2, allow_nan=False, default=str)}

    @staticmethod
    async def write_atomic(path: Union[str, Path], text: str) -> Path:
        """Write to a sibling temp file, then rename over the target"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
        try:
            async with aiofiles.open(tmp, 'w', encoding='utf-8', newline='') as f:
                await f.write(text)
            os.replace(tmp, path)
        except Exception:
            if tmp.exists():
                tmp.unlink()
            raise
        logger.info(f"💾 Wrote {path}")
        return path

    @classmethod
    async def write_table(cls, table: ResultsTable, output_path: Union[str, Path],
                          extra: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
        """CSV at output_path, JSON mirror next to it, summary CSV when present"""
        output_path = Path(output_path)
        written = {'csv': await cls.write_atomic(output_path, cls.render_csv(table.rows))}
        written['json'] = await cls.write_atomic(output_path.with_suffix('.json'), cls.render_json(table, extra))
        if table.summary is not None:
            summary_path = output_path.with_name(f"{output_path.stem}_summary.csv")
            written['summary'] = await cls.write_atomic(
                summary_path, cls.render_csv(table.summary, cls.SUMMARY_COLUMNS)
            )
        return written

    @classmethod
    async def write_conditions(cls, reports: List[ConditionReport], output_path: Union[str, Path]) -> Dict[str, Path]:
        rendered = cls.render_conditions(reports)
        output_path = Path(output_path)
        return {
            'text': await cls.write_atomic(output_path.with_suffix('.txt'), rendered['text']),
            'json': await cls.write_atomic(output_path.with_suffix('.json'), rendered['json']),
        }
