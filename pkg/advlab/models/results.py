"""
advlab - Results table
Rows keyed by (scenario, n, λ, replicate) plus the per-n trade-off summary
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

SCHEMA_VERSION = 1


def row_key(row: Dict[str, Any]):
    lam = row.get("lam")
    return (
        str(row.get("scenario")),
        int(row.get("n") or 0),
        float("-inf") if lam is None else float(lam),
        int(row.get("replicate") or 0),
    )


@dataclass
class ResultsTable:
    scenario: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    summary: Optional[List[Dict[str, Any]]] = None
    schema_version: int = SCHEMA_VERSION

    def sort(self) -> "ResultsTable":
        self.rows.sort(key=row_key)
        return self

    @property
    def error_rows(self) -> List[Dict[str, Any]]:
        return [row for row in self.rows if row.get("status") != "ok"]

    @property
    def has_errors(self) -> bool:
        return bool(self.error_rows)

    def column(self, name: str, **match: Any) -> List[Any]:
        """Values of one column over the rows whose fields equal ``match``"""
        return [row.get(name) for row in self.rows
                if all(row.get(k) == v for k, v in match.items())]
