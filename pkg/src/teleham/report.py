"""Report rows and deterministic CSV / JSON serialization.

Every check emits a ReportRow with pass == (residual <= tolerance).  Rows
that assert a convergence order store the measured order in the order
column and encode the order criterion as a residual:

* required order >= bar: residual = max(0, bar - order), tolerance = 0
* forbidden convergence (negative controls): residual = max(0, order - cap)

Rows converged below the rounding floor on every grid report order = inf.
Serialization uses repr round-tripping for floats, so identical inputs
give byte-identical reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

__all__ = ["ReportRow", "order_row_residual", "rows_to_csv", "rows_to_json", "summarize"]

CSV_COLUMNS = ("suite", "case", "seed", "grid", "residual", "tolerance", "order", "status")


@dataclass(frozen=True)
class ReportRow:
    suite: str
    case: str
    seed: int
    grid: str
    residual: float
    tolerance: float
    order: float | None = None

    def __post_init__(self):
        if not (self.residual >= 0.0):
            raise ValueError(f"residual must be nonnegative, got {self.residual}")

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def order_row_residual(order: float, bar: float, forbid: bool = False) -> float:
    """Shortfall against a required order, or excess against a forbidden one."""
    if forbid:
        return max(0.0, order - bar)
    if math.isinf(order):
        return 0.0
    return max(0.0, bar - order)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rows_to_csv(rows: list[ReportRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        status = "pass" if r.passed else "fail"
        lines.append(",".join([r.suite, r.case, str(r.seed), r.grid,
                               _fmt(r.residual), _fmt(r.tolerance), _fmt(r.order), status]))
    return "\n".join(lines) + "\n"


def summarize(rows: list[ReportRow]) -> dict:
    worst = max((r.residual for r in rows), default=0.0)
    return {
        "rows": len(rows),
        "passed": sum(1 for r in rows if r.passed),
        "failed": sum(1 for r in rows if not r.passed),
        "max_residual": worst,
    }


def rows_to_json(rows: list[ReportRow]) -> str:
    payload = {
        "summary": summarize(rows),
        "rows": [
            {
                "suite": r.suite,
                "case": r.case,
                "seed": r.seed,
                "grid": r.grid,
                "residual": r.residual,
                "tolerance": r.tolerance,
                "order": None if r.order is None or not math.isfinite(r.order) else r.order,
                "order_infinite": r.order is not None and math.isinf(r.order),
                "status": "pass" if r.passed else "fail",
            }
            for r in rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
