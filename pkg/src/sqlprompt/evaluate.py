"""Execution-accuracy scoring and paired significance testing.

A prediction counts as correct when running it on the example's
database yields the same result set as the gold query: compared in
order when the gold query orders its top-level result, as a multiset
otherwise. Cells match by type class: integers and reals compare
numerically (reals within relative tolerance), text compares exactly,
NULL only matches NULL.
"""

from __future__ import annotations

import logging
import math
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import GoldSqlError, MisalignedOutcomesError
from .normalize import has_top_level_order_by

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 30_000

REL_TOLERANCE = 1e-6

Row = tuple
Rows = tuple[Row, ...]


@dataclass(frozen=True)
class ExecutionResult:
    rows: Rows = ()
    error: str | None = None
    timed_out: bool = False
    elapsed_ms: int = 0

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class EvalOutcome:
    example_id: str
    match: bool
    reason: str  # exact | mismatch | pred_error | timeout


def execute_sql(
    db_file: str | Path, sql: str, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> ExecutionResult:
    """Run one statement read-only and capture rows or the failure.

    Execution failures (syntax errors, unknown tables, write attempts
    against the read-only connection) come back inside the result, not
    as exceptions; the caller decides what a failure means. A query
    exceeding ``timeout_ms`` is interrupted and flagged.
    """
    path = Path(db_file)
    if not path.is_file():
        raise FileNotFoundError(f"no such database file: {path}")
    deadline = time.monotonic() + timeout_ms / 1000.0
    started = time.monotonic()
    timed_out = False

    def check_deadline() -> int:
        nonlocal timed_out
        if time.monotonic() > deadline:
            timed_out = True
            return 1
        return 0

    try:
        conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
    except sqlite3.Error as exc:
        return ExecutionResult(error=str(exc))
    try:
        conn.set_progress_handler(check_deadline, 1000)
        cursor = conn.execute(sql)
        rows = tuple(tuple(row) for row in cursor.fetchall())
        elapsed = int((time.monotonic() - started) * 1000)
        return ExecutionResult(rows=rows, elapsed_ms=elapsed)
    except (sqlite3.Error, sqlite3.Warning) as exc:
        elapsed = int((time.monotonic() - started) * 1000)
        if timed_out:
            return ExecutionResult(
                error=f"timed out after {timeout_ms} ms", timed_out=True,
                elapsed_ms=elapsed,
            )
        return ExecutionResult(error=str(exc), elapsed_ms=elapsed)
    finally:
        conn.close()


def _cell_class(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "number"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, bytes):
        return "blob"
    return "text"


def cells_equal(a, b) -> bool:
    """Typed cell equality: numbers cross-compare (reals within relative
    tolerance), text and blobs compare exactly, NULL matches only NULL."""
    class_a, class_b = _cell_class(a), _cell_class(b)
    if class_a != class_b:
        return False
    if class_a == "null":
        return True
    if class_a == "number":
        if isinstance(a, int) and isinstance(b, int):
            return a == b
        return math.isclose(float(a), float(b), rel_tol=REL_TOLERANCE, abs_tol=1e-9)
    return a == b


def _row_sort_key(row: Row):
    key = []
    for value in row:
        cls = _cell_class(value)
        if cls == "null":
            key.append((0, ""))
        elif cls == "number":
            key.append((1, float(value)))
        elif cls == "text":
            key.append((2, value))
        else:
            key.append((3, value))
    return key


def rows_match(pred: Rows, gold: Rows, ordered: bool) -> bool:
    """Compare result sets row by row, sorted first unless ordered."""
    if len(pred) != len(gold):
        return False
    if pred and gold and len(pred[0]) != len(gold[0]):
        return False
    if not ordered:
        pred = tuple(sorted(pred, key=_row_sort_key))
        gold = tuple(sorted(gold, key=_row_sort_key))
    for row_p, row_g in zip(pred, gold):
        if len(row_p) != len(row_g):
            return False
        if not all(cells_equal(a, b) for a, b in zip(row_p, row_g)):
            return False
    return True


def execution_accuracy(
    pred_sql: str,
    gold_sql: str,
    db_file: str | Path,
    example_id: str = "",
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
) -> EvalOutcome:
    """Score one prediction against its gold query by execution.

    The gold query must run cleanly; a failing gold query is a broken
    benchmark record and raises GoldSqlError rather than silently
    scoring the prediction wrong.
    """
    gold = execute_sql(db_file, gold_sql, timeout_ms=timeout_ms)
    if gold.failed:
        raise GoldSqlError(
            f"gold query for example {example_id!r} failed on {db_file}: {gold.error}"
        )
    pred = execute_sql(db_file, pred_sql, timeout_ms=timeout_ms)
    if pred.failed:
        reason = "timeout" if pred.timed_out else "pred_error"
        return EvalOutcome(example_id=example_id, match=False, reason=reason)
    ordered = has_top_level_order_by(gold_sql)
    if rows_match(pred.rows, gold.rows, ordered=ordered):
        return EvalOutcome(example_id=example_id, match=True, reason="exact")
    return EvalOutcome(example_id=example_id, match=False, reason="mismatch")


def mcnemar_test(
    outcomes_a: Sequence[EvalOutcome], outcomes_b: Sequence[EvalOutcome]
) -> float:
    """Two-sided McNemar p-value for paired per-example outcomes.

    Only discordant pairs matter: b (A right, B wrong) and c (A wrong,
    B right). Small counts (b + c <= 25) use the exact binomial test;
    larger counts use the continuity-corrected chi-square approximation
    on one degree of freedom.
    """
    if len(outcomes_a) != len(outcomes_b):
        raise MisalignedOutcomesError(
            f"outcome lists differ in length: {len(outcomes_a)} vs {len(outcomes_b)}"
        )
    b = c = 0
    for out_a, out_b in zip(outcomes_a, outcomes_b):
        if out_a.example_id != out_b.example_id:
            raise MisalignedOutcomesError(
                f"outcome lists pair {out_a.example_id!r} with {out_b.example_id!r}"
            )
        if out_a.match and not out_b.match:
            b += 1
        elif out_b.match and not out_a.match:
            c += 1
    n = b + c
    if n == 0:
        return 1.0
    if n <= 25:
        tail = sum(math.comb(n, i) for i in range(min(b, c) + 1))
        return min(1.0, 2.0 * tail / 2.0**n)
    statistic = (abs(b - c) - 1) ** 2 / n
    return math.erfc(math.sqrt(statistic / 2.0))


def accuracy(outcomes: Sequence[EvalOutcome]) -> float:
    """Fraction of matching outcomes; empty input counts as zero."""
    if not outcomes:
        return 0.0
    return sum(1 for o in outcomes if o.match) / len(outcomes)
