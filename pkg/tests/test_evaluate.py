"""Execution-accuracy and McNemar significance tests."""

from __future__ import annotations

import math
import sqlite3

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlprompt.errors import GoldSqlError, MisalignedOutcomesError
from sqlprompt.evaluate import (
    EvalOutcome,
    accuracy,
    cells_equal,
    execute_sql,
    execution_accuracy,
    mcnemar_test,
    rows_match,
)


@pytest.fixture(scope="module")
def people_db(tmp_path_factory):
    path = tmp_path_factory.mktemp("evaldb") / "people.sqlite"
    conn = sqlite3.connect(path)
    conn.execute("CREATE TABLE people(id int, name text, age real)")
    conn.executemany(
        "INSERT INTO people VALUES (?, ?, ?)",
        [(1, "Alice", 30.0), (2, "Bob", 25.5), (3, "Cara", 25.5)],
    )
    conn.commit()
    conn.close()
    return path


# -- execute_sql --------------------------------------------------------------


def test_execute_returns_rows(people_db):
    result = execute_sql(people_db, "SELECT id, name FROM people ORDER BY id")
    assert not result.failed
    assert result.rows == ((1, "Alice"), (2, "Bob"), (3, "Cara"))


def test_execute_captures_errors(people_db):
    result = execute_sql(people_db, "SELEC broken")
    assert result.failed
    assert "syntax" in result.error
    assert result.rows == ()


def test_execute_rejects_writes(people_db):
    result = execute_sql(people_db, "INSERT INTO people VALUES (9, 'X', 1.0)")
    assert result.failed
    with sqlite3.connect(people_db) as conn:
        count = conn.execute("SELECT count(*) FROM people").fetchone()[0]
    assert count == 3


def test_execute_times_out(people_db):
    result = execute_sql(
        people_db,
        "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
        "SELECT count(*) FROM c",
        timeout_ms=100,
    )
    assert result.failed
    assert result.timed_out
    assert "timed out" in result.error


def test_execute_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        execute_sql(tmp_path / "absent.sqlite", "SELECT 1")


# -- cell and row comparison --------------------------------------------------


def test_cells_numeric_class_cross_compares():
    assert cells_equal(5, 5.0)
    assert cells_equal(2.5, 2.5)
    assert cells_equal(1.0, 1.0 + 1e-9)
    assert not cells_equal(1.0, 1.001)
    assert cells_equal(0, 0.0)


def test_cells_class_boundaries():
    assert not cells_equal(3, "3")
    assert not cells_equal(None, 0)
    assert not cells_equal(None, "")
    assert cells_equal(None, None)
    assert cells_equal("Kyle", "Kyle")
    assert not cells_equal("Kyle", "kyle")
    assert cells_equal(b"ab", b"ab")
    assert not cells_equal(b"ab", "ab")


def test_rows_match_multiset():
    pred = ((2, "Bob"), (1, "Alice"))
    gold = ((1, "Alice"), (2, "Bob"))
    assert rows_match(pred, gold, ordered=False)
    assert not rows_match(pred, gold, ordered=True)


def test_rows_match_duplicates_are_counted():
    assert not rows_match(((1,), (1,), (2,)), ((1,), (2,), (2,)), ordered=False)
    assert rows_match(((1,), (1,)), ((1,), (1,)), ordered=False)


def test_rows_match_shape_mismatches():
    assert not rows_match(((1,),), ((1,), (2,)), ordered=False)
    assert not rows_match(((1, 2),), ((1,),), ordered=False)
    assert rows_match((), (), ordered=False)
    assert rows_match((), (), ordered=True)


def test_rows_match_mixed_types_sort_safely():
    pred = ((None,), ("a",), (1,))
    gold = ((1,), (None,), ("a",))
    assert rows_match(pred, gold, ordered=False)


def test_rows_match_numeric_tolerance_in_rows():
    assert rows_match(((1, 2.0000000001),), ((1, 2.0),), ordered=True)


# -- execution_accuracy -------------------------------------------------------


def test_semantically_equal_queries_match(people_db):
    outcome = execution_accuracy(
        "select count(id) from people;",
        "SELECT COUNT(*) FROM people",
        people_db,
        example_id="e1",
    )
    assert outcome.match
    assert outcome.reason == "exact"
    assert outcome.example_id == "e1"


def test_row_order_ignored_without_order_by(people_db):
    outcome = execution_accuracy(
        "SELECT name FROM people ORDER BY name DESC;",
        "SELECT name FROM people",
        people_db,
    )
    assert outcome.match


def test_row_order_enforced_with_order_by(people_db):
    outcome = execution_accuracy(
        "SELECT name FROM people ORDER BY id ASC;",
        "SELECT name FROM people ORDER BY id DESC",
        people_db,
    )
    assert not outcome.match
    assert outcome.reason == "mismatch"


def test_order_by_in_subquery_does_not_force_order(people_db):
    outcome = execution_accuracy(
        "SELECT name FROM people ORDER BY name DESC;",
        "SELECT name FROM (SELECT name FROM people ORDER BY name ASC)",
        people_db,
    )
    assert outcome.match


def test_prediction_error_reason(people_db):
    outcome = execution_accuracy(
        "SELEC name FROM people;", "SELECT name FROM people", people_db
    )
    assert not outcome.match
    assert outcome.reason == "pred_error"


def test_prediction_timeout_reason(people_db):
    outcome = execution_accuracy(
        "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) "
        "SELECT count(*) FROM c;",
        "SELECT count(*) FROM people",
        people_db,
        timeout_ms=100,
    )
    assert not outcome.match
    assert outcome.reason == "timeout"


def test_broken_gold_raises(people_db):
    with pytest.raises(GoldSqlError):
        execution_accuracy(
            "SELECT 1;", "SELECT missing_column FROM people", people_db, example_id="e9"
        )


def test_column_count_mismatch_is_wrong(people_db):
    outcome = execution_accuracy(
        "SELECT id, name FROM people;", "SELECT id FROM people", people_db
    )
    assert not outcome.match


# -- McNemar ------------------------------------------------------------------


def outcomes_from(flags):
    return [
        EvalOutcome(example_id=f"e{i}", match=bool(flag), reason="exact" if flag else "mismatch")
        for i, flag in enumerate(flags)
    ]


def paired(b: int, c: int, both_right: int = 10, both_wrong: int = 10):
    flags_a = [1] * b + [0] * c + [1] * both_right + [0] * both_wrong
    flags_b = [0] * b + [1] * c + [1] * both_right + [0] * both_wrong
    return outcomes_from(flags_a), outcomes_from(flags_b)


def test_mcnemar_exact_binomial_oracle():
    a, b = paired(15, 5)
    # 2 * sum_{i<=5} C(20, i) / 2^20 = 2 * 21700 / 1048576
    assert mcnemar_test(a, b) == pytest.approx(43400 / 1048576, rel=1e-12)


def test_mcnemar_small_count_oracles():
    a, b = paired(1, 0)
    assert mcnemar_test(a, b) == 1.0
    a, b = paired(2, 0)
    assert mcnemar_test(a, b) == pytest.approx(0.5, rel=1e-12)
    a, b = paired(5, 1)
    # 2 * (C(6,0) + C(6,1)) / 2^6 = 14/64
    assert mcnemar_test(a, b) == pytest.approx(14 / 64, rel=1e-12)


def test_mcnemar_no_discordance_is_one():
    a, b = paired(0, 0)
    assert mcnemar_test(a, b) == 1.0


def test_mcnemar_balanced_discordance_is_one():
    a, b = paired(10, 10)
    assert mcnemar_test(a, b) == 1.0


def test_mcnemar_chi_square_branch():
    a, b = paired(40, 10)
    expected = math.erfc(math.sqrt(((40 - 10 - 1) ** 2 / 50) / 2.0))
    assert mcnemar_test(a, b) == pytest.approx(expected, rel=1e-12)


def test_mcnemar_chi_square_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    a, b = paired(40, 10)
    statistic = (abs(40 - 10) - 1) ** 2 / 50
    assert mcnemar_test(a, b) == pytest.approx(
        float(scipy_stats.chi2.sf(statistic, df=1)), rel=1e-9
    )


def test_mcnemar_symmetry():
    a, b = paired(15, 5)
    assert mcnemar_test(a, b) == mcnemar_test(b, a)


def test_mcnemar_rejects_misaligned_lengths():
    a, b = paired(2, 2)
    with pytest.raises(MisalignedOutcomesError):
        mcnemar_test(a, b[:-1])


def test_mcnemar_rejects_misaligned_ids():
    a, b = paired(2, 2)
    shuffled = list(reversed(b))
    with pytest.raises(MisalignedOutcomesError):
        mcnemar_test(a, shuffled)


@settings(max_examples=120, deadline=None)
@given(
    b=st.integers(min_value=0, max_value=60),
    c=st.integers(min_value=0, max_value=60),
)
def test_mcnemar_properties(b, c):
    out_a, out_b = paired(b, c, both_right=3, both_wrong=3)
    p = mcnemar_test(out_a, out_b)
    assert 0.0 <= p <= 1.0
    assert p == mcnemar_test(out_b, out_a)
    if b == c and b + c <= 25:
        # The exact branch always reaches the cap for balanced counts; the
        # chi-square branch keeps its continuity correction of 1 even at
        # b == c, so it lands just under 1 there.
        assert p == 1.0
    elif b == c:
        assert p > 0.5


# -- accuracy -----------------------------------------------------------------


def test_accuracy():
    assert accuracy(outcomes_from([1, 1, 0, 1])) == 0.75
    assert accuracy(outcomes_from([])) == 0.0
    assert accuracy(outcomes_from([1])) == 1.0
