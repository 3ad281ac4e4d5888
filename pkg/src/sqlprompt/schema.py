"""SQLite schema introspection and content sampling.

Reads table structure and representative rows from a database file into
plain dataclasses that the prompt builder can serialize. All reads open
the file read-only, and row order follows the engine's natural scan
order, so repeated calls over an unchanged file give identical output.
"""

from __future__ import annotations

import logging
import sqlite3
from dataclasses import dataclass
from pathlib import Path

from .errors import NotADatabaseError, UnknownColumnError, UnknownTableError

logger = logging.getLogger(__name__)

# Cell values as sqlite3 hands them back: NULL, INTEGER, REAL, or TEXT.
CellValue = int | float | str | None


@dataclass(frozen=True)
class ColumnDef:
    name: str
    declared_type: str
    ordinal: int


@dataclass(frozen=True)
class ForeignKeyDef:
    from_table: str
    from_columns: tuple[str, ...]
    to_table: str
    to_columns: tuple[str, ...]


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[ColumnDef, ...]
    primary_key: tuple[str, ...] = ()
    foreign_keys: tuple[ForeignKeyDef, ...] = ()
    # Verbatim CREATE TABLE text from the database catalog, when the
    # table came from a real file. Serialization prefers this so that
    # the author's own constraint spelling survives.
    create_sql: str | None = None

    def __post_init__(self) -> None:
        if not self.columns:
            raise ValueError(f"table {self.name!r} has no columns")
        names = [c.name.lower() for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"table {self.name!r} has duplicate column names")
        for idx, col in enumerate(self.columns):
            if col.ordinal != idx:
                raise ValueError(
                    f"table {self.name!r}: column {col.name!r} ordinal "
                    f"{col.ordinal} does not match position {idx}"
                )
        known = set(names)
        for pk in self.primary_key:
            if pk.lower() not in known:
                raise ValueError(
                    f"table {self.name!r}: primary key column {pk!r} is unknown"
                )

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnDef:
        wanted = name.lower()
        for col in self.columns:
            if col.name.lower() == wanted:
                return col
        raise UnknownColumnError(f"no column {name!r} in table {self.name!r}")


@dataclass(frozen=True)
class DatabaseSchema:
    db_id: str
    tables: tuple[TableSchema, ...]

    def __post_init__(self) -> None:
        names = [t.name.lower() for t in self.tables]
        if len(set(names)) != len(names):
            raise ValueError(f"database {self.db_id!r} has duplicate table names")
        by_name = {t.name.lower(): t for t in self.tables}
        for table in self.tables:
            for fk in table.foreign_keys:
                target = by_name.get(fk.to_table.lower())
                if target is None:
                    raise ValueError(
                        f"table {table.name!r}: foreign key references unknown "
                        f"table {fk.to_table!r}"
                    )
                for col in fk.to_columns:
                    target.column(col)
                for col in fk.from_columns:
                    table.column(col)

    @property
    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def table(self, name: str) -> TableSchema:
        wanted = name.lower()
        for table in self.tables:
            if table.name.lower() == wanted:
                return table
        raise UnknownTableError(f"no table {name!r} in database {self.db_id!r}")


@dataclass(frozen=True)
class ContentSample:
    """Representative content for one table.

    ``rows`` holds up to R leading rows in natural scan order.
    ``distinct_values`` holds, per column (aligned with the table's
    column order), up to R distinct values in order of first occurrence.
    """

    rows: tuple[tuple[CellValue, ...], ...] = ()
    distinct_values: tuple[tuple[CellValue, ...], ...] = ()


def _connect_readonly(db_file: str | Path) -> sqlite3.Connection:
    path = Path(db_file)
    if not path.is_file():
        raise FileNotFoundError(f"no such database file: {path}")
    try:
        conn = sqlite3.connect(f"file:{path}?mode=ro", uri=True)
        conn.execute("SELECT 1 FROM sqlite_master LIMIT 1")
    except sqlite3.DatabaseError as exc:
        raise NotADatabaseError(f"{path} is not a SQLite database: {exc}") from exc
    return conn


def _quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _table_columns(conn: sqlite3.Connection, table: str) -> tuple[list[ColumnDef], tuple[str, ...]]:
    rows = conn.execute(f"PRAGMA table_info({_quote_ident(table)})").fetchall()
    columns = []
    pk_cols: list[tuple[int, str]] = []
    for cid, name, decl_type, _notnull, _default, pk in rows:
        columns.append(ColumnDef(name=name, declared_type=(decl_type or "").lower(), ordinal=cid))
        if pk:
            pk_cols.append((pk, name))
    pk_cols.sort()
    return columns, tuple(name for _order, name in pk_cols)


def _table_foreign_keys(conn: sqlite3.Connection, table: str) -> list[ForeignKeyDef]:
    # PRAGMA foreign_key_list reports constraints in reverse declaration
    # order, with multi-column constraints sharing an id and ordered by
    # seq. Sort to recover declaration order.
    rows = conn.execute(f"PRAGMA foreign_key_list({_quote_ident(table)})").fetchall()
    grouped: dict[int, list[tuple]] = {}
    for row in rows:
        fk_id, seq, target, from_col, to_col = row[0], row[1], row[2], row[3], row[4]
        grouped.setdefault(fk_id, []).append((seq, target, from_col, to_col))
    defs = []
    for fk_id in sorted(grouped, reverse=True):
        parts = sorted(grouped[fk_id])
        defs.append(
            ForeignKeyDef(
                from_table=table,
                from_columns=tuple(p[2] for p in parts),
                to_table=parts[0][1],
                to_columns=tuple(p[3] for p in parts if p[3] is not None),
            )
        )
    return defs


def introspect_schema(db_file: str | Path) -> DatabaseSchema:
    """Read the full schema of a SQLite file.

    Tables come back in creation order (the order of their rows in
    sqlite_master); internal ``sqlite_*`` tables, views, and indexes are
    skipped. Foreign keys whose target no longer exists are dropped with
    a warning rather than invalidating the whole schema.
    """
    path = Path(db_file)
    conn = _connect_readonly(path)
    try:
        table_rows = conn.execute(
            "SELECT name, sql FROM sqlite_master "
            "WHERE type = 'table' AND name NOT LIKE 'sqlite_%'"
        ).fetchall()
        tables = []
        names = {name.lower() for name, _sql in table_rows}
        columns_by_table: dict[str, set[str]] = {}
        for name, _sql in table_rows:
            cols, _pk = _table_columns(conn, name)
            columns_by_table[name.lower()] = {c.name.lower() for c in cols}
        for name, sql in table_rows:
            columns, pk = _table_columns(conn, name)
            fks = []
            for fk in _table_foreign_keys(conn, name):
                target_cols = columns_by_table.get(fk.to_table.lower())
                if fk.to_table.lower() not in names or target_cols is None or any(
                    c.lower() not in target_cols for c in fk.to_columns
                ):
                    logger.warning(
                        "dropping foreign key %s -> %s in %s: target missing",
                        name, fk.to_table, path.name,
                    )
                    continue
                fks.append(fk)
            tables.append(
                TableSchema(
                    name=name,
                    columns=tuple(columns),
                    primary_key=pk,
                    foreign_keys=tuple(fks),
                    create_sql=sql,
                )
            )
    finally:
        conn.close()
    return DatabaseSchema(db_id=path.stem, tables=tuple(tables))


def sample_rows(db_file: str | Path, table: str, r: int) -> tuple[tuple[CellValue, ...], ...]:
    """First ``r`` rows of ``table`` in natural scan order.

    A table with fewer than ``r`` rows yields all of them.
    """
    if r < 0:
        raise ValueError("row count must be non-negative")
    conn = _connect_readonly(db_file)
    try:
        try:
            rows = conn.execute(
                f"SELECT * FROM {_quote_ident(table)} LIMIT ?", (r,)
            ).fetchall()
        except sqlite3.OperationalError as exc:
            raise UnknownTableError(f"no table {table!r} in {db_file}") from exc
        return tuple(tuple(row) for row in rows)
    finally:
        conn.close()


def sample_distinct_values(
    db_file: str | Path, table: str, column: str, r: int
) -> tuple[CellValue, ...]:
    """Up to ``r`` distinct values of one column, in order of first
    occurrence over the natural scan order."""
    if r < 0:
        raise ValueError("row count must be non-negative")
    if r == 0:
        return ()
    conn = _connect_readonly(db_file)
    try:
        info = conn.execute(f"PRAGMA table_info({_quote_ident(table)})").fetchall()
        if not info:
            raise UnknownTableError(f"no table {table!r} in {db_file}")
        ordinals = {row[1].lower(): index for index, row in enumerate(info)}
        if column.lower() not in ordinals:
            raise UnknownColumnError(
                f"no column {column!r} in table {table!r} of {db_file}"
            )
        # Scan whole rows rather than the bare column: selecting a single
        # indexed column lets SQLite walk the index instead, which would
        # reorder values and break first-occurrence sampling.
        ordinal = ordinals[column.lower()]
        cursor = conn.execute(f"SELECT * FROM {_quote_ident(table)}")
        seen: list[CellValue] = []
        seen_keys = set()
        for row in cursor:
            value = row[ordinal]
            key = (type(value).__name__, value)
            if key in seen_keys:
                continue
            seen_keys.add(key)
            seen.append(value)
            if len(seen) >= r:
                break
        return tuple(seen)
    finally:
        conn.close()


def sample_content(db_file: str | Path, schema: DatabaseSchema, r: int) -> dict[str, ContentSample]:
    """Collect a ContentSample for every table in the schema, keyed by
    table name."""
    samples: dict[str, ContentSample] = {}
    for table in schema.tables:
        rows = sample_rows(db_file, table.name, r)
        distinct = tuple(
            sample_distinct_values(db_file, table.name, col.name, r)
            for col in table.columns
        )
        samples[table.name] = ContentSample(rows=rows, distinct_values=distinct)
    return samples
