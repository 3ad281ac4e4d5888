"""Prompt construction for text-to-SQL experiments.

A prompt is built from up to three ingredients: a database prompt
(schema serialization, optionally interleaved with table content), an
instruction line, and question/answer blocks. Three settings are
supported:

* zero-shot: test database, instruction, test question.
* single-domain: demonstrations from the test database sit between the
  instruction and the test question.
* cross-domain: complete demonstration blocks (database, instruction,
  question/answer pairs) from other databases precede the zero-shot
  block for the test database.

Every byte of the output is deliberate; tests pin full prompts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

from .errors import EmptySchemaError, SampleMismatchError, SettingMismatchError
from .normalize import normalize_ddl, normalize_sql
from .schema import (
    CellValue,
    ContentSample,
    DatabaseSchema,
    TableSchema,
    introspect_schema,
    sample_content,
)

INSTRUCTION_LINE = (
    "-- Using valid SQLite, answer the following questions for the tables "
    "provided above."
)

# Separates cells inside comment-style content blocks.
CELL_SEPARATOR = "    "

DEFAULT_CONTENT_ROWS = 3


class SchemaFormat(Enum):
    TABLE_COLUMNS = "table-columns"
    COLUMNS_EQ = "columns-eq"
    COLUMNS_EQ_FK = "columns-eq-fk"
    CREATE_TABLE = "create-table"


class ContentStyle(Enum):
    NONE = "none"
    INSERT_ROW = "insert-row"
    SELECT_ROW = "select-row"
    SELECT_COL = "select-col"


class NormalizationMode(Enum):
    UNNORMALIZED = "unnormalized"
    NORMALIZED = "normalized"


class Setting(Enum):
    ZERO_SHOT = "zero-shot"
    SINGLE_DOMAIN = "single-domain"
    CROSS_DOMAIN = "cross-domain"


@dataclass(frozen=True)
class ContentFormat:
    style: ContentStyle = ContentStyle.NONE
    rows: int = DEFAULT_CONTENT_ROWS

    def __post_init__(self) -> None:
        if self.rows < 1:
            raise ValueError("content row count must be at least 1")

    @property
    def wants_content(self) -> bool:
        return self.style is not ContentStyle.NONE

    @classmethod
    def none(cls) -> "ContentFormat":
        return cls(ContentStyle.NONE)

    def label(self) -> str:
        if self.style is ContentStyle.NONE:
            return "none"
        return f"{self.style.value}:{self.rows}"


@dataclass(frozen=True)
class PromptSpec:
    """Which prompt construction to build."""

    schema_format: SchemaFormat = SchemaFormat.CREATE_TABLE
    content_format: ContentFormat = field(default_factory=ContentFormat.none)
    mode: NormalizationMode = NormalizationMode.NORMALIZED
    setting: Setting = Setting.ZERO_SHOT

    def __post_init__(self) -> None:
        if (
            self.content_format.wants_content
            and self.schema_format is not SchemaFormat.CREATE_TABLE
        ):
            raise ValueError(
                "content serialization requires the create-table schema format"
            )


@dataclass(frozen=True)
class PromptSection:
    label: str  # demo_database | demo_examples | test_database | instruction | question
    start: int
    end: int


@dataclass(frozen=True)
class PromptText:
    """Final prompt plus a section map that tiles the text.

    Joining ``text[start:end]`` over the sections in order reproduces
    ``text`` exactly; separator newlines belong to the preceding
    section.
    """

    text: str
    sections: tuple[PromptSection, ...]

    def section_texts(self, label: str) -> list[str]:
        return [self.text[s.start : s.end] for s in self.sections if s.label == label]


@dataclass(frozen=True)
class DatabaseContext:
    """A schema bundled with the content samples needed to prompt it."""

    schema: DatabaseSchema
    content: Mapping[str, ContentSample] | None = None

    def sample_for(self, table: TableSchema) -> ContentSample:
        if self.content is None or table.name not in self.content:
            raise SampleMismatchError(
                f"no content sample for table {table.name!r} in database "
                f"{self.schema.db_id!r}"
            )
        return self.content[table.name]


def load_database_context(
    db_file: str | Path, rows: int = DEFAULT_CONTENT_ROWS
) -> DatabaseContext:
    """Introspect a database file and sample content for prompting."""
    schema = introspect_schema(db_file)
    return DatabaseContext(schema=schema, content=sample_content(db_file, schema, rows))


# -- value rendering ---------------------------------------------------------


def render_cell(value: CellValue, quote_text: bool) -> str:
    """Render one database value for a content block.

    Text is double-quoted where ``quote_text`` is set and left bare
    otherwise; content is never case-folded. NULL renders as the bare
    word NULL.
    """
    if value is None:
        return "NULL"
    if isinstance(value, bytes):  # defensive: BLOB columns in user data
        value = value.decode("utf-8", "replace")
    if isinstance(value, str):
        if quote_text:
            return '"' + value.replace('"', '""') + '"'
        return value
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- schema serialization ----------------------------------------------------


def _synthesize_create_table(table: TableSchema) -> str:
    lines = []
    for col in table.columns:
        decl = f"{col.name} {col.declared_type}".rstrip()
        lines.append(decl)
    if table.primary_key:
        lines.append(f"primary key ({', '.join(table.primary_key)})")
    for fk in table.foreign_keys:
        lines.append(
            f"foreign key ({', '.join(fk.from_columns)}) references "
            f"{fk.to_table}({', '.join(fk.to_columns)})"
        )
    body = ",\n".join(lines)
    return f"CREATE TABLE {table.name} (\n{body}\n)"


def _create_table_block(table: TableSchema, mode: NormalizationMode) -> str:
    raw = table.create_sql or _synthesize_create_table(table)
    if mode is NormalizationMode.NORMALIZED:
        return normalize_ddl(raw)
    return raw.rstrip().rstrip(";") + ";"


def _linear_lines(schema: DatabaseSchema, fmt: SchemaFormat) -> list[str]:
    lines = []
    for table in schema.tables:
        cols = ", ".join(table.column_names)
        if fmt is SchemaFormat.TABLE_COLUMNS:
            lines.append(f"{table.name}({cols});")
        else:
            lines.append(f"Table {table.name}, Columns = [{cols}];")
    if fmt is SchemaFormat.COLUMNS_EQ_FK:
        pairs = []
        for table in schema.tables:
            for fk in table.foreign_keys:
                for from_col, to_col in zip(fk.from_columns, fk.to_columns):
                    pairs.append(f"{table.name}.{from_col} = {fk.to_table}.{to_col}")
        lines.append(f"Foreign_keys = [{', '.join(pairs)}];")
    return lines


def serialize_schema(
    schema: DatabaseSchema, fmt: SchemaFormat, mode: NormalizationMode
) -> str:
    """Serialize a database schema without content."""
    if not schema.tables:
        raise EmptySchemaError(f"database {schema.db_id!r} has no tables")
    if fmt is SchemaFormat.CREATE_TABLE:
        return "\n\n".join(_create_table_block(t, mode) for t in schema.tables)
    text = "\n".join(_linear_lines(schema, fmt))
    # Linear formats carry no string literals, so normalization is a
    # straight case fold.
    return text.lower() if mode is NormalizationMode.NORMALIZED else text


# -- content serialization ---------------------------------------------------


def _check_sample(table: TableSchema, sample: ContentSample, style: ContentStyle) -> None:
    ncols = len(table.columns)
    for row in sample.rows:
        if len(row) != ncols:
            raise SampleMismatchError(
                f"table {table.name!r} has {ncols} columns but a sampled row "
                f"has {len(row)} cells"
            )
    if style is ContentStyle.SELECT_COL and len(sample.distinct_values) != ncols:
        raise SampleMismatchError(
            f"table {table.name!r} has {ncols} columns but distinct values "
            f"were sampled for {len(sample.distinct_values)}"
        )


def serialize_content(
    table: TableSchema,
    sample: ContentSample,
    fmt: ContentFormat,
    mode: NormalizationMode,
) -> str:
    """Serialize sampled content for one table."""
    if not fmt.wants_content:
        raise ValueError("content format 'none' has nothing to serialize")
    _check_sample(table, sample, fmt.style)
    normalized = mode is NormalizationMode.NORMALIZED
    table_name = table.name.lower() if normalized else table.name
    col_names = [c.lower() for c in table.column_names] if normalized else list(table.column_names)
    rows = sample.rows[: fmt.rows]

    if fmt.style is ContentStyle.INSERT_ROW:
        kw_insert = "insert into" if normalized else "INSERT INTO"
        kw_values = "values" if normalized else "VALUES"
        lines = []
        for row in rows:
            values = ", ".join(render_cell(v, quote_text=True) for v in row)
            lines.append(
                f"{kw_insert} {table_name} ({', '.join(col_names)}) "
                f"{kw_values} ({values});"
            )
        return "\n".join(lines)

    if fmt.style is ContentStyle.SELECT_ROW:
        if normalized:
            stmt = f"select * from {table_name} limit {fmt.rows};"
        else:
            stmt = f"SELECT * FROM {table_name} LIMIT {fmt.rows};"
        lines = ["/*", f"{fmt.rows} example rows:", stmt, CELL_SEPARATOR.join(col_names)]
        for row in rows:
            lines.append(CELL_SEPARATOR.join(render_cell(v, quote_text=False) for v in row))
        lines.append("*/")
        return "\n".join(lines)

    # SELECT_COL
    if normalized:
        header = f"columns in {table_name} and {fmt.rows} distinct examples in each column:"
    else:
        header = f"Columns in {table_name} and {fmt.rows} distinct examples in each column:"
    lines = ["/*", header]
    for name, values in zip(col_names, sample.distinct_values):
        rendered = ", ".join(render_cell(v, quote_text=True) for v in values[: fmt.rows])
        lines.append(f"{name}: {rendered}")
    lines.append("*/")
    return "\n".join(lines)


# -- database prompt and full assembly ---------------------------------------


def database_prompt(context: DatabaseContext, spec: PromptSpec) -> str:
    """Schema (and optionally content) serialization for one database."""
    schema = context.schema
    if not spec.content_format.wants_content:
        return serialize_schema(schema, spec.schema_format, spec.mode)
    if not schema.tables:
        raise EmptySchemaError(f"database {schema.db_id!r} has no tables")
    blocks = []
    for table in schema.tables:
        schema_block = _create_table_block(table, spec.mode)
        content_block = serialize_content(
            table, context.sample_for(table), spec.content_format, spec.mode
        )
        blocks.append(f"{schema_block}\n{content_block}")
    return "\n\n".join(blocks)


def completion_cue(mode: NormalizationMode) -> str:
    return "select" if mode is NormalizationMode.NORMALIZED else "SELECT"


class _SectionWriter:
    def __init__(self) -> None:
        self._parts: list[str] = []
        self._sections: list[list] = []
        self._length = 0

    def block(self, label: str, text: str) -> None:
        self._parts.append(text)
        self._sections.append([label, self._length, self._length + len(text)])
        self._length += len(text)

    def glue(self, text: str) -> None:
        # Separator text belongs to the preceding section.
        self._parts.append(text)
        self._sections[-1][2] += len(text)
        self._length += len(text)

    def finish(self) -> PromptText:
        return PromptText(
            text="".join(self._parts),
            sections=tuple(PromptSection(*s) for s in self._sections),
        )


def _pairs_block(examples, schema: DatabaseSchema) -> str:
    pairs = []
    for example in examples:
        sql = normalize_sql(example.sql, schema)
        pairs.append(f"Question: {example.nlq}\n{sql}")
    return "\n".join(pairs)


def assemble_prompt(
    spec: PromptSpec,
    test_db: DatabaseContext,
    test_nlq: str,
    demonstrations=None,
    demo_databases: Mapping[str, DatabaseContext] | None = None,
) -> PromptText:
    """Assemble the full prompt for one test question.

    ``demonstrations`` is a DemonstrationSet (or None for zero-shot).
    Cross-domain assembly needs ``demo_databases`` keyed by db_id, one
    per demonstration group. Demonstration SQL is always rendered in
    normalized form; the completion cue follows the spec's mode.
    """
    setting = spec.setting
    total = 0 if demonstrations is None else demonstrations.total
    if setting is Setting.ZERO_SHOT and total:
        raise SettingMismatchError("zero-shot prompts take no demonstrations")

    writer = _SectionWriter()

    if setting is Setting.CROSS_DOMAIN and demonstrations is not None:
        for group in demonstrations.groups:
            if group.db_id == test_db.schema.db_id:
                raise SettingMismatchError(
                    "cross-domain demonstrations must come from databases other "
                    f"than the test database {group.db_id!r}"
                )
            if demo_databases is None or group.db_id not in demo_databases:
                raise SettingMismatchError(
                    f"no database context for demonstration database {group.db_id!r}"
                )
            demo_ctx = demo_databases[group.db_id]
            writer.block("demo_database", database_prompt(demo_ctx, spec))
            writer.glue("\n\n")
            writer.block("instruction", INSTRUCTION_LINE)
            writer.glue("\n\n")
            writer.block("demo_examples", _pairs_block(group.examples, demo_ctx.schema))
            writer.glue("\n\n")

    writer.block("test_database", database_prompt(test_db, spec))
    writer.glue("\n\n")
    writer.block("instruction", INSTRUCTION_LINE)
    writer.glue("\n\n")

    if setting is Setting.SINGLE_DOMAIN and demonstrations is not None and total:
        test_id = test_db.schema.db_id
        for group in demonstrations.groups:
            if group.db_id != test_id:
                raise SettingMismatchError(
                    f"single-domain demonstrations must come from {test_id!r}, "
                    f"got {group.db_id!r}"
                )
        examples = [e for g in demonstrations.groups for e in g.examples]
        writer.block("demo_examples", _pairs_block(examples, test_db.schema))
        writer.glue("\n")
    elif setting is Setting.CROSS_DOMAIN:
        pass
    elif total:
        raise SettingMismatchError(f"unexpected demonstrations for {setting.value}")

    writer.block("question", f"Question: {test_nlq}\n{completion_cue(spec.mode)}")
    return writer.finish()
