"""Prompt serialization and assembly tests.

The serialization constants here are frozen expected outputs; the tests
assert byte equality against them rather than re-deriving the format.
"""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlprompt.demo_dbs import BOOK_DB_ID, NETWORK_DB_ID, RACE_DB_ID
from sqlprompt.errors import EmptySchemaError, SampleMismatchError, SettingMismatchError
from sqlprompt.prompts import (
    CELL_SEPARATOR,
    INSTRUCTION_LINE,
    ContentFormat,
    ContentStyle,
    DatabaseContext,
    NormalizationMode,
    PromptSpec,
    SchemaFormat,
    Setting,
    assemble_prompt,
    completion_cue,
    database_prompt,
    render_cell,
    serialize_content,
    serialize_schema,
)
from sqlprompt.sampling import DemonstrationGroup, DemonstrationSet, Example
from sqlprompt.schema import ColumnDef, ContentSample, DatabaseSchema, TableSchema
from sqlprompt.tokenizers import count_tokens, get_tokenizer, register_tokenizer
from sqlprompt.errors import UnknownTokenizerError

RAW = NormalizationMode.UNNORMALIZED
NORM = NormalizationMode.NORMALIZED


TABLE_COLUMNS_TEXT = """\
Highschooler(ID, name, grade);
Friend(student_id, friend_id);"""

COLUMNS_EQ_TEXT = """\
Table Highschooler, Columns = [ID, name, grade];
Table Friend, Columns = [student_id, friend_id];"""

FOREIGN_KEY_LINE = (
    "Foreign_keys = [Friend.student_id = Highschooler.ID, "
    "Friend.friend_id = Highschooler.ID];"
)

CREATE_TABLE_TEXT = """\
CREATE TABLE Highschooler (
ID int primary key,
name text,
grade int
);

CREATE TABLE Friend (
student_id int,
friend_id int,
primary key (student_id,friend_id),
foreign key(student_id) references Highschooler(ID),
foreign key (friend_id) references Highschooler(ID)
);"""

INSERT_ROW_TEXT = """\
INSERT INTO Highschooler (ID, name, grade) VALUES (1510, "Jordan", 9);
INSERT INTO Highschooler (ID, name, grade) VALUES (1689, "Gabriel", 9);
INSERT INTO Highschooler (ID, name, grade) VALUES (1381, "Tiffany", 9);"""

SELECT_ROW_TEXT = """\
/*
3 example rows:
SELECT * FROM Highschooler LIMIT 3;
ID    name    grade
1510    Jordan    9
1689    Gabriel    9
1381    Tiffany    9
*/"""

SELECT_COL_TEXT = """\
/*
Columns in Highschooler and 3 distinct examples in each column:
ID: 1510, 1689, 1381
name: "Jordan", "Gabriel", "Tiffany"
grade: 9, 10, 11
*/"""


@pytest.fixture(scope="module")
def snippet(snippet_db):
    from sqlprompt.prompts import load_database_context

    return load_database_context(snippet_db)


def highschooler(snippet):
    return snippet.schema.table("Highschooler")


# -- schema serializations ----------------------------------------------------


def test_table_columns_serialization(snippet):
    text = serialize_schema(snippet.schema, SchemaFormat.TABLE_COLUMNS, RAW)
    assert text == TABLE_COLUMNS_TEXT


def test_columns_eq_serialization(snippet):
    text = serialize_schema(snippet.schema, SchemaFormat.COLUMNS_EQ, RAW)
    assert text == COLUMNS_EQ_TEXT


def test_columns_eq_fk_serialization(snippet):
    text = serialize_schema(snippet.schema, SchemaFormat.COLUMNS_EQ_FK, RAW)
    assert text == COLUMNS_EQ_TEXT + "\n" + FOREIGN_KEY_LINE


def test_create_table_serialization(snippet):
    text = serialize_schema(snippet.schema, SchemaFormat.CREATE_TABLE, RAW)
    assert text == CREATE_TABLE_TEXT


def test_linear_formats_normalize_by_case_folding(snippet):
    for fmt in (
        SchemaFormat.TABLE_COLUMNS,
        SchemaFormat.COLUMNS_EQ,
        SchemaFormat.COLUMNS_EQ_FK,
    ):
        raw = serialize_schema(snippet.schema, fmt, RAW)
        assert serialize_schema(snippet.schema, fmt, NORM) == raw.lower()


def test_create_table_normalization(snippet):
    text = serialize_schema(snippet.schema, SchemaFormat.CREATE_TABLE, NORM)
    assert text.startswith("create table highschooler (\nid int primary key,")
    assert "primary key (student_id,friend_id)" in text
    assert "foreign key(student_id) references highschooler(id)" in text
    assert "\n\ncreate table friend (\n" in text


def test_create_table_normalization_of_messy_ddl(network_context):
    text = serialize_schema(network_context.schema, SchemaFormat.CREATE_TABLE, NORM)
    # Source tabs and trailing spaces are gone, one item per line.
    assert "create table highschooler (\nid int primary key,\nname text,\ngrade int\n);" in text
    assert "\t" not in text


def test_empty_schema_rejected():
    empty = DatabaseSchema(db_id="void", tables=())
    with pytest.raises(EmptySchemaError):
        serialize_schema(empty, SchemaFormat.TABLE_COLUMNS, RAW)


def test_serialize_schema_deterministic(snippet):
    for fmt in SchemaFormat:
        for mode in (RAW, NORM):
            assert serialize_schema(snippet.schema, fmt, mode) == serialize_schema(
                snippet.schema, fmt, mode
            )


# -- content serializations ---------------------------------------------------


def test_insert_row_serialization(snippet):
    table = highschooler(snippet)
    text = serialize_content(
        table, snippet.sample_for(table), ContentFormat(ContentStyle.INSERT_ROW, 3), RAW
    )
    assert text == INSERT_ROW_TEXT


def test_select_row_serialization(snippet):
    table = highschooler(snippet)
    text = serialize_content(
        table, snippet.sample_for(table), ContentFormat(ContentStyle.SELECT_ROW, 3), RAW
    )
    assert text == SELECT_ROW_TEXT


def test_select_col_serialization(snippet):
    table = highschooler(snippet)
    text = serialize_content(
        table, snippet.sample_for(table), ContentFormat(ContentStyle.SELECT_COL, 3), RAW
    )
    assert text == SELECT_COL_TEXT


def test_content_normalized_mode_lowercases_structure_not_values(snippet):
    table = highschooler(snippet)
    sample = snippet.sample_for(table)
    insert = serialize_content(table, sample, ContentFormat(ContentStyle.INSERT_ROW, 3), NORM)
    assert insert.startswith('insert into highschooler (id, name, grade) values (1510, "Jordan", 9);')
    select_row = serialize_content(table, sample, ContentFormat(ContentStyle.SELECT_ROW, 2), NORM)
    assert "select * from highschooler limit 2;" in select_row
    assert "Jordan" in select_row  # cell text keeps its case
    select_col = serialize_content(table, sample, ContentFormat(ContentStyle.SELECT_COL, 3), NORM)
    assert select_col.splitlines()[1] == (
        "columns in highschooler and 3 distinct examples in each column:"
    )
    assert '"Jordan", "Gabriel", "Tiffany"' in select_col


def test_row_count_truncates_not_pads(snippet, snippet_db):
    from sqlprompt.prompts import load_database_context

    table = highschooler(snippet)
    sample = snippet.sample_for(table)
    two = serialize_content(table, sample, ContentFormat(ContentStyle.INSERT_ROW, 2), RAW)
    assert two.count("INSERT INTO") == 2
    wide = load_database_context(snippet_db, rows=50)
    many = serialize_content(
        table, wide.sample_for(table), ContentFormat(ContentStyle.SELECT_ROW, 50), RAW
    )
    # Only 5 rows exist; the header still advertises the requested limit.
    assert "SELECT * FROM Highschooler LIMIT 50;" in many
    assert len(many.splitlines()) == 4 + 5 + 1


def test_sample_shape_mismatches_rejected(snippet):
    table = highschooler(snippet)
    bad_rows = ContentSample(rows=((1510, "Jordan"),), distinct_values=((), (), ()))
    with pytest.raises(SampleMismatchError):
        serialize_content(table, bad_rows, ContentFormat(ContentStyle.INSERT_ROW, 1), RAW)
    bad_cols = ContentSample(rows=(), distinct_values=((1510,),))
    with pytest.raises(SampleMismatchError):
        serialize_content(table, bad_cols, ContentFormat(ContentStyle.SELECT_COL, 1), RAW)


def test_content_requires_create_table_schema():
    with pytest.raises(ValueError):
        PromptSpec(
            schema_format=SchemaFormat.TABLE_COLUMNS,
            content_format=ContentFormat(ContentStyle.INSERT_ROW, 3),
        )


def test_content_format_labels():
    assert ContentFormat.none().label() == "none"
    assert ContentFormat(ContentStyle.SELECT_COL, 5).label() == "select-col:5"
    with pytest.raises(ValueError):
        ContentFormat(ContentStyle.INSERT_ROW, 0)


# -- cell rendering -----------------------------------------------------------


def test_render_cell_cases():
    assert render_cell(None, quote_text=True) == "NULL"
    assert render_cell(42, quote_text=True) == "42"
    assert render_cell(2.5, quote_text=True) == "2.5"
    assert render_cell(15000000.0, quote_text=True) == "15000000.0"
    assert render_cell("Kyle", quote_text=True) == '"Kyle"'
    assert render_cell("Kyle", quote_text=False) == "Kyle"
    assert render_cell('say "hi"', quote_text=True) == '"say ""hi"""'


# -- database prompt ----------------------------------------------------------


def test_database_prompt_interleaves_schema_and_content(snippet):
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE,
        content_format=ContentFormat(ContentStyle.SELECT_ROW, 3),
        mode=RAW,
    )
    text = database_prompt(snippet, spec)
    blocks = text.split("\n\n")
    assert len(blocks) == 2  # one block per table
    assert blocks[0].startswith("CREATE TABLE Highschooler (")
    assert ");\n/*\n3 example rows:" in blocks[0]
    assert blocks[1].startswith("CREATE TABLE Friend (")


def test_database_prompt_without_content_needs_no_samples(snippet):
    spec = PromptSpec(schema_format=SchemaFormat.TABLE_COLUMNS, mode=RAW)
    bare = DatabaseContext(schema=snippet.schema, content=None)
    assert database_prompt(bare, spec) == TABLE_COLUMNS_TEXT


def test_database_prompt_missing_sample(snippet):
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE,
        content_format=ContentFormat(ContentStyle.INSERT_ROW, 3),
        mode=RAW,
    )
    bare = DatabaseContext(schema=snippet.schema, content=None)
    with pytest.raises(SampleMismatchError):
        database_prompt(bare, spec)


# -- prompt assembly ----------------------------------------------------------


def zero_spec(mode=NORM):
    return PromptSpec(schema_format=SchemaFormat.CREATE_TABLE, mode=mode)


def test_zero_shot_layout(network_context):
    prompt = assemble_prompt(zero_spec(RAW), network_context, "How many are there?")
    db_text = database_prompt(network_context, zero_spec(RAW))
    assert prompt.text == (
        f"{db_text}\n\n{INSTRUCTION_LINE}\n\nQuestion: How many are there?\nSELECT"
    )
    assert [s.label for s in prompt.sections] == [
        "test_database",
        "instruction",
        "question",
    ]


def test_completion_cue_follows_mode(network_context):
    assert completion_cue(NORM) == "select"
    assert completion_cue(RAW) == "SELECT"
    normalized = assemble_prompt(zero_spec(NORM), network_context, "q")
    assert normalized.text.endswith("Question: q\nselect")


def test_sections_tile_text(network_context):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=NETWORK_DB_ID,
                examples=(
                    Example("What is Kyle's id?", 'SELECT ID FROM Highschooler WHERE name = "Kyle"', NETWORK_DB_ID),
                ),
            ),
        )
    )
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE,
        mode=NORM,
        setting=Setting.SINGLE_DOMAIN,
    )
    prompt = assemble_prompt(spec, network_context, "How many?", demonstrations=demos)
    joined = "".join(prompt.text[s.start : s.end] for s in prompt.sections)
    assert joined == prompt.text
    assert prompt.sections[0].start == 0
    assert prompt.sections[-1].end == len(prompt.text)
    for before, after in zip(prompt.sections, prompt.sections[1:]):
        assert before.end == after.start


def test_single_domain_layout(network_context):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=NETWORK_DB_ID,
                examples=(
                    Example("What is Kyle's id?", 'SELECT ID FROM Highschooler WHERE name  =  "Kyle"', NETWORK_DB_ID),
                    Example("What are the names and grades for each high schooler?", "SELECT name ,  grade FROM Highschooler", NETWORK_DB_ID),
                ),
            ),
        )
    )
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE,
        mode=NORM,
        setting=Setting.SINGLE_DOMAIN,
    )
    prompt = assemble_prompt(spec, network_context, "How many?", demonstrations=demos)
    pairs = prompt.section_texts("demo_examples")[0].rstrip("\n")
    assert pairs == (
        "Question: What is Kyle's id?\n"
        "select id from highschooler where name = 'Kyle';\n"
        "Question: What are the names and grades for each high schooler?\n"
        "select name, grade from highschooler;"
    )
    # Demonstrations sit between the instruction and the test question,
    # separated by single newlines.
    assert "\n\nQuestion: How many?\nselect" not in prompt.text
    assert prompt.text.endswith(
        "select name, grade from highschooler;\nQuestion: How many?\nselect"
    )


def test_zero_shot_is_prefix_of_single_domain(network_context):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=NETWORK_DB_ID,
                examples=(Example("q1", "SELECT name FROM Highschooler", NETWORK_DB_ID),),
            ),
        )
    )
    zero = assemble_prompt(zero_spec(NORM), network_context, "How many?")
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE, mode=NORM, setting=Setting.SINGLE_DOMAIN
    )
    shot = assemble_prompt(spec, network_context, "How many?", demonstrations=demos)
    instruction_end = zero.text.index(INSTRUCTION_LINE) + len(INSTRUCTION_LINE)
    assert shot.text.startswith(zero.text[: instruction_end + 2])


def test_cross_domain_tail_equals_zero_shot(network_context, demo_contexts):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=BOOK_DB_ID,
                examples=(Example("How many books are there?", "SELECT COUNT(*) FROM book", BOOK_DB_ID),),
            ),
            DemonstrationGroup(
                db_id=RACE_DB_ID,
                examples=(Example("Show the name and location for all tracks.", "SELECT name ,  LOCATION FROM track", RACE_DB_ID),),
            ),
        )
    )
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE, mode=NORM, setting=Setting.CROSS_DOMAIN
    )
    prompt = assemble_prompt(
        spec,
        network_context,
        "How many?",
        demonstrations=demos,
        demo_databases=demo_contexts,
    )
    zero = assemble_prompt(zero_spec(NORM), network_context, "How many?")
    assert prompt.text.endswith(zero.text)
    assert len(prompt.text) > len(zero.text)
    labels = [s.label for s in prompt.sections]
    assert labels == [
        "demo_database",
        "instruction",
        "demo_examples",
        "demo_database",
        "instruction",
        "demo_examples",
        "test_database",
        "instruction",
        "question",
    ]
    # Demonstration groups appear in draw order.
    first, second = prompt.section_texts("demo_database")
    assert "book" in first and "track" in second


def test_zero_shot_rejects_demonstrations(network_context):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=NETWORK_DB_ID,
                examples=(Example("q", "SELECT 1", NETWORK_DB_ID),),
            ),
        )
    )
    with pytest.raises(SettingMismatchError):
        assemble_prompt(zero_spec(), network_context, "q", demonstrations=demos)


def test_single_domain_rejects_foreign_demos(network_context):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=BOOK_DB_ID,
                examples=(Example("q", "SELECT 1", BOOK_DB_ID),),
            ),
        )
    )
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE, mode=NORM, setting=Setting.SINGLE_DOMAIN
    )
    with pytest.raises(SettingMismatchError):
        assemble_prompt(spec, network_context, "q", demonstrations=demos)


def test_cross_domain_rejects_test_database_demos(network_context, demo_contexts):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=NETWORK_DB_ID,
                examples=(Example("q", "SELECT 1", NETWORK_DB_ID),),
            ),
        )
    )
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE, mode=NORM, setting=Setting.CROSS_DOMAIN
    )
    with pytest.raises(SettingMismatchError):
        assemble_prompt(
            spec,
            network_context,
            "q",
            demonstrations=demos,
            demo_databases={**demo_contexts, NETWORK_DB_ID: network_context},
        )


def test_cross_domain_requires_demo_contexts(network_context):
    demos = DemonstrationSet(
        groups=(
            DemonstrationGroup(
                db_id=BOOK_DB_ID,
                examples=(Example("q", "SELECT 1", BOOK_DB_ID),),
            ),
        )
    )
    spec = PromptSpec(
        schema_format=SchemaFormat.CREATE_TABLE, mode=NORM, setting=Setting.CROSS_DOMAIN
    )
    with pytest.raises(SettingMismatchError):
        assemble_prompt(spec, network_context, "q", demonstrations=demos)


@settings(max_examples=50, deadline=None)
@given(
    nlq=st.text(
        alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n"),
        min_size=1,
        max_size=60,
    )
)
def test_prompt_suffix_shape_holds_for_any_question(nlq):
    schema = DatabaseSchema(
        db_id="d",
        tables=(TableSchema(name="t", columns=(ColumnDef("x", "int", 0),)),),
    )
    context = DatabaseContext(schema=schema)
    prompt = assemble_prompt(zero_spec(NORM), context, nlq)
    assert prompt.text.endswith(f"Question: {nlq}\nselect")
    joined = "".join(prompt.text[s.start : s.end] for s in prompt.sections)
    assert joined == prompt.text


# -- tokenizers ---------------------------------------------------------------


def test_whitespace_tokenizer():
    assert count_tokens("select * from t") == 4
    assert count_tokens("  padded   text ") == 2
    assert count_tokens("") == 0


def test_char_tokenizer():
    assert count_tokens("abc", tokenizer="char") == 3


def test_unknown_tokenizer():
    with pytest.raises(UnknownTokenizerError):
        get_tokenizer("no-such-tokenizer")


def test_register_tokenizer_roundtrip():
    register_tokenizer("test-halves", lambda text: len(text) // 2)
    assert count_tokens("abcdef", tokenizer="test-halves") == 3


def test_cell_separator_is_four_spaces():
    assert CELL_SEPARATOR == "    "
