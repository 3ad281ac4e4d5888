"""SQL and DDL normalization.

Normalization rewrites queries into a single canonical surface form:
keywords and schema identifiers lowercased, whitespace and punctuation
spacing unified, one statement per text terminated by a semicolon.
String literal content and database values are never touched.

The implementation is a small hand-rolled SQLite lexer plus a token
renderer. Working at the token level (rather than a full parse) keeps
the transformation total over everything SQLite would accept, including
benchmark queries that are syntactically odd but executable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .errors import MultipleStatementsError, ParseError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard for type hints
    from .schema import DatabaseSchema

# Reserved words of the SQLite dialect. Used both to decide which bare
# identifiers are keywords (function names keep their call parenthesis
# tight, keywords do not) and to decide when a quoted identifier can be
# rendered without quotes.
SQLITE_KEYWORDS = frozenset(
    """
    abort action add after all alter always analyze and as asc attach
    autoincrement before begin between by cascade case cast check collate
    column commit conflict constraint create cross current current_date
    current_time current_timestamp database default deferrable deferred
    delete desc detach distinct do drop each else end escape except exclude
    exclusive exists explain fail filter first following for foreign from
    full generated glob group groups having if ignore immediate in index
    indexed initially inner insert instead intersect into is isnull join key
    last left like limit match materialized natural no not nothing notnull
    null nulls of offset on or order others outer over partition plan pragma
    preceding primary query raise range recursive references regexp reindex
    release rename replace restrict returning right rollback row rows
    savepoint select set table temp temporary then ties to transaction
    trigger unbounded union unique update using vacuum values view virtual
    when where window with without
    """.split()
)

_TWO_CHAR_OPS = ("==", "<=", ">=", "<>", "!=", "||", "<<", ">>")
_ONE_CHAR_OPS = "+-*/%<>=&|~"
_PUNCT = "(),;."
_BARE_WORD = re.compile(r"[a-z_][a-z0-9_]*\Z")

LITERAL_PLACEHOLDER = "value"


@dataclass(frozen=True)
class Token:
    """One lexical token with its raw source slice and offsets."""

    kind: str  # ident | dquote | qident | string | blob | number | op | punct | param
    text: str
    start: int
    end: int

    def is_keyword(self) -> bool:
        return self.kind == "ident" and self.text.lower() in SQLITE_KEYWORDS


def _scan_quoted(text: str, start: int, quote: str) -> int:
    """Return the index one past a quoted region starting at ``start``.

    Doubling the quote character escapes it, as in SQL.
    """
    i = start + 1
    n = len(text)
    while i < n:
        if text[i] == quote:
            if i + 1 < n and text[i + 1] == quote:
                i += 2
                continue
            return i + 1
        i += 1
    raise ParseError(f"unterminated {quote!r}-quoted token", start)


def _scan_number(text: str, start: int) -> int:
    n = len(text)
    i = start
    if text.startswith(("0x", "0X"), i):
        i += 2
        while i < n and text[i] in "0123456789abcdefABCDEF":
            i += 1
        if i == start + 2:
            raise ParseError("malformed hex literal", start)
        return i
    while i < n and text[i].isdigit():
        i += 1
    if i < n and text[i] == ".":
        i += 1
        while i < n and text[i].isdigit():
            i += 1
    if i < n and text[i] in "eE":
        j = i + 1
        if j < n and text[j] in "+-":
            j += 1
        if j < n and text[j].isdigit():
            i = j
            while i < n and text[i].isdigit():
                i += 1
    return i


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_" or ord(c) > 127


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c in "_$" or ord(c) > 127


def lex(sql: str) -> list[Token]:
    """Tokenize SQL text. Comments and whitespace are dropped.

    Raises ParseError (with a character offset) on input no SQLite
    tokenizer would accept: unterminated strings, comments, or quoted
    identifiers, and characters outside the dialect.
    """
    tokens: list[Token] = []
    i = 0
    n = len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            i += 1
            continue
        if sql.startswith("--", i):
            nl = sql.find("\n", i)
            i = n if nl == -1 else nl + 1
            continue
        if sql.startswith("/*", i):
            close = sql.find("*/", i + 2)
            if close == -1:
                raise ParseError("unterminated block comment", i)
            i = close + 2
            continue
        if c == "'":
            j = _scan_quoted(sql, i, "'")
            tokens.append(Token("string", sql[i:j], i, j))
            i = j
            continue
        if c == '"':
            j = _scan_quoted(sql, i, '"')
            tokens.append(Token("dquote", sql[i:j], i, j))
            i = j
            continue
        if c == "`":
            j = _scan_quoted(sql, i, "`")
            tokens.append(Token("qident", sql[i:j], i, j))
            i = j
            continue
        if c == "[":
            j = sql.find("]", i)
            if j == -1:
                raise ParseError("unterminated bracket identifier", i)
            tokens.append(Token("qident", sql[i : j + 1], i, j + 1))
            i = j + 1
            continue
        if c in "xX" and i + 1 < n and sql[i + 1] == "'":
            j = _scan_quoted(sql, i + 1, "'")
            tokens.append(Token("blob", sql[i:j], i, j))
            i = j
            continue
        if c.isdigit() or (c == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = _scan_number(sql, i)
            tokens.append(Token("number", sql[i:j], i, j))
            i = j
            continue
        if _is_ident_start(c):
            j = i + 1
            while j < n and _is_ident_char(sql[j]):
                j += 1
            tokens.append(Token("ident", sql[i:j], i, j))
            i = j
            continue
        if sql[i : i + 2] in _TWO_CHAR_OPS:
            tokens.append(Token("op", sql[i : i + 2], i, i + 2))
            i += 2
            continue
        if c in _ONE_CHAR_OPS:
            tokens.append(Token("op", c, i, i + 1))
            i += 1
            continue
        if c in _PUNCT:
            tokens.append(Token("punct", c, i, i + 1))
            i += 1
            continue
        if c == "?":
            j = i + 1
            while j < n and sql[j].isdigit():
                j += 1
            tokens.append(Token("param", sql[i:j], i, j))
            i = j
            continue
        if c in ":@$":
            j = i + 1
            while j < n and _is_ident_char(sql[j]):
                j += 1
            if j == i + 1:
                raise ParseError(f"dangling parameter marker {c!r}", i)
            tokens.append(Token("param", sql[i:j], i, j))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    return tokens


def _check_balanced(tokens: Iterable[Token]) -> None:
    depth = 0
    last = None
    for tok in tokens:
        if tok.kind == "punct" and tok.text == "(":
            depth += 1
        elif tok.kind == "punct" and tok.text == ")":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced ')'", tok.start)
        last = tok
    if depth != 0 and last is not None:
        raise ParseError("unbalanced '('", last.end)


def _inner_text(tok: Token) -> str:
    """Unescaped content of a quoted identifier or string token."""
    if tok.kind == "string":
        return tok.text[1:-1].replace("''", "'")
    if tok.kind == "dquote":
        return tok.text[1:-1].replace('""', '"')
    if tok.text.startswith("`"):
        return tok.text[1:-1].replace("``", "`")
    return tok.text[1:-1]  # [bracketed]


def _render_identifier(name: str) -> str:
    lowered = name.lower()
    if _BARE_WORD.match(lowered) and lowered not in SQLITE_KEYWORDS:
        return lowered
    return '"' + lowered.replace('"', '""') + '"'


def _schema_names(schema: "DatabaseSchema | None") -> frozenset[str]:
    if schema is None:
        return frozenset()
    names = set()
    for table in schema.tables:
        names.add(table.name.lower())
        for col in table.columns:
            names.add(col.name.lower())
    return frozenset(names)


def _dquote_is_identifier(prev: Token | None, nxt: Token | None, content: str,
                          known: frozenset[str]) -> bool:
    """Decide whether a double-quoted token names a schema object.

    SQLite resolves double quotes as identifiers first and falls back to
    string literals. We mirror that with the schema when one is given,
    plus structural positions (after AS/FROM/JOIN and around dots) where
    only an identifier can appear.
    """
    if content.lower() in known:
        return True
    if prev is not None and prev.kind == "ident" and prev.text.lower() in (
        "as", "from", "join", "table", "into", "update", "indexed",
    ):
        return True
    if prev is not None and prev.kind == "punct" and prev.text == ".":
        return True
    if nxt is not None and nxt.kind == "punct" and nxt.text == ".":
        return True
    return False


def _is_unary_position(prev: Token | None) -> bool:
    if prev is None:
        return True
    if prev.kind == "op":
        return True
    if prev.kind == "punct" and prev.text in "(,;":
        return True
    return prev.is_keyword()


def _space_between(prev: Token, cur: Token, prev_was_unary: bool) -> bool:
    if prev_was_unary:
        return False
    if prev.kind == "punct" and prev.text in "(.":
        return False
    if cur.kind == "punct":
        if cur.text in ",;).":
            return False
        if cur.text == "(":
            # Function calls hug their parenthesis; keywords do not.
            return not (
                prev.kind in ("ident", "dquote", "qident") and not prev.is_keyword()
            )
    return True


def _render(tokens: list[Token], known: frozenset[str], mask_literals: bool) -> str:
    parts: list[str] = []
    prev: Token | None = None
    prev_was_unary = False
    for idx, tok in enumerate(tokens):
        nxt = tokens[idx + 1] if idx + 1 < len(tokens) else None
        unary = (
            tok.kind == "op" and tok.text in "+-" and _is_unary_position(prev)
        )
        if prev is not None and _space_between(prev, tok, prev_was_unary):
            parts.append(" ")
        parts.append(_render_token(tok, prev, nxt, known, mask_literals))
        prev = tok
        prev_was_unary = unary
    return "".join(parts)


def _render_token(tok: Token, prev: Token | None, nxt: Token | None,
                  known: frozenset[str], mask_literals: bool) -> str:
    if tok.kind == "ident":
        return tok.text.lower()
    if tok.kind == "number":
        return LITERAL_PLACEHOLDER if mask_literals else tok.text.lower()
    if tok.kind == "string":
        return LITERAL_PLACEHOLDER if mask_literals else tok.text
    if tok.kind == "blob":
        return LITERAL_PLACEHOLDER if mask_literals else tok.text[0].lower() + tok.text[1:]
    if tok.kind == "qident":
        return _render_identifier(_inner_text(tok))
    if tok.kind == "dquote":
        content = _inner_text(tok)
        if _dquote_is_identifier(prev, nxt, content, known):
            return _render_identifier(content)
        # Double quotes around something that is not a schema object are
        # SQLite's legacy spelling of a string literal.
        if mask_literals:
            return LITERAL_PLACEHOLDER
        return "'" + content.replace("'", "''") + "'"
    if tok.kind == "param":
        return tok.text.lower()
    return tok.text  # op / punct


def _strip_terminators(tokens: list[Token]) -> list[Token]:
    body = list(tokens)
    while body and body[-1].kind == "punct" and body[-1].text == ";":
        body.pop()
    if not body:
        raise ParseError("empty statement", 0)
    for tok in body:
        if tok.kind == "punct" and tok.text == ";":
            raise MultipleStatementsError(
                f"expected a single statement, found another at position {tok.start}"
            )
    return body


def normalize_sql(sql: str, schema: "DatabaseSchema | None" = None) -> str:
    """Rewrite one SQL statement into the canonical normalized form.

    Keywords and identifiers are lowercased, token spacing is unified,
    and the result always ends with a semicolon. String literal content
    is preserved byte for byte; double-quoted strings that do not name a
    schema object are rewritten as single-quoted literals. Passing the
    target schema makes identifier-versus-literal resolution exact.
    """
    body = _strip_terminators(lex(sql))
    _check_balanced(body)
    return _render(body, _schema_names(schema), mask_literals=False) + ";"


def template_key(sql: str, schema: "DatabaseSchema | None" = None) -> str:
    """Normalized form with every literal masked as ``value``.

    Two queries share a template key exactly when they differ only in
    literal values, which is the exclusion test used when sampling
    demonstrations.
    """
    body = _strip_terminators(lex(sql))
    _check_balanced(body)
    return _render(body, _schema_names(schema), mask_literals=True) + ";"


def _fold_fragment(fragment: str) -> str:
    """Lowercase a DDL fragment outside string literals and collapse all
    whitespace runs (including comments) to single spaces."""
    out: list[str] = []
    i = 0
    n = len(fragment)
    pending_space = False
    while i < n:
        c = fragment[i]
        if c.isspace():
            pending_space = True
            i += 1
            continue
        if fragment.startswith("--", i):
            nl = fragment.find("\n", i)
            i = n if nl == -1 else nl + 1
            pending_space = True
            continue
        if fragment.startswith("/*", i):
            close = fragment.find("*/", i + 2)
            i = n if close == -1 else close + 2
            pending_space = True
            continue
        if pending_space and out:
            out.append(" ")
        pending_space = False
        if c == "'":
            j = _scan_quoted(fragment, i, "'")
            out.append(fragment[i:j])
            i = j
            continue
        out.append(c.lower())
        i += 1
    return "".join(out)


def _split_statements(tokens: list[Token]) -> list[list[Token]]:
    groups: list[list[Token]] = []
    current: list[Token] = []
    for tok in tokens:
        if tok.kind == "punct" and tok.text == ";":
            if current:
                groups.append(current)
                current = []
            continue
        current.append(tok)
    if current:
        groups.append(current)
    return groups


def _normalize_create_table(tokens: list[Token], source: str) -> str:
    if len(tokens) < 4 or tokens[0].text.lower() != "create":
        raise ParseError("expected a CREATE TABLE statement", tokens[0].start)
    i = 1
    if tokens[i].text.lower() in ("temp", "temporary"):
        i += 1
    if i >= len(tokens) or tokens[i].text.lower() != "table":
        raise ParseError("expected a CREATE TABLE statement", tokens[0].start)
    i += 1
    if (
        i + 2 < len(tokens)
        and tokens[i].text.lower() == "if"
        and tokens[i + 1].text.lower() == "not"
        and tokens[i + 2].text.lower() == "exists"
    ):
        i += 3

    name_parts: list[str] = []
    while i < len(tokens) and not (tokens[i].kind == "punct" and tokens[i].text == "("):
        tok = tokens[i]
        if tok.kind == "punct" and tok.text == ".":
            name_parts.append(".")
        elif tok.kind in ("ident", "dquote", "qident"):
            name_parts.append(
                tok.text.lower() if tok.kind == "ident" else _render_identifier(_inner_text(tok))
            )
        else:
            raise ParseError("unexpected token in table name", tok.start)
        i += 1
    if i >= len(tokens) or not name_parts:
        raise ParseError("CREATE TABLE without a column list", tokens[0].start)
    table_name = "".join(name_parts)

    # Find the parenthesis that closes the definition list.
    depth = 0
    open_idx = i
    close_idx = -1
    for j in range(open_idx, len(tokens)):
        tok = tokens[j]
        if tok.kind == "punct" and tok.text == "(":
            depth += 1
        elif tok.kind == "punct" and tok.text == ")":
            depth -= 1
            if depth == 0:
                close_idx = j
                break
    if close_idx == -1:
        raise ParseError("unbalanced '(' in CREATE TABLE", tokens[open_idx].start)

    # Split the definition list on depth-one commas, keeping source slices
    # so that everything inside an item survives untouched apart from
    # case and whitespace.
    items: list[str] = []
    depth = 1
    item_start: Token | None = None
    item_end: Token | None = None
    for j in range(open_idx + 1, close_idx):
        tok = tokens[j]
        if tok.kind == "punct" and tok.text == "(":
            depth += 1
        elif tok.kind == "punct" and tok.text == ")":
            depth -= 1
        if tok.kind == "punct" and tok.text == "," and depth == 1:
            if item_start is not None and item_end is not None:
                items.append(_fold_fragment(source[item_start.start : item_end.end]))
            item_start = item_end = None
            continue
        if item_start is None:
            item_start = tok
        item_end = tok
    if item_start is not None and item_end is not None:
        items.append(_fold_fragment(source[item_start.start : item_end.end]))

    tail = ""
    if close_idx + 1 < len(tokens):
        tail_start = tokens[close_idx + 1].start
        tail_end = tokens[-1].end
        tail = _fold_fragment(source[tail_start:tail_end])

    closing = f") {tail};" if tail else ");"
    body = ",\n".join(items)
    if body:
        return f"create table {table_name} (\n{body}\n{closing}"
    return f"create table {table_name} (\n{closing}"


def normalize_ddl(ddl: str) -> str:
    """Normalize one or more CREATE TABLE statements.

    Each statement is reshaped to a fixed layout: a lowercase header, one
    column or constraint definition per line, and a closing ``);`` on its
    own line. Statements are separated by a blank line. Definition items
    keep their internal token order and string literals verbatim.
    """
    tokens = lex(ddl)
    statements = _split_statements(tokens)
    if not statements:
        raise ParseError("no CREATE TABLE statement found", 0)
    return "\n\n".join(_normalize_create_table(stmt, ddl) for stmt in statements)


def has_top_level_order_by(sql: str) -> bool:
    """True when the statement orders its final result set.

    ORDER BY inside a subquery (parenthesized) does not count.
    """
    try:
        body = _strip_terminators(lex(sql))
    except (ParseError, MultipleStatementsError):
        return False
    depth = 0
    for tok in body:
        if tok.kind == "punct" and tok.text == "(":
            depth += 1
        elif tok.kind == "punct" and tok.text == ")":
            depth = max(0, depth - 1)
        elif depth == 0 and tok.kind == "ident" and tok.text.lower() == "order":
            return True
    return False
