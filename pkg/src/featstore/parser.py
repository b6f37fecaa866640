"""Lexer and recursive-descent parser for the feature SQL subset.

Produces sqlast structures.  Errors carry a 1-based line and column plus the
set of token kinds that would have been accepted, so callers (CLI, HTTP,
editors) can point at the offending character.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidSchema, SqlSyntaxError
from .sqlast import (
    AGG_FUNCTIONS,
    UNIT_MS,
    AggCall,
    BinOp,
    ColumnRef,
    FeatureQuery,
    Frame,
    FrameKind,
    LastJoin,
    Literal,
    Projection,
    Star,
    WindowDef,
)

KEYWORDS = {
    "SELECT", "FROM", "AS", "WINDOW", "PARTITION", "BY", "ORDER", "ROWS",
    "ROWS_RANGE", "BETWEEN", "AND", "PRECEDING", "CURRENT", "ROW", "UNION",
    "LAST", "JOIN", "ON", "MAXSIZE", "UNBOUNDED", "OVER", "INSERT", "INTO",
    "VALUES", "LOAD", "DATA", "INFILE", "TABLE", "OPTIONS", "NULL", "TRUE",
    "FALSE",
}

_SYMBOLS = "(),.+-*/="


@dataclass(frozen=True)
class Token:
    kind: str  # keyword, IDENT, INT, FLOAT, STRING, INTERVAL, symbol, EOF
    value: object
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind in ("IDENT", "INT", "FLOAT", "STRING", "INTERVAL"):
            return f"{self.kind} {self.value!r}"
        return f"'{self.value}'" if self.kind == "symbol" else self.kind


def tokenize(text: str) -> list[Token]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg):
        raise SqlSyntaxError(msg, line=line, column=col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if ch in " \t\r":
            i, col = i + 1, col + 1
            continue
        if ch == "-" and text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token(upper, upper, line, start_col))
            else:
                tokens.append(Token("IDENT", word, line, start_col))
            col += j - i
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
                if j < n and (text[j].isalnum() or text[j] == "_"):
                    err(f"malformed number {text[i:j + 1]!r}")
                tokens.append(Token("FLOAT", float(text[i:j]), line, start_col))
            elif j < n and text[j] in "smhd" and (j + 1 >= n or not (text[j + 1].isalnum() or text[j + 1] == "_")):
                ms = int(text[i:j]) * UNIT_MS[text[j]]
                tokens.append(Token("INTERVAL", ms, line, start_col))
                j += 1
            elif j < n and (text[j].isalpha() or text[j] == "_"):
                err(f"malformed number {text[i:j + 1]!r}")
            else:
                tokens.append(Token("INT", int(text[i:j]), line, start_col))
            col += j - i
            i = j
            continue
        if ch == "'":
            j = i + 1
            parts = []
            while True:
                if j >= n:
                    err("unterminated string literal")
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        parts.append("'")
                        j += 2
                        continue
                    break
                if text[j] == "\n":
                    err("unterminated string literal")
                parts.append(text[j])
                j += 1
            tokens.append(Token("STRING", "".join(parts), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch in _SYMBOLS:
            tokens.append(Token("symbol", ch, line, start_col))
            i, col = i + 1, col + 1
            continue
        err(f"unexpected character {ch!r}")
    tokens.append(Token("EOF", None, line, col))
    return tokens


@dataclass(frozen=True)
class InsertStatement:
    db: str | None
    table: str
    rows: tuple[tuple, ...]


@dataclass(frozen=True)
class LoadDataStatement:
    path: str
    db: str | None
    table: str
    options: dict


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def fail(self, expected):
        tok = self.cur
        if isinstance(expected, str):
            expected = (expected,)
        raise SqlSyntaxError(
            f"expected {' or '.join(expected)}, got {tok.describe()}",
            line=tok.line,
            column=tok.col,
            expected=tuple(expected),
        )

    def accept(self, kind, value=None):
        tok = self.cur
        if tok.kind == kind and (value is None or tok.value == value):
            self.pos += 1
            return tok
        return None

    def expect(self, kind, value=None) -> Token:
        tok = self.accept(kind, value)
        if tok is None:
            self.fail(f"'{value}'" if value is not None else kind)
        return tok

    def ident(self, what="identifier") -> str:
        tok = self.accept("IDENT")
        if tok is None:
            self.fail(what)
        return tok.value

    def table_name(self) -> tuple[str | None, str]:
        first = self.ident("table name")
        if self.accept("symbol", "."):
            return first, self.ident("table name")
        return None, first

    # --- expressions ---------------------------------------------------------

    def expression(self):
        node = self.term()
        while self.cur.kind == "symbol" and self.cur.value in "+-":
            op = self.advance().value
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.cur.kind == "symbol" and self.cur.value in "*/":
            op = self.advance().value
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.accept("symbol", "-"):
            inner = self.factor()
            if isinstance(inner, Literal):
                return Literal(-inner.value)
            return BinOp("-", Literal(0), inner)
        return self.primary()

    def primary(self):
        tok = self.cur
        if tok.kind == "INT" or tok.kind == "FLOAT":
            self.advance()
            return Literal(tok.value)
        if tok.kind == "symbol" and tok.value == "(":
            self.advance()
            node = self.expression()
            self.expect("symbol", ")")
            return node
        if tok.kind == "IDENT":
            name = self.advance().value
            if self.cur.kind == "symbol" and self.cur.value == "(":
                return self.agg_call(name, tok)
            if self.accept("symbol", "."):
                return ColumnRef(self.ident("column name"), table=name)
            return ColumnRef(name)
        self.fail(("identifier", "number", "'('"))

    def agg_call(self, name: str, tok: Token) -> AggCall:
        if name not in AGG_FUNCTIONS:
            raise SqlSyntaxError(
                f"unknown aggregate function {name!r}",
                line=tok.line,
                column=tok.col,
                expected=AGG_FUNCTIONS,
            )
        self.expect("symbol", "(")
        n = None
        if self.accept("symbol", "*"):
            if name != "count":
                raise SqlSyntaxError(
                    f"{name}(*) is not valid, only count(*) takes a star",
                    line=tok.line,
                    column=tok.col,
                )
            arg = Star()
        else:
            arg = ColumnRef(self.ident("column name"))
            if self.accept("symbol", "."):
                arg = ColumnRef(self.ident("column name"), table=arg.name)
        if name == "top_n_freq":
            self.expect("symbol", ",")
            n = self.expect("INT").value
        self.expect("symbol", ")")
        self.expect("OVER")
        window = self.ident("window name")
        return AggCall(name, arg, window, n=n)

    # --- SELECT --------------------------------------------------------------

    def select_item(self) -> Projection:
        if self.accept("symbol", "*"):
            return Projection(Star())
        expr = self.expression()
        alias = None
        if self.accept("AS"):
            alias = self.ident("alias")
        return Projection(expr, alias)

    def frame(self) -> Frame:
        start = self.cur
        if self.accept("ROWS"):
            ranged = False
        elif self.accept("ROWS_RANGE"):
            ranged = True
        else:
            self.fail(("ROWS", "ROWS_RANGE"))
        self.expect("BETWEEN")
        kind, size = None, None
        if self.accept("UNBOUNDED"):
            kind = FrameKind.UNBOUNDED
        elif self.cur.kind == "INT":
            size = self.advance().value
            kind = FrameKind.RANGE if ranged else FrameKind.ROWS
        elif self.cur.kind == "INTERVAL":
            if not ranged:
                self.fail("INT")  # row counts cannot carry a time unit
            size = self.advance().value
            kind = FrameKind.RANGE
        else:
            self.fail(("UNBOUNDED", "INT") if not ranged else ("UNBOUNDED", "INT", "INTERVAL"))
        self.expect("PRECEDING")
        self.expect("AND")
        self.expect("CURRENT")
        self.expect("ROW")
        max_size = None
        if self.accept("MAXSIZE"):
            max_size = self.expect("INT").value
        try:
            return Frame(kind, size, max_size)
        except InvalidSchema as e:
            raise SqlSyntaxError(str(e), line=start.line, column=start.col) from None

    def window_def(self) -> WindowDef:
        name = self.ident("window name")
        self.expect("AS")
        self.expect("symbol", "(")
        unions = []
        if self.accept("UNION"):
            unions.append(self.ident("table name"))
            while self.accept("symbol", ","):
                unions.append(self.ident("table name"))
        self.expect("PARTITION")
        self.expect("BY")
        parts = [self.ident("column name")]
        while self.accept("symbol", ","):
            parts.append(self.ident("column name"))
        self.expect("ORDER")
        self.expect("BY")
        order = self.ident("column name")
        frame = self.frame()
        self.expect("symbol", ")")
        return WindowDef(name, tuple(parts), order, frame, tuple(unions))

    def select(self) -> FeatureQuery:
        self.expect("SELECT")
        items = [self.select_item()]
        while self.accept("symbol", ","):
            items.append(self.select_item())
        self.expect("FROM")
        _, base = self.table_name()
        join = None
        if self.accept("LAST"):
            self.expect("JOIN")
            _, jt = self.table_name()
            self.expect("ORDER")
            self.expect("BY")
            order = self.ident("column name")
            self.expect("ON")
            left = self.primary()
            self.expect("symbol", "=")
            right = self.primary()
            if not isinstance(left, ColumnRef) or not isinstance(right, ColumnRef):
                self.fail("column reference")
            join = LastJoin(jt, order, left, right)
        windows = []
        if self.accept("WINDOW"):
            windows.append(self.window_def())
            while self.accept("symbol", ","):
                windows.append(self.window_def())
        return FeatureQuery(base, tuple(items), tuple(windows), join)

    # --- other statements ----------------------------------------------------

    def literal_value(self):
        tok = self.cur
        if tok.kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return tok.value
        if tok.kind == "NULL":
            self.advance()
            return None
        if tok.kind == "TRUE":
            self.advance()
            return True
        if tok.kind == "FALSE":
            self.advance()
            return False
        if tok.kind == "symbol" and tok.value == "-":
            self.advance()
            num = self.cur
            if num.kind not in ("INT", "FLOAT"):
                self.fail("number")
            self.advance()
            return -num.value
        self.fail(("number", "string", "NULL", "TRUE", "FALSE"))

    def insert(self) -> InsertStatement:
        self.expect("INSERT")
        self.expect("INTO")
        db, table = self.table_name()
        self.expect("VALUES")
        rows = []
        while True:
            self.expect("symbol", "(")
            row = [self.literal_value()]
            while self.accept("symbol", ","):
                row.append(self.literal_value())
            self.expect("symbol", ")")
            rows.append(tuple(row))
            if not self.accept("symbol", ","):
                break
        return InsertStatement(db, table, tuple(rows))

    def load_data(self) -> LoadDataStatement:
        self.expect("LOAD")
        self.expect("DATA")
        self.expect("INFILE")
        path = self.expect("STRING").value
        self.expect("INTO")
        self.expect("TABLE")
        db, table = self.table_name()
        options = {}
        if self.accept("OPTIONS"):
            self.expect("symbol", "(")
            while True:
                key = self.ident("option name")
                self.expect("symbol", "=")
                options[key.lower()] = self.literal_value()
                if not self.accept("symbol", ","):
                    break
            self.expect("symbol", ")")
        return LoadDataStatement(path, db, table, options)

    def statement(self):
        if self.cur.kind == "SELECT":
            return self.select()
        if self.cur.kind == "INSERT":
            return self.insert()
        if self.cur.kind == "LOAD":
            return self.load_data()
        self.fail(("SELECT", "INSERT", "LOAD"))

    def finish(self, node):
        if self.cur.kind != "EOF":
            self.fail("end of input")
        return node


def parse(text: str) -> FeatureQuery:
    """Parse a feature SELECT; raises SqlSyntaxError with position info."""
    p = _Parser(text)
    return p.finish(p.select())


def parse_statement(text: str):
    """Parse one statement: SELECT, INSERT INTO, or LOAD DATA INFILE."""
    p = _Parser(text)
    return p.finish(p.statement())


def parse_expression(text: str):
    """Parse a bare select expression (used by block-graph projections)."""
    p = _Parser(text)
    return p.finish(p.expression())
