"""AST for the feature-definition SQL subset, plus canonical rendering.

The grammar (the module's public contract):

    SELECT item (',' item)* FROM table
      [LAST JOIN table ORDER BY ts_col ON col '=' col]
      [WINDOW w AS '(' [UNION table (',' table)*]
         PARTITION BY cols ORDER BY ts_col
         (ROWS|ROWS_RANGE) BETWEEN bound AND CURRENT ROW [MAXSIZE n] ')'
       (',' w2 AS '(' ... ')')*]

    bound := INT 'PRECEDING' | INT unit 'PRECEDING' | 'UNBOUNDED PRECEDING'
    unit  := 's' | 'm' | 'h' | 'd'

Items are source columns, aggregate calls over a named window, or +-*/
arithmetic over those; aggregates are sum, count, avg, min, max,
distinct_count and top_n_freq(col, n).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import InvalidSchema

AGG_FUNCTIONS = ("sum", "count", "avg", "min", "max", "distinct_count", "top_n_freq")
DECOMPOSABLE_AGGS = ("sum", "count", "avg", "min", "max")

UNIT_MS = {"s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}


class FrameKind(enum.Enum):
    ROWS = "rows"
    RANGE = "range"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    size: int | None = None  # preceding row count for ROWS, ms for RANGE
    max_size: int | None = None

    def __post_init__(self):
        if self.kind is FrameKind.ROWS and (self.size is None or self.size < 0):
            raise InvalidSchema("ROWS frame needs a non-negative preceding count")
        if self.kind is FrameKind.RANGE and (self.size is None or self.size <= 0):
            raise InvalidSchema("RANGE frame needs a positive duration")
        if self.max_size is not None and self.max_size <= 0:
            raise InvalidSchema("MAXSIZE must be positive")

    def render(self) -> str:
        if self.kind is FrameKind.ROWS:
            text = f"ROWS BETWEEN {self.size} PRECEDING AND CURRENT ROW"
        elif self.kind is FrameKind.RANGE:
            text = f"ROWS_RANGE BETWEEN {self.size} PRECEDING AND CURRENT ROW"
        else:
            text = "ROWS BETWEEN UNBOUNDED PRECEDING AND CURRENT ROW"
        if self.max_size is not None:
            text += f" MAXSIZE {self.max_size}"
        return text

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "size": self.size, "max_size": self.max_size}

    @classmethod
    def from_dict(cls, d: dict) -> "Frame":
        return cls(FrameKind(d["kind"]), d.get("size"), d.get("max_size"))


# --- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class ColumnRef:
    name: str
    table: str | None = None

    def render(self) -> str:
        return f"{self.table}.{self.name}" if self.table else self.name


@dataclass(frozen=True)
class Star:
    def render(self) -> str:
        return "*"


@dataclass(frozen=True)
class Literal:
    value: int | float

    def render(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class AggCall:
    fn: str
    arg: ColumnRef | Star | None
    window: str
    n: int | None = None  # top_n_freq only

    def render(self) -> str:
        if self.n is not None:
            inner = f"{self.arg.render()}, {self.n}"
        else:
            inner = self.arg.render() if self.arg is not None else ""
        return f"{self.fn}({inner}) OVER {self.window}"

    def default_name(self) -> str:
        argname = "all" if isinstance(self.arg, Star) else self.arg.name
        return f"{self.fn}_{argname}_{self.window}"


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def render(self) -> str:
        lp = _PRECEDENCE[self.op]

        def side(node, right_side):
            text = node.render()
            if isinstance(node, BinOp):
                cp = _PRECEDENCE[node.op]
                if cp < lp or (cp == lp and right_side and self.op in ("-", "/")):
                    return f"({text})"
            return text

        return f"{side(self.left, False)} {self.op} {side(self.right, True)}"


Expr = ColumnRef | Star | Literal | AggCall | BinOp


def walk_expr(expr):
    yield expr
    if isinstance(expr, BinOp):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)


@dataclass(frozen=True)
class Projection:
    expr: Expr
    alias: str | None = None

    def output_name(self, position: int) -> str:
        if self.alias:
            return self.alias
        if isinstance(self.expr, ColumnRef):
            return self.expr.name
        if isinstance(self.expr, AggCall):
            return self.expr.default_name()
        return f"expr_{position}"

    def render(self, position: int) -> str:
        text = self.expr.render()
        if isinstance(self.expr, (Star, ColumnRef)) and not self.alias:
            return text
        return f"{text} AS {self.output_name(position)}"


@dataclass(frozen=True)
class WindowDef:
    name: str
    partition_columns: tuple[str, ...]
    order_column: str
    frame: Frame
    union_tables: tuple[str, ...] = ()

    def render(self) -> str:
        parts = []
        if self.union_tables:
            parts.append("UNION " + ", ".join(self.union_tables))
        parts.append("PARTITION BY " + ", ".join(self.partition_columns))
        parts.append(f"ORDER BY {self.order_column}")
        parts.append(self.frame.render())
        return f"{self.name} AS ({' '.join(parts)})"


@dataclass(frozen=True)
class LastJoin:
    table: str
    order_column: str
    left: ColumnRef
    right: ColumnRef

    def render(self) -> str:
        return (
            f"LAST JOIN {self.table} ORDER BY {self.order_column} "
            f"ON {self.left.render()} = {self.right.render()}"
        )


@dataclass(frozen=True)
class FeatureQuery:
    base_table: str
    projections: tuple[Projection, ...]
    windows: tuple[WindowDef, ...] = ()
    last_join: LastJoin | None = None

    def window(self, name: str) -> WindowDef | None:
        for w in self.windows:
            if w.name == name:
                return w
        return None

    def render(self) -> str:
        parts = [
            "SELECT "
            + ", ".join(p.render(i) for i, p in enumerate(self.projections))
            + f" FROM {self.base_table}"
        ]
        if self.last_join:
            parts.append(self.last_join.render())
        if self.windows:
            parts.append("WINDOW " + ", ".join(w.render() for w in self.windows))
        return " ".join(parts)


def render_query(query: FeatureQuery) -> str:
    """Canonical text of a query; parsing it back yields an equal structure."""
    return query.render()
