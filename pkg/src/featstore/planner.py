"""Semantic validation: bind a parsed query to catalog schemas.

The result is a ResolvedPlan: every column reference resolved to a slot,
every window matched to an exact index (key columns in order plus the order
column; no silent fallback scan), every projection typed, and evaluator
closures compiled.  Plans capture the catalog versions of the tables they
touch so a cache can tell when they go stale.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

from .errors import SqlTypeError, UnknownColumn
from .parser import parse
from .rowcodec import make_field_reader
from .schema import ColumnType, TableSchema
from .sqlast import (
    AggCall,
    BinOp,
    ColumnRef,
    FeatureQuery,
    Literal,
    Projection,
    Star,
    render_query,
)

_NUMERIC = (ColumnType.INT32, ColumnType.INT64, ColumnType.FLOAT64)
_ORDERED = _NUMERIC + (ColumnType.TIMESTAMP,)


def agg_result_type(fn: str, arg_type: ColumnType | None) -> ColumnType:
    if fn in ("count", "distinct_count"):
        return ColumnType.INT64
    if fn == "avg":
        return ColumnType.FLOAT64
    if fn == "top_n_freq":
        return ColumnType.STRING
    if fn == "sum":
        return ColumnType.FLOAT64 if arg_type is ColumnType.FLOAT64 else ColumnType.INT64
    return arg_type  # min / max


def check_agg_arg(fn: str, arg_type: ColumnType | None, where: str):
    if fn == "count" and arg_type is None:
        return  # count(*)
    if fn in ("sum", "avg") and arg_type not in _NUMERIC:
        raise SqlTypeError(f"{fn} needs a numeric column in {where}")
    if fn in ("min", "max") and arg_type not in _ORDERED:
        raise SqlTypeError(f"{fn} needs a numeric or timestamp column in {where}")


@dataclass
class BoundAgg:
    fn: str
    window: str
    arg_col: int | None  # slot in the base schema; None for count(*)
    arg_type: ColumnType | None
    n: int | None
    out_type: ColumnType
    slot: int  # global result slot across all windows
    reader: Callable | None  # reads the arg from an encoded row

    @property
    def key(self):
        return (self.fn, self.arg_col, self.n)


@dataclass
class ResolvedWindow:
    defn: object  # WindowDef
    index_id: int
    key_cols: tuple[int, ...]
    ts_col: int
    union_tables: tuple[str, ...]
    union_index_ids: tuple[int, ...]
    aggs: list[BoundAgg] = field(default_factory=list)


@dataclass
class ResolvedJoin:
    table: str
    schema: TableSchema
    index_id: int
    left_col: int  # base schema slot
    right_col: int  # join schema slot
    order_col: int  # join schema slot


@dataclass
class BoundProjection:
    name: str
    type: ColumnType
    evaluate: Callable  # (base_values, join_values, agg_values) -> cell


@dataclass
class ResolvedPlan:
    db: str
    sql: str  # canonical text
    query: FeatureQuery
    base_table: str
    base_schema: TableSchema
    windows: list[ResolvedWindow]
    join: ResolvedJoin | None
    projections: list[BoundProjection]
    n_agg_slots: int
    table_versions: dict  # (db, table) -> version at validation time

    @property
    def output_schema(self):
        return [(p.name, p.type) for p in self.projections]

    def referenced_tables(self):
        return sorted({t for _, t in self.table_versions})


class _Binder:
    def __init__(self, catalog, db: str, query: FeatureQuery):
        self.catalog = catalog
        self.db = db
        self.query = query
        self.base = catalog.get_table(db, query.base_table)
        self.schema = self.base.schema
        self.versions = {(db, query.base_table): catalog.table_version(db, query.base_table)}
        self.join = self._bind_join()
        self.windows = self._bind_windows()
        self.by_name = {w.defn.name: w for w in self.windows}
        self.slots = 0
        self.agg_cache: dict[tuple, BoundAgg] = {}

    def _touch(self, table: str):
        self.versions[(self.db, table)] = self.catalog.table_version(self.db, table)

    def _bind_join(self):
        j = self.query.last_join
        if j is None:
            return None
        jt = self.catalog.get_table(self.db, j.table)
        self._touch(j.table)
        if j.left.table not in (None, self.query.base_table):
            raise UnknownColumn(f"join key {j.left.render()} must come from {self.query.base_table}")
        if j.right.table not in (None, j.table):
            raise UnknownColumn(f"join key {j.right.render()} must come from {j.table}")
        if not self.schema.has_column(j.left.name):
            raise UnknownColumn(f"no column {j.left.name!r} in {self.query.base_table}")
        if not jt.schema.has_column(j.right.name):
            raise UnknownColumn(f"no column {j.right.name!r} in {j.table}")
        lt = self.schema.column(j.left.name).type
        rt = jt.schema.column(j.right.name).type
        if lt is not rt:
            raise SqlTypeError(
                f"join keys {j.left.name} ({lt.value}) and {j.right.name} ({rt.value}) disagree"
            )
        if not jt.schema.has_column(j.order_column):
            raise UnknownColumn(f"no column {j.order_column!r} in {j.table}")
        index_id = jt.find_index((j.right.name,), j.order_column)
        return ResolvedJoin(
            table=j.table,
            schema=jt.schema,
            index_id=index_id,
            left_col=self.schema.col_index(j.left.name),
            right_col=jt.schema.col_index(j.right.name),
            order_col=jt.schema.col_index(j.order_column),
        )

    def _bind_windows(self):
        seen = set()
        out = []
        for w in self.query.windows:
            if w.name in seen:
                raise SqlTypeError(f"window {w.name!r} defined twice")
            seen.add(w.name)
            for c in w.partition_columns + (w.order_column,):
                if not self.schema.has_column(c):
                    raise UnknownColumn(f"no column {c!r} in {self.query.base_table}")
            if self.schema.column(w.order_column).type is not ColumnType.TIMESTAMP:
                raise SqlTypeError(f"window {w.name!r} must order by a timestamp column")
            index_id = self.base.find_index(w.partition_columns, w.order_column)
            union_ids = []
            if len(set(w.union_tables)) != len(w.union_tables):
                raise SqlTypeError(f"window {w.name!r} lists a union table twice")
            for ut in w.union_tables:
                if ut == self.query.base_table:
                    raise SqlTypeError(f"window {w.name!r} cannot union the base table with itself")
                u = self.catalog.get_table(self.db, ut)
                self._touch(ut)
                if [(c.name, c.type) for c in u.schema.columns] != [
                    (c.name, c.type) for c in self.schema.columns
                ]:
                    raise SqlTypeError(
                        f"union table {ut} must have the same columns as {self.query.base_table}"
                    )
                union_ids.append(u.find_index(w.partition_columns, w.order_column))
            out.append(
                ResolvedWindow(
                    defn=w,
                    index_id=index_id,
                    key_cols=tuple(self.schema.col_index(c) for c in w.partition_columns),
                    ts_col=self.schema.col_index(w.order_column),
                    union_tables=w.union_tables,
                    union_index_ids=tuple(union_ids),
                )
            )
        return out

    # --- expression binding ----------------------------------------------

    def bind_column(self, ref: ColumnRef):
        """Returns ("base"|"join", slot, type)."""
        if ref.table is not None:
            if ref.table == self.query.base_table:
                if not self.schema.has_column(ref.name):
                    raise UnknownColumn(f"no column {ref.name!r} in {ref.table}")
                return "base", self.schema.col_index(ref.name), self.schema.column(ref.name).type
            if self.join is not None and ref.table == self.join.table:
                if not self.join.schema.has_column(ref.name):
                    raise UnknownColumn(f"no column {ref.name!r} in {ref.table}")
                return (
                    "join",
                    self.join.schema.col_index(ref.name),
                    self.join.schema.column(ref.name).type,
                )
            raise UnknownColumn(f"unknown table qualifier {ref.table!r}")
        if self.schema.has_column(ref.name):
            return "base", self.schema.col_index(ref.name), self.schema.column(ref.name).type
        if self.join is not None and self.join.schema.has_column(ref.name):
            return "join", self.join.schema.col_index(ref.name), self.join.schema.column(ref.name).type
        raise UnknownColumn(f"no column {ref.name!r} in scope")

    def bind_agg(self, call: AggCall) -> BoundAgg:
        w = self.by_name.get(call.window)
        if w is None:
            raise SqlTypeError(f"window {call.window!r} is not defined")
        if isinstance(call.arg, Star):
            if call.fn != "count":
                raise SqlTypeError(f"{call.fn}(*) is not a thing; name a column")
            arg_col, arg_type, reader = None, None, None
        else:
            source, slot, arg_type = self.bind_column(call.arg)
            if source != "base":
                raise SqlTypeError(
                    f"aggregate over {call.window!r} must read {self.query.base_table} columns"
                )
            arg_col, reader = slot, make_field_reader(self.schema, slot)
        check_agg_arg(call.fn, arg_type, f"window {call.window!r}")
        cached = self.agg_cache.get((call.window, call.fn, arg_col, call.n))
        if cached is not None:
            return cached
        bound = BoundAgg(
            fn=call.fn,
            window=call.window,
            arg_col=arg_col,
            arg_type=arg_type,
            n=call.n,
            out_type=agg_result_type(call.fn, arg_type),
            slot=self.slots,
            reader=reader,
        )
        self.slots += 1
        w.aggs.append(bound)
        self.agg_cache[(call.window, call.fn, arg_col, call.n)] = bound
        return bound

    def compile(self, expr):
        """(evaluator, type) for one expression tree."""
        if isinstance(expr, Literal):
            v = expr.value
            t = ColumnType.FLOAT64 if isinstance(v, float) else ColumnType.INT64
            return (lambda b, j, a: v), t
        if isinstance(expr, ColumnRef):
            source, slot, t = self.bind_column(expr)
            if source == "base":
                return (lambda b, j, a: b[slot]), t
            return (lambda b, j, a: None if j is None else j[slot]), t
        if isinstance(expr, AggCall):
            bound = self.bind_agg(expr)
            slot = bound.slot
            return (lambda b, j, a: a[slot]), bound.out_type
        if isinstance(expr, BinOp):
            f, lt = self.compile(expr.left)
            g, rt = self.compile(expr.right)
            for t, side in ((lt, expr.left), (rt, expr.right)):
                if t not in _NUMERIC:
                    raise SqlTypeError(f"arithmetic needs numeric operands, got {t.value}")
            op = expr.op
            if op == "/":
                out_t = ColumnType.FLOAT64

                def div(b, j, a):
                    x, y = f(b, j, a), g(b, j, a)
                    if x is None or y is None or y == 0:
                        return None
                    return x / y

                return div, out_t
            if lt is ColumnType.FLOAT64 or rt is ColumnType.FLOAT64:
                out_t = ColumnType.FLOAT64
            else:
                out_t = ColumnType.INT64
            py = {"+": lambda x, y: x + y, "-": lambda x, y: x - y, "*": lambda x, y: x * y}[op]

            def binop(b, j, a):
                x, y = f(b, j, a), g(b, j, a)
                if x is None or y is None:
                    return None
                return py(x, y)

            return binop, out_t
        raise SqlTypeError(f"cannot evaluate {expr!r} here")

    def bind_projections(self):
        items: list[Projection] = []
        for p in self.query.projections:
            if isinstance(p.expr, Star):
                items.extend(Projection(ColumnRef(c.name)) for c in self.schema.columns)
                if self.join is not None:
                    for c in self.join.schema.columns:
                        if self.schema.has_column(c.name):
                            raise SqlTypeError(
                                f"SELECT * is ambiguous: {c.name!r} exists on both sides; "
                                "name columns explicitly"
                            )
                        items.append(Projection(ColumnRef(c.name, table=self.join.table)))
            else:
                items.append(p)
        out = []
        names = set()
        for i, p in enumerate(items):
            fn, t = self.compile(p.expr)
            name = p.output_name(i)
            if name in names:
                raise SqlTypeError(f"duplicate output column {name!r}; add AS aliases")
            names.add(name)
            out.append(BoundProjection(name, t, fn))
        return out


def validate(catalog, db: str, query: FeatureQuery) -> ResolvedPlan:
    binder = _Binder(catalog, db, query)
    projections = binder.bind_projections()
    windows = [w for w in binder.windows if w.aggs]
    return ResolvedPlan(
        db=db,
        sql=render_query(query),
        query=query,
        base_table=query.base_table,
        base_schema=binder.schema,
        windows=windows,
        join=binder.join,
        projections=projections,
        n_agg_slots=binder.slots,
        table_versions=binder.versions,
    )


def plan_sql(catalog, db: str, sql: str) -> ResolvedPlan:
    return validate(catalog, db, parse(sql))


class PlanCache:
    """Exact-text plan cache keyed by (db, sql), invalidated by table versions."""

    def __init__(self, catalog):
        self.catalog = catalog
        self._plans: dict[tuple[str, str], ResolvedPlan] = {}
        self._lock = threading.Lock()
        self.parse_count = 0  # observable for cache behavior tests

    def get(self, db: str, sql: str) -> ResolvedPlan:
        key = (db, sql)
        with self._lock:
            plan = self._plans.get(key)
            if plan is not None and all(
                self.catalog.table_version(d, t) == v
                for (d, t), v in plan.table_versions.items()
            ):
                return plan
            self.parse_count += 1
            plan = plan_sql(self.catalog, db, sql)
            self._plans[key] = plan
            return plan

    def invalidate_all(self):
        with self._lock:
            self._plans.clear()
