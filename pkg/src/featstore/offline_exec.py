"""Batch execution over offline dataset files.

This path never touches the online store.  It groups each dataset by the
window key, sorts ascending by (ts, table rank, seq), and computes every
base row's window as that row plus everything strictly before it in merged
order: base ties resolve by sequence, union ties at the anchor timestamp are
all included.  Because every aggregate state is order-independent, folding
ascending here and newest-first online must produce identical bits; the
consistency checker leans on that.

Work is split per (window, key); a key that holds more than a threshold
share of the rows is cut into contiguous slices so one hot key cannot
serialize the whole job.  Results land in per-row slots, so scheduling
order cannot change the output.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .aggregates import make_state, value_text
from .errors import SchemaMismatch
from .offline_data import OfflineDataset, OfflineStore
from .online_exec import feed_row
from .planner import ResolvedPlan, ResolvedWindow
from .rowcodec import decode_row, make_field_reader
from .schema import ColumnType
from .sqlast import FrameKind


@dataclass
class OfflineResult:
    columns: list[str]
    types: list[ColumnType]
    rows: list[list]
    rowids: list[int]  # dataset position of each output row

    def __len__(self):
        return len(self.rows)


def _check_columns(ds: OfflineDataset, expected, what: str):
    have = [(c.name, c.type) for c in ds.schema.columns]
    want = [(c.name, c.type) for c in expected.columns]
    if have != want:
        raise SchemaMismatch(f"offline dataset for {what} does not match the plan's schema")


def _group_window(plan: ResolvedPlan, window: ResolvedWindow, base_ds, union_dss):
    """key -> list of (ts, rank, seq, buf) ascending by (ts, -rank, seq)."""
    key_readers = [make_field_reader(plan.base_schema, c) for c in window.key_cols]
    ts_reader = make_field_reader(plan.base_schema, window.ts_col)
    groups: dict[tuple, list] = {}
    for rank, ds in enumerate([base_ds] + union_dss):
        for seq, buf in enumerate(ds.rows):
            key = tuple(r(buf) for r in key_readers)
            if any(part is None for part in key):
                continue  # unkeyed rows can never enter a window
            ts = ts_reader(buf)
            if ts is None:
                continue
            groups.setdefault(key, []).append((ts, rank, seq, buf))
    for rows in groups.values():
        rows.sort(key=lambda r: (r[0], -r[1], r[2]))
    return groups


def repartition_skewed(groups: dict, parallelism: int, threshold: float):
    """(key, start, end) tasks; oversized keys split into contiguous slices."""
    total = sum(len(rows) for rows in groups.values()) or 1
    tasks = []
    for key, rows in groups.items():
        n = len(rows)
        if parallelism > 1 and n / total > threshold and n > parallelism:
            step = math.ceil(n / parallelism)
            for s in range(0, n, step):
                tasks.append((key, s, min(s + step, n)))
        else:
            tasks.append((key, 0, n))
    return tasks


def _context_start(rows, frame, start: int) -> int:
    """How far before the slice the fold must begin to honor the frame."""
    if start == 0:
        return 0
    budget = None
    if frame.kind is FrameKind.ROWS:
        budget = frame.size
    if frame.max_size is not None:
        b = frame.max_size - 1
        budget = b if budget is None else min(budget, b)
    if frame.kind is FrameKind.RANGE:
        low = rows[start][0] - frame.size
        ctx = bisect_left(rows, low, hi=start, key=lambda r: r[0])
        if budget is not None:
            ctx = max(ctx, start - budget)
        return ctx
    if budget is None:
        return 0  # unbounded frame needs the whole prefix
    return max(0, start - budget)


def _eval_slice(window: ResolvedWindow, rows, start: int, end: int, out):
    """Fill out[seq] = agg results for base anchors in rows[start:end)."""
    frame = window.defn.frame
    unbounded = frame.kind is FrameKind.UNBOUNDED and frame.max_size is None
    ctx = _context_start(rows, frame, start)
    if unbounded:
        states = [make_state(a.fn, a.arg_type, a.n) for a in window.aggs]
        for i in range(end):
            ts, rank, seq, buf = rows[i]
            feed_row(window, states, buf)
            if rank == 0 and i >= start:
                out[seq] = [(a.slot, st.result()) for a, st in zip(window.aggs, states)]
        return
    budget = None
    if frame.kind is FrameKind.ROWS:
        budget = frame.size
    if frame.max_size is not None:
        b = frame.max_size - 1
        budget = b if budget is None else min(budget, b)
    for i in range(start, end):
        ts, rank, seq, buf = rows[i]
        if rank != 0:
            continue
        lo = ctx
        if frame.kind is FrameKind.RANGE:
            lo = bisect_left(rows, ts - frame.size, lo=ctx, hi=i, key=lambda r: r[0])
        if budget is not None:
            lo = max(lo, i - budget)
        states = [make_state(a.fn, a.arg_type, a.n) for a in window.aggs]
        for j in range(lo, i + 1):
            feed_row(window, states, rows[j][3])
        out[seq] = [(a.slot, st.result()) for a, st in zip(window.aggs, states)]


def _join_probe_map(plan: ResolvedPlan, join_ds):
    """join key value -> decoded values of the newest row for that value."""
    j = plan.join
    newest = {}
    order_reader = make_field_reader(j.schema, j.order_col)
    key_reader = make_field_reader(j.schema, j.right_col)
    for seq, buf in enumerate(join_ds.rows):
        k = key_reader(buf)
        if k is None:
            continue
        ts = order_reader(buf)
        if ts is None:
            continue
        cur = newest.get(k)
        if cur is None or (ts, seq) > cur[:2]:
            newest[k] = (ts, seq, buf)
    return {k: decode_row(j.schema, buf) for k, (ts, seq, buf) in newest.items()}


def execute_offline(
    store: OfflineStore,
    plan: ResolvedPlan,
    *,
    parallelism: int = 1,
    skew_threshold: float = 0.5,
) -> OfflineResult:
    base_ds = store.read(plan.db, plan.base_table)
    _check_columns(base_ds, plan.base_schema, plan.base_table)
    n_rows = len(base_ds)

    union_cache: dict[str, OfflineDataset] = {}

    def union_ds(name):
        if name not in union_cache:
            ds = store.read(plan.db, name)
            _check_columns(ds, plan.base_schema, name)
            union_cache[name] = ds
        return union_cache[name]

    agg_rows: list = [None] * n_rows
    if plan.windows and n_rows:
        tasks = []
        for window in plan.windows:
            groups = _group_window(
                plan, window, base_ds, [union_ds(u) for u in window.union_tables]
            )
            for key, start, end in repartition_skewed(groups, parallelism, skew_threshold):
                tasks.append((window, groups[key], start, end))

        def run(task):
            window, rows, start, end = task
            out = {}
            _eval_slice(window, rows, start, end, out)
            return out

        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                results = list(pool.map(run, tasks))
        else:
            results = [run(t) for t in tasks]
        for out in results:
            for seq, pairs in out.items():
                if agg_rows[seq] is None:
                    agg_rows[seq] = [None] * plan.n_agg_slots
                for slot, v in pairs:
                    agg_rows[seq][slot] = v

    join_map = {}
    if plan.join is not None:
        join_ds = store.read(plan.db, plan.join.table)
        _check_columns(join_ds, plan.join.schema, plan.join.table)
        join_map = _join_probe_map(plan, join_ds)

    empty_aggs = [None] * plan.n_agg_slots
    out_rows, order_keys = [], []
    first = plan.windows[0] if plan.windows else None
    for seq, buf in enumerate(base_ds.rows):
        values = decode_row(plan.base_schema, buf)
        join_values = None
        if plan.join is not None:
            probe = values[plan.join.left_col]
            if probe is not None:
                join_values = join_map.get(probe)
        aggs = agg_rows[seq] if agg_rows and agg_rows[seq] is not None else empty_aggs
        out_rows.append([p.evaluate(values, join_values, aggs) for p in plan.projections])
        if first is not None:
            order_keys.append(
                (
                    tuple(value_text(values[c]) for c in first.key_cols),
                    values[first.ts_col],
                    seq,
                )
            )
    rowids = list(range(n_rows))
    if first is not None:
        order = sorted(range(n_rows), key=lambda i: order_keys[i])
        out_rows = [out_rows[i] for i in order]
        rowids = order
    return OfflineResult(
        columns=[p.name for p in plan.projections],
        types=[p.type for p in plan.projections],
        rows=out_rows,
        rowids=rowids,
    )


def write_csv(result: OfflineResult, fileobj, delimiter: str = ","):
    w = csv.writer(fileobj, delimiter=delimiter, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([value_text(v) for v in row])


def render_csv(result: OfflineResult, delimiter: str = ",") -> str:
    import io

    buf = io.StringIO()
    write_csv(result, buf, delimiter)
    return buf.getvalue()
