"""Pre-aggregated time buckets for long RANGE windows.

Rows are folded into fixed-width buckets (bucket start = ts floor-divided by
the width) per key as they arrive.  Evaluating a window then merges the full
buckets it covers and raw-scans only the two partial buckets at the ends.
Because the aggregate states are order-independent and exact, the merged
result is bit-identical to the raw scan of the same rows, so this is purely
a cost optimization, never an approximation.

Buckets are kept at three widths (1x, 32x, 1024x) and a span is covered
greedily from the coarsest level down, so the merge count stays roughly
logarithmic in the span instead of linear: a year of hourly buckets takes
~130 merges rather than 8760.

Only decomposable aggregates (sum, count, avg, min, max) can be registered;
distinct_count and top_n_freq would need unbounded per-bucket state to merge
correctly and are refused.  Windows with unions or MAXSIZE never take this
path: MAXSIZE cuts by row count, which buckets cannot express.
"""

from __future__ import annotations

import threading

from .aggregates import make_state
from .errors import NonDecomposableAggregate, UnknownColumn
from .planner import check_agg_arg
from .rowcodec import decode_field
from .sqlast import DECOMPOSABLE_AGGS, FrameKind

DEFAULT_BUCKET_MS = 3_600_000  # one hour
LEVEL_FACTORS = (1, 32, 1024)  # bucket widths as multiples of bucket_ms


class _Spec:
    __slots__ = ("fn", "arg_col", "arg_type", "levels")

    def __init__(self, fn, arg_col, arg_type):
        self.fn = fn
        self.arg_col = arg_col
        self.arg_type = arg_type
        # one {key: {bucket_start: state}} map per level, finest first
        self.levels: list[dict[tuple, dict[int, object]]] = [{} for _ in LEVEL_FACTORS]

    @property
    def buckets(self):
        return self.levels[0]


def _merge_cover(spec, key, st, lo, hi, level, widths) -> int:
    """Merge cached states covering [lo, hi) into st, coarsest blocks first."""
    if lo >= hi:
        return 0
    width = widths[level]
    if level > 0:
        a = lo + (-lo) % width
        b = hi - hi % width
        if a >= b:
            return _merge_cover(spec, key, st, lo, hi, level - 1, widths)
        merged = _merge_cover(spec, key, st, lo, a, level - 1, widths)
        per_key = spec.levels[level].get(key)
        if per_key:
            for start in range(a, b, width):
                bucket = per_key.get(start)
                if bucket is not None:
                    st.merge(bucket)
                    merged += 1
        return merged + _merge_cover(spec, key, st, b, hi, level - 1, widths)
    merged = 0
    per_key = spec.levels[0].get(key)
    if per_key:
        for start in range(lo, hi, width):
            bucket = per_key.get(start)
            if bucket is not None:
                st.merge(bucket)
                merged += 1
    return merged


class _TableAggs:
    """All registered pre-aggregations for one table."""

    def __init__(self, table, bucket_ms: int):
        self.table = table
        self.bucket_ms = bucket_ms
        self.widths = [bucket_ms * f for f in LEVEL_FACTORS]
        self.lock = threading.Lock()
        self.specs: dict[tuple, _Spec] = {}  # (index_id, fn, arg_col) -> spec
        table.add_insert_listener(self._on_insert)
        table.add_expire_listener(self._on_expire)

    def _fold(self, spec: _Spec, key: tuple, ts: int, v):
        for width, level in zip(self.widths, spec.levels):
            per_key = level.setdefault(key, {})
            start = ts - ts % width
            st = per_key.get(start)
            if st is None:
                st = make_state(spec.fn, spec.arg_type)
                per_key[start] = st
            st.add(v)

    def _on_insert(self, values, ts_by_index, seq):
        if not self.specs:
            return
        with self.lock:
            for (index_id, _, _), spec in self.specs.items():
                idx = self.table.index(index_id)
                key = tuple(values[c] for c in idx.key_cols)
                v = True if spec.arg_col is None else values[spec.arg_col]
                if v is None:
                    continue  # null args never fold; count(col) skips them too
                self._fold(spec, key, ts_by_index[index_id], v)

    def _on_expire(self, index_id, key, count, oldest_ts, newest_ts):
        """Rebuild every bucket the removed span touched from surviving rows."""
        width = self.bucket_ms
        with self.lock:
            for (idx_id, _, _), spec in self.specs.items():
                if idx_id != index_id:
                    continue
                per_key = spec.buckets.get(key)
                if per_key is None:
                    continue
                first = oldest_ts - oldest_ts % width
                last = newest_ts - newest_ts % width
                for start in range(first, last + width, width):
                    st = make_state(spec.fn, spec.arg_type)
                    hit = False
                    for ts, _, buf in self.table.scan_from(index_id, key, start + width - 1):
                        if ts < start:
                            break
                        v = (
                            True
                            if spec.arg_col is None
                            else decode_field(self.table.schema, buf, spec.arg_col)
                        )
                        if v is not None:
                            st.add(v)
                            hit = True
                    if hit:
                        per_key[start] = st
                    else:
                        per_key.pop(start, None)
                # coarser levels rebuild from the level below, never from raw rows
                for li in range(1, len(self.widths)):
                    w = self.widths[li]
                    sub_w = self.widths[li - 1]
                    sub = spec.levels[li - 1].get(key) or {}
                    coarse = spec.levels[li].setdefault(key, {})
                    for start in range(oldest_ts - oldest_ts % w, newest_ts - newest_ts % w + w, w):
                        st = make_state(spec.fn, spec.arg_type)
                        hit = False
                        for sub_start in range(start, start + w, sub_w):
                            bucket = sub.get(sub_start)
                            if bucket is not None:
                                st.merge(bucket)
                                hit = True
                        if hit:
                            coarse[start] = st
                        else:
                            coarse.pop(start, None)


class PreAggManager:
    """Registry plus evaluator for bucketed window state."""

    def __init__(self, catalog, bucket_ms: int = DEFAULT_BUCKET_MS):
        self.catalog = catalog
        self.bucket_ms = bucket_ms
        self._tables: dict[tuple, _TableAggs] = {}
        self._lock = threading.Lock()
        self.stats = {"evals": 0, "fallbacks": 0, "bucket_merges": 0, "raw_rows": 0}

    def _table_aggs(self, db, table_name) -> _TableAggs:
        key = (db, table_name)
        with self._lock:
            ta = self._tables.get(key)
            if ta is None:
                ta = _TableAggs(self.catalog.get_table(db, table_name), self.bucket_ms)
                self._tables[key] = ta
            return ta

    def register(self, db, table_name, partition_columns, order_column, fn, arg_column=None):
        """Start maintaining buckets for one aggregate; backfills from the store.

        Idempotent per (index, fn, column).  Register before serving traffic:
        a row arriving mid-backfill can be folded twice.
        """
        if fn not in DECOMPOSABLE_AGGS:
            raise NonDecomposableAggregate(
                f"{fn} cannot be pre-aggregated: partial buckets do not merge"
            )
        table = self.catalog.get_table(db, table_name)
        index_id = table.find_index(partition_columns, order_column)
        arg_col = None
        arg_type = None
        if arg_column is not None:
            if not table.schema.has_column(arg_column):
                raise UnknownColumn(f"no column {arg_column!r} in {table_name}")
            arg_col = table.schema.col_index(arg_column)
            arg_type = table.schema.column(arg_column).type
        elif fn != "count":
            raise UnknownColumn(f"{fn} needs a column argument")
        check_agg_arg(fn, arg_type, f"pre-aggregation on {table_name}")
        ta = self._table_aggs(db, table_name)
        with ta.lock:
            spec_key = (index_id, fn, arg_col)
            if spec_key in ta.specs:
                return ta.specs[spec_key]
            spec = _Spec(fn, arg_col, arg_type)
            for key, ts, _, buf in table.iter_rows(index_id):
                v = True if arg_col is None else decode_field(table.schema, buf, arg_col)
                if v is not None:
                    ta._fold(spec, key, ts, v)
            ta.specs[spec_key] = spec
            return spec

    def describe(self):
        out = []
        with self._lock:
            tables = list(self._tables.items())
        for (db, table_name), ta in tables:
            with ta.lock:
                for (index_id, fn, arg_col), spec in sorted(
                    ta.specs.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or -1)
                ):
                    out.append(
                        {
                            "db": db,
                            "table": table_name,
                            "index_id": index_id,
                            "fn": fn,
                            "arg_column": None
                            if arg_col is None
                            else ta.table.schema.columns[arg_col].name,
                            "bucket_ms": self.bucket_ms,
                            "keys": len(spec.buckets),
                            "buckets": sum(len(b) for b in spec.buckets.values()),
                        }
                    )
        return out

    def eval_window(self, db, table_name, window, key, anchor_ts, anchor_seq):
        """States for the stored rows a RANGE window admits, or None if this
        window is not fully covered by registered pre-aggregations."""
        frame = window.defn.frame
        if (
            frame.kind is not FrameKind.RANGE
            or frame.max_size is not None
            or window.union_tables
        ):
            return None
        ta = self._tables.get((db, table_name))
        if ta is None:
            return None
        with ta.lock:
            specs = []
            for agg in window.aggs:
                spec = ta.specs.get((window.index_id, agg.fn, agg.arg_col))
                if spec is None or agg.n is not None:
                    self.stats["fallbacks"] += 1
                    return None
                specs.append(spec)
            table = ta.table
            width = self.bucket_ms
            low = anchor_ts - frame.size
            b_hi = anchor_ts - anchor_ts % width
            b_lo = low - low % width
            states = [make_state(a.fn, a.arg_type, a.n) for a in window.aggs]
            self.stats["evals"] += 1

            def feed(low_ts, start_ts, seq_bound):
                rows = 0
                for ts, _, buf in table.scan_from(window.index_id, key, start_ts, seq_bound):
                    if ts < low_ts:
                        break
                    rows += 1
                    for agg, st in zip(window.aggs, states):
                        if agg.reader is None:
                            st.add(None)
                        else:
                            v = agg.reader(buf)
                            if v is not None:
                                st.add(v)
                self.stats["raw_rows"] += rows

            if b_hi == b_lo:
                feed(low, anchor_ts, anchor_seq)  # window sits inside one bucket
                return states
            feed(b_hi, anchor_ts, anchor_seq)  # head partial [b_hi, anchor]
            full_start = b_lo + width if low > b_lo else b_lo
            merged = 0
            top = len(ta.widths) - 1
            for spec, st in zip(specs, states):
                merged += _merge_cover(spec, key, st, full_start, b_hi, top, ta.widths)
            self.stats["bucket_merges"] += merged
            if low > b_lo:
                feed(low, b_lo + width - 1, None)  # tail partial [low, b_lo + width)
            return states
