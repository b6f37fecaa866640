"""In-memory table store: per-index skiplist segments under a catalog.

A table holds one skiplist segment per (index, key) pair.  Rows are encoded
once and shared across indexes.  Readers traverse segments without locking;
writers serialize per segment.  Expiry walks segments and reports what it
removed so derived state (pre-aggregations) can react.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Iterator

from .errors import (
    DuplicateDatabase,
    DuplicateTable,
    MissingIndexKey,
    NoMatchingIndex,
    TableInUse,
    UnknownDatabase,
    UnknownIndex,
    UnknownTable,
)
from .rowcodec import decode_field, encode_row
from .schema import TableSchema, TtlKind
from .skiplist import TimeSegment
from .sqlast import Frame, FrameKind

# listener(values, ts_by_index, seq) after a row is visible in every index
InsertListener = Callable[[list, dict, int], None]
# listener(index_id, key, removed_count, oldest_ts, newest_ts) after expiry
ExpireListener = Callable[[int, tuple, int, int, int], None]


class TimeIndex:
    """All segments of one index: key tuple -> TimeSegment."""

    def __init__(self, table: "Table", index_id: int):
        spec = table.schema.indexes[index_id]
        self.index_id = index_id
        self.spec = spec
        self.key_cols = [table.schema.col_index(c) for c in spec.key_columns]
        self.ts_col = table.schema.col_index(spec.ts_column)
        self.segments: dict[tuple, TimeSegment] = {}
        self._lock = threading.Lock()  # guards segment creation only

    def key_of(self, values: list) -> tuple:
        key = tuple(values[i] for i in self.key_cols)
        if any(part is None for part in key):
            raise MissingIndexKey(
                f"index {self.index_id} key columns {self.spec.key_columns} must be non-null"
            )
        return key

    def segment(self, key: tuple, create: bool = False) -> TimeSegment | None:
        seg = self.segments.get(key)
        if seg is None and create:
            with self._lock:
                seg = self.segments.get(key)
                if seg is None:
                    seg = TimeSegment(seed=hash(key) & 0xFFFFFFFF)
                    self.segments[key] = seg
        return seg

    def row_count(self) -> int:
        return sum(seg.size for seg in self.segments.values())


class Table:
    def __init__(self, db: str, schema: TableSchema):
        self.db = db
        self.schema = schema
        self.indexes = [TimeIndex(self, i) for i in range(len(schema.indexes))]
        self._seq = itertools.count()
        self._insert_listeners: list[InsertListener] = []
        self._expire_listeners: list[ExpireListener] = []

    @property
    def name(self) -> str:
        return self.schema.name

    def add_insert_listener(self, fn: InsertListener):
        self._insert_listeners.append(fn)

    def add_expire_listener(self, fn: ExpireListener):
        self._expire_listeners.append(fn)

    def _index_plan(self, values: list) -> list:
        """(index, key, ts) per index, validated before any mutation."""
        plan = []
        for idx in self.indexes:
            key = idx.key_of(values)
            ts = values[idx.ts_col]
            if ts is None:
                raise MissingIndexKey(
                    f"index {idx.index_id} order column {idx.spec.ts_column} must be non-null"
                )
            plan.append((idx, key, ts))
        return plan

    def put(self, values: list) -> int:
        """Insert one row into every index; returns the row's sequence number."""
        if len(values) == len(self.schema.columns):
            self._index_plan(values)  # key/ts null checks come before encoding
        return self.put_encoded(values, encode_row(self.schema, values))

    def put_encoded(self, values: list, row: bytes) -> int:
        """Insert a pre-encoded row (bulk import path); values must match row."""
        plan = self._index_plan(values)
        seq = next(self._seq)
        ts_by_index = {}
        for idx, key, ts in plan:
            idx.segment(key, create=True).insert(ts, seq, row)
            ts_by_index[idx.index_id] = ts
        for fn in self._insert_listeners:
            fn(values, ts_by_index, seq)
        return seq

    def put_many(self, rows) -> list[int]:
        return [self.put(values) for values in rows]

    def index(self, index_id: int) -> TimeIndex:
        if not 0 <= index_id < len(self.indexes):
            raise UnknownIndex(f"{self.name} has no index {index_id}")
        return self.indexes[index_id]

    def find_index(self, partition_columns, order_column) -> int:
        for i, spec in enumerate(self.schema.indexes):
            if spec.matches(partition_columns, order_column):
                return i
        raise NoMatchingIndex(
            f"{self.name} has no index on ({', '.join(partition_columns)}) "
            f"ordered by {order_column}"
        )

    def scan_from(
        self, index_id: int, key: tuple, anchor_ts: int, anchor_seq: int | None = None
    ) -> Iterator[tuple[int, int, bytes]]:
        """Rows newest-first from the anchor: (ts, seq) strictly below
        (anchor_ts, anchor_seq), or ts <= anchor_ts when anchor_seq is None."""
        seg = self.index(index_id).segment(key)
        if seg is None:
            return iter(())
        return seg.iter_from(anchor_ts, anchor_seq)

    def scan_window(
        self, index_id: int, key: tuple, anchor_ts: int, frame: Frame
    ) -> list[tuple[int, int, bytes]]:
        """Stored rows a frame admits at an anchor, newest-first.

        ROWS n keeps at most n + 1 rows at or before the anchor; RANGE d keeps
        every row with anchor_ts - d <= ts <= anchor_ts; MAXSIZE caps the total.
        """
        out = []
        limit = None
        if frame.kind is FrameKind.ROWS:
            limit = frame.size + 1
        if frame.max_size is not None:
            limit = frame.max_size if limit is None else min(limit, frame.max_size)
        low = anchor_ts - frame.size if frame.kind is FrameKind.RANGE else None
        for ts, seq, row in self.scan_from(index_id, key, anchor_ts):
            if low is not None and ts < low:
                break
            out.append((ts, seq, row))
            if limit is not None and len(out) >= limit:
                break
        return out

    def newest(self, index_id: int, key: tuple, anchor_ts: int):
        """Newest row with ts <= anchor_ts, or None; the LAST JOIN probe."""
        for item in self.scan_from(index_id, key, anchor_ts):
            return item
        return None

    def expire(self, now_ts: int) -> int:
        """Apply every index's ttl policy; returns rows removed (per index sum)."""
        removed_total = 0
        for idx in self.indexes:
            ttl = idx.spec.ttl
            if ttl.kind is TtlKind.NONE:
                continue
            for key, seg in list(idx.segments.items()):
                if ttl.kind is TtlKind.ABSOLUTE:
                    dropped = seg.drop_older_than(now_ts - ttl.duration_ms)
                else:
                    dropped = seg.truncate_to_newest(ttl.keep_n)
                if dropped:
                    count, oldest, newest = dropped
                    removed_total += count
                    for fn in self._expire_listeners:
                        fn(idx.index_id, key, count, oldest, newest)
        return removed_total

    def row_count(self) -> int:
        return self.indexes[0].row_count()

    def iter_rows(self, index_id: int = 0) -> Iterator[tuple[tuple, int, int, bytes]]:
        """(key, ts, seq, row) over every segment, keys sorted, newest-first."""
        idx = self.index(index_id)
        for key in sorted(idx.segments, key=lambda k: tuple(map(repr, k))):
            for ts, seq, row in idx.segments[key]:
                yield key, ts, seq, row

    def decode(self, row: bytes, col: int):
        return decode_field(self.schema, row, col)


# guard(db, table_name) -> reason string if the table must not be dropped
DropGuard = Callable[[str, str], str | None]


class Catalog:
    """Databases and tables, with a version stamp per table name.

    The stamp changes whenever a name is (re)created or dropped, so cached
    query plans can detect that the schema they were built against is gone.
    """

    def __init__(self):
        self._dbs: dict[str, dict[str, Table]] = {}
        self._versions: dict[tuple[str, str], int] = {}
        self._version_clock = itertools.count(1)
        self._drop_guards: list[DropGuard] = []
        self._lock = threading.Lock()

    def add_drop_guard(self, fn: DropGuard):
        self._drop_guards.append(fn)

    def create_database(self, db: str):
        with self._lock:
            if db in self._dbs:
                raise DuplicateDatabase(f"database {db} already exists")
            self._dbs[db] = {}

    def has_database(self, db: str) -> bool:
        return db in self._dbs

    def list_databases(self) -> list[str]:
        return sorted(self._dbs)

    def _db(self, db: str) -> dict[str, Table]:
        try:
            return self._dbs[db]
        except KeyError:
            raise UnknownDatabase(f"unknown database {db}") from None

    def create_table(self, db: str, schema: TableSchema) -> Table:
        with self._lock:
            tables = self._db(db)
            if schema.name in tables:
                raise DuplicateTable(f"table {db}.{schema.name} already exists")
            table = Table(db, schema)
            tables[schema.name] = table
            self._versions[(db, schema.name)] = next(self._version_clock)
            return table

    def get_table(self, db: str, name: str) -> Table:
        tables = self._db(db)
        try:
            return tables[name]
        except KeyError:
            raise UnknownTable(f"unknown table {db}.{name}") from None

    def has_table(self, db: str, name: str) -> bool:
        return db in self._dbs and name in self._dbs[db]

    def list_tables(self, db: str) -> list[str]:
        return sorted(self._db(db))

    def drop_table(self, db: str, name: str):
        with self._lock:
            tables = self._db(db)
            if name not in tables:
                raise UnknownTable(f"unknown table {db}.{name}")
            for guard in self._drop_guards:
                reason = guard(db, name)
                if reason:
                    raise TableInUse(f"cannot drop {db}.{name}: {reason}")
            del tables[name]
            self._versions[(db, name)] = next(self._version_clock)

    def table_version(self, db: str, name: str) -> int:
        return self._versions.get((db, name), 0)
