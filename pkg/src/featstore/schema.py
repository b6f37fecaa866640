"""Table schemas: column types, TTL policies, and index declarations."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import InvalidSchema


class ColumnType(enum.Enum):
    BOOL = "bool"
    INT32 = "int32"
    INT64 = "int64"
    FLOAT64 = "float64"
    TIMESTAMP = "timestamp"  # int64 milliseconds since the Unix epoch
    STRING = "string"  # UTF-8

    @property
    def is_numeric(self) -> bool:
        return self in (ColumnType.INT32, ColumnType.INT64, ColumnType.FLOAT64)

    @property
    def is_integer(self) -> bool:
        return self in (ColumnType.INT32, ColumnType.INT64)


# Byte width of each fixed-size type inside an encoded row. STRING columns
# live in the variable section and have no fixed slot.
FIXED_WIDTH = {
    ColumnType.BOOL: 1,
    ColumnType.INT32: 4,
    ColumnType.INT64: 8,
    ColumnType.FLOAT64: 8,
    ColumnType.TIMESTAMP: 8,
}

INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1
INT64_MIN, INT64_MAX = -(2**63), 2**63 - 1


class TtlKind(enum.Enum):
    NONE = "none"
    ABSOLUTE = "absolute"  # keep rows with ts >= now - duration_ms
    LATEST = "latest"  # keep the newest n rows per key


@dataclass(frozen=True)
class TtlPolicy:
    kind: TtlKind = TtlKind.NONE
    duration_ms: int | None = None
    keep_n: int | None = None

    def __post_init__(self):
        if self.kind is TtlKind.ABSOLUTE and (self.duration_ms is None or self.duration_ms <= 0):
            raise InvalidSchema("ABSOLUTE ttl requires a positive duration")
        if self.kind is TtlKind.LATEST and (self.keep_n is None or self.keep_n <= 0):
            raise InvalidSchema("LATEST ttl requires a positive row count")

    @classmethod
    def none(cls) -> "TtlPolicy":
        return cls(TtlKind.NONE)

    @classmethod
    def absolute(cls, duration_ms: int) -> "TtlPolicy":
        return cls(TtlKind.ABSOLUTE, duration_ms=duration_ms)

    @classmethod
    def latest(cls, keep_n: int) -> "TtlPolicy":
        return cls(TtlKind.LATEST, keep_n=keep_n)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value}
        if self.duration_ms is not None:
            d["duration_ms"] = self.duration_ms
        if self.keep_n is not None:
            d["keep_n"] = self.keep_n
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TtlPolicy":
        return cls(TtlKind(d["kind"]), d.get("duration_ms"), d.get("keep_n"))


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType
    nullable: bool = True


@dataclass(frozen=True)
class IndexSpec:
    key_columns: tuple[str, ...]
    ts_column: str
    ttl: TtlPolicy = field(default_factory=TtlPolicy.none)

    def matches(self, partition_columns, order_column) -> bool:
        """Exact match: same key columns in the same order, same ts column."""
        return tuple(partition_columns) == self.key_columns and order_column == self.ts_column


@dataclass
class TableSchema:
    name: str
    columns: list[Column]
    indexes: list[IndexSpec] = field(default_factory=list)

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise InvalidSchema(f"duplicate column names in table {self.name!r}")
        if not self.columns:
            raise InvalidSchema(f"table {self.name!r} has no columns")
        by_name = {c.name: c for c in self.columns}
        for idx in self.indexes:
            for k in idx.key_columns:
                if k not in by_name:
                    raise InvalidSchema(f"index key column {k!r} not in table {self.name!r}")
            ts = by_name.get(idx.ts_column)
            if ts is None:
                raise InvalidSchema(f"index ts column {idx.ts_column!r} not in table {self.name!r}")
            if ts.type is not ColumnType.TIMESTAMP:
                raise InvalidSchema(
                    f"index ts column {idx.ts_column!r} must be TIMESTAMP, got {ts.type.value}"
                )
        self._col_index = {c.name: i for i, c in enumerate(self.columns)}

    def col_index(self, name: str) -> int:
        try:
            return self._col_index[name]
        except KeyError:
            raise InvalidSchema(f"no column {name!r} in table {self.name!r}") from None

    def has_column(self, name: str) -> bool:
        return name in self._col_index

    def column(self, name: str) -> Column:
        return self.columns[self.col_index(name)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "columns": [[c.name, c.type.value, c.nullable] for c in self.columns],
            "indexes": [
                {
                    "key_columns": list(i.key_columns),
                    "ts_column": i.ts_column,
                    "ttl": i.ttl.to_dict(),
                }
                for i in self.indexes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TableSchema":
        cols = [Column(n, ColumnType(t), nullable) for n, t, nullable in d["columns"]]
        indexes = [
            IndexSpec(
                tuple(i["key_columns"]),
                i["ts_column"],
                TtlPolicy.from_dict(i.get("ttl", {"kind": "none"})),
            )
            for i in d.get("indexes", [])
        ]
        return cls(d["name"], cols, indexes)
