"""Shared generators and brute-force oracles used across the test suite.

Oracles here are deliberately independent of the implementation: plain
sorts, filters and dict counting, written from the documented behavior and
not from the code under test.
"""

import math
import random

from featstore.schema import Column, ColumnType, IndexSpec, TableSchema, TtlPolicy

INT32_MIN, INT32_MAX = -(2**31), 2**31 - 1
INT64_MIN, INT64_MAX = -(2**63), 2**63 - 1


def simple_schema(name="events", ttl=None, extra_indexes=()):
    """One STRING key, one TIMESTAMP order column, one column of each type."""
    return TableSchema(
        name=name,
        columns=(
            Column("user", ColumnType.STRING, nullable=False),
            Column("ts", ColumnType.TIMESTAMP, nullable=False),
            Column("flag", ColumnType.BOOL),
            Column("small", ColumnType.INT32),
            Column("amount", ColumnType.INT64),
            Column("score", ColumnType.FLOAT64),
            Column("note", ColumnType.STRING),
        ),
        indexes=(IndexSpec(("user",), "ts", ttl or TtlPolicy.none()),) + tuple(extra_indexes),
    )


def random_value(col, rng, null_rate=0.2):
    if col.nullable and rng.random() < null_rate:
        return None
    t = col.type
    if t is ColumnType.BOOL:
        return rng.random() < 0.5
    if t is ColumnType.INT32:
        return rng.randint(INT32_MIN, INT32_MAX)
    if t is ColumnType.INT64:
        return rng.randint(INT64_MIN, INT64_MAX)
    if t is ColumnType.FLOAT64:
        return rng.choice(
            [rng.uniform(-1e9, 1e9), rng.random(), 0.0, -0.0, float(rng.randint(-5, 5))]
        )
    if t is ColumnType.TIMESTAMP:
        return rng.randint(0, 2**41)
    return "".join(rng.choice("abcdefg é世\U0001f600") for _ in range(rng.randint(0, 12)))


def random_row(schema, rng, null_rate=0.2):
    values = [random_value(c, rng, null_rate) for c in schema.columns]
    for idx in schema.indexes:
        for name in idx.key_columns + (idx.ts_column,):
            i = schema.col_index(name)
            if values[i] is None:
                values[i] = random_value(
                    Column(name, schema.columns[i].type, nullable=False), rng
                )
    return values


def encoded_size_limit(schema, values):
    """The documented bound: 16 + ceil(C/8) + fixed widths + 4*S + string bytes."""
    fixed = {
        ColumnType.BOOL: 1,
        ColumnType.INT32: 4,
        ColumnType.INT64: 8,
        ColumnType.TIMESTAMP: 8,
        ColumnType.FLOAT64: 8,
    }
    total = 16 + math.ceil(len(schema.columns) / 8)
    for col, v in zip(schema.columns, values):
        if col.type is ColumnType.STRING:
            total += 4 + (0 if v is None else len(v.encode("utf-8")))
        else:
            total += fixed[col.type]
    return total


def window_oracle(rows, anchor_ts, frame_kind, size, max_size=None, anchor_seq=None):
    """Brute-force window scan over (ts, seq, payload) tuples.

    Returns newest-first tuples at or before the anchor; anchor_seq bounds
    ties exclusively when given.  frame_kind is "rows", "range" or
    "unbounded" with the documented meaning.
    """
    eligible = []
    for ts, seq, payload in rows:
        if ts > anchor_ts:
            continue
        if anchor_seq is not None and ts == anchor_ts and seq >= anchor_seq:
            continue
        eligible.append((ts, seq, payload))
    eligible.sort(key=lambda r: (r[0], r[1]), reverse=True)
    if frame_kind == "range":
        eligible = [r for r in eligible if r[0] >= anchor_ts - size]
    elif frame_kind == "rows":
        eligible = eligible[: size + 1]
    if max_size is not None:
        eligible = eligible[:max_size]
    return eligible


def make_rng(seed):
    return random.Random(seed)
