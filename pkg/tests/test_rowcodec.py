import math
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featstore.errors import (
    CorruptRow,
    IndexOutOfRange,
    NullViolation,
    TypeMismatch,
)
from featstore.rowcodec import (
    ROW_FORMAT_VERSION,
    decode_field,
    decode_row,
    encode_row,
    encoded_size_bound,
    make_field_reader,
)
from featstore.schema import Column, ColumnType, IndexSpec, TableSchema, TtlPolicy

from helpers import encoded_size_limit, make_rng, random_row, simple_schema


@pytest.fixture
def schema():
    return simple_schema()


SAMPLE = ["alice", 1700000000000, True, -42, 9_000_000_000, 2.5, "hello"]


def test_round_trip_basic(schema):
    assert decode_row(schema, encode_row(schema, SAMPLE)) == SAMPLE


def test_round_trip_nulls(schema):
    values = ["bob", 5, None, None, None, None, None]
    assert decode_row(schema, encode_row(schema, values)) == values


def test_round_trip_empty_and_unicode_strings(schema):
    values = ["", 0, False, 0, 0, 0.0, "é世\U0001f600"]
    assert decode_row(schema, encode_row(schema, values)) == values


def test_header_layout(schema):
    buf = encode_row(schema, SAMPLE)
    assert buf[0] == ROW_FORMAT_VERSION == 1
    (size,) = struct.unpack_from("<I", buf, 1)
    assert size == len(buf)


def test_null_bitmap_bits(schema):
    # bit k of the bitmap (little-endian within bytes) marks column k null
    values = ["x", 1, None, 7, None, 1.0, None]
    buf = encode_row(schema, values)
    bitmap = buf[5 : 5 + math.ceil(len(schema.columns) / 8)]
    for k, v in enumerate(values):
        bit = (bitmap[k // 8] >> (k % 8)) & 1
        assert bit == (1 if v is None else 0)


def test_field_access_without_full_decode(schema):
    buf = encode_row(schema, SAMPLE)
    for i, expected in enumerate(SAMPLE):
        assert decode_field(schema, buf, i) == expected


def test_field_readers(schema):
    buf = encode_row(schema, SAMPLE)
    for i, expected in enumerate(SAMPLE):
        assert make_field_reader(schema, i)(buf) == expected


def test_bool_is_not_an_int(schema):
    values = list(SAMPLE)
    values[3] = True  # INT32 column
    with pytest.raises(TypeMismatch):
        encode_row(schema, values)


def test_int_range_checks(schema):
    for col, bad in ((3, 2**31), (3, -(2**31) - 1), (4, 2**63), (4, -(2**63) - 1)):
        values = list(SAMPLE)
        values[col] = bad
        with pytest.raises(TypeMismatch):
            encode_row(schema, values)


def test_float_accepts_int_payload(schema):
    values = list(SAMPLE)
    values[5] = 7
    assert decode_row(schema, encode_row(schema, values))[5] == 7.0


def test_wrong_arity_and_types(schema):
    with pytest.raises(TypeMismatch):
        encode_row(schema, SAMPLE[:-1])
    values = list(SAMPLE)
    values[6] = 12  # STRING column
    with pytest.raises(TypeMismatch):
        encode_row(schema, values)


def test_null_violation(schema):
    values = list(SAMPLE)
    values[0] = None  # user is non-nullable
    with pytest.raises(NullViolation):
        encode_row(schema, values)


def test_corrupt_buffers(schema):
    buf = encode_row(schema, SAMPLE)
    with pytest.raises(CorruptRow):
        decode_row(schema, buf[:-3])
    with pytest.raises(CorruptRow):
        decode_row(schema, bytes([99]) + buf[1:])
    mangled = bytearray(buf)
    mangled[1:5] = struct.pack("<I", len(buf) + 4)
    with pytest.raises(CorruptRow):
        decode_row(schema, bytes(mangled))


def test_index_out_of_range(schema):
    buf = encode_row(schema, SAMPLE)
    with pytest.raises(IndexOutOfRange):
        decode_field(schema, buf, len(schema.columns))
    with pytest.raises(IndexOutOfRange):
        decode_field(schema, buf, -1)


def test_size_bound_formula_matches_helper(schema):
    # the exported bound and the independently written limit must agree
    for seed in range(50):
        values = random_row(schema, make_rng(seed))
        assert encoded_size_bound(schema, values) == encoded_size_limit(schema, values)
        assert len(encode_row(schema, values)) <= encoded_size_limit(schema, values)


_col_types = st.sampled_from(list(ColumnType))


@st.composite
def schema_and_values(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    types = [draw(_col_types) for _ in range(n)]
    if ColumnType.TIMESTAMP not in types:
        types[0] = ColumnType.TIMESTAMP
    cols, values = [], []
    for i, t in enumerate(types):
        nullable = draw(st.booleans()) and t is not ColumnType.TIMESTAMP
        cols.append(Column(f"c{i}", t, nullable=nullable))
        if nullable and draw(st.booleans()):
            values.append(None)
        elif t is ColumnType.BOOL:
            values.append(draw(st.booleans()))
        elif t is ColumnType.INT32:
            values.append(draw(st.integers(-(2**31), 2**31 - 1)))
        elif t is ColumnType.INT64:
            values.append(draw(st.integers(-(2**63), 2**63 - 1)))
        elif t is ColumnType.FLOAT64:
            values.append(draw(st.floats(allow_nan=False)))
        elif t is ColumnType.TIMESTAMP:
            values.append(draw(st.integers(0, 2**52)))
        else:
            values.append(draw(st.text(max_size=40)))
    ts_name = cols[types.index(ColumnType.TIMESTAMP)].name
    schema = TableSchema(
        "t", tuple(cols), (IndexSpec((cols[0].name,), ts_name, TtlPolicy.none()),)
        if types[0] is not ColumnType.TIMESTAMP or n == 1
        else (IndexSpec((ts_name,), ts_name, TtlPolicy.none()),),
    )
    return schema, values


@settings(max_examples=300, deadline=None)
@given(schema_and_values())
def test_round_trip_and_bound_property(case):
    schema, values = case
    buf = encode_row(schema, values)
    got = decode_row(schema, buf)
    for g, v in zip(got, values):
        if isinstance(v, float):
            assert g == v or (g == 0.0 and v == 0.0)
            assert isinstance(g, float)
        else:
            assert g == v and type(g) is type(v) or v is None and g is None
    assert len(buf) <= encoded_size_limit(schema, values)
