"""Compact row codec: fixed-size slots plus a variable section for strings.

Byte layout (all little-endian):

    [version u8][total_size u32][null bitmap ceil(C/8)]
    [fixed slots, column order, strings excluded]
    [u32 start offset per string column][string bytes]

Null columns keep their slot (zero-filled) so every column's position is a
pure function of the schema; decoding one field never parses the whole row.
"""

from __future__ import annotations

import struct

from .errors import CorruptRow, IndexOutOfRange, NullViolation, TypeMismatch
from .schema import (
    FIXED_WIDTH,
    INT32_MAX,
    INT32_MIN,
    INT64_MAX,
    INT64_MIN,
    ColumnType,
    TableSchema,
)

ROW_FORMAT_VERSION = 1
_HEADER = struct.Struct("<BI")  # version, total size
HEADER_SIZE = _HEADER.size  # 5 bytes

_PACK = {
    ColumnType.BOOL: struct.Struct("<B"),
    ColumnType.INT32: struct.Struct("<i"),
    ColumnType.INT64: struct.Struct("<q"),
    ColumnType.TIMESTAMP: struct.Struct("<q"),
    ColumnType.FLOAT64: struct.Struct("<d"),
}

_U32 = struct.Struct("<I")


class RowLayout:
    """Precomputed slot positions for one schema."""

    __slots__ = (
        "schema",
        "n_columns",
        "bitmap_off",
        "bitmap_size",
        "fixed_off",
        "fixed_size",
        "offsets_off",
        "n_strings",
        "base_size",
        "col_fixed_off",
        "col_string_ord",
        "col_types",
    )

    def __init__(self, schema: TableSchema):
        self.schema = schema
        self.n_columns = len(schema.columns)
        self.bitmap_off = HEADER_SIZE
        self.bitmap_size = (self.n_columns + 7) // 8
        self.fixed_off = self.bitmap_off + self.bitmap_size
        self.col_types = tuple(c.type for c in schema.columns)
        self.col_fixed_off = []
        self.col_string_ord = []
        off = self.fixed_off
        n_str = 0
        for c in schema.columns:
            if c.type is ColumnType.STRING:
                self.col_fixed_off.append(-1)
                self.col_string_ord.append(n_str)
                n_str += 1
            else:
                self.col_fixed_off.append(off)
                self.col_string_ord.append(-1)
                off += FIXED_WIDTH[c.type]
        self.fixed_size = off - self.fixed_off
        self.offsets_off = off
        self.n_strings = n_str
        # size of everything except the string bytes themselves
        self.base_size = self.offsets_off + 4 * n_str


_layout_cache: dict[int, RowLayout] = {}


def layout_for(schema: TableSchema) -> RowLayout:
    lay = _layout_cache.get(id(schema))
    if lay is None or lay.schema is not schema:
        lay = RowLayout(schema)
        _layout_cache[id(schema)] = lay
    return lay


def _check_value(col, value):
    t = col.type
    if t is ColumnType.BOOL:
        if not isinstance(value, bool):
            raise TypeMismatch(f"column {col.name!r} expects bool, got {type(value).__name__}")
    elif t in (ColumnType.INT32, ColumnType.INT64, ColumnType.TIMESTAMP):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"column {col.name!r} expects int, got {type(value).__name__}")
        lo, hi = (INT32_MIN, INT32_MAX) if t is ColumnType.INT32 else (INT64_MIN, INT64_MAX)
        if not lo <= value <= hi:
            raise TypeMismatch(f"column {col.name!r}: {value} out of {t.value} range")
    elif t is ColumnType.FLOAT64:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"column {col.name!r} expects float, got {type(value).__name__}")
    elif t is ColumnType.STRING:
        if not isinstance(value, str):
            raise TypeMismatch(f"column {col.name!r} expects str, got {type(value).__name__}")


def encode_row(schema: TableSchema, values) -> bytes:
    """Encode one value list. Deterministic: same input, same bytes."""
    lay = layout_for(schema)
    if len(values) != lay.n_columns:
        raise TypeMismatch(
            f"table {schema.name!r} has {lay.n_columns} columns, got {len(values)} values"
        )
    str_blobs = []
    for col, v in zip(schema.columns, values):
        if v is None:
            if not col.nullable:
                raise NullViolation(f"null in non-nullable column {col.name!r}")
            if col.type is ColumnType.STRING:
                str_blobs.append(b"")
        else:
            _check_value(col, v)
            if col.type is ColumnType.STRING:
                str_blobs.append(v.encode("utf-8"))

    total = lay.base_size + sum(len(b) for b in str_blobs)
    buf = bytearray(total)
    _HEADER.pack_into(buf, 0, ROW_FORMAT_VERSION, total)

    bitmap_off = lay.bitmap_off
    var_off = lay.base_size
    str_i = 0
    for i, (col, v) in enumerate(zip(schema.columns, values)):
        if v is None:
            buf[bitmap_off + (i >> 3)] |= 1 << (i & 7)
        if col.type is ColumnType.STRING:
            _U32.pack_into(buf, lay.offsets_off + 4 * str_i, var_off)
            blob = str_blobs[str_i]
            buf[var_off : var_off + len(blob)] = blob
            var_off += len(blob)
            str_i += 1
        elif v is not None:
            if col.type is ColumnType.FLOAT64:
                v = float(v)
            elif col.type is ColumnType.BOOL:
                v = 1 if v else 0
            _PACK[col.type].pack_into(buf, lay.col_fixed_off[i], v)
    return bytes(buf)


def _check_buf(lay: RowLayout, buf: bytes):
    if len(buf) < HEADER_SIZE:
        raise CorruptRow("row buffer shorter than header")
    version, total = _HEADER.unpack_from(buf, 0)
    if version != ROW_FORMAT_VERSION:
        raise CorruptRow(f"unsupported row format version {version}")
    if total != len(buf):
        raise CorruptRow(f"row size field {total} != buffer length {len(buf)}")
    if len(buf) < lay.base_size:
        raise CorruptRow("row buffer shorter than its fixed layout")


def decode_field(schema: TableSchema, buf: bytes, col_index: int):
    """Decode a single column: header + bitmap + that column's slot only."""
    lay = layout_for(schema)
    if not 0 <= col_index < lay.n_columns:
        raise IndexOutOfRange(f"column index {col_index} out of range")
    _check_buf(lay, buf)
    if buf[lay.bitmap_off + (col_index >> 3)] & (1 << (col_index & 7)):
        return None
    t = lay.col_types[col_index]
    if t is ColumnType.STRING:
        ordn = lay.col_string_ord[col_index]
        start = _U32.unpack_from(buf, lay.offsets_off + 4 * ordn)[0]
        if ordn + 1 < lay.n_strings:
            end = _U32.unpack_from(buf, lay.offsets_off + 4 * (ordn + 1))[0]
        else:
            end = len(buf)
        if not lay.base_size <= start <= end <= len(buf):
            raise CorruptRow("string offsets out of bounds")
        return buf[start:end].decode("utf-8")
    v = _PACK[t].unpack_from(buf, lay.col_fixed_off[col_index])[0]
    if t is ColumnType.BOOL:
        return bool(v)
    return v


def decode_row(schema: TableSchema, buf: bytes) -> list:
    lay = layout_for(schema)
    _check_buf(lay, buf)
    return [decode_field(schema, buf, i) for i in range(lay.n_columns)]


def make_field_reader(schema: TableSchema, col_index: int):
    """Build a fast single-column reader for hot scan loops.

    The returned callable assumes well-formed rows produced by encode_row;
    corruption checks stay in decode_field for untrusted buffers.
    """
    lay = layout_for(schema)
    if not 0 <= col_index < lay.n_columns:
        raise IndexOutOfRange(f"column index {col_index} out of range")
    t = lay.col_types[col_index]
    bit_byte = lay.bitmap_off + (col_index >> 3)
    bit_mask = 1 << (col_index & 7)
    if t is ColumnType.STRING:
        ordn = lay.col_string_ord[col_index]
        off = lay.offsets_off + 4 * ordn
        next_off = lay.offsets_off + 4 * (ordn + 1)
        last = ordn + 1 >= lay.n_strings
        u32 = _U32.unpack_from

        def read_str(buf):
            if buf[bit_byte] & bit_mask:
                return None
            start = u32(buf, off)[0]
            end = len(buf) if last else u32(buf, next_off)[0]
            return buf[start:end].decode("utf-8")

        return read_str

    unpack = _PACK[t].unpack_from
    slot = lay.col_fixed_off[col_index]
    if t is ColumnType.BOOL:

        def read_bool(buf):
            if buf[bit_byte] & bit_mask:
                return None
            return bool(unpack(buf, slot)[0])

        return read_bool

    def read_fixed(buf):
        if buf[bit_byte] & bit_mask:
            return None
        return unpack(buf, slot)[0]

    return read_fixed


def encoded_size_bound(schema: TableSchema, values) -> int:
    """Analytic upper bound on the encoded size of one row."""
    lay = layout_for(schema)
    string_bytes = sum(
        len(v.encode("utf-8"))
        for c, v in zip(schema.columns, values)
        if c.type is ColumnType.STRING and v is not None
    )
    return 16 + lay.bitmap_size + lay.fixed_size + 4 * lay.n_strings + string_bytes
