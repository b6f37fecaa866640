"""Columnar-agnostic offline dataset files.

One file per table, little-endian throughout:

    magic "FSTB" | u32 format version | u32 schema length | schema JSON
    repeated: u32 record length | encoded row bytes

Records are the same encoded rows the online store keeps, in arrival order,
so file position doubles as the offline row sequence.  Writers take a
process-wide lock per store; readers load whole files (datasets are desk
scale by design).
"""

from __future__ import annotations

import json
import os
import struct
import threading
from dataclasses import dataclass

from .errors import CorruptRow, MissingDataset, SchemaMismatch
from .rowcodec import decode_row
from .schema import TableSchema

MAGIC = b"FSTB"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")


@dataclass
class OfflineDataset:
    db: str
    schema: TableSchema
    rows: list[bytes]

    def __len__(self):
        return len(self.rows)

    def values(self, i: int) -> list:
        return decode_row(self.schema, self.rows[i])

    def iter_values(self):
        for row in self.rows:
            yield decode_row(self.schema, row)


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CorruptRow(f"offline dataset truncated reading {what}")
    return buf


def _write_header(f, schema: TableSchema):
    blob = json.dumps(schema.to_dict(), sort_keys=True).encode()
    f.write(MAGIC)
    f.write(_U32.pack(FORMAT_VERSION))
    f.write(_U32.pack(len(blob)))
    f.write(blob)


def _read_header(f, path: str) -> TableSchema:
    if _read_exact(f, 4, "magic") != MAGIC:
        raise CorruptRow(f"{path} is not an offline dataset file")
    (version,) = _U32.unpack(_read_exact(f, 4, "version"))
    if version != FORMAT_VERSION:
        raise CorruptRow(f"{path}: unsupported dataset format version {version}")
    (schema_len,) = _U32.unpack(_read_exact(f, 4, "schema length"))
    return TableSchema.from_dict(json.loads(_read_exact(f, schema_len, "schema")))


def write_dataset_file(path: str, schema: TableSchema, rows) -> int:
    """Write a standalone dataset file outside any store; returns rows written."""
    count = 0
    with open(path, "wb") as f:
        _write_header(f, schema)
        for row in rows:
            f.write(_U32.pack(len(row)))
            f.write(row)
            count += 1
    return count


def read_dataset_file(path: str, db: str = "") -> OfflineDataset:
    if not os.path.exists(path):
        raise MissingDataset(f"no dataset file at {path}")
    with open(path, "rb") as f:
        schema = _read_header(f, path)
        rows = []
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise CorruptRow(f"{path} truncated in record header")
            (n,) = _U32.unpack(head)
            rows.append(_read_exact(f, n, "record"))
    return OfflineDataset(db, schema, rows)


class OfflineStore:
    """Offline datasets under <root>/offline/<db>/<table>.fstb."""

    def __init__(self, root: str):
        self.root = root
        self._lock = threading.Lock()

    def path_for(self, db: str, table: str) -> str:
        return os.path.join(self.root, "offline", db, f"{table}.fstb")

    def exists(self, db: str, table: str) -> bool:
        return os.path.exists(self.path_for(db, table))

    def write(self, db: str, schema: TableSchema, rows) -> int:
        """Replace the dataset for a table; returns rows written."""
        path = self.path_for(db, schema.name)
        tmp = path + ".tmp"
        with self._lock:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            count = write_dataset_file(tmp, schema, rows)
            os.replace(tmp, path)
        return count

    def append(self, db: str, schema: TableSchema, rows) -> int:
        """Append rows, creating the file if needed; returns rows appended."""
        path = self.path_for(db, schema.name)
        with self._lock:
            if not os.path.exists(path):
                os.makedirs(os.path.dirname(path), exist_ok=True)
                with open(path, "wb") as f:
                    _write_header(f, schema)
            else:
                with open(path, "rb") as f:
                    existing = _read_header(f, path)
                if existing.to_dict() != schema.to_dict():
                    raise SchemaMismatch(
                        f"offline dataset {db}.{schema.name} was written with a different schema"
                    )
            count = 0
            with open(path, "ab") as f:
                for row in rows:
                    f.write(_U32.pack(len(row)))
                    f.write(row)
                    count += 1
        return count

    def read(self, db: str, table: str) -> OfflineDataset:
        path = self.path_for(db, table)
        if not os.path.exists(path):
            raise MissingDataset(f"no offline dataset for {db}.{table}")
        return read_dataset_file(path, db)
