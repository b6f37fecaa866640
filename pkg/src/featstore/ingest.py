"""Data import and export with asynchronous job tracking.

CSV files load into the online store (row puts) or the offline store
(appended dataset records) through background jobs whose status, counters,
and timestamped logs can be polled while they run.  A bad row is rejected
and logged with its line number; the import continues.  The same SQL front
door also accepts INSERT and LOAD DATA statements, and SELECTs run against
offline data.

Export jobs materialize a plan's offline output to CSV, to a dataset file,
or to libsvm lines via a feature signature.
"""

from __future__ import annotations

import csv
import itertools
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

from .errors import (
    FeatStoreError,
    FileNotFound,
    InvalidSchema,
    MissingIndexKey,
    TypeMismatch,
    UnknownJob,
)
from .featureview import merge_queries
from .offline_data import write_dataset_file
from .offline_exec import execute_offline, write_csv
from .parser import InsertStatement, LoadDataStatement, parse, parse_statement
from .planner import validate
from .rowcodec import encode_row
from .schema import Column, ColumnType, TableSchema
from .signature import SignatureSpec, format_libsvm, sign_values

CSV_IMPORT = "CSV_IMPORT"
EXPORT = "EXPORT"

PENDING = "PENDING"
RUNNING = "RUNNING"
DONE = "DONE"
FAILED = "FAILED"

_TRANSITIONS = {PENDING: (RUNNING,), RUNNING: (DONE, FAILED), DONE: (), FAILED: ()}


class ImportJob:
    """Mutable job record; all mutation goes through the methods below."""

    def __init__(self, job_id: int, kind: str, target: str, mode: str):
        self.job_id = job_id
        self.kind = kind
        self.target = target
        self.mode = mode
        self.status = PENDING
        self.rows_ok = 0
        self.rows_rejected = 0
        self._log: list[tuple[float, str]] = []
        self._lock = threading.Lock()

    def log(self, message: str):
        with self._lock:
            now = time.time()
            if self._log and now < self._log[-1][0]:
                now = self._log[-1][0]  # clock went backwards; keep the log monotone
            self._log.append((now, message))

    def _transition(self, new: str):
        with self._lock:
            if new not in _TRANSITIONS[self.status]:
                raise RuntimeError(f"job {self.job_id}: illegal transition {self.status} -> {new}")
            self.status = new

    def start(self):
        self._transition(RUNNING)
        self.log("started")

    def finish(self):
        self.log(f"done: ok={self.rows_ok} rejected={self.rows_rejected}")
        self._transition(DONE)

    def fail(self, reason: str):
        self.log(f"failed: {reason}")
        self._transition(FAILED)

    def ok(self, n: int = 1):
        with self._lock:
            self.rows_ok += n

    def reject(self, reason: str):
        with self._lock:
            self.rows_rejected += 1
        self.log(reason)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "job_id": self.job_id,
                "kind": self.kind,
                "target": self.target,
                "mode": self.mode,
                "status": self.status,
                "rows_ok": self.rows_ok,
                "rows_rejected": self.rows_rejected,
                "log": [
                    {
                        "ts": datetime.fromtimestamp(ts, timezone.utc).isoformat(),
                        "message": m,
                    }
                    for ts, m in self._log
                ],
            }


class JobManager:
    """Runs job bodies on a bounded worker pool and tracks them by id."""

    def __init__(self, workers: int = 2):
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="ingest")
        self._lock = threading.Lock()
        self._jobs: dict[int, ImportJob] = {}
        self._futures: dict[int, object] = {}
        self._ids = itertools.count(1)

    def submit(self, kind: str, target: str, mode: str, body) -> ImportJob:
        with self._lock:
            job = ImportJob(next(self._ids), kind, target, mode)
            self._jobs[job.job_id] = job
            self._futures[job.job_id] = self._pool.submit(self._run, job, body)
        return job

    @staticmethod
    def _run(job: ImportJob, body):
        job.start()
        try:
            body(job)
        except Exception as e:  # noqa: BLE001 - any failure marks the job FAILED
            job.fail(str(e) or type(e).__name__)
        else:
            job.finish()

    def get(self, job_id: int) -> ImportJob:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJob(f"no job {job_id}") from None

    def wait(self, job_id: int, timeout: float = 60.0) -> ImportJob:
        job = self.get(job_id)
        self._futures[job_id].result(timeout)
        return job

    def list(self):
        return [self._jobs[i] for i in sorted(self._jobs)]

    def shutdown(self):
        self._pool.shutdown(wait=True)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1"):
        return True
    if lowered in ("false", "0"):
        return False
    raise ValueError(f"{text!r} is not a bool")


def _parse_timestamp(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    dt = datetime.strptime(text, "%Y-%m-%d %H:%M:%S").replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


_FIELD_PARSERS = {
    ColumnType.BOOL: _parse_bool,
    ColumnType.INT32: int,
    ColumnType.INT64: int,
    ColumnType.FLOAT64: float,
    ColumnType.TIMESTAMP: _parse_timestamp,
    ColumnType.STRING: str,
}


def parse_csv_values(schema: TableSchema, fields, null_token):
    """Texts -> typed values, or ValueError naming the offending column."""
    if len(fields) != len(schema.columns):
        raise ValueError(f"expected {len(schema.columns)} fields, got {len(fields)}")
    values = []
    for col, text in zip(schema.columns, fields):
        if (null_token is None and text == "") or (null_token is not None and text == null_token):
            values.append(None)
            continue
        try:
            values.append(_FIELD_PARSERS[col.type](text))
        except ValueError:
            raise ValueError(f"column {col.name}: {text!r} is not a valid {col.type.value}") from None
    return values


def _check_index_keys(schema: TableSchema, values):
    """Offline twin of the online put's index null checks, so the two import
    modes accept exactly the same rows."""
    for spec in schema.indexes:
        for name in spec.key_columns:
            if values[schema.col_index(name)] is None:
                raise MissingIndexKey(f"index key column {name!r} must be non-null")
        if values[schema.col_index(spec.ts_column)] is None:
            raise MissingIndexKey(f"index order column {spec.ts_column!r} must be non-null")


_OFFLINE_FLUSH_ROWS = 1000


class IngestEngine:
    def __init__(self, catalog, store, registry=None, jobs: JobManager | None = None):
        self.catalog = catalog
        self.store = store
        self.registry = registry
        self.jobs = jobs or JobManager()

    # --- CSV import ----------------------------------------------------------

    def import_csv(
        self,
        db: str,
        table: str,
        path: str,
        *,
        mode: str = "online",
        delimiter: str = ",",
        header: bool = True,
        null_token: str | None = None,
    ) -> ImportJob:
        mode = mode.lower()
        if mode not in ("online", "offline"):
            raise InvalidSchema(f"import mode must be online or offline, got {mode!r}")
        tbl = self.catalog.get_table(db, table)
        if not os.path.isfile(path):
            raise FileNotFound(f"no such file: {path}")

        def body(job):
            self._run_csv_import(job, tbl, db, path, mode, delimiter, header, null_token)

        return self.jobs.submit(CSV_IMPORT, f"{db}.{table}", mode.upper(), body)

    def _run_csv_import(self, job, table, db, path, mode, delimiter, header, null_token):
        schema = table.schema
        job.log(f"importing {path} into {db}.{schema.name} ({mode})")
        buffered = []
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f, delimiter=delimiter)
            for lineno, fields in enumerate(reader, start=1):
                if (header and lineno == 1) or not fields:
                    continue
                try:
                    values = parse_csv_values(schema, fields, null_token)
                    if mode == "online":
                        table.put(values)
                    else:
                        _check_index_keys(schema, values)
                        buffered.append(encode_row(schema, values))
                        if len(buffered) >= _OFFLINE_FLUSH_ROWS:
                            self.store.append(db, schema, buffered)
                            buffered.clear()
                except (ValueError, FeatStoreError) as e:
                    job.reject(f"line {lineno}: {e}")
                    continue
                job.ok()
        if mode == "offline":
            self.store.append(db, schema, buffered)  # also creates an empty dataset

    # --- statements ------------------------------------------------------------

    def exec_statement(self, db: str, sql: str, *, mode: str = "online") -> dict:
        stmt = parse_statement(sql)
        if isinstance(stmt, InsertStatement):
            return self._exec_insert(db, stmt, mode)
        if isinstance(stmt, LoadDataStatement):
            opts = stmt.options
            job = self.import_csv(
                stmt.db or db,
                stmt.table,
                stmt.path,
                mode=opts.get("mode", mode),
                delimiter=opts.get("delimiter", ","),
                header=opts.get("header", True),
                null_token=opts.get("null_token"),
            )
            return {"kind": "load", "job_id": job.job_id, "target": job.target}
        plan = validate(self.catalog, db, stmt)
        result = execute_offline(self.store, plan)
        return {"kind": "select", "columns": result.columns, "rows": result.rows}

    def _exec_insert(self, db, stmt, mode):
        table = self.catalog.get_table(stmt.db or db, stmt.table)
        schema = table.schema
        rows = [list(r) for r in stmt.rows]
        encoded = []
        for row in rows:  # validate the whole statement before storing any row
            if len(row) != len(schema.columns):
                raise TypeMismatch(
                    f"INSERT into {schema.name} needs {len(schema.columns)} values, got {len(row)}"
                )
            _check_index_keys(schema, row)
            encoded.append(encode_row(schema, row))
        if mode == "online":
            for row in rows:
                table.put(row)
        else:
            self.store.append(stmt.db or db, schema, encoded)
        return {"kind": "insert", "table": f"{stmt.db or db}.{stmt.table}", "rows": len(rows), "mode": mode}

    # --- export ----------------------------------------------------------------

    def export_offline_samples(
        self,
        db: str,
        path: str,
        *,
        views=None,
        sql: str | None = None,
        format: str = "csv",
        sign=None,
        label: str | None = None,
    ) -> ImportJob:
        if format not in ("csv", "fstb", "libsvm"):
            raise InvalidSchema(f"export format must be csv, fstb, or libsvm, got {format!r}")
        if format == "libsvm" and sign is None:
            raise InvalidSchema("libsvm export needs a signature spec")
        if isinstance(sign, dict):
            sign = SignatureSpec.from_dict(sign)  # reject bad specs at submit
        if views:
            if self.registry is None:
                raise InvalidSchema("view export needs a view registry")
            merged = merge_queries([parse(self.registry.get_view(db, v).sql) for v in views])
            plan = validate(self.catalog, db, merged)
        elif sql:
            plan = validate(self.catalog, db, parse(sql))
        else:
            raise InvalidSchema("export needs views or sql")

        def body(job):
            job.log(f"exporting {plan.sql}")
            result = execute_offline(self.store, plan)
            if format == "csv":
                with open(path, "w", newline="", encoding="utf-8") as f:
                    write_csv(result, f)
            elif format == "fstb":
                out_schema = TableSchema(
                    "export", [Column(n, t) for n, t in zip(result.columns, result.types)]
                )
                write_dataset_file(path, out_schema, (encode_row(out_schema, r) for r in result.rows))
            else:
                self._write_libsvm(path, result, sign, label)
            job.ok(len(result.rows))
            job.log(f"wrote {len(result.rows)} rows to {path}")

        return self.jobs.submit(EXPORT, path, "OFFLINE", body)

    @staticmethod
    def _write_libsvm(path, result, spec, label):
        names = list(result.columns)
        label_at = None
        if label is not None:
            label_at = names.index(label)
            names = names[:label_at] + names[label_at + 1 :]
        with open(path, "w", encoding="utf-8") as f:
            for row in result.rows:
                values = list(row)
                y = None
                if label_at is not None:
                    y = values.pop(label_at)
                    y = float(y) if y is not None else None
                f.write(format_libsvm(sign_values(names, values, spec, y)) + "\n")

    # --- status ------------------------------------------------------------------

    def job_status(self, job_id: int) -> dict:
        return self.jobs.get(job_id).snapshot()
