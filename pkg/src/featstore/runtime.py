"""One-process wiring of the whole engine behind a single facade.

FeatureStore owns the catalog, the online tables, the offline dataset store,
the plan cache, pre-aggregation, the view registry, and the ingest job pool,
all rooted at one data directory:

    <data_dir>/catalog.json        databases and table schemas (not the rows)
    <data_dir>/metadata.json       views and deployments
    <data_dir>/offline/<db>/*.fstb offline datasets

Online rows live in memory only; restarting a server brings the schemas,
views, deployments, and offline datasets back, after which the online side
is repopulated by imports.  The HTTP service and the CLI are both thin
clients of this class.
"""

from __future__ import annotations

import json
import os
import threading
import time

from .consistency import verify as verify_consistency
from .errors import SchemaMismatch
from .featureview import ViewRegistry
from .ingest import IngestEngine, JobManager
from .offline_data import OfflineStore
from .online_exec import execute_online
from .planner import PlanCache
from .preagg import PreAggManager
from .schema import TableSchema
from .signature import SignatureSpec, format_libsvm, sign_values
from .storage import Catalog

CATALOG_FILE = "catalog.json"
METADATA_FILE = "metadata.json"


class FeatureStore:
    def __init__(self, data_dir: str, *, import_workers: int = 2, preagg_bucket_ms: int | None = None):
        os.makedirs(data_dir, exist_ok=True)
        self.data_dir = data_dir
        self.catalog = Catalog()
        self._catalog_path = os.path.join(data_dir, CATALOG_FILE)
        self._catalog_lock = threading.Lock()
        self._load_catalog()
        self.offline = OfflineStore(data_dir)
        self.plans = PlanCache(self.catalog)
        if preagg_bucket_ms is None:
            self.preagg = PreAggManager(self.catalog)
        else:
            self.preagg = PreAggManager(self.catalog, preagg_bucket_ms)
        self.registry = ViewRegistry(self.catalog, os.path.join(data_dir, METADATA_FILE))
        self.ingest = IngestEngine(
            self.catalog, self.offline, registry=self.registry, jobs=JobManager(import_workers)
        )

    def close(self):
        self.ingest.jobs.shutdown()

    # --- catalog (persisted as schemas only) --------------------------------

    def _load_catalog(self):
        if not os.path.exists(self._catalog_path):
            return
        with open(self._catalog_path, encoding="utf-8") as f:
            doc = json.load(f)
        for db in sorted(doc["databases"]):
            self.catalog.create_database(db)
            for schema_doc in doc["databases"][db]:
                self.catalog.create_table(db, TableSchema.from_dict(schema_doc))

    def _save_catalog(self):
        doc = {
            "databases": {
                db: [
                    self.catalog.get_table(db, t).schema.to_dict()
                    for t in self.catalog.list_tables(db)
                ]
                for db in self.catalog.list_databases()
            }
        }
        tmp = self._catalog_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, self._catalog_path)

    def create_database(self, name: str):
        with self._catalog_lock:
            self.catalog.create_database(name)
            self._save_catalog()

    def create_table(self, db: str, schema) -> TableSchema:
        if isinstance(schema, dict):
            schema = TableSchema.from_dict(schema)
        with self._catalog_lock:
            self.catalog.create_table(db, schema)
            self._save_catalog()
        return schema

    def drop_table(self, db: str, name: str):
        with self._catalog_lock:
            self.catalog.drop_table(db, name)
            self._save_catalog()

    def describe(self) -> dict:
        return {
            "databases": {
                db: {
                    t: {
                        "schema": self.catalog.get_table(db, t).schema.to_dict(),
                        "online_rows": self.catalog.get_table(db, t).row_count(),
                        "offline_rows": (
                            len(self.offline.read(db, t)) if self.offline.exists(db, t) else 0
                        ),
                    }
                    for t in self.catalog.list_tables(db)
                }
                for db in self.catalog.list_databases()
            },
            "preagg": self.preagg.describe(),
        }

    # --- serving --------------------------------------------------------------

    def request(self, service: str, row, version: str | None = None, *, sign: dict | None = None) -> dict:
        """Answer one feature request against a deployed service's frozen plan."""
        dep = self.registry.get_deployment(service, version)
        plan = self.plans.get(dep.db, dep.sql)
        values = self._request_values(plan.base_schema, row)
        started = time.perf_counter_ns()
        vector = execute_online(self.catalog, dep.db, plan, values, preagg=self.preagg)
        latency_us = (time.perf_counter_ns() - started) // 1000
        out = {
            "service": dep.service,
            "version": dep.version,
            "names": vector.names,
            "types": [t.value for t in vector.types],
            "values": vector.values,
            "latency_us": latency_us,
        }
        if sign is not None:
            spec = SignatureSpec.from_dict(sign) if isinstance(sign, dict) else sign
            sv = sign_values(vector.names, vector.values, spec)
            out["signed"] = {"slots": [[s, v] for s, v in sv.slots], "libsvm": format_libsvm(sv)}
        return out

    @staticmethod
    def _request_values(schema: TableSchema, row) -> list:
        if isinstance(row, (list, tuple)):
            if len(row) != len(schema.columns):
                raise SchemaMismatch(
                    f"request row needs {len(schema.columns)} values, got {len(row)}"
                )
            return list(row)
        unknown = sorted(set(row) - {c.name for c in schema.columns})
        if unknown:
            raise SchemaMismatch(f"request row has unknown columns: {', '.join(unknown)}")
        return [row.get(c.name) for c in schema.columns]

    # --- playground, verification, preagg ---------------------------------------

    def sql(self, db: str, text: str, *, mode: str = "online") -> dict:
        return self.ingest.exec_statement(db, text, mode=mode)

    def verify(self, db: str, sql: str, *, float_rtol: float = 0.0, online_faults=None):
        plan = self.plans.get(db, sql)
        return verify_consistency(
            self.catalog, db, plan, self.offline,
            float_rtol=float_rtol, online_faults=online_faults,
        )

    def register_preagg(self, db, table, partition_columns, order_column, fn, arg_column=None):
        return self.preagg.register(db, table, partition_columns, order_column, fn, arg_column)
