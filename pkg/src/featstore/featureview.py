"""Feature views, per-feature lineage, and versioned service deployments.

A view is a named, validated query whose output columns become cataloged
features.  Deploying freezes one or more views of the same database into a
single merged plan under (service, version); the newest deployment of a
service is ACTIVE, prior versions become RETAINED and stay requestable by
explicit version.  Frozen plans are stored as canonical query text plus a
schema snapshot, so later view edits never change what a deployed service
computes, and dropping a table a deployment needs is refused.

The registry persists to one JSON document, rewritten atomically on every
mutation.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field

from .errors import (
    DuplicateVersion,
    DuplicateView,
    IncompatibleViews,
    UnknownDeployment,
    UnknownFeature,
    UnknownView,
)
from .offline_exec import execute_offline
from .parser import parse
from .planner import validate
from .schema import ColumnType
from .sqlast import AggCall, BinOp, ColumnRef, FeatureQuery, Star

METADATA_FORMAT = 1


@dataclass
class FeatureMeta:
    name: str
    type: ColumnType
    description: str = ""
    projection_index: int = 0

    def to_dict(self):
        return {
            "name": self.name,
            "type": self.type.value,
            "description": self.description,
            "projection_index": self.projection_index,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], ColumnType(d["type"]), d.get("description", ""), d["projection_index"])


@dataclass
class FeatureView:
    name: str
    db: str
    sql: str  # canonical text
    features: list
    created_at: float

    def summary(self):
        return {
            "name": self.name,
            "db": self.db,
            "sql": self.sql,
            "feature_count": len(self.features),
            "created_at": self.created_at,
        }

    def to_dict(self):
        return {
            "name": self.name,
            "db": self.db,
            "sql": self.sql,
            "features": [f.to_dict() for f in self.features],
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["name"], d["db"], d["sql"],
            [FeatureMeta.from_dict(f) for f in d["features"]],
            d.get("created_at", 0.0),
        )


ACTIVE = "ACTIVE"
RETAINED = "RETAINED"


@dataclass
class Deployment:
    service: str
    version: str
    db: str
    sql: str  # canonical merged text, frozen
    views: list
    status: str
    description: str = ""
    created_at: float = 0.0
    schemas: dict = field(default_factory=dict)  # table -> schema dict snapshot

    def frozen_hash(self) -> str:
        doc = json.dumps({"sql": self.sql, "schemas": self.schemas}, sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()

    def summary(self):
        return {
            "service": self.service,
            "version": self.version,
            "db": self.db,
            "status": self.status,
            "views": list(self.views),
            "sql": self.sql,
            "description": self.description,
            "created_at": self.created_at,
            "frozen_hash": self.frozen_hash(),
        }

    def to_dict(self):
        d = self.summary()
        del d["frozen_hash"]
        d["schemas"] = self.schemas
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["service"], d["version"], d["db"], d["sql"], list(d["views"]),
            d["status"], d.get("description", ""), d.get("created_at", 0.0),
            d.get("schemas", {}),
        )


def merge_queries(queries) -> FeatureQuery:
    """One query computing every projection of the given queries."""
    bases = {q.base_table for q in queries}
    if len(bases) != 1:
        raise IncompatibleViews(f"views span base tables {', '.join(sorted(bases))}")
    windows = {}
    for q in queries:
        for w in q.windows:
            prior = windows.get(w.name)
            if prior is None:
                windows[w.name] = w
            elif prior != w:
                raise IncompatibleViews(f"window {w.name!r} is defined differently across views")
    joins = {q.last_join for q in queries if q.last_join is not None}
    if len(joins) > 1:
        raise IncompatibleViews("views disagree on LAST JOIN")
    projections = []
    seen = {}
    for q in queries:
        for p in q.projections:
            name = p.output_name(len(projections))
            if name in seen and not isinstance(p.expr, Star):
                if p.expr.render() == seen[name]:
                    continue  # same feature contributed twice, keep one copy
                raise IncompatibleViews(f"output name {name!r} collides across views")
            seen[name] = p.expr.render()
            projections.append(p)
    return FeatureQuery(
        bases.pop(),
        tuple(projections),
        tuple(windows.values()),
        joins.pop() if joins else None,
    )


def _expr_sources(expr, query, base_schema, join_schema):
    """(tables, columns) actually read when computing one projection."""
    tables = set()
    columns = set()

    def col(name, qualifier=None):
        if qualifier is None:
            if base_schema.has_column(name):
                tables.add(base_schema.name)
                columns.add((base_schema.name, name))
                return
            qualifier = join_schema.name if join_schema is not None else base_schema.name
        tables.add(qualifier)
        columns.add((qualifier, name))

    def join_keys():
        j = query.last_join
        tables.add(j.table)
        col(j.left.name)
        columns.add((j.table, j.right.name))
        columns.add((j.table, j.order_column))

    def walk(e):
        if isinstance(e, ColumnRef):
            if base_schema.has_column(e.name) and e.table in (None, base_schema.name):
                col(e.name)
            else:
                col(e.name, e.table or (join_schema.name if join_schema else base_schema.name))
                if join_schema is not None and not base_schema.has_column(e.name):
                    join_keys()
        elif isinstance(e, AggCall):
            w = query.window(e.window)
            for c in w.partition_columns:
                col(c)
            col(w.order_column)
            if isinstance(e.arg, ColumnRef):
                col(e.arg.name)
            for t in w.union_tables:
                tables.add(t)
                if isinstance(e.arg, ColumnRef):
                    columns.add((t, e.arg.name))
                for c in w.partition_columns:
                    columns.add((t, c))
                columns.add((t, w.order_column))
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Star):
            for c in base_schema.columns:
                col(c.name)
            if join_schema is not None:
                for c in join_schema.columns:
                    columns.add((join_schema.name, c.name))
                join_keys()

    walk(expr)
    return sorted(tables), sorted(f"{t}.{c}" for t, c in columns)


class ViewRegistry:
    """Catalog of views and deployments, persisted to a single JSON file."""

    def __init__(self, catalog, path: str | None = None):
        self.catalog = catalog
        self.path = path
        self._lock = threading.Lock()
        self.views: dict[tuple, FeatureView] = {}  # (db, name)
        self.deployments: dict[tuple, Deployment] = {}  # (service, version)
        catalog.add_drop_guard(self._drop_guard)
        if path and os.path.exists(path):
            self._load()

    # --- persistence -------------------------------------------------------

    def _load(self):
        with open(self.path, encoding="utf-8") as f:
            doc = json.load(f)
        if doc.get("format") != METADATA_FORMAT:
            raise ValueError(f"unsupported metadata format {doc.get('format')!r}")
        for v in doc.get("views", ()):
            view = FeatureView.from_dict(v)
            self.views[(view.db, view.name)] = view
        for d in doc.get("deployments", ()):
            dep = Deployment.from_dict(d)
            self.deployments[(dep.service, dep.version)] = dep

    def _save(self):
        if not self.path:
            return
        doc = {
            "format": METADATA_FORMAT,
            "views": [v.to_dict() for _, v in sorted(self.views.items())],
            "deployments": [d.to_dict() for _, d in sorted(self.deployments.items())],
        }
        tmp = self.path + ".tmp"
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, self.path)

    def _drop_guard(self, db, table):
        for dep in self.deployments.values():
            if dep.db == db and table in dep.schemas:
                return f"referenced by deployment {dep.service}/{dep.version} ({dep.status})"
        return None

    # --- views -------------------------------------------------------------

    def create_view(self, name: str, db: str, sql: str, descriptions: dict | None = None) -> FeatureView:
        descriptions = descriptions or {}
        query = parse(sql)
        plan = validate(self.catalog, db, query)
        with self._lock:
            if (db, name) in self.views:
                raise DuplicateView(f"view {name!r} already exists in {db}")
            features = [
                FeatureMeta(col, t, descriptions.get(col, ""), i)
                for i, (col, t) in enumerate(plan.output_schema)
            ]
            view = FeatureView(name, db, plan.sql, features, time.time())
            self.views[(db, name)] = view
            self._save()
            return view

    def get_view(self, db: str, name: str) -> FeatureView:
        try:
            return self.views[(db, name)]
        except KeyError:
            raise UnknownView(f"no view {name!r} in {db}") from None

    def list_views(self, db: str | None = None):
        out = [v for v in self.views.values() if db is None or v.db == db]
        return sorted(out, key=lambda v: (v.db, v.name))

    def drop_view(self, db: str, name: str):
        with self._lock:
            if (db, name) not in self.views:
                raise UnknownView(f"no view {name!r} in {db}")
            del self.views[(db, name)]
            self._save()

    def preview(self, db: str, name: str, store, limit: int = 10):
        view = self.get_view(db, name)
        plan = validate(self.catalog, db, parse(view.sql))
        result = execute_offline(store, plan)
        return result.columns, result.rows[: max(0, limit)]

    # --- deployments -------------------------------------------------------

    def deploy(self, service: str, version: str, db: str, view_names, description: str = "") -> Deployment:
        with self._lock:
            if (service, version) in self.deployments:
                raise DuplicateVersion(f"{service} already has a version {version!r}")
            views = [self.get_view(db, n) for n in view_names]
            if not views:
                raise IncompatibleViews("a deployment needs at least one view")
            merged = merge_queries([parse(v.sql) for v in views])
            plan = validate(self.catalog, db, merged)
            schemas = {
                t: self.catalog.get_table(db, t).schema.to_dict()
                for t in plan.referenced_tables()
            }
            for dep in self.deployments.values():
                if dep.service == service and dep.status == ACTIVE:
                    dep.status = RETAINED
            dep = Deployment(
                service, version, db, plan.sql, [v.name for v in views],
                ACTIVE, description, time.time(), schemas,
            )
            self.deployments[(service, version)] = dep
            self._save()
            return dep

    def get_deployment(self, service: str, version: str | None = None) -> Deployment:
        if version is not None:
            try:
                return self.deployments[(service, version)]
            except KeyError:
                raise UnknownDeployment(f"no deployment {service}/{version}") from None
        for dep in self.deployments.values():
            if dep.service == service and dep.status == ACTIVE:
                return dep
        raise UnknownDeployment(f"no active deployment for service {service!r}")

    def list_deployments(self, service: str | None = None):
        out = [d for d in self.deployments.values() if service is None or d.service == service]
        return sorted(out, key=lambda d: (d.service, d.created_at, d.version))

    # --- lineage -----------------------------------------------------------

    def get_lineage(self, db: str, feature_name: str) -> dict:
        for view in self.list_views(db):
            for meta in view.features:
                if meta.name != feature_name:
                    continue
                query = parse(view.sql)
                base_schema = self.catalog.get_table(db, query.base_table).schema
                join_schema = None
                if query.last_join is not None:
                    join_schema = self.catalog.get_table(db, query.last_join.table).schema
                expr = query.projections[meta.projection_index].expr
                tables, columns = _expr_sources(expr, query, base_schema, join_schema)
                return {
                    "feature": feature_name,
                    "view": view.name,
                    "db": db,
                    "sql": view.sql,
                    "type": meta.type.value,
                    "description": meta.description,
                    "source_tables": tables,
                    "source_columns": columns,
                }
        raise UnknownFeature(f"no feature {feature_name!r} in {db}")
