"""HTTP face of the feature store.

Every endpoint is a thin translation layer over FeatureStore: decode the
request document, call the engine, encode the result.  No feature value is
computed here.  Engine errors map to one stable machine code each (the error
class name) with the HTTP status the error class declares; parse errors also
carry line/column so clients can point at the offending token.
"""

from __future__ import annotations

import os
import socket

from fastapi import FastAPI
from fastapi.responses import JSONResponse, PlainTextResponse

from .dag import Dag, dag_to_sql
from .errors import BindFailure, FeatStoreError, InvalidSchema, SqlSyntaxError
from .runtime import FeatureStore

DEFAULT_BIND = "127.0.0.1:8250"


def error_payload(exc: FeatStoreError) -> dict:
    err = {"code": exc.code, "message": str(exc)}
    if isinstance(exc, SqlSyntaxError):
        err["line"] = exc.line
        err["column"] = exc.column
        err["expected"] = list(exc.expected)
    return {"error": err}


def _need(payload: dict, *fields):
    missing = [f for f in fields if payload.get(f) is None]
    if missing:
        raise InvalidSchema(f"missing required fields: {', '.join(missing)}")
    return [payload[f] for f in fields]


def create_app(store: FeatureStore, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="featstore", docs_url=None, redoc_url=None)

    @app.exception_handler(FeatStoreError)
    async def _engine_error(request, exc: FeatStoreError):
        return JSONResponse(error_payload(exc), status_code=exc.http_status)

    @app.exception_handler(Exception)
    async def _internal_error(request, exc: Exception):
        payload = {"error": {"code": "InternalError", "message": str(exc) or type(exc).__name__}}
        return JSONResponse(payload, status_code=500)

    @app.get("/healthz")
    async def healthz():
        return PlainTextResponse("ok")

    # --- catalog ---------------------------------------------------------------

    @app.post("/databases", status_code=201)
    def create_database(payload: dict):
        (name,) = _need(payload, "name")
        store.create_database(name)
        return {"name": name}

    @app.post("/tables", status_code=201)
    def create_table(payload: dict):
        db, schema = _need(payload, "db", "schema")
        return {"db": db, "schema": store.create_table(db, schema).to_dict()}

    @app.get("/catalog")
    def catalog():
        return store.describe()

    # --- imports and jobs --------------------------------------------------------

    @app.post("/imports", status_code=202)
    def start_import(payload: dict):
        db, table, path = _need(payload, "db", "table", "path")
        job = store.ingest.import_csv(
            db, table, path,
            mode=payload.get("mode", "online"),
            delimiter=payload.get("delimiter", ","),
            header=payload.get("header", True),
            null_token=payload.get("null_token"),
        )
        return job.snapshot()

    @app.get("/jobs")
    def list_jobs():
        return {"jobs": [j.snapshot() for j in store.ingest.jobs.list()]}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: int):
        return store.ingest.job_status(job_id)

    # --- views and lineage ----------------------------------------------------------

    @app.post("/views", status_code=201)
    def create_view(payload: dict):
        db, name, sql = _need(payload, "db", "name", "sql")
        return store.registry.create_view(name, db, sql, payload.get("descriptions")).to_dict()

    @app.get("/views")
    def list_views(db: str | None = None):
        return {"views": [v.to_dict() for v in store.registry.list_views(db)]}

    @app.get("/views/{name}")
    def get_view(name: str, db: str):
        return store.registry.get_view(db, name).to_dict()

    @app.delete("/views/{name}")
    def drop_view(name: str, db: str):
        store.registry.drop_view(db, name)
        return {"dropped": name}

    @app.get("/views/{name}/preview")
    def preview_view(name: str, db: str, limit: int = 10):
        columns, rows = store.registry.preview(db, name, store.offline, limit)
        return {"columns": columns, "rows": rows}

    @app.get("/lineage/{db}/{feature}")
    def lineage(db: str, feature: str):
        return store.registry.get_lineage(db, feature)

    # --- exports -----------------------------------------------------------------------

    @app.post("/exports", status_code=202)
    def start_export(payload: dict):
        db, path = _need(payload, "db", "path")
        job = store.ingest.export_offline_samples(
            db, path,
            views=payload.get("views"),
            sql=payload.get("sql"),
            format=payload.get("format", "csv"),
            sign=payload.get("sign"),
            label=payload.get("label"),
        )
        return job.snapshot()

    # --- deployments and serving ----------------------------------------------------------

    @app.post("/deployments", status_code=201)
    def deploy(payload: dict):
        service, version, db, views = _need(payload, "service", "version", "db", "views")
        dep = store.registry.deploy(service, version, db, views, payload.get("description", ""))
        return dep.summary()

    @app.get("/deployments")
    def list_deployments(service: str | None = None):
        return {"deployments": [d.summary() for d in store.registry.list_deployments(service)]}

    @app.post("/services/{service}/request")
    def request_features(service: str, payload: dict):
        (row,) = _need(payload, "row")
        return store.request(service, row, payload.get("version"), sign=payload.get("sign"))

    # --- verification and the playground ---------------------------------------------------

    @app.post("/verify")
    def verify(payload: dict):
        (db,) = _need(payload, "db")
        sql = payload.get("sql")
        if sql is None:
            (service,) = _need(payload, "service")
            sql = store.registry.get_deployment(service, payload.get("version")).sql
        report = store.verify(db, sql, float_rtol=payload.get("float_rtol", 0.0))
        return report.to_dict()

    @app.post("/sql")
    def run_sql(payload: dict):
        db, sql = _need(payload, "db", "sql")
        return store.sql(db, sql, mode=payload.get("mode", "online"))

    @app.post("/dag/sql")
    def dag_sql(payload: dict):
        return {"sql": dag_to_sql(Dag.from_dict(payload))}

    if static_dir and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def resolve_config(config: dict | None = None) -> dict:
    """Merge defaults, an explicit config dict, and environment overrides."""
    out = {"bind": DEFAULT_BIND, "data_dir": "featstore-data", "import_workers": 2, "static_dir": None}
    out.update({k: v for k, v in (config or {}).items() if v is not None})
    if os.environ.get("FEATSTORE_BIND"):
        out["bind"] = os.environ["FEATSTORE_BIND"]
    if os.environ.get("FEATSTORE_DATA_DIR"):
        out["data_dir"] = os.environ["FEATSTORE_DATA_DIR"]
    return out


def serve(config: dict | None = None):
    """Run the HTTP service until interrupted; raises BindFailure up front."""
    import uvicorn

    cfg = resolve_config(config)
    host, _, port_text = cfg["bind"].rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise BindFailure(f"bind address {cfg['bind']!r} is not host:port") from None
    try:
        sock = socket.create_server((host or "127.0.0.1", port))
    except OSError as e:
        raise BindFailure(f"cannot bind {cfg['bind']}: {e}") from None

    store = FeatureStore(cfg["data_dir"], import_workers=cfg["import_workers"])
    app = create_app(store, cfg.get("static_dir"))
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning", lifespan="off"))
    try:
        server.run(sockets=[sock])
    finally:
        store.close()
        sock.close()
