"""Command line driver: serve, import, query, deploy, request, verify, bench.

Every subcommand is a thin client over the same operations the HTTP API
exposes. Embedded mode (--data-dir) runs the engine in-process; server mode
(--server) talks to a running service. Both produce identical documents, so
scripts can switch modes without changing their parsers.

Exit codes: 0 success, 1 caller error (bad flags, engine/API rejections,
unreachable server, verify mismatch), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import FeatStoreError, SqlSyntaxError


class CliError(Exception):
    """Bad invocation; rendered to stderr and mapped to exit code 1."""


class ApiError(Exception):
    """Server-side rejection relayed by the HTTP client."""

    def __init__(self, status: int, payload: dict):
        err = payload.get("error", {})
        self.status = status
        self.code = err.get("code", "InternalError")
        self.message = err.get("message", "")
        self.detail = {k: v for k, v in err.items() if k not in ("code", "message")}
        super().__init__(self.message)


class _Parser(argparse.ArgumentParser):
    # argparse exits the process on usage errors; we want a code-1 return instead
    def error(self, message):
        raise CliError(message)


# --- clients ----------------------------------------------------------------------------


class EmbeddedClient:
    """In-process engine access mirroring the HTTP response documents."""

    def __init__(self, data_dir: str):
        from .runtime import FeatureStore

        self.store = FeatureStore(data_dir)

    def close(self):
        self.store.close()

    def create_database(self, name):
        self.store.create_database(name)
        return {"name": name}

    def create_table(self, db, schema):
        return {"db": db, "schema": self.store.create_table(db, schema).to_dict()}

    def catalog(self):
        return self.store.describe()

    def start_import(self, db, table, path, mode, delimiter, header, null_token):
        job = self.store.ingest.import_csv(
            db, table, path, mode=mode, delimiter=delimiter, header=header, null_token=null_token
        )
        # no server survives this process, so a pending job could never be
        # polled again; embedded jobs therefore run to completion here
        return self.store.ingest.jobs.wait(job.job_id).snapshot()

    def job_status(self, job_id):
        return self.store.ingest.job_status(job_id)

    def list_jobs(self):
        return {"jobs": [j.snapshot() for j in self.store.ingest.jobs.list()]}

    def sql(self, db, text, mode):
        return self.store.sql(db, text, mode=mode)

    def create_view(self, db, name, sql, descriptions):
        return self.store.registry.create_view(name, db, sql, descriptions).to_dict()

    def list_views(self, db):
        return {"views": [v.to_dict() for v in self.store.registry.list_views(db)]}

    def drop_view(self, db, name):
        self.store.registry.drop_view(db, name)
        return {"dropped": name}

    def preview(self, db, name, limit):
        columns, rows = self.store.registry.preview(db, name, self.store.offline, limit)
        return {"columns": columns, "rows": rows}

    def lineage(self, db, feature):
        return self.store.registry.get_lineage(db, feature)

    def start_export(self, db, path, views, sql, format, sign, label):
        job = self.store.ingest.export_offline_samples(
            db, path, views=views, sql=sql, format=format, sign=sign, label=label
        )
        return self.store.ingest.jobs.wait(job.job_id).snapshot()

    def deploy(self, service, version, db, views, description):
        return self.store.registry.deploy(service, version, db, views, description).summary()

    def list_deployments(self, service):
        return {"deployments": [d.summary() for d in self.store.registry.list_deployments(service)]}

    def request(self, service, row, version, sign):
        return self.store.request(service, row, version, sign=sign)

    def verify(self, db, sql, service, version, float_rtol):
        if sql is None:
            sql = self.store.registry.get_deployment(service, version).sql
        return self.store.verify(db, sql, float_rtol=float_rtol).to_dict()


class HttpClient:
    """Same surface as EmbeddedClient, backed by a running service."""

    def __init__(self, base_url: str):
        import httpx

        if "://" not in base_url:
            base_url = "http://" + base_url
        self.http = httpx.Client(base_url=base_url, timeout=60.0)

    def close(self):
        self.http.close()

    def _call(self, method, path, **kwargs):
        resp = self.http.request(method, path, **kwargs)
        if resp.status_code >= 400:
            try:
                payload = resp.json()
            except ValueError:
                payload = {"error": {"code": "InternalError", "message": resp.text}}
            raise ApiError(resp.status_code, payload)
        return resp.json()

    def create_database(self, name):
        return self._call("POST", "/databases", json={"name": name})

    def create_table(self, db, schema):
        return self._call("POST", "/tables", json={"db": db, "schema": schema})

    def catalog(self):
        return self._call("GET", "/catalog")

    def start_import(self, db, table, path, mode, delimiter, header, null_token):
        body = {
            "db": db, "table": table, "path": path, "mode": mode,
            "delimiter": delimiter, "header": header, "null_token": null_token,
        }
        return self._call("POST", "/imports", json=body)

    def job_status(self, job_id):
        return self._call("GET", f"/jobs/{job_id}")

    def list_jobs(self):
        return self._call("GET", "/jobs")

    def sql(self, db, text, mode):
        return self._call("POST", "/sql", json={"db": db, "sql": text, "mode": mode})

    def create_view(self, db, name, sql, descriptions):
        body = {"db": db, "name": name, "sql": sql, "descriptions": descriptions}
        return self._call("POST", "/views", json=body)

    def list_views(self, db):
        return self._call("GET", "/views", params={"db": db})

    def drop_view(self, db, name):
        return self._call("DELETE", f"/views/{name}", params={"db": db})

    def preview(self, db, name, limit):
        return self._call("GET", f"/views/{name}/preview", params={"db": db, "limit": limit})

    def lineage(self, db, feature):
        return self._call("GET", f"/lineage/{db}/{feature}")

    def start_export(self, db, path, views, sql, format, sign, label):
        body = {
            "db": db, "path": path, "views": views, "sql": sql,
            "format": format, "sign": sign, "label": label,
        }
        return self._call("POST", "/exports", json=body)

    def deploy(self, service, version, db, views, description):
        body = {
            "service": service, "version": version, "db": db,
            "views": views, "description": description,
        }
        return self._call("POST", "/deployments", json=body)

    def list_deployments(self, service):
        params = {"service": service} if service else {}
        return self._call("GET", "/deployments", params=params)

    def request(self, service, row, version, sign):
        body = {"row": row, "version": version, "sign": sign}
        return self._call("POST", f"/services/{service}/request", json=body)

    def verify(self, db, sql, service, version, float_rtol):
        body = {"db": db, "sql": sql, "service": service, "version": version,
                "float_rtol": float_rtol}
        return self._call("POST", "/verify", json={k: v for k, v in body.items() if v is not None})


# --- output rendering -------------------------------------------------------------------


def _cell(v):
    if v is None:
        return "NULL"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _print_grid(columns, rows, out):
    widths = [len(c) for c in columns]
    text_rows = [[_cell(v) for v in row] for row in rows]
    for row in text_rows:
        widths = [max(w, len(t)) for w, t in zip(widths, row)]
    out.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip() + "\n")
    out.write("  ".join("-" * w for w in widths) + "\n")
    for row in text_rows:
        out.write("  ".join(t.ljust(w) for t, w in zip(row, widths)).rstrip() + "\n")


def emit(doc, fmt, out=None):
    """Render one response document as a table or as stable json-lines."""
    out = out or sys.stdout
    if fmt == "json-lines":
        if isinstance(doc, dict) and "columns" in doc and "rows" in doc:
            for row in doc["rows"]:
                out.write(json.dumps(dict(zip(doc["columns"], row)), sort_keys=True) + "\n")
        elif isinstance(doc, dict) and len(doc) == 1 and isinstance(next(iter(doc.values())), list):
            for item in next(iter(doc.values())):
                out.write(json.dumps(item, sort_keys=True) + "\n")
        else:
            out.write(json.dumps(doc, sort_keys=True) + "\n")
        return
    if isinstance(doc, dict) and "columns" in doc and "rows" in doc:
        _print_grid(doc["columns"], doc["rows"], out)
        out.write(f"({len(doc['rows'])} rows)\n")
    elif isinstance(doc, dict) and len(doc) == 1 and isinstance(next(iter(doc.values())), list):
        items = next(iter(doc.values()))
        if not items:
            out.write("(none)\n")
        else:
            columns = list(items[0])
            _print_grid(columns, [[json.dumps(i[c]) if isinstance(i[c], (dict, list)) else i[c]
                                   for c in columns] for i in items], out)
    elif isinstance(doc, dict):
        for k, v in doc.items():
            if isinstance(v, (dict, list)):
                v = json.dumps(v, sort_keys=True)
            out.write(f"{k}: {_cell(v)}\n")
    else:
        out.write(f"{doc}\n")


def _print_error(exc, sql_text=None):
    code = getattr(exc, "code", type(exc).__name__)
    sys.stderr.write(f"error [{code}]: {exc}\n")
    # point at the offending column the way the playground does
    line = getattr(exc, "line", None) or (getattr(exc, "detail", None) or {}).get("line")
    column = getattr(exc, "column", None) or (getattr(exc, "detail", None) or {}).get("column")
    if sql_text is not None and line and column:
        lines = sql_text.splitlines()
        if 0 < line <= len(lines):
            sys.stderr.write(f"  {lines[line - 1]}\n  {' ' * (column - 1)}^\n")


# --- subcommand handlers ----------------------------------------------------------------


def _make_client(args):
    if args.server and args.data_dir:
        raise CliError("use exactly one of --server or --data-dir")
    if args.server:
        return HttpClient(args.server)
    if args.data_dir:
        return EmbeddedClient(args.data_dir)
    raise CliError("one of --server or --data-dir is required")


def _read_text(path):
    try:
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None


def _load_json_file(path, what):
    try:
        return json.loads(_read_text(path))
    except ValueError as e:
        raise CliError(f"{what} file {path} is not valid JSON: {e}") from None


def _wait_for_job(client, job_id, fmt):
    import time

    while True:
        snap = client.job_status(job_id)
        if snap["status"] in ("DONE", "FAILED"):
            emit(snap, fmt)
            if snap["status"] == "FAILED":
                for entry in snap["log"]:
                    sys.stderr.write(f"  {entry['ts']} {entry['message']}\n")
                return 1
            return 0
        time.sleep(0.05)


def _cmd_serve(args):
    from .service import resolve_config, serve

    cfg = _load_json_file(args.config, "config") if args.config else {}
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object")
    for key, value in (("bind", args.bind), ("data_dir", args.data_dir),
                       ("import_workers", args.import_workers), ("static_dir", args.static_dir)):
        if value is not None:
            cfg[key] = value
    cfg = resolve_config(cfg)
    sys.stderr.write(f"serving {cfg['data_dir']} on {cfg['bind']}\n")
    serve(cfg)
    return 0


def _cmd_db_create(client, args, fmt):
    emit(client.create_database(args.name), fmt)
    return 0


def _cmd_db_list(client, args, fmt):
    doc = client.catalog()
    emit({"databases": sorted(doc["databases"])}, fmt)
    return 0


def _cmd_table_create(client, args, fmt):
    schema = _load_json_file(args.schema, "schema")
    emit(client.create_table(args.db, schema), fmt)
    return 0


def _cmd_catalog(client, args, fmt):
    emit(client.catalog(), fmt)
    return 0


def _cmd_import(client, args, fmt):
    snap = client.start_import(
        args.db, args.table, args.path, args.mode,
        args.delimiter, not args.no_header, args.null_token,
    )
    if args.wait:
        return _wait_for_job(client, snap["job_id"], fmt)
    emit(snap, fmt)
    # embedded jobs finish before returning, so a failure is already visible
    return 1 if snap["status"] == "FAILED" else 0


def _cmd_job_status(client, args, fmt):
    emit(client.job_status(args.job_id), fmt)
    return 0


def _cmd_job_list(client, args, fmt):
    emit(client.list_jobs(), fmt)
    return 0


def _cmd_sql(client, args, fmt):
    if args.execute is not None:
        try:
            doc = client.sql(args.db, args.execute, args.mode)
        except (FeatStoreError, ApiError) as e:
            _print_error(e, args.execute)
            return 1
        emit(doc, fmt)
        return 0
    # REPL: one statement per line, errors keep the loop alive
    interactive = sys.stdin.isatty()
    while True:
        if interactive:
            sys.stderr.write("featstore> ")
            sys.stderr.flush()
        line = sys.stdin.readline()
        if not line:
            break
        stmt = line.strip()
        if not stmt or stmt.startswith("--"):
            continue
        if stmt in ("exit", "quit"):
            break
        try:
            emit(client.sql(args.db, stmt, args.mode), fmt)
        except (FeatStoreError, ApiError) as e:
            _print_error(e, stmt)
    return 0


def _cmd_view_create(client, args, fmt):
    sql = _read_text(args.file) if args.file else args.sql
    if sql is None:
        raise CliError("give the view SQL inline or with --file")
    descriptions = {}
    for item in args.describe or ():
        name, sep, text = item.partition("=")
        if not sep:
            raise CliError(f"--describe wants feature=text, got {item!r}")
        descriptions[name] = text
    emit(client.create_view(args.db, args.name, sql, descriptions or None), fmt)
    return 0


def _cmd_view_list(client, args, fmt):
    emit(client.list_views(args.db), fmt)
    return 0


def _cmd_view_preview(client, args, fmt):
    emit(client.preview(args.db, args.name, args.limit), fmt)
    return 0


def _cmd_view_drop(client, args, fmt):
    emit(client.drop_view(args.db, args.name), fmt)
    return 0


def _cmd_lineage(client, args, fmt):
    emit(client.lineage(args.db, args.feature), fmt)
    return 0


def _cmd_export(client, args, fmt):
    sql = _read_text(args.plan) if args.plan else args.sql
    views = args.views.split(",") if args.views else None
    if (sql is None) == (views is None):
        raise CliError("give exactly one of --views or --sql/--plan")
    sign = _load_json_file(args.sign, "signature spec") if args.sign else None
    snap = client.start_export(args.db, args.out, views, sql, args.format, sign, args.label)
    if args.wait:
        return _wait_for_job(client, snap["job_id"], fmt)
    emit(snap, fmt)
    return 1 if snap["status"] == "FAILED" else 0


def _cmd_deploy(client, args, fmt):
    views = args.views.split(",")
    emit(client.deploy(args.service, args.version, args.db, views, args.description), fmt)
    return 0


def _cmd_deployments(client, args, fmt):
    emit(client.list_deployments(args.service), fmt)
    return 0


def _cmd_request(client, args, fmt):
    try:
        row = json.loads(args.row)
    except ValueError as e:
        raise CliError(f"request row is not valid JSON: {e}") from None
    sign = _load_json_file(args.sign, "signature spec") if args.sign else None
    emit(client.request(args.service, row, args.version, sign), fmt)
    return 0


def _cmd_verify(client, args, fmt):
    sql = _read_text(args.plan) if args.plan else args.sql
    if sql is None and args.service is None:
        raise CliError("give one of --sql, --plan, or --service")
    report = client.verify(args.db, sql, args.service, args.version, args.rtol)
    emit(report, fmt)
    return 0 if report["ok"] else 1


def _cmd_bench(args):
    from . import bench

    if not args.data_dir:
        raise CliError("bench runs embedded; --data-dir is required")
    result = bench.run_benchmark(
        args.data_dir, out_dir=args.out, rows=args.rows,
        requests=args.requests, clients=args.clients,
    )
    emit(result["summary"], args.output)
    return 0


def _cmd_report(args):
    from . import report

    written = report.render_report(args.bench, args.out)
    for path in written:
        print(path)
    return 0


# --- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="featstore", description=__doc__.splitlines()[0])
    p.add_argument("--server", help="base URL of a running service")
    p.add_argument("--data-dir", help="run embedded against this data directory")
    p.add_argument("--output", choices=("table", "json-lines"), default="table")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--config", help="JSON config file")
    sp.add_argument("--bind")
    sp.add_argument("--import-workers", type=int)
    sp.add_argument("--static-dir")

    sp = sub.add_parser("db", help="database administration")
    dbsub = sp.add_subparsers(dest="action", parser_class=_Parser, required=True)
    dbsub.add_parser("create").add_argument("name")
    dbsub.add_parser("list")

    sp = sub.add_parser("table", help="table administration")
    tsub = sp.add_subparsers(dest="action", parser_class=_Parser, required=True)
    tc = tsub.add_parser("create")
    tc.add_argument("--db", required=True)
    tc.add_argument("--schema", required=True, help="JSON schema document")

    sp = sub.add_parser("catalog", help="show databases, tables, and row counts")

    sp = sub.add_parser("import", help="load a CSV file into a table")
    sp.add_argument("--db", required=True)
    sp.add_argument("--table", required=True)
    sp.add_argument("--mode", choices=("online", "offline"), default="online")
    sp.add_argument("--delimiter", default=",")
    sp.add_argument("--no-header", action="store_true")
    sp.add_argument("--null-token")
    sp.add_argument("--wait", action="store_true", help="block until the job finishes")
    sp.add_argument("path")

    sp = sub.add_parser("job", help="import/export job status")
    jsub = sp.add_subparsers(dest="action", parser_class=_Parser, required=True)
    js = jsub.add_parser("status")
    js.add_argument("job_id", type=int)
    jsub.add_parser("list")

    sp = sub.add_parser("sql", help="SQL playground (REPL without -e)")
    sp.add_argument("--db", required=True)
    sp.add_argument("-e", "--execute", help="run one statement and exit")
    sp.add_argument("--mode", choices=("online", "offline"), default="online")

    sp = sub.add_parser("view", help="manage feature views")
    vsub = sp.add_subparsers(dest="action", parser_class=_Parser, required=True)
    vc = vsub.add_parser("create")
    vc.add_argument("--db", required=True)
    vc.add_argument("name")
    vc.add_argument("sql", nargs="?")
    vc.add_argument("--file", help="read the SQL from a file")
    vc.add_argument("--describe", action="append", metavar="FEATURE=TEXT")
    vl = vsub.add_parser("list")
    vl.add_argument("--db", required=True)
    vp = vsub.add_parser("preview")
    vp.add_argument("--db", required=True)
    vp.add_argument("name")
    vp.add_argument("--limit", type=int, default=10)
    vd = vsub.add_parser("drop")
    vd.add_argument("--db", required=True)
    vd.add_argument("name")

    sp = sub.add_parser("lineage", help="source tables and columns behind a feature")
    sp.add_argument("--db", required=True)
    sp.add_argument("feature")

    sp = sub.add_parser("export", help="write offline samples to a file")
    sp.add_argument("--db", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--views", help="comma-separated view names")
    sp.add_argument("--sql")
    sp.add_argument("--plan", help="read the SQL from a file")
    sp.add_argument("--format", choices=("csv", "fstb", "libsvm"), default="csv")
    sp.add_argument("--sign", help="signature spec JSON file (required for libsvm)")
    sp.add_argument("--label", help="feature used as the libsvm label")
    sp.add_argument("--wait", action="store_true")

    sp = sub.add_parser("deploy", help="freeze views into a feature service version")
    sp.add_argument("--service", required=True)
    sp.add_argument("--version", required=True)
    sp.add_argument("--db", required=True)
    sp.add_argument("--views", required=True, help="comma-separated view names")
    sp.add_argument("--description")

    sp = sub.add_parser("deployments", help="list feature service versions")
    sp.add_argument("--service")

    sp = sub.add_parser("request", help="fire one real-time feature request")
    sp.add_argument("--service", required=True)
    sp.add_argument("--version")
    sp.add_argument("--sign", help="signature spec JSON file")
    sp.add_argument("row", help="request row as a JSON object")

    sp = sub.add_parser("verify", help="offline/online consistency check (nonzero on mismatch)")
    sp.add_argument("--db", required=True)
    sp.add_argument("--sql")
    sp.add_argument("--plan", help="read the SQL from a file")
    sp.add_argument("--service")
    sp.add_argument("--version")
    sp.add_argument("--rtol", type=float, default=0.0)

    sp = sub.add_parser("bench", help="embedded latency/throughput benchmark")
    sp.add_argument("--out", default="bench-out")
    sp.add_argument("--rows", type=int, default=100_000)
    sp.add_argument("--requests", type=int, default=2_000)
    sp.add_argument("--clients", type=int, default=8)

    sp = sub.add_parser("report", help="render figures and CSV from a bench run")
    sp.add_argument("--bench", required=True, help="bench.json produced by the bench command")
    sp.add_argument("--out", default="bench-out")

    return p


_CLIENT_COMMANDS = {
    ("db", "create"): _cmd_db_create,
    ("db", "list"): _cmd_db_list,
    ("table", "create"): _cmd_table_create,
    ("catalog", None): _cmd_catalog,
    ("import", None): _cmd_import,
    ("job", "status"): _cmd_job_status,
    ("job", "list"): _cmd_job_list,
    ("sql", None): _cmd_sql,
    ("view", "create"): _cmd_view_create,
    ("view", "list"): _cmd_view_list,
    ("view", "preview"): _cmd_view_preview,
    ("view", "drop"): _cmd_view_drop,
    ("lineage", None): _cmd_lineage,
    ("export", None): _cmd_export,
    ("deploy", None): _cmd_deploy,
    ("deployments", None): _cmd_deployments,
    ("request", None): _cmd_request,
    ("verify", None): _cmd_verify,
}


def _dispatch(args) -> int:
    if args.command is None:
        raise CliError("a subcommand is required (see --help)")
    if args.command == "serve":
        if args.server:
            raise CliError("serve runs locally; --server does not apply")
        return _cmd_serve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "report":
        return _cmd_report(args)
    handler = _CLIENT_COMMANDS[(args.command, getattr(args, "action", None))]
    client = _make_client(args)
    try:
        return handler(client, args, args.output)
    finally:
        client.close()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args)
    except CliError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except (FeatStoreError, ApiError) as e:
        _print_error(e, getattr(e, "_sql_text", None))
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as e:
        if type(e).__module__.startswith("httpx"):
            sys.stderr.write(f"error: cannot reach server: {e}\n")
            return 1
        sys.stderr.write(f"internal error: {type(e).__name__}: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
