import csv
import socket
import threading

import pytest
from fastapi.testclient import TestClient

from featstore.dag import Dag, DagBlock, dag_to_sql
from featstore.errors import BindFailure
from featstore.online_exec import execute_online
from featstore.runtime import FeatureStore
from featstore.service import create_app, resolve_config, serve
from featstore.signature import Role, SignatureSpec, format_libsvm, sign_values

SCHEMA = {
    "name": "events",
    "columns": [
        ["user", "string", False],
        ["ts", "timestamp", False],
        ["amount", "int64", True],
        ["price", "float64", True],
    ],
    "indexes": [{"key_columns": ["user"], "ts_column": "ts", "ttl": {"kind": "none"}}],
}

W = (
    "WINDOW w AS (PARTITION BY user ORDER BY ts "
    "ROWS_RANGE BETWEEN 10000 PRECEDING AND CURRENT ROW)"
)
VIEW_SQL = f"SELECT user, sum(amount) OVER w AS s, count(*) OVER w AS c FROM events {W}"


@pytest.fixture
def store(tmp_path):
    fs = FeatureStore(str(tmp_path / "data"))
    yield fs
    fs.close()


@pytest.fixture
def client(store):
    return TestClient(create_app(store), raise_server_exceptions=False)


def seed(client, rows=((100, 5, 1.5), (200, 7, 2.5), (300, None, 0.5))):
    assert client.post("/databases", json={"name": "shop"}).status_code == 201
    assert client.post("/tables", json={"db": "shop", "schema": SCHEMA}).status_code == 201
    for ts, amount, price in rows:
        stmt = f"INSERT INTO events VALUES ('u1', {ts}, {amount or 'NULL'}, {price or 'NULL'})"
        for mode in ("online", "offline"):
            r = client.post("/sql", json={"db": "shop", "sql": stmt, "mode": mode})
            assert r.status_code == 200, r.text


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.text == "ok"


def test_catalog_endpoints(client):
    seed(client)
    doc = client.get("/catalog").json()
    assert doc["databases"]["shop"]["events"]["online_rows"] == 3
    assert doc["databases"]["shop"]["events"]["offline_rows"] == 3

    r = client.post("/databases", json={"name": "shop"})
    assert r.status_code == 409
    assert r.json()["error"]["code"] == "DuplicateDatabase"


def test_sql_playground_select_and_errors(client):
    seed(client)
    r = client.post("/sql", json={"db": "shop", "sql": VIEW_SQL})
    assert r.status_code == 200
    body = r.json()
    assert body["kind"] == "select"
    assert body["columns"] == ["user", "s", "c"]
    assert len(body["rows"]) == 3

    r = client.post("/sql", json={"db": "shop", "sql": "SELECT user FROM"})
    assert r.status_code == 400
    err = r.json()["error"]
    assert err["code"] == "SqlSyntaxError"
    assert err["line"] == 1
    assert isinstance(err["column"], int)
    assert err["expected"]

    r = client.post("/sql", json={"db": "shop", "sql": "SELECT user FROM ghost"})
    assert r.status_code == 404
    assert r.json()["error"]["code"] == "UnknownTable"

    r = client.post("/sql", json={"db": "shop"})
    assert r.status_code == 400
    assert "sql" in r.json()["error"]["message"]


def test_csv_import_and_job_polling(client, tmp_path):
    seed(client, rows=())
    path = tmp_path / "in.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["user", "ts", "amount", "price"])
        w.writerows([["u1", 100, 5, 1.5], ["u1", 200, "x", 2.5]])

    r = client.post("/imports", json={"db": "shop", "table": "events", "path": str(path)})
    assert r.status_code == 202
    job_id = r.json()["job_id"]

    snap = client.get(f"/jobs/{job_id}").json()
    while snap["status"] in ("PENDING", "RUNNING"):
        snap = client.get(f"/jobs/{job_id}").json()
    assert snap["status"] == "DONE"
    assert snap["rows_ok"] == 1
    assert snap["rows_rejected"] == 1
    assert any("line 3" in e["message"] for e in snap["log"])

    assert client.get("/jobs/999").status_code == 404
    jobs = client.get("/jobs").json()["jobs"]
    assert [j["job_id"] for j in jobs] == [job_id]

    r = client.post("/imports", json={"db": "shop", "table": "ghost", "path": str(path)})
    assert r.status_code == 404


def test_view_lifecycle_and_lineage(client):
    seed(client)
    r = client.post("/views", json={"db": "shop", "name": "spend", "sql": VIEW_SQL})
    assert r.status_code == 201
    view = r.json()
    assert [f["name"] for f in view["features"]] == ["user", "s", "c"]

    assert client.get("/views", params={"db": "shop"}).json()["views"][0]["name"] == "spend"
    assert client.get("/views/spend", params={"db": "shop"}).json()["sql"] == view["sql"]

    r = client.get("/views/spend/preview", params={"db": "shop", "limit": 2})
    assert r.status_code == 200
    assert r.json()["columns"] == ["user", "s", "c"]
    assert len(r.json()["rows"]) == 2

    lin = client.get("/lineage/shop/s").json()
    assert lin["view"] == "spend"
    assert lin["source_columns"] == ["events.amount", "events.ts", "events.user"]
    assert client.get("/lineage/shop/nope").status_code == 404

    assert client.delete("/views/spend", params={"db": "shop"}).status_code == 200
    assert client.get("/views/spend", params={"db": "shop"}).status_code == 404


def test_deploy_request_parity_and_versions(client, store):
    seed(client)
    client.post("/views", json={"db": "shop", "name": "spend", "sql": VIEW_SQL})
    r = client.post(
        "/deployments",
        json={"service": "scoring", "version": "v1", "db": "shop", "views": ["spend"]},
    )
    assert r.status_code == 201
    assert r.json()["status"] == "ACTIVE"
    assert len(r.json()["frozen_hash"]) == 64

    row = {"user": "u1", "ts": 250}
    r = client.post("/services/scoring/request", json={"row": row})
    assert r.status_code == 200
    body = r.json()
    assert body["names"] == ["user", "s", "c"]
    assert body["types"] == ["string", "int64", "int64"]
    assert body["latency_us"] >= 0

    # the HTTP layer adds no computation: equal to the direct engine call
    plan = store.plans.get("shop", store.registry.get_deployment("scoring").sql)
    direct = execute_online(store.catalog, "shop", plan, ["u1", 250, None, None])
    assert body["values"] == direct.values

    client.post("/views", json={"db": "shop", "name": "later", "sql": VIEW_SQL.replace(" AS c", " AS c2")})
    client.post(
        "/deployments",
        json={"service": "scoring", "version": "v2", "db": "shop", "views": ["later"]},
    )
    deps = client.get("/deployments", params={"service": "scoring"}).json()["deployments"]
    assert [(d["version"], d["status"]) for d in deps] == [("v1", "RETAINED"), ("v2", "ACTIVE")]

    v2 = client.post("/services/scoring/request", json={"row": row}).json()
    assert v2["version"] == "v2"
    v1 = client.post("/services/scoring/request", json={"row": row, "version": "v1"}).json()
    assert v1["version"] == "v1"
    assert v1["values"] == body["values"]

    assert client.post("/services/ghost/request", json={"row": row}).status_code == 404
    r = client.post("/services/scoring/request", json={"row": {"user": "u1", "when": 5}})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "SchemaMismatch"


def test_request_with_signature(client):
    seed(client)
    client.post("/views", json={"db": "shop", "name": "spend", "sql": VIEW_SQL})
    client.post(
        "/deployments",
        json={"service": "scoring", "version": "v1", "db": "shop", "views": ["spend"]},
    )
    sign = {"dimension": 1 << 20, "roles": {"user": "discrete", "s": "continuous", "c": "continuous"}}
    body = client.post(
        "/services/scoring/request", json={"row": {"user": "u1", "ts": 250}, "sign": sign}
    ).json()

    spec = SignatureSpec(1 << 20, {"user": Role.DISCRETE, "s": Role.CONTINUOUS, "c": Role.CONTINUOUS})
    sv = sign_values(body["names"], body["values"], spec)
    assert body["signed"]["slots"] == [[s, v] for s, v in sv.slots]
    assert body["signed"]["libsvm"] == format_libsvm(sv)


def test_verify_endpoint(client):
    seed(client)
    r = client.post("/verify", json={"db": "shop", "sql": VIEW_SQL})
    assert r.status_code == 200
    report = r.json()
    assert report["ok"] is True
    assert report["match_ratio"] == 1.0
    assert report["rows_compared"] == 3

    # verifying a deployment's frozen plan by service name
    client.post("/views", json={"db": "shop", "name": "spend", "sql": VIEW_SQL})
    client.post(
        "/deployments",
        json={"service": "scoring", "version": "v1", "db": "shop", "views": ["spend"]},
    )
    r = client.post("/verify", json={"db": "shop", "service": "scoring"})
    assert r.json()["ok"] is True


def test_export_endpoint(client, tmp_path):
    seed(client)
    out = str(tmp_path / "out.csv")
    r = client.post("/exports", json={"db": "shop", "path": out, "sql": VIEW_SQL})
    assert r.status_code == 202
    job_id = r.json()["job_id"]
    snap = client.get(f"/jobs/{job_id}").json()
    while snap["status"] in ("PENDING", "RUNNING"):
        snap = client.get(f"/jobs/{job_id}").json()
    assert snap["status"] == "DONE"
    assert open(out).read().splitlines()[0] == "user,s,c"


def test_dag_sql_parity(client):
    seed(client)
    dag = Dag(
        [
            DagBlock("src", "SOURCE", {"table": "events"}),
            DagBlock(
                "agg", "WINDOW_AGG",
                {
                    "window": {
                        "name": "w", "partition_columns": ["user"], "order_column": "ts",
                        "frame": {"kind": "range", "size": 10000},
                    },
                    "aggs": [{"fn": "sum", "arg": "amount", "alias": "s"}],
                },
            ),
        ],
        [("src", "agg")],
    )
    r = client.post("/dag/sql", json=dag.to_dict())
    assert r.status_code == 200
    assert r.json()["sql"] == dag_to_sql(dag)

    agg = dag.to_dict()["blocks"][1]
    bad = {
        "blocks": [agg, dict(agg, id="agg2")],
        "edges": [{"src": "agg", "dst": "agg2"}, {"src": "agg2", "dst": "agg"}],
    }
    r = client.post("/dag/sql", json=bad)
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "CyclicDag"


def test_requests_succeed_during_import(client, store, tmp_path):
    seed(client)
    client.post("/views", json={"db": "shop", "name": "spend", "sql": VIEW_SQL})
    client.post(
        "/deployments",
        json={"service": "scoring", "version": "v1", "db": "shop", "views": ["spend"]},
    )
    path = tmp_path / "big.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["user", "ts", "amount", "price"])
        w.writerows([[f"u{i % 5}", i + 1, 1, 0.5] for i in range(20_000)])
    job_id = client.post(
        "/imports", json={"db": "shop", "table": "events", "path": str(path)}
    ).json()["job_id"]

    for _ in range(50):
        r = client.post("/services/scoring/request", json={"row": {"user": "u1", "ts": 350}})
        assert r.status_code == 200
    snap = store.ingest.jobs.wait(job_id).snapshot()
    assert snap["status"] == "DONE"
    assert snap["rows_ok"] == 20_000


def test_bind_failure_and_config(monkeypatch):
    taken = socket.create_server(("127.0.0.1", 0))
    port = taken.getsockname()[1]
    try:
        with pytest.raises(BindFailure, match="cannot bind"):
            serve({"bind": f"127.0.0.1:{port}", "data_dir": "unused"})
    finally:
        taken.close()
    with pytest.raises(BindFailure, match="host:port"):
        serve({"bind": "nonsense"})

    monkeypatch.setenv("FEATSTORE_BIND", "0.0.0.0:9")
    monkeypatch.setenv("FEATSTORE_DATA_DIR", "/tmp/env-dir")
    cfg = resolve_config({"bind": "1.1.1.1:2", "import_workers": 5})
    assert cfg["bind"] == "0.0.0.0:9"
    assert cfg["data_dir"] == "/tmp/env-dir"
    assert cfg["import_workers"] == 5
