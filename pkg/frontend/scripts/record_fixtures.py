"""Record HTTP fixtures for the UI tests from a live featstore server.

Starts the real service on a scratch data directory, replays the demo
walkthrough over plain HTTP, and stores each response's exact bytes under
tests/fixtures/. The UI tests replay these bytes through a mocked fetch,
so they prove the rendering path against the true wire format without
needing a Python process at test time.

Rerun after changing any wire format:

    cd frontend
    npm run build
    node scripts/emit-dag-payloads.mjs
    python3 scripts/record_fixtures.py
"""

import json
import pathlib
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.request

BASE = "http://127.0.0.1:8277"
HERE = pathlib.Path(__file__).resolve().parent
FIXTURES = HERE.parent / "tests" / "fixtures"

ORDERS_CSV = "user,ts,amount\nalice,100,5\nalice,180,7\nalice,300,2\nbob,120,10\nbob,450,1\ncarol,260,\n"

SCHEMA = {
    "name": "orders",
    "columns": [["user", "string", False], ["ts", "timestamp", False], ["amount", "int64", True]],
    "indexes": [{"key_columns": ["user"], "ts_column": "ts", "ttl": {"kind": "none"}}],
}

VIEW_SQL = (
    "SELECT user, ts, sum(amount) OVER w AS s, count(*) OVER w AS c FROM orders "
    "WINDOW w AS (PARTITION BY user ORDER BY ts ROWS_RANGE BETWEEN 150 PRECEDING AND CURRENT ROW)"
)


def call(method: str, path: str, body=None) -> bytes:
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(
        BASE + path, data=data, method=method,
        headers={"content-type": "application/json"} if data else {},
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.read()
    except urllib.error.HTTPError as e:
        return e.read()  # error envelopes are fixtures too


def save(name: str, raw: bytes):
    (FIXTURES / name).write_bytes(raw)
    print(f"  {name}: {len(raw)} bytes")


def wait_ready(deadline=15.0):
    start = time.time()
    while time.time() - start < deadline:
        try:
            with urllib.request.urlopen(BASE + "/healthz") as resp:
                if resp.read() == b"ok":
                    return
        except OSError:
            time.sleep(0.25)
    raise SystemExit("server did not come up")


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix="featstore-fixtures-")
    csv_path = pathlib.Path(tmp) / "orders.csv"
    csv_path.write_text(ORDERS_CSV)
    server = subprocess.Popen(
        [sys.executable, "-m", "featstore.cli", "--data-dir", tmp + "/data",
         "serve", "--bind", "127.0.0.1:8277"],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
    )
    try:
        wait_ready()
        call("POST", "/databases", {"name": "shop"})
        call("POST", "/tables", {"db": "shop", "schema": SCHEMA})
        for mode in ("online", "offline"):
            snap = json.loads(call("POST", "/imports", {
                "db": "shop", "table": "orders", "path": str(csv_path), "mode": mode,
            }))
            while True:
                raw = call("GET", f"/jobs/{snap['job_id']}")
                if json.loads(raw)["status"] in ("DONE", "FAILED"):
                    break
                time.sleep(0.1)
            if mode == "online":
                save("job_done.json", raw)

        save("sql_select.json", call("POST", "/sql", {
            "db": "shop", "sql": "SELECT user, ts, amount FROM orders", "mode": "offline",
        }))
        save("sql_insert.json", call("POST", "/sql", {
            "db": "shop", "sql": "INSERT INTO orders VALUES ('dave', 500, 3)", "mode": "online",
        }))
        save("sql_error.json", call("POST", "/sql", {
            "db": "shop", "sql": "SELECT user, FROM orders", "mode": "online",
        }))
        save("sql_error_line2.json", call("POST", "/sql", {
            "db": "shop", "sql": "SELECT user, ts\nFROM orders WINDOW", "mode": "online",
        }))

        call("POST", "/views", {
            "db": "shop", "name": "spend", "sql": VIEW_SQL,
            "descriptions": {"s": "spend in the window", "c": "orders in the window"},
        })
        save("views.json", call("GET", "/views?db=shop"))
        save("preview.json", call("GET", "/views/spend/preview?db=shop&limit=10"))
        save("lineage.json", call("GET", "/lineage/shop/s"))

        call("POST", "/deployments", {
            "service": "spend_svc", "version": "v1", "db": "shop", "views": ["spend"],
        })
        save("deployments.json", call("GET", "/deployments"))
        save("request.json", call("POST", "/services/spend_svc/request", {
            "row": {"user": "alice", "ts": 320},
        }))
        save("request_error.json", call("POST", "/services/spend_svc/request", {
            "row": {"user": "alice", "ts": 320, "bogus": 1},
        }))
        save("catalog.json", call("GET", "/catalog"))

        graphs = json.loads((FIXTURES / "dag_payloads.json").read_text())
        entries = []
        for g in graphs:
            reply = json.loads(call("POST", "/dag/sql", g["payload"]))
            entries.append({"name": g["name"], "payload": g["payload"], "sql": reply["sql"]})
            print(f"  dag {g['name']!r}: {reply['sql'][:60]}...")
        (FIXTURES / "dag_graphs.json").write_text(json.dumps(entries, indent=2) + "\n")
        save("dag_error_cycle.json", call("POST", "/dag/sql", {
            "blocks": [
                {"id": "a", "kind": "PROJECT", "params": {"exprs": [{"expr": "x"}]}},
                {"id": "b", "kind": "PROJECT", "params": {"exprs": [{"expr": "x"}]}},
            ],
            "edges": [{"src": "a", "dst": "b"}, {"src": "b", "dst": "a"}],
        }))
    finally:
        server.terminate()
        server.wait(timeout=10)
    print("fixtures recorded")


if __name__ == "__main__":
    main()
