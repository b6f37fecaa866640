"""Embedded latency/throughput benchmark over a deployed feature service.

Builds a synthetic events table with one hot key, deploys a ten-feature
service whose two year-window aggregates are backed by pre-aggregation, then
drives concurrent client threads against the in-process engine. Raw samples
land in bench.json, the summary in bench.csv; the report command turns the
JSON into figures.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
import sys
import threading
import time

YEAR_MS = 365 * 24 * 3_600_000

BENCH_SCHEMA = {
    "name": "events",
    "columns": [
        ["user", "string", False],
        ["ts", "timestamp", False],
        ["amount", "int64", True],
        ["price", "float64", True],
    ],
    "indexes": [{"key_columns": ["user"], "ts_column": "ts", "ttl": {"kind": "none"}}],
}

BENCH_SQL = (
    "SELECT user, "
    "sum(amount) OVER wy AS amt_year, "
    "count(*) OVER wy AS cnt_year, "
    "sum(amount) OVER wr AS amt_100, "
    "min(amount) OVER wr AS min_100, "
    "max(amount) OVER wr AS max_100, "
    "avg(price) OVER wr AS avg_price_100, "
    "count(*) OVER wr AS cnt_100, "
    "max(price) OVER wr AS max_price_100, "
    "sum(amount) OVER wy - sum(amount) OVER wr AS amt_older "
    "FROM events WINDOW "
    f"wy AS (PARTITION BY user ORDER BY ts ROWS_RANGE BETWEEN {YEAR_MS} PRECEDING AND CURRENT ROW), "
    "wr AS (PARTITION BY user ORDER BY ts ROWS BETWEEN 100 PRECEDING AND CURRENT ROW)"
)


def build_fixture(store, rows: int, hot_key: str = "hot"):
    """One hot key whose events span a year; returns the request anchor row."""
    store.create_database("bench")
    store.create_table("bench", BENCH_SCHEMA)
    table = store.catalog.get_table("bench", "events")
    step = max(1, YEAR_MS // max(rows, 1))
    batch = []
    for i in range(rows):
        batch.append([hot_key, 1 + i * step, i % 97, (i % 13) * 0.5])
        if len(batch) == 10_000:
            table.put_many(batch)
            batch.clear()
    if batch:
        table.put_many(batch)

    store.register_preagg("bench", "events", ["user"], "ts", "sum", "amount")
    store.register_preagg("bench", "events", ["user"], "ts", "count")
    store.registry.create_view("hot_features", "bench", BENCH_SQL)
    store.registry.deploy("bench_svc", "v1", "bench", ["hot_features"])
    return {"user": hot_key, "ts": 1 + rows * step}


def _drive(store, row, per_client, samples, lock):
    local = []
    for _ in range(per_client):
        out = store.request("bench_svc", row)
        local.append(out["latency_us"])
    with lock:
        samples.extend(local)


def _quantile(sorted_us, q: float) -> float:
    if not sorted_us:
        return 0.0
    idx = min(len(sorted_us) - 1, int(q * len(sorted_us)))
    return sorted_us[idx]


def run_benchmark(data_dir: str, *, out_dir: str = "bench-out", rows: int = 100_000,
                  requests: int = 2_000, clients: int = 8, warmup: int = 100) -> dict:
    from .runtime import FeatureStore

    store = FeatureStore(data_dir)
    try:
        row = build_fixture(store, rows)
        for _ in range(warmup):
            store.request("bench_svc", row)

        samples: list[int] = []
        lock = threading.Lock()
        per_client = max(1, requests // clients)
        threads = [
            threading.Thread(target=_drive, args=(store, row, per_client, samples, lock))
            for _ in range(clients)
        ]
        # sub-millisecond requests suffer badly under the default 5ms GIL
        # switch interval: one preemption can dwarf the request itself
        old_switch = sys.getswitchinterval()
        sys.setswitchinterval(0.0005)
        t0 = time.perf_counter()
        try:
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        finally:
            sys.setswitchinterval(old_switch)
        wall = time.perf_counter() - t0

        samples.sort()
        total = len(samples)
        summary = {
            "rows": rows,
            "clients": clients,
            "requests": total,
            "wall_seconds": round(wall, 4),
            "throughput_rps": round(total / wall, 1) if wall > 0 else 0.0,
            "p50_ms": _quantile(samples, 0.50) / 1000,
            "p95_ms": _quantile(samples, 0.95) / 1000,
            "p99_ms": _quantile(samples, 0.99) / 1000,
            "max_ms": samples[-1] / 1000 if samples else 0.0,
            "mean_ms": statistics.fmean(samples) / 1000 if samples else 0.0,
            "features": 10,
        }
        preagg = dict(store.preagg.stats)
        result = {"summary": summary, "preagg": preagg, "samples_us": samples}

        os.makedirs(out_dir, exist_ok=True)
        json_path = os.path.join(out_dir, "bench.json")
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(result, f)
        csv_path = os.path.join(out_dir, "bench.csv")
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["metric", "value"])
            for k in sorted(summary):
                w.writerow([k, summary[k]])
            for k in sorted(preagg):
                w.writerow([f"preagg_{k}", preagg[k]])
        result["paths"] = {"json": json_path, "csv": csv_path}
        return result
    finally:
        store.close()
