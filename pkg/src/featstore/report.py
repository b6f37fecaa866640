"""Render benchmark figures and a delimited summary from a bench.json run."""

from __future__ import annotations

import csv
import json
import os

from .errors import FileNotFound

PERCENTILES = (0.50, 0.90, 0.95, 0.99)


def _load(bench_path: str) -> dict:
    if not os.path.isfile(bench_path):
        raise FileNotFound(f"no bench results at {bench_path}")
    with open(bench_path, encoding="utf-8") as f:
        doc = json.load(f)
    if "samples_us" not in doc or "summary" not in doc:
        raise FileNotFound(f"{bench_path} is not a bench results file")
    return doc


def render_report(bench_path: str, out_dir: str) -> list[str]:
    """Write latency figures plus summary.csv; returns the paths written."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    doc = _load(bench_path)
    samples_ms = [us / 1000 for us in doc["samples_us"]]
    summary = doc["summary"]
    os.makedirs(out_dir, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.hist(samples_ms, bins=60, color="#4878cf", edgecolor="white")
    p99 = summary["p99_ms"]
    ax.axvline(p99, color="#d65f5f", linestyle="--", label=f"p99 = {p99:.2f} ms")
    ax.set_xlabel("request latency (ms)")
    ax.set_ylabel("requests")
    ax.set_title(
        f"{summary['requests']} requests, {summary['clients']} clients, "
        f"{summary['throughput_rps']:.0f} req/s"
    )
    ax.legend()
    fig.tight_layout()
    path = os.path.join(out_dir, "latency_hist.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    n = len(samples_ms)
    values = [samples_ms[min(n - 1, int(q * n))] for q in PERCENTILES] if n else [0.0] * 4
    labels = [f"p{int(q * 100)}" for q in PERCENTILES]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(labels, values, color="#6acc65")
    ax.bar_label(bars, fmt="%.2f")
    ax.set_ylabel("latency (ms)")
    ax.set_title("latency percentiles")
    fig.tight_layout()
    path = os.path.join(out_dir, "percentiles.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["metric", "value"])
        for k in sorted(summary):
            w.writerow([k, summary[k]])
        for k in sorted(doc.get("preagg", {})):
            w.writerow([f"preagg_{k}", doc["preagg"][k]])
    written.append(path)
    return written
