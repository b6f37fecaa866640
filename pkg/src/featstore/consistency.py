"""Online/offline agreement checking.

The verifier replays every dataset row through the online executor, anchored
at that row's (ts, seq), and compares each feature against the offline batch
output.  Before comparing it proves both stores hold the same row multiset,
so a failed comparison always means a computation bug, never an ingestion
gap.

Row multisets are compared with an order-independent checksum: the sum of
the rows' sha256 digests mod 2^256.  Insertion order, skiplist layout, and
file layout all wash out; a single flipped byte does not.
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field

from .errors import DatasetStoreChecksumMismatch
from .offline_exec import execute_offline
from .online_exec import execute_online
from .schema import ColumnType

_MOD = 1 << 256


def _multiset_digest(buffers) -> tuple[int, int]:
    count = 0
    total = 0
    for buf in buffers:
        count += 1
        total = (total + int.from_bytes(hashlib.sha256(buf).digest(), "big")) % _MOD
    return count, total


def dataset_checksum(dataset) -> tuple[int, int]:
    return _multiset_digest(dataset.rows)


def table_checksum(table) -> tuple[int, int]:
    return _multiset_digest(buf for _, _, _, buf in table.iter_rows(0))


@dataclass
class FeatureDiff:
    feature: str
    rowid: int
    key: tuple | None
    ts: int | None
    offline: object
    online: object

    def to_dict(self):
        return {
            "feature": self.feature,
            "rowid": self.rowid,
            "key": list(self.key) if self.key is not None else None,
            "ts": self.ts,
            "offline": self.offline,
            "online": self.online,
        }


@dataclass
class FeatureStats:
    name: str
    matches: int = 0
    mismatches: int = 0
    diffs: list = field(default_factory=list)  # first 10 only

    def to_dict(self):
        return {
            "name": self.name,
            "matches": self.matches,
            "mismatches": self.mismatches,
            "diffs": [d.to_dict() for d in self.diffs],
        }


@dataclass
class ConsistencyReport:
    db: str
    plan_sql: str
    rows_compared: int
    features: list

    @property
    def ok(self) -> bool:
        return all(f.mismatches == 0 for f in self.features)

    @property
    def match_ratio(self) -> float:
        total = sum(f.matches + f.mismatches for f in self.features)
        if total == 0:
            return 1.0
        return sum(f.matches for f in self.features) / total

    def to_dict(self):
        return {
            "db": self.db,
            "plan_sql": self.plan_sql,
            "rows_compared": self.rows_compared,
            "ok": self.ok,
            "match_ratio": self.match_ratio,
            "features": [f.to_dict() for f in self.features],
        }

    def render_text(self) -> str:
        lines = [
            f"consistency report for: {self.plan_sql}",
            f"rows compared: {self.rows_compared}",
            f"overall match ratio: {self.match_ratio:.6f}",
        ]
        for f in self.features:
            lines.append(f"  {f.name}: {f.matches} match, {f.mismatches} mismatch")
            for d in f.diffs:
                lines.append(
                    f"    row {d.rowid} key={d.key} ts={d.ts}: "
                    f"offline={d.offline!r} online={d.online!r}"
                )
        lines.append("RESULT: " + ("CONSISTENT" if self.ok else "INCONSISTENT"))
        return "\n".join(lines)


def _bits(x: float) -> bytes:
    return struct.pack("<d", x)


def _values_match(a, b, col_type, rtol: float) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if col_type is not ColumnType.FLOAT64:
        return a == b
    if rtol == 0.0:
        return _bits(a) == _bits(b)
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def verify(
    catalog,
    db: str,
    plan,
    store,
    *,
    float_rtol: float = 0.0,
    online_faults: dict | None = None,
) -> ConsistencyReport:
    """Run both executors over identical data and compare per feature.

    online_faults ({"skip_unions": ..., "agg_overrides": ...}) feeds the
    online executor's fault-injection seams; the self-test uses it to prove
    the verifier actually catches broken paths.
    """
    for vdb, table_name in sorted(plan.table_versions):
        ds = store.read(vdb, table_name)
        table = catalog.get_table(vdb, table_name)
        d_count, d_sum = dataset_checksum(ds)
        t_count, t_sum = table_checksum(table)
        if (d_count, d_sum) != (t_count, t_sum):
            raise DatasetStoreChecksumMismatch(
                f"{vdb}.{table_name}: offline dataset ({d_count} rows) and online store "
                f"({t_count} rows) hold different data; refusing to compare computations"
            )

    offline = execute_offline(store, plan)
    base_ds = store.read(plan.db, plan.base_table)
    names = offline.columns
    types = [t for _, t in plan.output_schema]
    stats = [FeatureStats(name) for name in names]

    anchor_key_cols = plan.windows[0].key_cols if plan.windows else ()
    anchor_ts_col = plan.windows[0].ts_col if plan.windows else None
    faults = online_faults or {}

    for pos, rowid in enumerate(offline.rowids):
        values = base_ds.values(rowid)
        vec = execute_online(
            catalog,
            db,
            plan,
            values,
            anchor_seq=rowid,
            agg_overrides=faults.get("agg_overrides"),
            skip_unions=faults.get("skip_unions", False),
        )
        offline_row = offline.rows[pos]
        for i, stat in enumerate(stats):
            if _values_match(offline_row[i], vec.values[i], types[i], float_rtol):
                stat.matches += 1
            else:
                stat.mismatches += 1
                if len(stat.diffs) < 10:
                    stat.diffs.append(
                        FeatureDiff(
                            feature=stat.name,
                            rowid=rowid,
                            key=tuple(values[c] for c in anchor_key_cols) or None,
                            ts=values[anchor_ts_col] if anchor_ts_col is not None else None,
                            offline=offline_row[i],
                            online=vec.values[i],
                        )
                    )

    return ConsistencyReport(
        db=db,
        plan_sql=plan.sql,
        rows_compared=len(offline.rowids),
        features=stats,
    )
