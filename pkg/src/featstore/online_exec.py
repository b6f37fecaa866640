"""Real-time execution: one request row in, one feature vector out.

Window rows come straight off the storage indexes, newest-first.  The
request row itself is the CURRENT ROW of every window; stored base rows are
taken strictly before the anchor when an anchor sequence is given (replay
mode), or up to and including the anchor timestamp when it is not (serving
mode, where the request row is transient and never stored).  Union streams
are merged newest-first with ties broken by table rank (base first) then by
sequence, which is exactly the order the offline executor derives from its
sorted datasets.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

from .aggregates import make_state
from .errors import MissingIndexKey
from .planner import ResolvedPlan, ResolvedWindow
from .rowcodec import decode_row, encode_row
from .sqlast import FrameKind

MAX_TS = 2**62  # unbounded anchor for LAST JOIN probes


@dataclass
class FeatureVector:
    names: list[str]
    types: list
    values: list

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))


def _merged_scan(catalog, db, plan, window: ResolvedWindow, key, anchor_ts, anchor_seq,
                 skip_unions=False):
    """Newest-first stream over base plus union tables.

    Base rows respect the exclusive (ts, seq) anchor bound; union rows are
    bounded by ts <= anchor_ts with every tie included.  Merge order is
    (ts desc, table rank asc, seq desc).
    """
    base = catalog.get_table(db, plan.base_table)
    streams = [(0, base.scan_from(window.index_id, key, anchor_ts, anchor_seq))]
    if not skip_unions:
        for rank, (name, index_id) in enumerate(
            zip(window.union_tables, window.union_index_ids), start=1
        ):
            t = catalog.get_table(db, name)
            streams.append((rank, t.scan_from(index_id, key, anchor_ts)))
    if len(streams) == 1:
        return streams[0][1]
    tagged = [
        ((-ts, rank, -seq, row) for ts, seq, row in stream) for rank, stream in streams
    ]
    return (
        (-nts, -nseq, row) for nts, _, nseq, row in heapq.merge(*tagged)
    )


def feed_row(window: ResolvedWindow, states, buf):
    for st, agg in zip(states, window.aggs):
        if agg.reader is None:
            st.add(None)  # count(*) counts the row itself
        else:
            v = agg.reader(buf)
            if v is not None:
                st.add(v)


def _fold_window(window: ResolvedWindow, request_buf, rows):
    """Fold the request row plus a newest-first stored-row stream."""
    frame = window.defn.frame
    states = [make_state(a.fn, a.arg_type, a.n) for a in window.aggs]
    # group aggregates by source column: each row decodes a column once,
    # however many aggregates consume it
    col_feeders = []
    star_states = []
    by_col = {}
    for st, agg in zip(states, window.aggs):
        if agg.reader is None:
            star_states.append(st)
            continue
        entry = by_col.get(agg.arg_col)
        if entry is None:
            entry = (agg.reader, [])
            by_col[agg.arg_col] = entry
            col_feeders.append(entry)
        entry[1].append(st)

    def fold(buf):
        for reader, sts in col_feeders:
            v = reader(buf)
            if v is not None:
                for st in sts:
                    st.add(v)
        for st in star_states:
            st.add(None)

    budget = None
    if frame.kind is FrameKind.ROWS:
        budget = frame.size + 1
    if frame.max_size is not None:
        budget = frame.max_size if budget is None else min(budget, frame.max_size)
    fold(request_buf)
    if budget is not None:
        rows = itertools.islice(rows, budget - 1)
    for ts, seq, buf in rows:
        fold(buf)
    return states


def _range_filtered(rows, low_ts):
    for ts, seq, buf in rows:
        if ts < low_ts:
            break
        yield ts, seq, buf


def execute_online(
    catalog,
    db: str,
    plan: ResolvedPlan,
    request_values: list,
    *,
    anchor_seq: int | None = None,
    preagg=None,
    agg_overrides: dict | None = None,
    skip_unions: bool = False,
) -> FeatureVector:
    """Evaluate one plan for one request row against the online store.

    anchor_seq switches to replay mode: base rows strictly before
    (anchor_ts, anchor_seq) so a stored copy of the request row is not
    counted twice.  agg_overrides and skip_unions are fault-injection seams
    for the consistency checker; serving never sets them.
    """
    for window in plan.windows:
        if any(request_values[c] is None for c in window.key_cols):
            raise MissingIndexKey(
                f"window {window.defn.name!r} key columns must be non-null in the request"
            )
        if request_values[window.ts_col] is None:
            raise MissingIndexKey(
                f"window {window.defn.name!r} order column must be non-null in the request"
            )
    request_buf = encode_row(plan.base_schema, request_values)
    agg_values = [None] * plan.n_agg_slots
    for window in plan.windows:
        key = tuple(request_values[c] for c in window.key_cols)
        anchor_ts = request_values[window.ts_col]
        frame = window.defn.frame
        states = None
        if preagg is not None:
            states = preagg.eval_window(db, plan.base_table, window, key, anchor_ts, anchor_seq)
            if states is not None:
                feed_row(window, states, request_buf)
        if states is None:
            rows = _merged_scan(
                catalog, db, plan, window, key, anchor_ts, anchor_seq, skip_unions
            )
            if frame.kind is FrameKind.RANGE:
                rows = _range_filtered(rows, anchor_ts - frame.size)
            states = _fold_window(window, request_buf, rows)
        for agg, st in zip(window.aggs, states):
            agg_values[agg.slot] = st.result()
    if agg_overrides:
        for slot, v in agg_overrides.items():
            agg_values[slot] = v

    join_values = None
    if plan.join is not None:
        jt = catalog.get_table(db, plan.join.table)
        probe = request_values[plan.join.left_col]
        if probe is not None:
            hit = jt.newest(plan.join.index_id, (probe,), MAX_TS)
            if hit is not None:
                join_values = decode_row(plan.join.schema, hit[2])

    out = [p.evaluate(request_values, join_values, agg_values) for p in plan.projections]
    return FeatureVector(
        names=[p.name for p in plan.projections],
        types=[p.type for p in plan.projections],
        values=out,
    )
