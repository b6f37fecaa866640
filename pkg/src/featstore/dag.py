"""Block-graph feature pipelines compiled to query text.

A pipeline is a directed acyclic graph of typed blocks. The supported
topology is a single spine:

    SOURCE [+ SOURCE via LAST_JOIN] -> WINDOW_AGG* -> PROJECT? -> sink

which covers every query the engine can run while staying drawable as a
left-to-right diagram.  Compilation produces ordinary query text, so a
graph and its generated SQL always mean the same plan.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ArityMismatch, CyclicDag, InvalidSchema, MultipleSinks
from .parser import parse_expression
from .sqlast import (
    AggCall,
    BinOp,
    ColumnRef,
    FeatureQuery,
    Frame,
    FrameKind,
    LastJoin,
    Projection,
    Star,
    WindowDef,
    render_query,
)

_ARITY = {"SOURCE": 0, "PROJECT": 1, "WINDOW_AGG": 1, "LAST_JOIN": 2}


@dataclass
class DagBlock:
    id: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class Dag:
    blocks: list[DagBlock]
    edges: list[tuple[str, str]]  # (src, dst); arrival order fixes join sides

    @classmethod
    def from_dict(cls, d: dict) -> "Dag":
        blocks = [
            DagBlock(str(b["id"]), str(b["kind"]), dict(b.get("params") or {}))
            for b in d.get("blocks", ())
        ]
        edges = []
        for e in d.get("edges", ()):
            if isinstance(e, dict):
                edges.append((str(e["src"]), str(e["dst"])))
            else:
                src, dst = e
                edges.append((str(src), str(dst)))
        return cls(blocks, edges)

    def to_dict(self) -> dict:
        return {
            "blocks": [{"id": b.id, "kind": b.kind, "params": b.params} for b in self.blocks],
            "edges": [{"src": s, "dst": d} for s, d in self.edges],
        }


def _check_structure(dag: Dag):
    """ids, kinds, arity, acyclicity, single sink; returns (by_id, inputs, sink)."""
    by_id = {}
    for b in dag.blocks:
        if b.id in by_id:
            raise InvalidSchema(f"duplicate block id {b.id!r}")
        if b.kind not in _ARITY:
            raise InvalidSchema(f"unknown block kind {b.kind!r}")
        by_id[b.id] = b
    if not dag.blocks:
        raise InvalidSchema("empty pipeline")
    inputs = {b.id: [] for b in dag.blocks}
    outdeg = {b.id: 0 for b in dag.blocks}
    for src, dst in dag.edges:
        if src not in by_id or dst not in by_id:
            raise InvalidSchema(f"edge {src!r} -> {dst!r} references a missing block")
        inputs[dst].append(src)
        outdeg[src] += 1
    for b in dag.blocks:
        if len(inputs[b.id]) != _ARITY[b.kind]:
            raise ArityMismatch(
                f"{b.kind} block {b.id!r} takes {_ARITY[b.kind]} input(s), got {len(inputs[b.id])}"
            )
    # Kahn's algorithm; anything left over sits on a cycle
    pending = {bid: len(srcs) for bid, srcs in inputs.items()}
    ready = [bid for bid, n in pending.items() if n == 0]
    seen = 0
    while ready:
        bid = ready.pop()
        seen += 1
        for src, dst in dag.edges:
            if src == bid:
                pending[dst] -= 1
                if pending[dst] == 0:
                    ready.append(dst)
    if seen != len(dag.blocks):
        raise CyclicDag("pipeline edges form a cycle")
    sinks = [bid for bid, n in outdeg.items() if n == 0]
    if len(sinks) > 1:
        raise MultipleSinks(f"pipeline has {len(sinks)} sinks: {', '.join(sorted(sinks))}")
    return by_id, inputs, by_id[sinks[0]]


def _window_from_params(block: DagBlock):
    p = block.params
    try:
        w = p["window"]
        frame = Frame(
            FrameKind(w["frame"]["kind"]),
            w["frame"].get("size"),
            w["frame"].get("max_size"),
        )
        defn = WindowDef(
            w["name"],
            tuple(w["partition_columns"]),
            w["order_column"],
            frame,
            tuple(w.get("union_tables") or ()),
        )
        calls = []
        for a in p["aggs"]:
            arg = Star() if a.get("arg") in (None, "*") else ColumnRef(a["arg"])
            calls.append((a.get("alias"), AggCall(a["fn"], arg, w["name"], n=a.get("n"))))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSchema(f"WINDOW_AGG block {block.id!r} is malformed: {e}") from None
    if not calls:
        raise InvalidSchema(f"WINDOW_AGG block {block.id!r} declares no aggregates")
    return defn, calls


def _inline_aliases(expr, alias_map):
    if isinstance(expr, ColumnRef) and expr.table is None and expr.name in alias_map:
        return alias_map[expr.name]
    if isinstance(expr, BinOp):
        return BinOp(
            expr.op,
            _inline_aliases(expr.left, alias_map),
            _inline_aliases(expr.right, alias_map),
        )
    return expr


def compile_dag(dag: Dag) -> FeatureQuery:
    by_id, inputs, block = _check_structure(dag)

    project = None
    if block.kind == "PROJECT":
        project = block
        block = by_id[inputs[block.id][0]]

    windows = []
    agg_items = []  # (alias, AggCall) in source-to-sink order
    while block.kind == "WINDOW_AGG":
        defn, calls = _window_from_params(block)
        windows.insert(0, defn)
        agg_items[:0] = calls
        block = by_id[inputs[block.id][0]]

    join = None
    if block.kind == "LAST_JOIN":
        left_id, right_id = inputs[block.id]
        left, right = by_id[left_id], by_id[right_id]
        if left.kind != "SOURCE" or right.kind != "SOURCE":
            raise InvalidSchema("LAST_JOIN inputs must both be SOURCE blocks")
        p = block.params
        try:
            join = LastJoin(
                right.params["table"],
                p["order_column"],
                ColumnRef(p["left"]),
                ColumnRef(p["right"]),
            )
        except KeyError as e:
            raise InvalidSchema(f"LAST_JOIN block {block.id!r} is missing {e}") from None
        block = left

    if block.kind != "SOURCE":
        raise InvalidSchema(
            f"{block.kind} block {block.id!r} cannot feed this position; "
            "expected SOURCE -> LAST_JOIN? -> WINDOW_AGG* -> PROJECT?"
        )
    try:
        base_table = block.params["table"]
    except KeyError:
        raise InvalidSchema(f"SOURCE block {block.id!r} names no table") from None

    dup = {w.name for w in windows if sum(v.name == w.name for v in windows) > 1}
    if dup:
        raise InvalidSchema(f"duplicate window names: {', '.join(sorted(dup))}")

    if project is not None:
        alias_map = {alias: call for alias, call in agg_items if alias}
        projections = []
        for item in project.params.get("exprs", ()):
            text, alias = item.get("expr"), item.get("alias")
            if not text:
                raise InvalidSchema(f"PROJECT block {project.id!r} has an empty expression")
            expr = _inline_aliases(parse_expression(text), alias_map)
            projections.append(Projection(expr, alias))
        if not projections:
            raise InvalidSchema(f"PROJECT block {project.id!r} projects nothing")
    elif agg_items:
        projections = [Projection(call, alias) for alias, call in agg_items]
    else:
        projections = [Projection(Star())]

    return FeatureQuery(base_table, tuple(projections), tuple(windows), join)


def dag_to_sql(dag: Dag) -> str:
    return render_query(compile_dag(dag))
