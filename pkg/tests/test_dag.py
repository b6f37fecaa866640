import random

import pytest

from featstore.dag import Dag, DagBlock, compile_dag, dag_to_sql
from featstore.errors import ArityMismatch, CyclicDag, InvalidSchema, MultipleSinks
from featstore.parser import parse
from featstore.planner import plan_sql, validate
from featstore.sqlast import render_query
from featstore.storage import Catalog

from genplans import make_fixture_catalog


def source(bid="src", table="events"):
    return DagBlock(bid, "SOURCE", {"table": table})


def window_block(bid, name, aggs, *, partition=("user",), size=5, unions=()):
    return DagBlock(
        bid,
        "WINDOW_AGG",
        {
            "window": {
                "name": name,
                "partition_columns": list(partition),
                "order_column": "ts",
                "frame": {"kind": "rows", "size": size},
                "union_tables": list(unions),
            },
            "aggs": aggs,
        },
    )


def test_source_alone_selects_star():
    dag = Dag([source()], [])
    assert dag_to_sql(dag) == "SELECT * FROM events"


def test_source_plus_window_agg():
    dag = Dag(
        [source(), window_block("w", "w0", [{"fn": "sum", "arg": "amount", "alias": "s"}])],
        [("src", "w")],
    )
    sql = dag_to_sql(dag)
    assert sql == (
        "SELECT sum(amount) OVER w0 AS s FROM events WINDOW w0 AS "
        "(PARTITION BY user ORDER BY ts ROWS BETWEEN 5 PRECEDING AND CURRENT ROW)"
    )


def test_project_inlines_window_aliases():
    dag = Dag(
        [
            source(),
            window_block("w", "w0", [
                {"fn": "sum", "arg": "amount", "alias": "s"},
                {"fn": "count", "arg": "*", "alias": "c"},
            ]),
            DagBlock("p", "PROJECT", {"exprs": [
                {"expr": "user"},
                {"expr": "s / c", "alias": "mean"},
            ]}),
        ],
        [("src", "w"), ("w", "p")],
    )
    sql = dag_to_sql(dag)
    assert "sum(amount) OVER w0 / count(*) OVER w0 AS mean" in sql


def test_last_join_topology():
    dag = Dag(
        [
            source("base", "events"),
            source("right", "profiles"),
            DagBlock("j", "LAST_JOIN", {"order_column": "pts", "left": "user", "right": "uid"}),
            DagBlock("p", "PROJECT", {"exprs": [{"expr": "user"}, {"expr": "level"}]}),
        ],
        [("base", "j"), ("right", "j"), ("j", "p")],
    )
    sql = dag_to_sql(dag)
    assert sql == "SELECT user, level FROM events LAST JOIN profiles ORDER BY pts ON user = uid"


def test_cycle_detected():
    dag = Dag(
        [DagBlock("a", "PROJECT", {"exprs": [{"expr": "x"}]}),
         DagBlock("b", "PROJECT", {"exprs": [{"expr": "x"}]})],
        [("a", "b"), ("b", "a")],
    )
    with pytest.raises(CyclicDag):
        dag_to_sql(dag)


def test_multiple_sinks_detected():
    dag = Dag(
        [source("s1"), source("s2", "profiles")],
        [],
    )
    with pytest.raises(MultipleSinks):
        dag_to_sql(dag)


def test_arity_mismatches():
    with pytest.raises(ArityMismatch):
        dag_to_sql(Dag([source(), DagBlock("p", "PROJECT", {"exprs": [{"expr": "user"}]})], []))
    with pytest.raises(ArityMismatch):
        dag_to_sql(Dag(
            [source("a"), source("b", "profiles"),
             DagBlock("w", "WINDOW_AGG", {})],
            [("a", "w"), ("b", "w")],
        ))
    with pytest.raises(ArityMismatch):
        dag_to_sql(Dag(
            [source("a"), DagBlock("j", "LAST_JOIN", {"order_column": "pts", "left": "user", "right": "uid"})],
            [("a", "j")],
        ))


def test_structural_rejections():
    with pytest.raises(InvalidSchema):
        dag_to_sql(Dag([DagBlock("x", "NOPE", {})], []))
    with pytest.raises(InvalidSchema):
        dag_to_sql(Dag([source("a"), source("a")], []))
    with pytest.raises(InvalidSchema):
        dag_to_sql(Dag([source()], [("src", "ghost")]))
    # PROJECT feeding WINDOW_AGG is not a supported spine
    dag = Dag(
        [
            source(),
            DagBlock("p", "PROJECT", {"exprs": [{"expr": "user"}]}),
            window_block("w", "w0", [{"fn": "count", "arg": "*", "alias": "c"}]),
        ],
        [("src", "p"), ("p", "w")],
    )
    with pytest.raises(InvalidSchema):
        dag_to_sql(dag)


def test_duplicate_window_names_rejected():
    dag = Dag(
        [
            source(),
            window_block("w1", "w", [{"fn": "count", "arg": "*", "alias": "a"}]),
            window_block("w2", "w", [{"fn": "count", "arg": "*", "alias": "b"}]),
        ],
        [("src", "w1"), ("w1", "w2")],
    )
    with pytest.raises(InvalidSchema):
        dag_to_sql(dag)


def test_dict_round_trip():
    dag = Dag(
        [source(), window_block("w", "w0", [{"fn": "max", "arg": "price", "alias": "m"}])],
        [("src", "w")],
    )
    clone = Dag.from_dict(dag.to_dict())
    assert dag_to_sql(clone) == dag_to_sql(dag)


AGG_CHOICES = [
    ("sum", "amount"), ("sum", "price"), ("avg", "qty"), ("min", "amount"),
    ("max", "price"), ("count", "*"), ("count", "flag"), ("distinct_count", "cat"),
]


def random_dag(rng: random.Random) -> Dag:
    blocks = [source()]
    edges = []
    prev = "src"
    joined = rng.random() < 0.4
    if joined:
        blocks.append(source("right", "profiles"))
        blocks.append(DagBlock("j", "LAST_JOIN", {"order_column": "pts", "left": "user", "right": "uid"}))
        edges += [("src", "j"), ("right", "j")]
        prev = "j"
    aliases = []
    for i in range(rng.randrange(1, 3)):
        aggs = []
        for k in range(rng.randrange(1, 3)):
            fn, arg = rng.choice(AGG_CHOICES)
            alias = f"f{i}_{k}"
            spec = {"fn": fn, "arg": arg, "alias": alias}
            if fn == "top_n_freq":
                spec["n"] = 2
            aggs.append(spec)
            aliases.append((alias, fn, arg))
        frame = rng.choice([
            {"kind": "rows", "size": rng.randrange(0, 10)},
            {"kind": "range", "size": rng.randrange(1_000, 50_000)},
            {"kind": "unbounded"},
        ])
        if rng.random() < 0.3:
            frame["max_size"] = rng.randrange(1, 8)
        bid = f"wb{i}"
        blocks.append(DagBlock(bid, "WINDOW_AGG", {
            "window": {
                "name": f"w{i}",
                "partition_columns": [rng.choice(["user", "cat"])],
                "order_column": "ts",
                "frame": frame,
                "union_tables": ["events_hist"] if rng.random() < 0.3 else [],
            },
            "aggs": aggs,
        }))
        edges.append((prev, bid))
        prev = bid
    if rng.random() < 0.5:
        exprs = [{"expr": "user"}, {"expr": "ts"}]
        for alias, fn, arg in aliases:
            exprs.append({"expr": alias, "alias": alias})
        numeric = [a for a, fn, arg in aliases if fn in ("sum", "count", "avg") or (fn in ("min", "max") and arg != "ts")]
        if len(numeric) >= 2:
            exprs.append({"expr": f"{numeric[0]} + {numeric[1]}", "alias": "combo"})
        if joined:
            exprs.append({"expr": "level", "alias": "level"})
        blocks.append(DagBlock("proj", "PROJECT", {"exprs": exprs}))
        edges.append((prev, "proj"))
    return Dag(blocks, edges)


def test_fifty_random_pipelines_round_trip_to_equal_plans():
    rng = random.Random(77)
    cat = Catalog()
    db = make_fixture_catalog(cat)
    for _ in range(50):
        dag = random_dag(rng)
        sql = dag_to_sql(dag)
        plan_from_text = plan_sql(cat, db, sql)
        plan_direct = validate(cat, db, compile_dag(dag))
        assert plan_from_text.sql == plan_direct.sql
        assert render_query(parse(sql)) == sql
        assert plan_from_text.output_schema == plan_direct.output_schema
        assert [w.defn for w in plan_from_text.windows] == [w.defn for w in plan_direct.windows]
