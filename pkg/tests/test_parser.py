import random

import pytest

from featstore.errors import SqlSyntaxError
from featstore.parser import (
    InsertStatement,
    LoadDataStatement,
    parse,
    parse_expression,
    parse_statement,
    tokenize,
)
from featstore.sqlast import FrameKind, render_query

from genplans import gen_query


def test_tokenizer_positions_and_comments():
    toks = tokenize("SELECT a -- trailing comment\n  , b FROM t")
    kinds = [(t.kind, t.value, t.line, t.col) for t in toks]
    assert kinds[0] == ("SELECT", "SELECT", 1, 1)
    assert kinds[1] == ("IDENT", "a", 1, 8)
    assert kinds[2] == ("symbol", ",", 2, 3)
    assert kinds[3] == ("IDENT", "b", 2, 5)
    assert kinds[-1][0] == "EOF"


def test_string_literal_quote_escape():
    toks = tokenize("'it''s'")
    assert toks[0].kind == "STRING"
    assert toks[0].value == "it's"


def test_unterminated_string_reports_position():
    with pytest.raises(SqlSyntaxError) as ei:
        tokenize("SELECT 'oops")
    assert ei.value.line == 1
    assert ei.value.column == 8


@pytest.mark.parametrize(
    "text,ms",
    [("1s", 1_000), ("1m", 60_000), ("1h", 3_600_000), ("1d", 86_400_000), ("36h", 129_600_000)],
)
def test_interval_units(text, ms):
    tok = tokenize(text)[0]
    assert tok.kind == "INTERVAL"
    assert tok.value == ms


def test_rows_frame_rejects_time_interval():
    sql = (
        "SELECT sum(a) OVER w AS s FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS BETWEEN 2d PRECEDING AND CURRENT ROW)"
    )
    with pytest.raises(SqlSyntaxError) as ei:
        parse(sql)
    assert "INT" in str(ei.value)
    assert ei.value.column is not None


def test_range_frame_accepts_plain_milliseconds():
    sql = (
        "SELECT sum(a) OVER w AS s FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS_RANGE BETWEEN 5000 PRECEDING AND CURRENT ROW)"
    )
    q = parse(sql)
    frame = q.windows[0].frame
    assert frame.kind is FrameKind.RANGE
    assert frame.size == 5000


def test_interval_renders_as_milliseconds():
    sql = (
        "SELECT sum(a) OVER w AS s FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS_RANGE BETWEEN 2d PRECEDING AND CURRENT ROW MAXSIZE 7)"
    )
    q = parse(sql)
    assert q.windows[0].frame.size == 172_800_000
    assert "172800000 PRECEDING" in q.render()
    assert "MAXSIZE 7" in q.render()


def test_zero_range_rejected_with_position():
    sql = (
        "SELECT sum(a) OVER w AS s FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS_RANGE BETWEEN 0 PRECEDING AND CURRENT ROW)"
    )
    with pytest.raises(SqlSyntaxError) as ei:
        parse(sql)
    assert ei.value.line == 1


def test_zero_maxsize_rejected():
    sql = (
        "SELECT sum(a) OVER w AS s FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS BETWEEN 3 PRECEDING AND CURRENT ROW MAXSIZE 0)"
    )
    with pytest.raises(SqlSyntaxError):
        parse(sql)


def test_error_carries_line_column_and_expected():
    with pytest.raises(SqlSyntaxError) as ei:
        parse("SELECT a\nFROM")
    err = ei.value
    assert err.line == 2
    assert err.column == 5
    assert err.expected


def test_trailing_tokens_rejected():
    with pytest.raises(SqlSyntaxError):
        parse("SELECT a FROM t extra")


def test_last_join_clause():
    q = parse("SELECT a, level FROM t LAST JOIN p ORDER BY pts ON a = uid")
    assert q.last_join.table == "p"
    assert q.last_join.order_column == "pts"
    assert q.last_join.left.name == "a"
    assert q.last_join.right.name == "uid"


def test_union_window_and_multiple_windows():
    sql = (
        "SELECT count(*) OVER w0 AS c, max(x) OVER w1 AS m FROM t WINDOW "
        "w0 AS (UNION t2, t3 PARTITION BY u, v ORDER BY ts ROWS BETWEEN 4 PRECEDING AND CURRENT ROW), "
        "w1 AS (PARTITION BY u ORDER BY ts ROWS_RANGE BETWEEN UNBOUNDED PRECEDING AND CURRENT ROW)"
    )
    q = parse(sql)
    assert q.windows[0].union_tables == ("t2", "t3")
    assert q.windows[0].partition_columns == ("u", "v")
    assert q.windows[1].frame.kind is FrameKind.UNBOUNDED


def test_expression_precedence_round_trips():
    assert parse_expression("a + b * 2").render() == "a + b * 2"
    assert parse_expression("(a + b) * 2").render() == "(a + b) * 2"
    assert parse_expression("a - b - c").render() == "a - b - c"
    assert parse_expression("a - (b - c)").render() == "a - (b - c)"
    assert parse_expression("a / b / c").render() == "a / b / c"


def test_unary_minus_literals():
    assert parse_expression("-5").render() == "-5"
    assert parse_expression("-1.5 + x").render() == "-1.5 + x"


def test_top_n_freq_argument_count():
    q = parse(
        "SELECT top_n_freq(cat, 3) OVER w AS t FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS BETWEEN 9 PRECEDING AND CURRENT ROW)"
    )
    call = q.projections[0].expr
    assert call.fn == "top_n_freq"
    assert call.n == 3
    with pytest.raises(SqlSyntaxError):
        parse(
            "SELECT top_n_freq(cat) OVER w AS t FROM t WINDOW w AS "
            "(PARTITION BY u ORDER BY ts ROWS BETWEEN 9 PRECEDING AND CURRENT ROW)"
        )


def test_count_star_only_star_agg():
    parse(
        "SELECT count(*) OVER w AS c FROM t WINDOW w AS "
        "(PARTITION BY u ORDER BY ts ROWS BETWEEN 9 PRECEDING AND CURRENT ROW)"
    )
    with pytest.raises(SqlSyntaxError):
        parse(
            "SELECT sum(*) OVER w AS c FROM t WINDOW w AS "
            "(PARTITION BY u ORDER BY ts ROWS BETWEEN 9 PRECEDING AND CURRENT ROW)"
        )


def test_insert_statement_literals():
    st = parse_statement(
        "INSERT INTO shop.t VALUES (1, 'a', NULL, true, 1.5), (2, 'it''s', 3, false, -2.0)"
    )
    assert isinstance(st, InsertStatement)
    assert st.db == "shop"
    assert st.rows == ((1, "a", None, True, 1.5), (2, "it's", 3, False, -2.0))


def test_load_data_statement_options():
    st = parse_statement(
        "LOAD DATA INFILE '/data/x.csv' INTO TABLE shop.t OPTIONS(MODE='append', header=true)"
    )
    assert isinstance(st, LoadDataStatement)
    assert st.path == "/data/x.csv"
    assert st.options == {"mode": "append", "header": True}


def test_select_statement_through_parse_statement():
    q = parse_statement("SELECT a FROM t")
    assert q.base_table == "t"


def test_canonical_render_is_a_fixed_point():
    rng = random.Random(23)
    for _ in range(60):
        sql = gen_query(rng)
        first = render_query(parse(sql))
        assert render_query(parse(first)) == first
