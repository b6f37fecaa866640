"""Window aggregate states, mergeable for pre-aggregation.

sum and avg over floats do not fold IEEE doubles (that would make the result
depend on arrival order and on how buckets split the window).  Each double is
accumulated exactly as an integer count of 2**-1074 units, so partial states
merge by integer addition and the final result is one correctly-rounded
division.  Any grouping of the same multiset of values yields the same bits.
"""

from __future__ import annotations

import math

from .schema import ColumnType

_SCALE_BITS = 1074  # 2**-1074 is the smallest positive double
_SCALE = 1 << _SCALE_BITS


def value_text(v) -> str:
    """Stable text form of a cell, used by top_n_freq and delimited output."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class ExactFloatSum:
    """Order-independent exact accumulator for IEEE doubles."""

    __slots__ = ("units", "n", "pos_inf", "neg_inf", "nan")

    def __init__(self):
        self.units = 0  # exact sum in 2**-1074 units
        self.n = 0
        self.pos_inf = 0
        self.neg_inf = 0
        self.nan = 0

    def add(self, v: float):
        self.n += 1
        if v != v:
            self.nan += 1
        elif v == math.inf:
            self.pos_inf += 1
        elif v == -math.inf:
            self.neg_inf += 1
        else:
            num, den = v.as_integer_ratio()
            self.units += num * (_SCALE // den)

    def merge(self, other: "ExactFloatSum"):
        self.units += other.units
        self.n += other.n
        self.pos_inf += other.pos_inf
        self.neg_inf += other.neg_inf
        self.nan += other.nan

    def _special(self):
        if self.nan or (self.pos_inf and self.neg_inf):
            return math.nan
        if self.pos_inf:
            return math.inf
        if self.neg_inf:
            return -math.inf
        return None

    def result(self) -> float:
        special = self._special()
        if special is not None:
            return special
        try:
            return self.units / _SCALE  # int/int division rounds correctly
        except OverflowError:
            return math.inf if self.units > 0 else -math.inf

    def divided_by(self, count: int) -> float:
        special = self._special()
        if special is not None:
            return special
        try:
            return self.units / (count * _SCALE)
        except OverflowError:
            return math.inf if (self.units > 0) == (count > 0) else -math.inf


class CountState:
    __slots__ = ("n",)

    def __init__(self, arg_type=None):
        self.n = 0

    def add(self, v):
        self.n += 1

    def merge(self, other):
        self.n += other.n

    def result(self):
        return self.n


class IntSumState:
    __slots__ = ("total",)

    def __init__(self, arg_type=None):
        self.total = 0

    def add(self, v):
        self.total += v

    def merge(self, other):
        self.total += other.total

    def result(self):
        return self.total


class FloatSumState:
    __slots__ = ("acc",)

    def __init__(self, arg_type=None):
        self.acc = ExactFloatSum()

    def add(self, v):
        self.acc.add(v)

    def merge(self, other):
        self.acc.merge(other.acc)

    def result(self):
        return self.acc.result()


class IntAvgState:
    """Average of integers: exact integer sum, one rounded division."""

    __slots__ = ("total", "n")

    def __init__(self, arg_type=None):
        self.total = 0
        self.n = 0

    def add(self, v):
        self.total += v
        self.n += 1

    def merge(self, other):
        self.total += other.total
        self.n += other.n

    def result(self):
        if self.n == 0:
            return None
        try:
            return self.total / self.n
        except OverflowError:
            return math.inf if (self.total > 0) == (self.n > 0) else -math.inf


class FloatAvgState:
    __slots__ = ("acc",)

    def __init__(self, arg_type=None):
        self.acc = ExactFloatSum()

    def add(self, v):
        self.acc.add(v)

    def merge(self, other):
        self.acc.merge(other.acc)

    def result(self):
        if self.acc.n == 0:
            return None
        return self.acc.divided_by(self.acc.n)


class _ExtremeState:
    """min/max with NaN kept out of the comparisons (all-NaN gives NaN)."""

    __slots__ = ("cur", "saw_nan")
    _better = None

    def __init__(self, arg_type=None):
        self.cur = None
        self.saw_nan = False

    def add(self, v):
        if isinstance(v, float) and v != v:
            self.saw_nan = True
            return
        if self.cur is None or self._better(v, self.cur):
            self.cur = v

    def merge(self, other):
        self.saw_nan = self.saw_nan or other.saw_nan
        if other.cur is not None:
            self.add(other.cur)

    def result(self):
        if self.cur is None:
            return math.nan if self.saw_nan else None
        return self.cur


class MinState(_ExtremeState):
    _better = staticmethod(lambda a, b: a < b)


class MaxState(_ExtremeState):
    _better = staticmethod(lambda a, b: a > b)


class DistinctCountState:
    __slots__ = ("values",)

    def __init__(self, arg_type=None):
        self.values = set()

    def add(self, v):
        self.values.add(v)

    def merge(self, other):
        self.values |= other.values

    def result(self):
        return len(self.values) if self.values else None


class TopNFreqState:
    """Frequency table; result is 'v1:c1,v2:c2' with counts descending and
    ties broken by ascending value text."""

    __slots__ = ("counts", "n")

    def __init__(self, arg_type=None, n=1):
        self.counts = {}
        self.n = n

    def add(self, v):
        text = value_text(v)
        self.counts[text] = self.counts.get(text, 0) + 1

    def merge(self, other):
        for text, c in other.counts.items():
            self.counts[text] = self.counts.get(text, 0) + c

    def result(self):
        if not self.counts:
            return None
        ranked = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return ",".join(f"{text}:{c}" for text, c in ranked[: self.n])


def make_state(fn: str, arg_type: ColumnType | None, n: int | None = None):
    if fn == "count":
        return CountState()
    if fn == "sum":
        return FloatSumState() if arg_type is ColumnType.FLOAT64 else IntSumState()
    if fn == "avg":
        return FloatAvgState() if arg_type is ColumnType.FLOAT64 else IntAvgState()
    if fn == "min":
        return MinState()
    if fn == "max":
        return MaxState()
    if fn == "distinct_count":
        return DistinctCountState()
    if fn == "top_n_freq":
        return TopNFreqState(n=n or 1)
    raise ValueError(f"no aggregate named {fn}")
