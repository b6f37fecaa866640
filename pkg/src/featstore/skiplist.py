"""Per-key time segment: a skiplist sorted by (ts, seq) descending.

Readers traverse level-0 links without taking any lock. Writers serialize on
a per-segment mutex and publish each fully-built node with a single reference
store (atomic under the interpreter), so a concurrent scan observes either
the chain before or after an insert, never a half-linked node. Dropped tail
chains keep their internal links so in-flight scans finish on the snapshot
they started with.
"""

from __future__ import annotations

import random
import threading

MAX_LEVEL = 24
_P_NUM = 1  # promotion probability 1/2
_P_DEN = 2


class _Node:
    __slots__ = ("ts", "seq", "row", "nxt")

    def __init__(self, ts, seq, row, height):
        self.ts = ts
        self.seq = seq
        self.row = row
        self.nxt = [None] * height


class TimeSegment:
    """Ordered container of (ts, seq, row) with newest-first iteration."""

    __slots__ = ("_head", "_level", "_size", "_rng", "_lock")

    def __init__(self, seed: int | None = None):
        self._head = _Node(None, None, None, MAX_LEVEL)
        self._level = 1
        self._size = 0
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self._size

    @staticmethod
    def _precedes(ts_a, seq_a, ts_b, seq_b) -> bool:
        """True if (ts_a, seq_a) sorts before (ts_b, seq_b), i.e. is newer."""
        return ts_a > ts_b or (ts_a == ts_b and seq_a > seq_b)

    def _random_height(self) -> int:
        h = 1
        while h < MAX_LEVEL and self._rng.randrange(_P_DEN) < _P_NUM:
            h += 1
        return h

    def insert(self, ts: int, seq: int, row: bytes) -> None:
        with self._lock:
            update = [self._head] * MAX_LEVEL
            node = self._head
            for lvl in range(self._level - 1, -1, -1):
                nxt = node.nxt[lvl]
                while nxt is not None and self._precedes(nxt.ts, nxt.seq, ts, seq):
                    node = nxt
                    nxt = node.nxt[lvl]
                update[lvl] = node
            height = self._random_height()
            if height > self._level:
                self._level = height
            new = _Node(ts, seq, row, height)
            for lvl in range(height):
                new.nxt[lvl] = update[lvl].nxt[lvl]
            # Publish bottom-up: the level-0 store makes the node visible to
            # scans only after it is fully built.
            for lvl in range(height):
                update[lvl].nxt[lvl] = new
            self._size += 1

    def _find_start(self, ts: int, seq_bound: int | None) -> _Node | None:
        """First node with ts < `ts`, or ts == `ts` and seq < `seq_bound`.

        seq_bound None means every row at `ts` is included.
        """
        node = self._head
        for lvl in range(self._level - 1, -1, -1):
            nxt = node.nxt[lvl]
            while nxt is not None and (
                nxt.ts > ts or (nxt.ts == ts and seq_bound is not None and nxt.seq >= seq_bound)
            ):
                node = nxt
                nxt = node.nxt[lvl]
        return node.nxt[0]

    @property
    def size(self) -> int:
        return self._size

    def first_at_or_before(self, ts: int, seq_bound: int | None = None):
        node = self._find_start(ts, seq_bound)
        return None if node is None else (node.ts, node.seq, node.row)

    def iter_from(self, ts: int, seq_bound: int | None = None):
        """Yield (ts, seq, row) newest-first starting at the anchor position."""
        node = self._find_start(ts, seq_bound)
        while node is not None:
            yield node.ts, node.seq, node.row
            node = node.nxt[0]

    def __iter__(self):
        node = self._head.nxt[0]
        while node is not None:
            yield node.ts, node.seq, node.row
            node = node.nxt[0]

    def newest(self):
        node = self._head.nxt[0]
        return None if node is None else (node.ts, node.seq, node.row)

    def _cut_before(self, victim: _Node) -> tuple[int, int, int] | None:
        """Unlink `victim` and everything older. Caller holds the lock.

        Returns (count, oldest_ts, newest_ts) of the dropped chain or None.
        """
        ts, seq = victim.ts, victim.seq
        node = self._head
        for lvl in range(self._level - 1, -1, -1):
            nxt = node.nxt[lvl]
            while nxt is not None and self._precedes(nxt.ts, nxt.seq, ts, seq):
                node = nxt
                nxt = node.nxt[lvl]
            # drop every link that points into the removed tail
            cut = node.nxt[lvl]
            if cut is not None:
                node.nxt[lvl] = None
        count = 0
        newest_ts = victim.ts
        oldest_ts = victim.ts
        walk = victim
        while walk is not None:
            count += 1
            oldest_ts = walk.ts
            walk = walk.nxt[0]
        self._size -= count
        return count, oldest_ts, newest_ts

    def drop_older_than(self, cutoff_ts: int) -> tuple[int, int, int] | None:
        """Remove all rows with ts < cutoff_ts (tail batch deletion)."""
        with self._lock:
            victim = self._find_start(cutoff_ts - 1, None)
            if victim is None:
                return None
            return self._cut_before(victim)

    def truncate_to_newest(self, keep_n: int) -> tuple[int, int, int] | None:
        """Keep only the newest keep_n rows."""
        with self._lock:
            node = self._head.nxt[0]
            for _ in range(keep_n):
                if node is None:
                    return None
                node = node.nxt[0]
            if node is None:
                return None
            return self._cut_before(node)
