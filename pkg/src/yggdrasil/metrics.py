"""Distances between symbol strings and swap/change-value edit scripts.

``swap_script`` is a deterministic greedy; its op count is an upper bound on
the true swap distance. ``swap_distance_exact`` runs a breadth-first search
and is only meant for tiny instances.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import (CorruptedDeviationError, InstanceTooLargeError,
                     LengthMismatchError)
from .symstring import SymbolString, ceil_log2


class Swap(NamedTuple):
    """Exchange the symbols at positions ``i`` and ``j`` (any distance apart)."""

    i: int
    j: int


class ChangeValue(NamedTuple):
    """Overwrite position ``i``; ``old`` is kept so the op can be inverted."""

    i: int
    old: int
    new: int


EditOp = Union[Swap, ChangeValue]


def swap_bits(n_o: int) -> int:
    return 2 * ceil_log2(n_o)


def change_bits(k: int, n_o: int) -> int:
    return k + ceil_log2(n_o)


def op_bits(op: EditOp, k: int, n_o: int) -> int:
    if isinstance(op, Swap):
        return swap_bits(n_o)
    return change_bits(k, n_o)


@dataclass(frozen=True)
class EditScript:
    """Ordered Swap/ChangeValue ops, applied left to right."""

    ops: tuple = ()

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def bit_cost(self, k: int, n_o: int) -> int:
        """Stored size: 2*ceil(log2 n_o) per swap, k + ceil(log2 n_o) per change."""
        n_swaps = sum(1 for op in self.ops if isinstance(op, Swap))
        return n_swaps * swap_bits(n_o) + (len(self.ops) - n_swaps) * change_bits(k, n_o)

    @property
    def n_swaps(self) -> int:
        return sum(1 for op in self.ops if isinstance(op, Swap))

    @property
    def n_changes(self) -> int:
        return len(self.ops) - self.n_swaps


def _check_pair(a: SymbolString, b: SymbolString):
    if a.k != b.k:
        raise LengthMismatchError(f"symbol widths differ: {a.k} vs {b.k}")
    if len(a) != len(b):
        raise LengthMismatchError(f"lengths differ: {len(a)} vs {len(b)}")


def hamming(a: SymbolString, b: SymbolString) -> int:
    """Number of positions holding different symbols."""
    _check_pair(a, b)
    return sum(1 for x, y in zip(a.symbols, b.symbols) if x != y)


def _first_free(q: deque, done: list, skip=None):
    # Lazily drop settled positions from the left, then scan past skipped ones.
    while q and done[q[0]]:
        q.popleft()
    if skip is None:
        return q[0] if q else None
    for p in q:
        if not done[p] and p not in skip:
            return p
    return None


def greedy_ops(a, b, k: int, n_o: int) -> list:
    """Greedy swap/change-value ops turning sequence ``a`` into ``b``.

    1. every 2-cycle (a[i] == b[j] and a[j] == b[i]) costs one swap;
    2. longer value cycles of length c cost c-1 swaps when that is cheaper in
       bits than c changes, otherwise their positions fall through;
    3. each remaining mismatch costs one change.
    """
    n = len(a)
    cur = list(a)
    mism = [i for i in range(n) if cur[i] != b[i]]
    if not mism:
        return []
    done = [False] * n
    ops: list = []

    by_pair: dict = {}
    for i in mism:
        by_pair.setdefault((cur[i], b[i]), deque()).append(i)

    for i in mism:
        if done[i]:
            continue
        q = by_pair.get((b[i], cur[i]))
        if q is None:
            continue
        j = _first_free(q, done)
        if j is None:
            continue
        ops.append(Swap(i, j))
        cur[i], cur[j] = cur[j], cur[i]
        done[i] = done[j] = True

    L = ceil_log2(n_o)
    swap_cost, change_cost = 2 * L, k + L
    by_value: dict = {}
    for i in mism:
        if not done[i]:
            by_value.setdefault(cur[i], deque()).append(i)

    leftovers: list = []
    for p0 in mism:
        if done[p0]:
            continue
        close_val = cur[p0]
        path = [p0]
        in_path = {p0}
        need = b[p0]
        closed = False
        while True:
            q = by_pair.get((need, close_val))
            j = _first_free(q, done, in_path) if q is not None else None
            if j is not None:
                path.append(j)
                closed = True
                break
            q = by_value.get(need)
            j = _first_free(q, done, in_path) if q is not None else None
            if j is None:
                break
            path.append(j)
            in_path.add(j)
            need = b[j]
        if closed and (len(path) - 1) * swap_cost < len(path) * change_cost:
            for t in range(len(path) - 1):
                p, r = path[t], path[t + 1]
                ops.append(Swap(p, r))
                cur[p], cur[r] = cur[r], cur[p]
            for p in path:
                done[p] = True
        elif closed:
            for p in path:
                done[p] = True
                leftovers.append(p)
        else:
            done[p0] = True
            leftovers.append(p0)

    for i in sorted(leftovers):
        ops.append(ChangeValue(i, cur[i], b[i]))
    return ops


def swap_script(a: SymbolString, b: SymbolString, n_o: int | None = None) -> EditScript:
    """Swap/change-value script transforming ``a`` into ``b``.

    ``n_o`` sets the pointer size used when weighing cycles in bits; it
    defaults to ``len(a)``.
    """
    _check_pair(a, b)
    if n_o is None:
        n_o = max(1, len(a))
    return EditScript(tuple(greedy_ops(a.symbols, b.symbols, a.k, n_o)))


def swap_distance(a: SymbolString, b: SymbolString, n_o: int | None = None) -> int:
    return len(swap_script(a, b, n_o).ops)


def apply_script(a: SymbolString, script: EditScript) -> SymbolString:
    cur = list(a.symbols)
    n = len(cur)
    limit = 1 << a.k
    for op in script.ops:
        if isinstance(op, Swap):
            if not (0 <= op.i < n and 0 <= op.j < n) or op.i == op.j:
                raise CorruptedDeviationError(f"invalid swap {op} for length {n}")
            cur[op.i], cur[op.j] = cur[op.j], cur[op.i]
        elif isinstance(op, ChangeValue):
            if not 0 <= op.i < n:
                raise CorruptedDeviationError(f"position {op.i} out of range for length {n}")
            if cur[op.i] != op.old:
                raise CorruptedDeviationError(
                    f"change at {op.i} expects {op.old}, found {cur[op.i]}")
            if not 0 <= op.new < limit or op.new == op.old:
                raise CorruptedDeviationError(f"invalid change value {op}")
            cur[op.i] = op.new
        else:
            raise CorruptedDeviationError(f"unknown op {op!r}")
    return SymbolString._trusted(tuple(cur), a.k)


def invert_script(script: EditScript) -> EditScript:
    inv = []
    for op in reversed(script.ops):
        if isinstance(op, Swap):
            inv.append(op)
        else:
            inv.append(ChangeValue(op.i, op.new, op.old))
    return EditScript(tuple(inv))


class Exceeded:
    """Returned by :func:`swap_distance_exact` when the optimum exceeds the limit."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Exceeded"


EXCEEDED = Exceeded()

MAX_EXACT_LEN = 8
MAX_EXACT_K = 4
_DENSE_STATE_LIMIT = 1 << 22


def _encode(symbols, radix):
    code = 0
    for s in reversed(symbols):
        code = code * radix + s
    return code


def exact_distances_from(a: SymbolString) -> np.ndarray:
    """BFS distances from ``a`` to every string of its length and width.

    Strings are encoded little-endian in base 2**k; index ``_encode(b)``
    of the returned array is the exact swap distance to ``b``.
    """
    n, radix = len(a), 1 << a.k
    size = radix ** n
    if size > _DENSE_STATE_LIMIT:
        raise InstanceTooLargeError(f"{size} states is too many for a dense BFS")
    dist = np.full(size, -1, dtype=np.int16)
    start = _encode(a.symbols, radix)
    dist[start] = 0
    frontier = np.array([start], dtype=np.int64)
    powers = radix ** np.arange(n, dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        digits = (frontier[:, None] // powers[None, :]) % radix
        cand = []
        for i in range(n):
            for j in range(i + 1, n):
                di, dj = digits[:, i], digits[:, j]
                cand.append(frontier + (dj - di) * powers[i] + (di - dj) * powers[j])
            for v in range(radix):
                cand.append(frontier + (v - digits[:, i]) * powers[i])
        nxt = np.unique(np.concatenate(cand))
        nxt = nxt[dist[nxt] < 0]
        dist[nxt] = level
        frontier = nxt
    return dist


def _neighbours(state: tuple, radix: int):
    n = len(state)
    for i in range(n):
        for j in range(i + 1, n):
            if state[i] != state[j]:
                s = list(state)
                s[i], s[j] = s[j], s[i]
                yield tuple(s)
        for v in range(radix):
            if v != state[i]:
                s = list(state)
                s[i] = v
                yield tuple(s)


def swap_distance_exact(a: SymbolString, b: SymbolString, limit: int):
    """Exact minimum number of swaps and changes, or ``EXCEEDED`` past ``limit``.

    Bidirectional BFS; guarded to ``len <= 8`` and ``k <= 4``.
    """
    _check_pair(a, b)
    if len(a) > MAX_EXACT_LEN or a.k > MAX_EXACT_K:
        raise InstanceTooLargeError(
            f"exact swap distance needs len <= {MAX_EXACT_LEN} and k <= {MAX_EXACT_K}")
    if limit < 0:
        raise ValueError("limit must be non-negative")
    if a == b:
        return 0
    radix = 1 << a.k
    seen = [{a.symbols: 0}, {b.symbols: 0}]
    frontiers = [[a.symbols], [b.symbols]]
    depth = [0, 0]
    # The op set is symmetric, so the graph is undirected.
    while depth[0] + depth[1] < limit:
        side = 0 if len(frontiers[0]) <= len(frontiers[1]) else 1
        depth[side] += 1
        mine, other = seen[side], seen[1 - side]
        nxt = []
        best = None
        for state in frontiers[side]:
            for nb in _neighbours(state, radix):
                if nb in mine:
                    continue
                mine[nb] = depth[side]
                if nb in other:
                    total = depth[side] + other[nb]
                    best = total if best is None else min(best, total)
                nxt.append(nb)
        if best is not None:
            return best
        frontiers[side] = nxt
        if not nxt:
            break
    return EXCEEDED


def damerau_levenshtein(a: SymbolString, b: SymbolString) -> int:
    """Unrestricted Damerau-Levenshtein distance (Lowrance-Wagner DP).

    Unit costs for insertion, deletion, substitution and transposition of
    adjacent symbols. Lengths may differ; widths must match.
    """
    if a.k != b.k:
        raise LengthMismatchError(f"symbol widths differ: {a.k} vs {b.k}")
    s, t = a.symbols, b.symbols
    n, m = len(s), len(t)
    if n == 0 or m == 0:
        return n + m
    inf = n + m
    last_row: dict = {}
    d = [[inf] * (m + 2) for _ in range(n + 2)]
    for i in range(n + 1):
        d[i + 1][0] = inf
        d[i + 1][1] = i
    for j in range(m + 1):
        d[0][j + 1] = inf
        d[1][j + 1] = j
    for i in range(1, n + 1):
        last_col = 0
        for j in range(1, m + 1):
            i1 = last_row.get(t[j - 1], 0)
            j1 = last_col
            cost = 0 if s[i - 1] == t[j - 1] else 1
            if cost == 0:
                last_col = j
            d[i + 1][j + 1] = min(
                d[i][j] + cost,
                d[i + 1][j] + 1,
                d[i][j + 1] + 1,
                d[i1][j1] + (i - i1 - 1) + 1 + (j - j1 - 1),
            )
        last_row[s[i - 1]] = i
    return d[n + 1][m + 1]
