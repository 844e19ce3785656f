"""Set partitions, subsets, dissections and the integer weights used by
every cumulant / cluster expansion in the package."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

MAX_PARTITION_GROUND = 12
MAX_SUBSET_GROUND = 20
MAX_DISSECTION_GROUND = 10
MAX_STIRLING = 30


class CapacityError(ValueError):
    """Raised when an enumeration or a dimension would exceed a hard cap."""

    def __init__(self, what, size, cap):
        super().__init__(f"capacity exceeded: {what} = {size} > {cap}")
        self.what = what
        self.size = size
        self.cap = cap


def _labels(ground):
    lab = tuple(ground)
    if any(a >= b for a, b in zip(lab, lab[1:])):
        raise ValueError(f"labels must be strictly increasing: {lab}")
    return lab


@lru_cache(maxsize=None)
def _rgs(n):
    # restricted growth strings a[0]=0, a[i] <= 1 + max(a[:i])
    out = []
    if n == 0:
        return ((),)
    a = [0] * n

    def rec(i, m):
        if i == n:
            out.append(tuple(a))
            return
        for v in range(m + 2):
            a[i] = v
            rec(i + 1, max(m, v))

    rec(1, 0)
    return tuple(out)


@lru_cache(maxsize=4096)
def _partitions_cached(lab):
    res = []
    for s in _rgs(len(lab)):
        k = max(s) + 1 if s else 0
        blocks = [[] for _ in range(k)]
        for x, b in zip(lab, s):
            blocks[b].append(x)
        res.append(tuple(tuple(b) for b in blocks))
    return tuple(res)


def enumerate_partitions(ground):
    """All set partitions of `ground` as tuples of blocks.

    Blocks are ordered by their smallest element and keep the order of the
    ground set, so the output is canonical and deterministic."""
    lab = _labels(ground)
    if len(lab) > MAX_PARTITION_GROUND:
        raise CapacityError("partition ground size", len(lab), MAX_PARTITION_GROUND)
    return list(_partitions_cached(lab))


def partitions_of_list(items):
    """Partitions of an arbitrary list (elements need not be sortable).
    Blocks are lists of the original items in their original order."""
    items = list(items)
    if len(items) > MAX_PARTITION_GROUND:
        raise CapacityError("partition ground size", len(items), MAX_PARTITION_GROUND)
    idx = _partitions_cached(tuple(range(len(items))))
    return [[[items[i] for i in b] for b in p] for p in idx]


def enumerate_subsets(ground, nonempty_only=False):
    """Subsets ordered by size, then lexicographically."""
    lab = _labels(ground)
    if len(lab) > MAX_SUBSET_GROUND:
        raise CapacityError("subset ground size", len(lab), MAX_SUBSET_GROUND)
    out = []
    for k in range(1 if nonempty_only else 0, len(lab) + 1):
        out.extend(itertools.combinations(lab, k))
    return out


@dataclass(frozen=True)
class Dissection:
    blocks: tuple
    attachment: tuple | None = None

    def __post_init__(self):
        seen = set()
        for b in self.blocks:
            if not b or any(x in seen for x in b):
                raise ValueError("dissection blocks must be nonempty and disjoint")
            seen.update(b)
        if self.attachment is not None:
            if len(self.attachment) != len(self.blocks):
                raise ValueError("one attachment index per block")
            if len(set(self.attachment)) != len(self.attachment):
                raise ValueError("attachment indices must be distinct")


def enumerate_dissections(ground, max_blocks, index_range=None):
    """Partitions of `ground` into at most `max_blocks` blocks (blocks keep the
    induced linear order). With `index_range` each partition is paired with
    every ordered tuple of distinct indices from 1..index_range."""
    lab = _labels(ground)
    if len(lab) > MAX_DISSECTION_GROUND:
        raise CapacityError("dissection ground size", len(lab), MAX_DISSECTION_GROUND)
    if max_blocks < 1:
        raise ValueError("max_blocks must be >= 1")
    out = []
    for p in _partitions_cached(lab):
        if len(p) > max_blocks:
            continue
        if index_range is None:
            out.append(Dissection(p))
        else:
            for att in itertools.permutations(range(1, index_range + 1), len(p)):
                out.append(Dissection(p, att))
    return out


def compositions(ground, max_blocks):
    """Splits of a linearly ordered set into consecutive nonempty runs."""
    lab = _labels(ground)
    n = len(lab)
    out = []
    for k in range(1, min(max_blocks, n) + 1):
        for cuts in itertools.combinations(range(1, n), k - 1):
            edges = (0,) + cuts + (n,)
            out.append(tuple(lab[edges[i]:edges[i + 1]] for i in range(k)))
    return out


@lru_cache(maxsize=None)
def _stirling_row(n):
    if n == 0:
        return (1,)
    prev = _stirling_row(n - 1)
    row = [0] * (n + 1)
    for k in range(1, n + 1):
        a = prev[k - 1] if k - 1 < len(prev) else 0
        b = prev[k] if k < len(prev) else 0
        row[k] = a + k * b
    return tuple(row)


def stirling2(n, k):
    if not (0 <= k <= n <= MAX_STIRLING):
        raise ValueError(f"stirling2 needs 0 <= k <= n <= {MAX_STIRLING}, got ({n},{k})")
    return _stirling_row(n)[k]


def bell(n):
    return sum(_stirling_row(n))


def mobius_weight(k):
    # (-1)^{k-1}(k-1)!
    return (-1) ** (k - 1) * math.factorial(k - 1)


def partition_weight(p):
    return mobius_weight(len(p))


def alternating_stirling_sum(s):
    if not 1 <= s <= 20:
        raise ValueError("s must lie in 1..20")
    return sum((-1) ** (k - 1) * stirling2(s, k) * math.factorial(k - 1) for k in range(1, s + 1))


def weak_compositions(total, parts):
    """All tuples of `parts` nonnegative ints summing to `total`."""
    if parts == 0:
        return [()] if total == 0 else []
    out = []
    for c in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + c + (total + parts - 1,)
        out.append(tuple(edges[i + 1] - edges[i] - 1 for i in range(parts)))
    return out
