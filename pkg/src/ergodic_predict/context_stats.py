"""Suffix-context statistics over a revealed binary history.

The frequency estimate for order ``k`` at time ``n`` looks at every index
``k < i < n`` whose preceding ``k`` bits equal the context ``s`` and counts how
often ``y_i`` was 0 or 1.  :class:`CountTable` maintains these tallies
incrementally for orders up to ``order_cap`` and answers longer orders for the
current suffix from a set of long matches; :class:`JointCountTable` does the
same for joint (bit, quantized side-information) contexts.

Contexts are integers: the bit string ``s = (s_1, ..., s_k)`` maps to
``int("s_1...s_k", 2)``, so the most recent bit is the least significant one.
Each order has its own table, so equal integers of different lengths never
collide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .quantize import DyadicPartition, NestedPartition, _as_point

__all__ = [
    "MalformedInputError",
    "UnknownResolutionError",
    "History",
    "CountTable",
    "JointCountTable",
    "CountBlock",
    "encode_context",
    "empirical_estimate",
    "laplace_estimate",
    "ESTIMATORS",
    "empirical_frequency",
    "laplace_frequency",
    "joint_frequency",
]


class MalformedInputError(ValueError):
    """A bit outside {0, 1}, a missing side vector, or similar bad input."""


class UnknownResolutionError(ValueError):
    """Query for a resolution level the table cannot answer."""


def _check_bit(bit) -> int:
    if isinstance(bit, str) or bit not in (0, 1):
        raise MalformedInputError(f"bits must be 0 or 1, got {bit!r}")
    return int(bit)


def encode_context(s, k: int | None = None) -> int:
    """Integer code of a context given as a bit sequence, a '0'/'1' string or an int."""
    if isinstance(s, (int, np.integer)):
        if k is not None and not 0 <= s < (1 << k):
            raise MalformedInputError(f"context {s} does not fit in {k} bits")
        return int(s)
    bits = [int(c) for c in s] if isinstance(s, str) else [_check_bit(b) for b in s]
    if k is not None and len(bits) != k:
        raise MalformedInputError(f"context has length {len(bits)}, expected {k}")
    code = 0
    for b in bits:
        if b not in (0, 1):
            raise MalformedInputError(f"bits must be 0 or 1, got {b!r}")
        code = (code << 1) | b
    return code


@dataclass
class History:
    """Revealed bits ``y_1..y_t`` and, in side-information mode, ``x_1..x_{t+1}``."""

    bits: list[int] = field(default_factory=list)
    side: list[tuple[float, ...]] | None = None

    def __post_init__(self) -> None:
        self.bits = [_check_bit(b) for b in self.bits]
        if self.side is not None:
            if len(self.side) not in (len(self.bits), len(self.bits) + 1):
                raise MalformedInputError("side information must have as many or one more entries than bits")

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def side_info(self) -> bool:
        return self.side is not None


# --------------------------------------------------------------------------
# Estimators


def empirical_estimate(count_y, total):
    """Ratio ``count_y / total`` with ``0/0 = 1/2``; works on scalars and arrays."""
    count_y = np.asarray(count_y, dtype=float)
    total = np.asarray(total, dtype=float)
    out = np.divide(count_y, total, out=np.full(np.broadcast(count_y, total).shape, 0.5), where=total > 0)
    return out if out.ndim else float(out)


def laplace_estimate(count_y, total):
    """Add-one estimate ``(count_y + 1) / (total + 2)``."""
    out = (np.asarray(count_y, dtype=float) + 1.0) / (np.asarray(total, dtype=float) + 2.0)
    return out if np.ndim(out) else float(out)


ESTIMATORS = {"empirical": empirical_estimate, "laplace": laplace_estimate}


def _estimator(name: str):
    try:
        return ESTIMATORS[name]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}; expected one of {sorted(ESTIMATORS)}") from None


# --------------------------------------------------------------------------
# Plain bit contexts


class CountTable:
    """Per-order context tallies for a growing bit history.

    Orders ``1..order_cap`` are tallied eagerly.  For the current suffix,
    orders above the cap are served from the set of earlier positions whose
    suffix matches the current one in more than ``order_cap`` bits; counts for
    arbitrary longer contexts fall back to a scan of the history.
    """

    def __init__(self, order_cap: int = 24, bits: Iterable[int] = ()):
        if order_cap < 1:
            raise ValueError("order_cap must be >= 1")
        self.order_cap = int(order_cap)
        self.history = History()
        self._tables: list[dict[int, list[int]]] = [{} for _ in range(self.order_cap)]
        self._masks = [(1 << k) - 1 for k in range(self.order_cap + 2)]
        self._recent = 0  # last order_cap + 1 bits
        self._totals = [0, 0]
        # positions e (1-based) keyed by the (order_cap + 1)-bit context ending at e
        self._long_index: dict[int, list[int]] = {}
        # e -> length of the common suffix of y_1^e and the whole history
        self._matches: dict[int, int] = {}
        for b in bits:
            self.absorb(b)

    @property
    def n(self) -> int:
        """Time index of the next prediction (one past the revealed bits)."""
        return len(self.history.bits) + 1

    @property
    def total_observed(self) -> int:
        return len(self.history.bits)

    def absorb(self, bit) -> None:
        """Reveal ``y_i`` and update every tracked order ``k < i``."""
        b = _check_bit(bit)
        bits = self.history.bits
        t = len(bits)
        recent = self._recent
        masks = self._masks
        tables = self._tables
        for k in range(1, min(self.order_cap, t) + 1):
            key = recent & masks[k]
            cell = tables[k - 1].get(key)
            if cell is None:
                tables[k - 1][key] = cell = [0, 0]
            cell[b] += 1

        width = self.order_cap + 1
        if t >= width:
            self._long_index.setdefault(recent, []).append(t)
        recent = ((recent << 1) | b) & masks[width]
        matches: dict[int, int] = {}
        if t + 1 >= width:
            old = self._matches
            for e in self._long_index.get(recent, ()):
                # a position first reaching the threshold matched exactly width - 1 bits before
                matches[e] = old.get(e - 1, width - 1) + 1
        self._matches = matches
        self._recent = recent
        self._totals[b] += 1
        bits.append(b)

    def extend(self, bits: Iterable[int]) -> None:
        for b in bits:
            self.absorb(b)

    def counts(self, k: int, s=None) -> tuple[int, int]:
        """``(count_0, count_1)`` of context ``s`` of order ``k`` over ``k < i < n``.

        ``s`` defaults to the current suffix.  ``k = 0`` counts every revealed
        bit.
        """
        bits = self.history.bits
        if k < 0:
            raise ValueError("order must be >= 0")
        if k == 0:
            return self._totals[0], self._totals[1]
        if s is None:
            if k > len(bits):
                return 0, 0
            code = self._recent & self._masks[k] if k <= self.order_cap else encode_context(bits[-k:])
        else:
            code = encode_context(s, k)
        if k <= self.order_cap:
            cell = self._tables[k - 1].get(code)
            return (cell[0], cell[1]) if cell else (0, 0)
        return self._scan(k, code)

    def _scan(self, k: int, code: int) -> tuple[int, int]:
        bits = self.history.bits
        target = [(code >> (k - 1 - j)) & 1 for j in range(k)]
        out = [0, 0]
        for i in range(k + 1, len(bits) + 1):  # 1-based i with k < i < n
            if bits[i - k - 1 : i - 1] == target:
                out[bits[i - 1]] += 1
        return out[0], out[1]

    def suffix_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Counts for the current suffix at every order with a nonzero tally.

        Returns arrays ``c0, c1`` where entry ``k - 1`` belongs to order ``k``.
        Their length ``F`` is the largest such order; every order above ``F``
        has an empty index set.
        """
        bits = self.history.bits
        t = len(bits)
        c0: list[int] = []
        c1: list[int] = []
        recent = self._recent
        masks = self._masks
        top = min(self.order_cap, t - 1)
        for k in range(1, top + 1):
            cell = self._tables[k - 1].get(recent & masks[k])
            if cell is None:
                break
            c0.append(cell[0])
            c1.append(cell[1])
        if len(c0) == self.order_cap and self._matches:
            ends = np.fromiter(self._matches.keys(), dtype=np.int64, count=len(self._matches))
            lengths = np.fromiter(self._matches.values(), dtype=np.int64, count=len(self._matches))
            succ = np.fromiter((bits[e] for e in self._matches), dtype=np.int8, count=len(ends))  # y_{e+1}
            longest = int(lengths.max())
            h0 = np.bincount(lengths[succ == 0], minlength=longest + 1)
            h1 = np.bincount(lengths[succ == 1], minlength=longest + 1)
            at_least0 = np.cumsum(h0[::-1])[::-1]
            at_least1 = np.cumsum(h1[::-1])[::-1]
            c0.extend(at_least0[self.order_cap + 1 :].tolist())
            c1.extend(at_least1[self.order_cap + 1 :].tolist())
        return np.asarray(c0, dtype=np.int64), np.asarray(c1, dtype=np.int64)

    def order_totals(self, k: int) -> int:
        """Sum of all tallies of a tracked order (for conservation checks)."""
        if not 1 <= k <= self.order_cap:
            raise ValueError(f"order {k} is not tracked")
        return sum(c[0] + c[1] for c in self._tables[k - 1].values())


def _frequency(table: CountTable, y, s, k: int, n: int | None, estimator) -> float:
    y = _check_bit(y)
    if n is not None and n != table.n:
        raise ValueError(f"table reflects y_1^{table.n - 1}, not y_1^{n - 1}")
    if k >= 1 and table.n <= k + 1:
        return 0.5
    c = table.counts(k, s)
    return estimator(c[y], c[0] + c[1])


def empirical_frequency(table: CountTable, y, s=None, k: int = 1, n: int | None = None) -> float:
    """Proportion of ``y`` among the bits that followed context ``s`` (1/2 if none did)."""
    return _frequency(table, y, s, k, n, empirical_estimate)


def laplace_frequency(table: CountTable, y, s=None, k: int = 1, n: int | None = None) -> float:
    """Add-one smoothed counterpart of :func:`empirical_frequency`; always in (0, 1)."""
    return _frequency(table, y, s, k, n, laplace_estimate)


# --------------------------------------------------------------------------
# Joint bit / quantized side-information contexts


class CountBlock(NamedTuple):
    """Tallies shared by experts ``(order, level)`` for ``level`` in ``[lo, hi]``."""

    order: int
    lo: int
    hi: int
    count0: int
    count1: int


class _Walk(NamedTuple):
    """Match profile of one earlier position against the current joint context.

    ``segments`` lists ``(last order, level)`` pairs: orders up to ``last``
    (from the previous pair's ``last + 1``) match at every level up to
    ``level``.  Order 0 is the side vector alone.
    """

    segments: tuple[tuple[int, int], ...]
    successor: int  # y_i
    max_order: int
    truncated: bool  # stopped at max_order while still matching


class JointCountTable:
    """Tallies for joint contexts ``(y_{i-k}^{i-1}, G_l(x_{i-k}^i))``.

    A box of orders ``1..order_cap`` by levels ``1..resolution_cap`` is
    tallied eagerly.  Experts outside the box can only match at positions that
    already match at the box corner, so the current-suffix query gathers those
    positions from two bucket indexes and measures each match directly.
    """

    def __init__(
        self,
        partition: NestedPartition | None = None,
        dimension: int = 1,
        order_cap: int = 8,
        resolution_cap: int = 8,
    ):
        if order_cap < 1 or resolution_cap < 1:
            raise ValueError("caps must be >= 1")
        self.partition = partition if partition is not None else DyadicPartition(dimension)
        self.dimension = self.partition.dimension
        self.order_cap = int(order_cap)
        self.resolution_cap = int(resolution_cap)
        self.history = History(side=[])
        self._cells: list[list[int]] = []
        self._ncells = [self.partition.n_cells(level) for level in range(1, self.resolution_cap + 1)]
        self._tables = [[{} for _ in range(self.order_cap)] for _ in range(self.resolution_cap)]
        self._deep_index: dict[int, list[int]] = {}  # (order_cap, level 1) context -> positions
        self._fine_index: dict[int, list[int]] = {}  # (order 1, resolution_cap) context -> positions
        self._walks: dict[int, _Walk] = {}
        self._walks_at = 0

    @property
    def n(self) -> int:
        return len(self.history.bits) + 1

    def observe(self, x) -> None:
        """Record ``x_i`` ahead of predicting ``y_i``."""
        side = self.history.side
        if len(side) != len(self.history.bits):
            raise MalformedInputError("side information for this step was already observed")
        point = _as_point(x, self.dimension)
        side.append(point)
        self._cells.append(self.partition.cell_ids(point, self.resolution_cap))

    def absorb(self, bit) -> None:
        """Reveal ``y_i``; ``x_i`` must have been observed."""
        b = _check_bit(bit)
        bits = self.history.bits
        if len(self.history.side) != len(bits) + 1:
            raise MalformedInputError(f"x_{len(bits) + 1} is missing")
        i = len(bits) + 1
        cells = self._cells
        top = min(self.order_cap, i - 1)
        for level in range(self.resolution_cap):
            m = self._ncells[level]
            key = cells[i - 1][level]
            tables = self._tables[level]
            for k in range(1, top + 1):
                key = key * (2 * m) + bits[i - k - 1] * m + cells[i - k - 1][level]
                cell = tables[k - 1].get(key)
                if cell is None:
                    tables[k - 1][key] = cell = [0, 0]
                cell[b] += 1
                if level == 0 and k == self.order_cap:
                    self._deep_index.setdefault(key, []).append(i)
                if level == self.resolution_cap - 1 and k == 1:
                    self._fine_index.setdefault(key, []).append(i)
        bits.append(b)

    def _key(self, level: int, order: int, s_bits: Sequence[int], z: Sequence[int]) -> int:
        m = self._ncells[level - 1]
        key = z[-1]
        for j in range(1, order + 1):
            key = key * (2 * m) + s_bits[-j] * m + z[-1 - j]
        return key

    def counts(self, k: int, level: int, s=None, z=None) -> tuple[int, int]:
        """Tallies of joint context ``(s, z)``; defaults to the current one.

        ``z`` lists ``k + 1`` cell ids, oldest first, ending with the cell of
        the current side vector.
        """
        if k < 1:
            raise ValueError("order must be >= 1")
        if level < 1:
            raise UnknownResolutionError(f"resolution level must be >= 1, got {level}")
        bits = self.history.bits
        n = self.n
        if s is None or z is None:
            if len(self.history.side) != n or k > n - 1:
                return 0, 0
            s_bits = bits[n - 1 - k :]
            z = [self._cell(p, level) for p in range(n - k, n + 1)]
        else:
            code = encode_context(s, k)
            s_bits = [(code >> (k - 1 - j)) & 1 for j in range(k)]
            z = list(z)
            if len(z) != k + 1:
                raise MalformedInputError(f"cell context needs {k + 1} entries, got {len(z)}")
        if k <= self.order_cap and level <= self.resolution_cap:
            cell = self._tables[level - 1][k - 1].get(self._key(level, k, s_bits, z))
            return (cell[0], cell[1]) if cell else (0, 0)
        out = [0, 0]
        for i in range(k + 1, n):
            if bits[i - k - 1 : i - 1] == list(s_bits) and all(
                self._cell(i - k + j, level) == z[j] for j in range(k + 1)
            ):
                out[bits[i - 1]] += 1
        return out[0], out[1]

    def _cell(self, position: int, level: int) -> int:
        """Cell id of ``x_position`` (1-based) at ``level``."""
        if level <= self.resolution_cap:
            return self._cells[position - 1][level - 1]
        return self.partition.cell_id(level, self.history.side[position - 1])

    def _agreement(self, i: int, j: int) -> int:
        ci = self._cells[i - 1]
        cj = self._cells[j - 1]
        if ci[-1] != cj[-1]:
            for level, (a, b) in enumerate(zip(ci, cj)):
                if a != b:
                    return level
        side = self.history.side
        return self.partition.point_agreement(side[i - 1], side[j - 1], lower=self.resolution_cap)

    def suffix_blocks(self, max_order: int, max_level: int) -> list[CountBlock]:
        """Tallies of the current joint context for every expert with a nonzero count.

        Experts ``(k, l)`` with ``k <= max_order`` and ``l <= max_level`` not
        covered by any returned block have an empty index set.
        """
        bits = self.history.bits
        n = self.n
        if len(self.history.side) != n:
            raise MalformedInputError(f"x_{n} has not been observed")
        cells = self._cells
        blocks: list[CountBlock] = []
        kmax = min(self.order_cap, n - 2, max_order)
        deep_key = fine_key = None
        for level in range(1, min(self.resolution_cap, max_level) + 1):
            if kmax < 1:
                break
            m = self._ncells[level - 1]
            key = cells[n - 1][level - 1]
            tables = self._tables[level - 1]
            for k in range(1, kmax + 1):
                key = key * (2 * m) + bits[n - k - 1] * m + cells[n - k - 1][level - 1]
                cell = tables[k - 1].get(key)
                if cell is None:
                    kmax = k - 1
                    break
                blocks.append(CountBlock(k, level, level, cell[0], cell[1]))
                if level == 1 and k == self.order_cap:
                    deep_key = key
                if level == self.resolution_cap and k == 1:
                    fine_key = key

        candidates: set[int] = set()
        if deep_key is not None and max_order > self.order_cap:
            candidates.update(self._deep_index.get(deep_key, ()))
        if fine_key is not None and max_level > self.resolution_cap:
            candidates.update(self._fine_index.get(fine_key, ()))
        walks = self._match_walks(candidates, max_order)
        if walks:
            blocks.extend(self._walk_blocks(walks, max_level))
        return blocks

    def _match_walks(self, candidates: set[int], max_order: int) -> dict[int, _Walk]:
        """Match profiles of the candidate positions against the current context.

        Walks are keyed by lag ``n - i``.  A lag that was a candidate at the
        previous step extends its stored profile by one order, since
        ``level_{k+1}(i, n) = min(A(i, n), level_k(i - 1, n - 1))``; only new lags
        are walked from scratch, and those matches are shorter than the caps.
        """
        n = self.n
        if self._walks_at == n and all(w.max_order == max_order for w in self._walks.values()):
            return self._walks
        previous = self._walks if self._walks_at == n - 1 else {}
        bits = self.history.bits
        walks: dict[int, _Walk] = {}
        for i in candidates:
            lag = n - i
            old = previous.get(lag)
            if old is not None and not (old.truncated and old.max_order < max_order):
                walk = self._extend_walk(old, i, max_order)
            else:
                walk = self._fresh_walk(i, max_order)
            if walk is not None:
                walks[lag] = walk
        self._walks = walks
        self._walks_at = n
        return walks

    def _fresh_walk(self, i: int, max_order: int) -> _Walk | None:
        bits = self.history.bits
        n = self.n
        level = self._agreement(i, n)
        if level == 0:
            return None
        segments: list[tuple[int, int]] = []
        k = 0
        truncated = False
        while True:
            nk = k + 1
            if i - nk < 1 or bits[i - nk - 1] != bits[n - nk - 1]:
                break
            if nk > max_order:
                truncated = True
                break
            a = min(level, self._agreement(i - nk, n - nk))
            if a == 0:
                break
            if a < level:
                segments.append((k, level))
                level = a
            k = nk
        segments.append((k, level))
        return _Walk(tuple(segments), bits[i - 1], max_order, truncated)

    def _extend_walk(self, old: _Walk, i: int, max_order: int) -> _Walk | None:
        bits = self.history.bits
        n = self.n
        head = self._agreement(i, n)
        if head == 0:
            return None
        if bits[i - 2] != bits[n - 2]:  # y_{i-1} != y_{n-1}: no order >= 1 matches
            return _Walk(((0, head),), bits[i - 1], max_order, False)
        segments = [(0, head)]
        for end, level in old.segments:
            level = min(head, level)
            end += 1
            if level == segments[-1][1]:
                segments[-1] = (end, level)
            else:
                segments.append((end, level))
        truncated = old.truncated
        if segments[-1][0] > max_order:
            truncated = True
            clipped = []
            for end, level in segments:
                clipped.append((min(end, max_order), level))
                if end >= max_order:
                    break
            segments = clipped
        return _Walk(tuple(segments), bits[i - 1], max_order, truncated)

    def _walk_blocks(self, walks: dict[int, _Walk], max_level: int) -> list[CountBlock]:
        """Aggregate walk profiles into per-order level intervals with tallies."""
        lo_k: list[int] = []
        hi_k: list[int] = []
        lv: list[int] = []
        ys: list[int] = []
        for walk in walks.values():
            start = 1
            for end, level in walk.segments:
                if end >= start:
                    lo_k.append(start)
                    hi_k.append(end)
                    lv.append(min(level, max_level))
                    ys.append(walk.successor)
                start = end + 1
        if not lo_k:
            return []
        values, level_idx = np.unique(np.asarray(lv), return_inverse=True)
        top = max(hi_k)
        # hits[v, y, k]: positions whose order-k match reaches exactly level values[v]
        hits = np.zeros((len(values), 2, top + 2), dtype=np.int64)
        np.add.at(hits, (level_idx, np.asarray(ys), np.asarray(lo_k)), 1)
        np.add.at(hits, (level_idx, np.asarray(ys), np.asarray(hi_k) + 1), -1)
        np.cumsum(hits, axis=2, out=hits)
        present = hits.sum(axis=1) > 0
        orders, vidx = np.nonzero(present.T)
        blocks: list[CountBlock] = []
        values = values.tolist()
        h0 = hits[:, 0, :].T.tolist()
        h1 = hits[:, 1, :].T.tolist()
        # within one order, walk the distinct levels from the top down
        j = len(orders) - 1
        orders = orders.tolist()
        vidx = vidx.tolist()
        out_by_order: list[list[CountBlock]] = []
        while j >= 0:
            k = orders[j]
            floor = 1 if k > self.order_cap else self.resolution_cap + 1
            tally0 = tally1 = 0
            group: list[CountBlock] = []
            while j >= 0 and orders[j] == k:
                v = vidx[j]
                tally0 += h0[k][v]
                tally1 += h1[k][v]
                below = values[vidx[j - 1]] if j > 0 and orders[j - 1] == k else 0
                lo, hi = max(below + 1, floor), values[v]
                if lo <= hi:
                    group.append(CountBlock(k, lo, hi, tally0, tally1))
                j -= 1
            out_by_order.append(group)
        for group in reversed(out_by_order):
            blocks.extend(group)
        return blocks


def joint_frequency(
    table: JointCountTable, y, s=None, z=None, k: int = 1, level: int = 1, n: int | None = None,
    estimator: str = "empirical",
) -> float:
    """Estimate of ``P(y | joint context)``; 1/2 on an empty index set."""
    y = _check_bit(y)
    if level < 1:
        raise UnknownResolutionError(f"resolution level must be >= 1, got {level}")
    if n is not None and n != table.n:
        raise ValueError(f"table reflects y_1^{table.n - 1}, not y_1^{n - 1}")
    if table.n <= k + 1:
        return 0.5
    c = table.counts(k, level, s, z)
    return _estimator(estimator)(c[y], c[0] + c[1])
