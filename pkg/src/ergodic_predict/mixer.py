"""Exponentially weighted mixture of the Markov experts with epoch restarts.

During epoch ``m`` (times ``2**m <= n < 2**(m+1)``) the predictor mixes the
``2**(m+1)`` experts of orders ``1..2**(m+1)`` (``(2**(m+1))**2`` order and
resolution pairs with side information) with weights
``exp(-eta_m * mistakes since 2**m)``, where ``eta_m = sqrt(8 ln K / 2**m)``.
The mixture weight of the 1-predictions is a threshold ``q``; the prediction
is 0 when the uniform draw ``u`` exceeds ``q`` and 1 otherwise.

Grids get very large (``2**17`` experts by ``n = 10**5``), but an expert that
has predicted 1 at every step of the current epoch has exactly as many
mistakes as there were zeros.  :class:`_ExpertPool` therefore stores only the
experts that have predicted 0 at least once since the reset and treats the
rest as one group, which keeps the threshold exact.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .context_stats import CountTable, JointCountTable, MalformedInputError, _check_bit, _estimator
from .experts import InvalidRandomizationError, markov_predictions, zero_predicting_blocks
from .ledger import EpochRecord, LossLedger
from .quantize import NestedPartition

__all__ = [
    "InvalidTimeError",
    "DegeneratePoolError",
    "ProtocolError",
    "epoch_of",
    "eta",
    "weights",
    "mixture_threshold",
    "randomized_decision",
    "EpochState",
    "StepResult",
    "UniversalPredictor",
    "SideInfoPredictor",
    "predict_sequence",
]


class InvalidTimeError(ValueError):
    pass


class DegeneratePoolError(ValueError):
    pass


class ProtocolError(RuntimeError):
    """``reveal`` without a pending ``step`` or two ``step`` calls in a row."""


def epoch_of(n: int) -> int:
    """Epoch index ``m = floor(log2 n)``."""
    if n < 1:
        raise InvalidTimeError(f"time index must be >= 1, got {n}")
    return int(n).bit_length() - 1


def eta(m: int, n_experts: int) -> float:
    """Learning rate ``sqrt(8 ln K / 2**m)`` for an epoch of length ``2**m``."""
    if n_experts < 2:
        raise DegeneratePoolError(f"need at least 2 experts, got {n_experts}")
    if m < 0:
        raise InvalidTimeError(f"epoch index must be >= 0, got {m}")
    return math.sqrt(8.0 * math.log(n_experts) / 2.0**m)


def weights(mistakes, learning_rate: float) -> np.ndarray:
    """``exp(-eta * mistakes)`` for in-epoch mistake counts."""
    return np.exp(-learning_rate * np.asarray(mistakes, dtype=float))


def mixture_threshold(w, predictions, multiplicity=None) -> float:
    """Weighted share of the experts predicting 1."""
    w = np.asarray(w, dtype=float)
    h = np.asarray(predictions)
    if w.size == 0:
        raise DegeneratePoolError("empty expert grid")
    if w.shape != h.shape:
        raise ValueError("weights and predictions must index the same experts")
    if multiplicity is not None:
        w = w * np.asarray(multiplicity, dtype=float)
    return float(np.sum(w * h) / np.sum(w))


def randomized_decision(q: float, u: float) -> int:
    """0 if ``u > q``, else 1; so ``P{1} = q`` for uniform ``u``."""
    if not 0.0 <= u <= 1.0:
        raise InvalidRandomizationError(f"u must lie in [0, 1], got {u}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {q}")
    return 0 if u > q else 1


class _ExpertPool:
    """Mistake counts of experts that have predicted 0 since the last reset.

    Every other expert in the grid has predicted 1 throughout and carries
    ``default`` mistakes.  A stored group may stand for several experts that
    have behaved identically; ``mult`` holds the group sizes.
    """

    def __init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        self.slot: dict[int, int] = {}
        self.ids: list = []
        self._mistakes = np.zeros(64, dtype=np.int64)
        self._mult = np.zeros(64, dtype=np.int64)
        self.size = 0
        self.covered = 0  # experts represented by stored groups
        self.default = 0

    def __len__(self) -> int:
        return self.size

    @property
    def mistakes(self) -> np.ndarray:
        return self._mistakes[: self.size]

    @property
    def mult(self) -> np.ndarray:
        return self._mult[: self.size]

    def _add(self, label, mistakes: int, mult: int) -> int:
        if self.size == len(self._mistakes):
            self._mistakes = np.concatenate([self._mistakes, np.zeros_like(self._mistakes)])
            self._mult = np.concatenate([self._mult, np.zeros_like(self._mult)])
        s = self.size
        self._mistakes[s] = mistakes
        self._mult[s] = mult
        self.ids.append(label)
        self.size += 1
        return s

    def activate(self, ids: np.ndarray) -> np.ndarray:
        """Slots of single experts ``ids``, adding the ones not seen since the reset."""
        slot = self.slot
        out = []
        for e in ids.tolist():
            s = slot.get(e)
            if s is None:
                s = slot[e] = self._add(e, self.default, 1)
                self.covered += 1
            out.append(s)
        return np.asarray(out, dtype=np.int64)

    def update(self, predictions: np.ndarray, y: int) -> None:
        self.mistakes[...] += predictions != y
        self.default += y == 0

    def best(self, grid_size: int | None = None) -> int:
        """Fewest mistakes in a grid of ``grid_size`` experts (``None``: unbounded)."""
        best = int(self.mistakes.min()) if self.size else None
        if grid_size is None or grid_size > self.covered:
            best = self.default if best is None else min(best, self.default)
        return best

    def threshold(self, predictions: np.ndarray, learning_rate: float, grid_size: int) -> float:
        rest = grid_size - self.covered
        if rest < 0:
            raise DegeneratePoolError("stored experts exceed the grid")
        shift = self.best(grid_size)
        w = np.exp(-learning_rate * (self.mistakes - shift)) * self.mult
        w_rest = rest * math.exp(-learning_rate * (self.default - shift))
        ones = float(w[predictions == 1].sum()) + w_rest
        return min(1.0, ones / (float(w.sum()) + w_rest))


class _LevelPool(_ExpertPool):
    """Side-information experts grouped per order into level intervals.

    Once an order has a level block predicting 0, all its levels are stored
    as intervals ``[start, next start)`` whose experts have agreed at every
    step since the reset.  A block that cuts an interval splits it, and the
    new piece inherits the mistake count.  The top interval also carries the
    ``extra`` experts whose levels lie beyond ``top`` but behave like it.
    """

    def reset(self) -> None:
        super().reset()
        self.intervals: dict[int, tuple[list[int], list[int]]] = {}
        self.top = 1
        self.extra = 0

    def configure(self, top: int, extra: int) -> None:
        self.top = top
        self.extra = extra

    def _split(self, starts: list[int], slots: list[int], order: int, at: int) -> None:
        if at > self.top:
            return
        j = bisect.bisect_right(starts, at) - 1
        if starts[j] == at:
            return
        end = starts[j + 1] - 1 if j + 1 < len(starts) else self.top
        moved = end - at + 1 + (self.extra if end == self.top else 0)
        parent = slots[j]
        self._mult[parent] -= moved
        child = self._add((order, at), int(self._mistakes[parent]), moved)
        starts.insert(j + 1, at)
        slots.insert(j + 1, child)

    def activate_blocks(self, blocks) -> np.ndarray:
        out: list[int] = []
        for order, lo, hi in blocks:
            entry = self.intervals.get(order)
            if entry is None:
                whole = self._add((order, 1), self.default, self.top + self.extra)
                self.covered += self.top + self.extra
                entry = self.intervals[order] = ([1], [whole])
            starts, slots = entry
            self._split(starts, slots, order, lo)
            self._split(starts, slots, order, hi + 1)
            a = bisect.bisect_left(starts, lo)
            b = bisect.bisect_right(starts, hi)
            out.extend(slots[a:b])
        return np.asarray(out, dtype=np.int64)

    def level_groups(self) -> dict[tuple[int, int, int], int]:
        """``(order, lo, hi) -> mistakes`` for every stored interval."""
        out = {}
        for order, (starts, slots) in self.intervals.items():
            ends = [s - 1 for s in starts[1:]] + [self.top]
            for lo, hi, s in zip(starts, ends, slots):
                out[(order, lo, hi)] = int(self._mistakes[s])
        return out


@dataclass(frozen=True)
class EpochState:
    """Snapshot of the current epoch's weighting state."""

    m: int
    epoch_start: int
    eta: float
    grid_size: int
    default_mistakes: int
    mistakes: dict = field(default_factory=dict)  # by order, or by (order, lo, hi) level interval
    top_level: int = 0

    def mistakes_of(self, expert) -> int:
        """Mistakes of an order (plain) or an ``(order, level)`` pair (side information)."""
        if expert in self.mistakes:
            return self.mistakes[expert]
        if isinstance(expert, tuple):
            order, level = expert
            for (k, lo, hi), count in self.mistakes.items():
                if k == order and lo <= min(level, self.top_level) <= hi:
                    return count
        return self.default_mistakes

    def weight_of(self, expert) -> float:
        return math.exp(-self.eta * self.mistakes_of(expert))


@dataclass(frozen=True)
class StepResult:
    n: int
    prediction: int
    threshold: float
    draw: float
    zero_experts: np.ndarray  # experts predicting 0; all others predict 1


@dataclass
class _Pending:
    n: int
    epoch_predictions: np.ndarray
    threshold: float
    draw: float
    prediction: int
    zero_ids: np.ndarray
    record: np.ndarray


class _MixturePredictor:
    side_info = False

    def __init__(self, estimator: str, seed: int | None, rng: np.random.Generator | None, record_experts: bool):
        _estimator(estimator)
        self.estimator = estimator
        self.seed = seed
        self._rng = rng if rng is not None else np.random.default_rng(seed)
        self.ledger = LossLedger(side_info=self.side_info, zero_experts=[] if record_experts else None)
        self._pool = self._new_pool()
        self._pending: _Pending | None = None
        self._closed_best = 0
        self._open_epoch(0)

    # subclasses provide the table, the grid and the zero-predicting experts
    table: CountTable | JointCountTable

    def _new_pool(self) -> _ExpertPool:
        return _ExpertPool()

    def _grid_size(self, m: int) -> int:
        raise NotImplementedError

    def _zero_slots(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pool slots predicting 0, the experts they stand for, and the ledger record."""
        raise NotImplementedError

    def _after_reveal(self, pending: _Pending, y: int) -> int:
        """Update run-level tallies; return the whole-run comparator."""
        raise NotImplementedError

    @property
    def n(self) -> int:
        """Time index of the next prediction."""
        return self.table.n

    @property
    def m(self) -> int:
        return self._m

    @property
    def learning_rate(self) -> float:
        return self._eta

    def epoch_state(self) -> EpochState:
        pool = self._pool
        return EpochState(
            m=self._m,
            epoch_start=2**self._m,
            eta=self._eta,
            grid_size=self._grid,
            default_mistakes=pool.default,
            mistakes=self._stored_mistakes(),
        )

    def _stored_mistakes(self) -> dict:
        return dict(zip(self._pool.ids, self._pool.mistakes.tolist()))

    def _open_epoch(self, m: int) -> None:
        self._m = m
        self._grid = self._grid_size(m)
        self._eta = eta(m, self._grid)
        self._pool.reset()
        self._record = EpochRecord(m=m, start=2**m, grid_size=self._grid, eta=self._eta)
        self.ledger.epochs.append(self._record)

    def _step(self, u: float | None) -> StepResult:
        if self._pending is not None:
            raise ProtocolError(f"step for time {self._pending.n} is awaiting its outcome")
        slots, ids, record = self._zero_slots()
        predictions = np.ones(len(self._pool), dtype=np.int8)
        predictions[slots] = 0
        q = self._pool.threshold(predictions, self._eta, self._grid)
        if u is None:
            u = float(self._rng.random())
        prediction = randomized_decision(q, u)
        self._pending = _Pending(self.n, predictions, q, float(u), prediction, ids, record)
        return StepResult(self.n, prediction, q, float(u), record)

    def reveal(self, y) -> None:
        """Reveal ``y_n`` for the pending step and advance to ``n + 1``."""
        pending = self._pending
        if pending is None:
            raise ProtocolError("reveal called without a pending step")
        y = _check_bit(y)
        self._pool.update(pending.epoch_predictions, y)
        rec = self._record
        rec.steps += 1
        rec.expected_mistakes += abs(y - pending.threshold)
        rec.mistakes += pending.prediction != y
        rec.best_expert_mistakes = self._pool.best(self._grid)
        comparator = self._after_reveal(pending, y)

        ledger = self.ledger
        ledger.thresholds.append(pending.threshold)
        ledger.draws.append(pending.draw)
        ledger.predictions.append(pending.prediction)
        ledger.outcomes.append(y)
        ledger.best_expert_mistakes.append(comparator)
        if ledger.zero_experts is not None:
            ledger.zero_experts.append(pending.record)

        self.table.absorb(y)
        self._pending = None
        if pending.n + 1 == 2 ** (self._m + 1):
            rec.complete = True
            self._closed_best += rec.best_expert_mistakes
            self._open_epoch(self._m + 1)


class UniversalPredictor(_MixturePredictor):
    """Sequential predictor for a bit stream.

    Call :meth:`step` to get the prediction for time ``n`` and then
    :meth:`reveal` with the true bit.  ``order_cap`` only controls how many
    orders are tallied eagerly; every order in the grid is always used.
    """

    def __init__(
        self,
        estimator: str = "empirical",
        seed: int | None = None,
        order_cap: int = 24,
        rng: np.random.Generator | None = None,
        record_experts: bool = True,
    ):
        self.table = CountTable(order_cap=order_cap)
        self._run_pool = _ExpertPool()
        super().__init__(estimator, seed, rng, record_experts)

    def _grid_size(self, m: int) -> int:
        return 2 ** (m + 1)

    def _zero_slots(self):
        orders = np.flatnonzero(markov_predictions(self.table, self.estimator) == 0).astype(np.int64) + 1
        return self._pool.activate(orders), orders, orders

    def _after_reveal(self, pending: _Pending, y: int) -> int:
        run = self._run_pool
        slots = run.activate(pending.zero_ids)
        predictions = np.ones(len(run), dtype=np.int8)
        predictions[slots] = 0
        run.update(predictions, y)
        return run.best()

    def step(self, u: float | None = None) -> StepResult:
        """Predict ``y_n``; ``u`` defaults to the next draw of the seeded generator."""
        return self._step(u)

    def run_mistakes(self) -> dict[int, int]:
        """Whole-run mistakes of every expert that ever predicted 0; others: :attr:`default_run_mistakes`."""
        return dict(zip(self._run_pool.ids, self._run_pool.mistakes.tolist()))

    @property
    def default_run_mistakes(self) -> int:
        return self._run_pool.default


class SideInfoPredictor(_MixturePredictor):
    """Sequential predictor for ``y_n`` given side vectors ``x_1..x_n``.

    Experts are indexed by ``(order, level)``.  Levels from the partition's
    saturation level on are indistinguishable, so the top stored level also
    stands for all grid levels beyond it.
    """

    side_info = True

    def __init__(
        self,
        partition: NestedPartition | None = None,
        dimension: int = 1,
        estimator: str = "empirical",
        seed: int | None = None,
        order_cap: int = 8,
        resolution_cap: int = 8,
        rng: np.random.Generator | None = None,
        record_experts: bool = True,
    ):
        self.table = JointCountTable(partition, dimension=dimension, order_cap=order_cap, resolution_cap=resolution_cap)
        self.partition = self.table.partition
        self._sat = self.partition.saturation_level
        super().__init__(estimator, seed, rng, record_experts)

    def _new_pool(self) -> _LevelPool:
        return _LevelPool()

    def _open_epoch(self, m: int) -> None:
        super()._open_epoch(m)
        side = 2 ** (m + 1)
        top = min(side, self._sat)
        self._pool.configure(top, side - top)

    def _grid_size(self, m: int) -> int:
        return (2 ** (m + 1)) ** 2

    def _stored_mistakes(self) -> dict:
        return self._pool.level_groups()

    def epoch_state(self) -> EpochState:
        state = super().epoch_state()
        return EpochState(**{**state.__dict__, "top_level": self._pool.top})

    def _zero_slots(self):
        side = 2 ** (self._m + 1)
        blocks = zero_predicting_blocks(self.table, side, self._pool.top, self.estimator)
        record = np.asarray([(b.order, b.lo, b.hi) for b in blocks], dtype=np.int64).reshape(-1, 3)
        return self._pool.activate_blocks(record.tolist()), record, record

    def _after_reveal(self, pending: _Pending, y: int) -> int:
        return self._closed_best + self._record.best_expert_mistakes

    def step(self, x, u: float | None = None) -> StepResult:
        """Observe ``x_n`` and predict ``y_n``."""
        if self._pending is not None:
            raise ProtocolError(f"step for time {self._pending.n} is awaiting its outcome")
        self.table.observe(x)
        return self._step(u)


def predict_sequence(bits, side=None, **config) -> LossLedger:
    """Run a predictor over a whole sequence and return its ledger.

    With ``side`` (one vector per bit) a :class:`SideInfoPredictor` is used.
    Keyword arguments go to the predictor constructor.
    """
    bits = list(bits)
    if side is None:
        predictor = UniversalPredictor(**config)
        for y in bits:
            predictor.step()
            predictor.reveal(y)
    else:
        side = list(side)
        if len(side) != len(bits):
            raise MalformedInputError(f"{len(bits)} bits but {len(side)} side vectors")
        predictor = SideInfoPredictor(**config)
        for x, y in zip(side, bits):
            predictor.step(x)
            predictor.reveal(y)
    return predictor.ledger
