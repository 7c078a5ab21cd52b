"""Deterministic per-order prediction strategies.

An order-``k`` expert looks up the bits that followed earlier occurrences of
the last ``k`` bits and predicts 0 only when the estimated frequency of 0
strictly exceeds 1/2; ties and unseen contexts give 1.  The side-information
expert does the same on joint (bit, quantized feature) contexts.  Experts hold
no state of their own: they are views over a shared count table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context_stats import (
    ESTIMATORS,
    CountBlock,
    CountTable,
    JointCountTable,
    MalformedInputError,
    _estimator,
)

__all__ = [
    "ExpertId",
    "ExpertPrediction",
    "InvalidRandomizationError",
    "decide",
    "markov_expert_predict",
    "side_info_expert_predict",
    "randomized_majority_predict",
    "markov_predictions",
    "zero_predicting_blocks",
]


class InvalidRandomizationError(ValueError):
    """A randomizing draw outside [0, 1]."""


@dataclass(frozen=True, order=True)
class ExpertId:
    order: int
    resolution: int | None = None

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ValueError("expert order must be >= 1")
        if self.resolution is not None and self.resolution < 1:
            raise ValueError("expert resolution must be >= 1")


@dataclass(frozen=True)
class ExpertPrediction:
    bit: int
    basis: float  # estimated probability of a 0


def decide(p_zero: float) -> int:
    """0 iff the estimate of 0 is strictly above 1/2."""
    return 0 if p_zero > 0.5 else 1


def _check_time(table, n: int | None) -> None:
    if n is not None and n != table.n:
        raise ValueError(f"table holds {table.n - 1} revealed bits; cannot predict time {n}")


def markov_expert_predict(k: int, table: CountTable, n: int | None = None, estimator: str = "empirical") -> ExpertPrediction:
    """Prediction of the order-``k`` empirical Markov expert at time ``table.n``."""
    _check_time(table, n)
    est = _estimator(estimator)
    if table.n <= k + 1:
        p0 = 0.5
    else:
        c0, c1 = table.counts(k)
        p0 = est(c0, c0 + c1)
    return ExpertPrediction(decide(p0), p0)


def side_info_expert_predict(
    k: int, level: int, table: JointCountTable, n: int | None = None, estimator: str = "empirical"
) -> ExpertPrediction:
    """Prediction of expert ``(k, level)`` given the current side vector."""
    _check_time(table, n)
    est = _estimator(estimator)
    if len(table.history.side) != table.n:
        raise MalformedInputError(f"x_{table.n} has not been observed")
    if table.n <= k + 1:
        p0 = 0.5
    else:
        c0, c1 = table.counts(k, level)
        p0 = est(c0, c0 + c1)
    return ExpertPrediction(decide(p0), p0)


def randomized_majority_predict(m: int, table: CountTable, u: float, n: int | None = None) -> int:
    """Order-``m`` majority vote with a fair coin on exact ties.

    Order 0 votes over every revealed bit.
    """
    if not 0.0 <= u <= 1.0:
        raise InvalidRandomizationError(f"u must lie in [0, 1], got {u}")
    _check_time(table, n)
    if m >= 1 and table.n <= m + 1:
        c0 = c1 = 0
    else:
        c0, c1 = table.counts(m)
    if c0 > c1:
        return 0
    if c0 < c1:
        return 1
    return int(u >= 0.5)


def markov_predictions(table: CountTable, estimator: str = "empirical") -> np.ndarray:
    """Predictions of orders ``1..F`` at the current time.

    ``F`` is the largest order with a nonempty index set; every higher order
    predicts 1.
    """
    c0, c1 = table.suffix_counts()
    p0 = ESTIMATORS[estimator](c0, c0 + c1)
    return np.where(np.asarray(p0) > 0.5, 0, 1).astype(np.int8)


def zero_predicting_blocks(
    table: JointCountTable, max_order: int, max_level: int, estimator: str = "empirical"
) -> list[CountBlock]:
    """Blocks of side-information experts that predict 0 now; all others predict 1."""
    est = _estimator(estimator)
    blocks = table.suffix_blocks(max_order, max_level)
    if not blocks:
        return []
    c0 = np.fromiter((b.count0 for b in blocks), dtype=float, count=len(blocks))
    c1 = np.fromiter((b.count1 for b in blocks), dtype=float, count=len(blocks))
    zero = np.asarray(est(c0, c0 + c1)) > 0.5
    return [b for b, z in zip(blocks, zero.tolist()) if z]
