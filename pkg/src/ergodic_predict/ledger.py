"""Per-step loss records written by the predictors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["EpochRecord", "LossLedger"]


@dataclass
class EpochRecord:
    """Totals for one weighting epoch ``[2**m, 2**(m+1))``."""

    m: int
    start: int
    grid_size: int
    eta: float
    steps: int = 0
    expected_mistakes: float = 0.0  # sum of per-step mistake probabilities
    mistakes: int = 0  # realized
    best_expert_mistakes: int = 0  # best in-grid expert over the steps so far
    complete: bool = False

    @property
    def length(self) -> int:
        return 2**self.m

    @property
    def regret(self) -> float:
        """Expected epoch loss minus the best in-grid expert's epoch loss."""
        if self.steps == 0:
            return 0.0
        return (self.expected_mistakes - self.best_expert_mistakes) / self.steps

    @property
    def bound(self) -> float:
        """Exponential-weighting regret bound for the steps covered so far.

        For a complete epoch this is ``sqrt(ln K / (2 * 2**m))``; a partial
        epoch of ``s`` steps gets ``sqrt(2**m) / s * sqrt(ln K / 2)``.
        """
        log_k = math.log(self.grid_size)
        if self.complete:
            return math.sqrt(log_k / (2 * self.length))
        if self.steps == 0:
            return math.inf
        return math.sqrt(self.length) / self.steps * math.sqrt(log_k / 2)

    @property
    def slack(self) -> float:
        return self.bound - self.regret


@dataclass
class LossLedger:
    """Thresholds, draws, predictions and outcomes of a run, one entry per step.

    ``best_expert_mistakes[i]`` is the comparator after step ``i + 1``: the
    fewest mistakes of any single expert over the whole prefix in plain mode,
    and the sum over epochs of the best in-grid expert in side-information
    mode.  ``zero_experts[i]``, when recorded, describes which experts predicted
    0 at step ``i + 1`` (orders in plain mode, ``(order, lo, hi)`` level blocks
    with side information); every other expert predicted 1.
    """

    side_info: bool = False
    thresholds: list[float] = field(default_factory=list)
    draws: list[float] = field(default_factory=list)
    predictions: list[int] = field(default_factory=list)
    outcomes: list[int] = field(default_factory=list)
    best_expert_mistakes: list[int] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    zero_experts: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.outcomes)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "threshold": np.asarray(self.thresholds, dtype=float),
            "draw": np.asarray(self.draws, dtype=float),
            "prediction": np.asarray(self.predictions, dtype=np.int8),
            "outcome": np.asarray(self.outcomes, dtype=np.int8),
            "best_expert_mistakes": np.asarray(self.best_expert_mistakes, dtype=np.int64),
        }
