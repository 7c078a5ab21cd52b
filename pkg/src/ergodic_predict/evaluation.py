"""Loss accounting, regret-bound verification and the randomization experiments.

The predictor's thresholds depend only on past outcomes, never on past draws,
so the probability of a mistake at step ``i`` is exactly ``|y_i - q_i|``.
That makes the expected loss computable from one run and lets the
concentration check replay any number of draw sequences against a single set
of thresholds.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .ledger import EpochRecord, LossLedger
from .mixer import predict_sequence
from .processes import (
    MarkovSource,
    SideInfoSource,
    bayes_loss,
    generate,
    side_info_bayes_loss,
    side_info_generate,
)
from .quantize import SATURATION_LEVEL

__all__ = [
    "WHOLE_RUN_CONSTANT",
    "BOUND_SLACK",
    "RangeError",
    "VerificationError",
    "cumulative_loss",
    "expected_loss_exact",
    "expert_mistakes",
    "epoch_regret_bound",
    "whole_run_bound",
    "RegretReport",
    "regret_report",
    "report_from_ledger",
    "markov_loss_bound",
    "HoeffdingResult",
    "replay_losses",
    "hoeffding_check",
    "MinimaxRow",
    "minimax_experiment",
    "majority_gap_exact",
    "bench",
]

WHOLE_RUN_CONSTANT = math.sqrt(math.log(2)) / (math.sqrt(2) - 1)
BOUND_SLACK = 1e-9


class RangeError(ValueError):
    pass


class VerificationError(AssertionError):
    """A regret inequality failed: a bug in the predictor, not a data property."""


def _range(ledger: LossLedger, m: int, n: int | None) -> tuple[int, int]:
    total = len(ledger)
    n = total if n is None else n
    if not 1 <= m <= n <= total:
        raise RangeError(f"range [{m}, {n}] is outside the ledger's steps 1..{total}")
    return m, n


def expert_mistakes(ledger: LossLedger, expert) -> np.ndarray:
    """Per-step mistakes of one expert, recovered from the recorded zero sets.

    ``expert`` is an order in plain mode and ``(order, level)`` with side
    information.
    """
    if ledger.zero_experts is None:
        raise ValueError("this ledger did not record expert predictions")
    y = np.asarray(ledger.outcomes, dtype=np.int8)
    zero = np.zeros(len(y), dtype=bool)
    if ledger.side_info:
        k, level = expert
        level = min(level, SATURATION_LEVEL)
        for i, blocks in enumerate(ledger.zero_experts):
            if len(blocks):
                zero[i] = bool(np.any((blocks[:, 0] == k) & (blocks[:, 1] <= level) & (level <= blocks[:, 2])))
    else:
        k = int(expert)
        for i, orders in enumerate(ledger.zero_experts):
            zero[i] = k in orders
    return (np.where(zero, 0, 1) != y).astype(np.int8)


def cumulative_loss(ledger: LossLedger, m: int = 1, n: int | None = None, subject=None) -> float:
    """Fraction of mistakes on steps ``m..n`` of the predictor or of one expert."""
    m, n = _range(ledger, m, n)
    if subject is None:
        wrong = np.asarray(ledger.predictions[m - 1 : n]) != np.asarray(ledger.outcomes[m - 1 : n])
    else:
        wrong = expert_mistakes(ledger, subject)[m - 1 : n]
    return float(np.mean(wrong))


def expected_loss_exact(ledger: LossLedger, m: int = 1, n: int | None = None) -> float:
    """Mean of ``|y_i - q_i|`` over steps ``m..n``."""
    m, n = _range(ledger, m, n)
    q = np.asarray(ledger.thresholds[m - 1 : n], dtype=float)
    y = np.asarray(ledger.outcomes[m - 1 : n], dtype=float)
    return float(np.mean(np.abs(y - q)))


def epoch_regret_bound(m: int, n_experts: int) -> float:
    """Average regret bound ``sqrt(ln K / (2 * 2**m))`` for a complete epoch."""
    return math.sqrt(math.log(n_experts) / (2 * 2**m))


def whole_run_bound(n: int, side_info: bool = False) -> float:
    """``c * sqrt((log2 n + 1) / n)`` with ``c = sqrt(ln 2) / (sqrt 2 - 1)``.

    With side information the grid is squared, doubling ``ln K`` in every
    epoch, so the constant grows by ``sqrt 2``.
    """
    if n < 1:
        raise RangeError("n must be >= 1")
    c = WHOLE_RUN_CONSTANT * (math.sqrt(2) if side_info else 1.0)
    return c * math.sqrt((math.log2(n) + 1) / n)


@dataclass(frozen=True)
class RegretReport:
    n: int
    realized_loss: float
    expected_loss: float
    best_expert_loss: float
    bound: float
    epochs: tuple[EpochRecord, ...] = field(repr=False)
    side_info: bool = False

    @property
    def regret(self) -> float:
        return self.expected_loss - self.best_expert_loss

    @property
    def slack(self) -> float:
        return self.bound - self.regret

    @property
    def epoch_slacks(self) -> list[float]:
        """Bound minus regret for every complete epoch."""
        return [e.slack for e in self.epochs if e.complete]

    @property
    def holds(self) -> bool:
        return self.slack >= -BOUND_SLACK and all(s >= -BOUND_SLACK for s in self.epoch_slacks)

    def record(self) -> dict:
        slacks = self.epoch_slacks
        return {
            "n": self.n,
            "realized_loss": self.realized_loss,
            "expected_loss": self.expected_loss,
            "best_expert_loss": self.best_expert_loss,
            "bound": self.bound,
            "slack": self.slack,
            "min_epoch_slack": min(slacks) if slacks else math.inf,
            "complete_epochs": len(slacks),
            "holds": self.holds,
        }


def report_from_ledger(ledger: LossLedger, check: bool = True) -> RegretReport:
    n = len(ledger)
    if n == 0:
        raise RangeError("empty ledger")
    report = RegretReport(
        n=n,
        realized_loss=cumulative_loss(ledger),
        expected_loss=expected_loss_exact(ledger),
        best_expert_loss=ledger.best_expert_mistakes[-1] / n,
        bound=whole_run_bound(n, ledger.side_info),
        epochs=tuple(ledger.epochs),
        side_info=ledger.side_info,
    )
    if check and not report.holds:
        bad = [e.m for e in report.epochs if e.complete and e.slack < -BOUND_SLACK]
        raise VerificationError(
            f"regret bound violated at n={n}: whole-run slack {report.slack:.3g}, failing epochs {bad}"
        )
    return report


def regret_report(bits, side=None, check: bool = True, **config) -> RegretReport:
    """Run the predictor over ``bits`` (with ``side`` vectors if given) and check both regret bounds."""
    config.setdefault("record_experts", False)
    return report_from_ledger(predict_sequence(bits, side, **config), check=check)


def markov_loss_bound(order: int, n: int, log_base: str = "e", c: float = 0.0) -> float:
    """Excess-loss bound for an order-``order`` Markov source.

    ``2 sqrt(2**(m-1) log n / n) + 3 sqrt((log2 n + 1) / n) + sqrt(c / n)``.
    The base of ``log n`` is ambiguous, so both ``"e"`` and ``"2"`` are
    offered; the universal constant ``c`` is unknown and defaults to 0.
    """
    if n < 2:
        raise RangeError("n must be >= 2")
    if log_base not in ("e", "2"):
        raise ValueError("log_base must be 'e' or '2'")
    log_n = math.log(n) if log_base == "e" else math.log2(n)
    return (
        2 * math.sqrt(2.0 ** (order - 1) * log_n / n)
        + 3 * math.sqrt((math.log2(n) + 1) / n)
        + math.sqrt(c / n)
    )


# --------------------------------------------------------------------------
# Concentration of the randomized loss


@dataclass(frozen=True)
class HoeffdingResult:
    n: int
    n_seeds: int
    epsilon: float
    expected_loss: float
    realized_losses: np.ndarray = field(repr=False)

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.realized_losses - self.expected_loss)

    @property
    def exceedances(self) -> int:
        return int(np.count_nonzero(self.deviations > self.epsilon))

    @property
    def fraction(self) -> float:
        return self.exceedances / self.n_seeds

    @property
    def bound(self) -> float:
        """Per-seed exceedance probability bound ``2 exp(-2 n eps**2)``."""
        return 2 * math.exp(-2 * self.n * self.epsilon**2)

    def record(self) -> dict:
        return {
            "n": self.n,
            "n_seeds": self.n_seeds,
            "epsilon": self.epsilon,
            "expected_loss": self.expected_loss,
            "exceedances": self.exceedances,
            "fraction": self.fraction,
            "bound": self.bound,
            "max_deviation": float(self.deviations.max()),
        }


def replay_losses(thresholds, outcomes, seeds: Sequence[int]) -> np.ndarray:
    """Realized loss of the predictor for each draw seed.

    A predictor constructed with ``seed=s`` draws ``default_rng(s).random()``
    once per step, which is the same stream as ``default_rng(s).random(n)``.
    """
    q = np.asarray(thresholds, dtype=float)
    y = np.asarray(outcomes, dtype=np.int8)
    out = np.empty(len(seeds))
    for j, s in enumerate(seeds):
        u = np.random.default_rng(s).random(len(q))
        out[j] = np.mean(np.where(u > q, 0, 1) != y)
    return out


def hoeffding_check(bits, n_seeds: int, epsilon: float, side=None, first_seed: int = 0, **config) -> HoeffdingResult:
    """Compare realized losses under ``n_seeds`` draw sequences with the exact expected loss."""
    config.setdefault("record_experts", False)
    config.pop("seed", None)
    ledger = predict_sequence(bits, side, seed=first_seed, **config)
    seeds = list(range(first_seed, first_seed + n_seeds))
    losses = replay_losses(ledger.thresholds, ledger.outcomes, seeds)
    return HoeffdingResult(len(ledger), n_seeds, float(epsilon), expected_loss_exact(ledger), losses)


# --------------------------------------------------------------------------
# Minimax rate of the order-0 majority vote


@dataclass(frozen=True)
class MinimaxRow:
    n: int
    theta: float
    replicates: int
    gap: float  # Monte Carlo estimate of E L - L*
    stderr: float
    exact_gap: float

    @property
    def scaled_gap(self) -> float:
        return self.gap * math.sqrt(self.n)

    @property
    def scaled_stderr(self) -> float:
        return self.stderr * math.sqrt(self.n)

    def record(self) -> dict:
        return {
            "n": self.n,
            "theta": self.theta,
            "replicates": self.replicates,
            "gap": self.gap,
            "stderr": self.stderr,
            "scaled_gap": self.scaled_gap,
            "scaled_stderr": self.scaled_stderr,
            "exact_gap": self.exact_gap,
            "scaled_exact_gap": self.exact_gap * math.sqrt(self.n),
        }


def majority_gap_exact(n: int, theta: float) -> float:
    """Exact ``E L - L*`` of the tie-randomized majority vote on Bernoulli(1/2 + theta), ``theta >= 0``.

    At step ``i`` with ``S ~ Bin(i - 1, 1/2 + theta)`` ones so far the vote is
    wrong-way when ``S < (i - 1) / 2`` and a coin flip at a tie; each
    wrong-way vote costs ``2 theta`` over the Bayes rule.
    """
    if not 0 <= theta <= 0.5:
        raise ValueError("theta must lie in [0, 1/2]")
    p = 0.5 + theta
    t = np.arange(n)  # i - 1
    below = binom.cdf(np.ceil(t / 2) - 1, t, p)  # P(S < t/2)
    tie = np.where(t % 2 == 0, binom.pmf(t // 2, t, p), 0.0)
    return float(2 * theta * np.mean(below + 0.5 * tie))


def _majority_gap_samples(n: int, theta: float, replicates: int, rng: np.random.Generator, chunk: int = 1000) -> np.ndarray:
    """Per-replicate ``L - L*`` with the per-step mistake probability given the vote.

    Conditioning on the past removes the outcome and coin noise of the
    current step; the remaining randomness is the sample path.
    """
    p = 0.5 + theta
    out = np.empty(replicates)
    for start in range(0, replicates, chunk):
        r = min(chunk, replicates - start)
        y = rng.random((r, n)) < p
        ones = np.zeros((r, n), dtype=np.int32)
        np.cumsum(y[:, :-1], axis=1, out=ones[:, 1:])
        zeros = np.arange(n, dtype=np.int32)[None, :] - ones
        # mistake probability: 1 - p when voting 1, p when voting 0, 1/2 on ties
        err = np.where(ones > zeros, 1 - p, np.where(ones < zeros, p, 0.5))
        out[start : start + r] = err.mean(axis=1) - min(p, 1 - p)
    return out


def minimax_experiment(
    lengths: Sequence[int], scale: float = 0.5, replicates: int = 10_000, seed: int = 0
) -> list[MinimaxRow]:
    """Monte Carlo excess loss of the order-0 majority vote at ``theta = scale / sqrt(n)``."""
    rows = []
    for j, n in enumerate(lengths):
        theta = scale / math.sqrt(n)
        rng = np.random.default_rng([seed, j])
        gaps = _majority_gap_samples(n, theta, replicates, rng)
        rows.append(
            MinimaxRow(
                n=n,
                theta=theta,
                replicates=replicates,
                gap=float(gaps.mean()),
                stderr=float(gaps.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.inf,
                exact_gap=majority_gap_exact(n, theta),
            )
        )
    return rows


# --------------------------------------------------------------------------
# Benchmarks


def _bench_row(source, n: int, s: int, config: dict, oracle: float, check: bool) -> dict:
    side_info = isinstance(source, SideInfoSource)
    if side_info:
        x, y = side_info_generate(source, n, s)
        ledger = predict_sequence(y.tolist(), x, seed=s, **config)
    else:
        y = generate(source, n, s)
        ledger = predict_sequence(y.tolist(), seed=s, **config)
    report = report_from_ledger(ledger, check=check)
    row = {
        "seed": s,
        "n": n,
        "loss": report.realized_loss,
        "expected_loss": report.expected_loss,
        "best_expert_loss": report.best_expert_loss,
        "bayes_loss": oracle,
        "excess_loss": report.realized_loss - oracle,
        "regret_bound": report.bound,
        "regret_slack": report.slack,
        "min_epoch_slack": report.record()["min_epoch_slack"],
    }
    if not side_info:
        row["markov_bound_ln"] = markov_loss_bound(source.order, n, "e") if n >= 2 else math.nan
        row["markov_bound_log2"] = markov_loss_bound(source.order, n, "2") if n >= 2 else math.nan
    return row


def bench(
    source: MarkovSource | SideInfoSource,
    n: int,
    seeds: Sequence[int],
    estimator: str = "empirical",
    order_cap: int | None = None,
    resolution_cap: int | None = None,
    check: bool = True,
    workers: int = 1,
) -> list[dict]:
    """One row per seed plus a summary row (``seed = "mean"``).

    Each seed generates a fresh sequence from ``source`` and runs the
    predictor with the same seed for its draws.  With ``workers > 1`` seeds
    run in separate processes; rows keep the seed order either way.
    """
    side_info = isinstance(source, SideInfoSource)
    oracle = side_info_bayes_loss(source) if side_info else bayes_loss(source)
    config: dict = {"estimator": estimator, "record_experts": False}
    if order_cap is not None:
        config["order_cap"] = order_cap
    if side_info:
        config["dimension"] = source.dimension
        if resolution_cap is not None:
            config["resolution_cap"] = resolution_cap
    seeds = list(seeds)
    args = [(source, n, s, config, oracle, check) for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            rows = list(pool.map(_bench_row, *zip(*args)))
    else:
        rows = [_bench_row(*a) for a in args]
    summary = {"seed": "mean", "n": n}
    for key in rows[0]:
        if key not in summary:
            summary[key] = float(np.mean([r[key] for r in rows]))
    rows.append(summary)
    return rows
