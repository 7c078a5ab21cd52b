"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured value and
the threshold, then asserts.  Run just these with

    pytest tests/test_acceptance.py -v

or without pytest via ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ergodic_predict.context_stats import CountTable, empirical_frequency, laplace_frequency
from ergodic_predict.evaluation import (
    BOUND_SLACK,
    cumulative_loss,
    expected_loss_exact,
    hoeffding_check,
    minimax_experiment,
    report_from_ledger,
)
from ergodic_predict.experts import markov_expert_predict
from ergodic_predict.mixer import epoch_of, predict_sequence
from ergodic_predict.processes import (
    MarkovSource,
    SideInfoSource,
    StepLink,
    bayes_loss,
    bernoulli,
    generate,
    side_info_bayes_loss,
    side_info_generate,
)
from ergodic_predict.quantize import DyadicPartition, check_partition_family
from oracles import dyadic_cell, expert_bit, scan_counts, scan_frequency

pytestmark = pytest.mark.slow

SEEDS = range(10)


def verdict(capsys, number: int, name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {name}: {detail}"
    with capsys.disabled():
        print(f"\n{line}", flush=True)
    assert ok, line


# --------------------------------------------------------------------------
# 1, 2: regret bounds on uniformly random sequences


@pytest.fixture(scope="module")
def random_reports():
    rng = np.random.default_rng(20240601)
    out = {}
    for n in (64, 256, 1024):
        out[n] = [
            report_from_ledger(predict_sequence(rng.integers(0, 2, n).tolist(), seed=j, record_experts=False), check=False)
            for j in range(200)
        ]
    return out


def test_whole_run_regret_bound(random_reports, capsys):
    worst = {n: min(r.slack for r in reports) for n, reports in random_reports.items()}
    ok = all(s >= -BOUND_SLACK for s in worst.values())
    detail = ", ".join(f"n={n} min slack {s:.4f}" for n, s in worst.items())
    verdict(capsys, 1, "whole-run regret bound, 200 sequences per n", ok, detail)


def test_per_epoch_regret_bound(random_reports, capsys):
    worst = {}
    for n, reports in random_reports.items():
        worst[n] = min(min(r.epoch_slacks) for r in reports)
    ok = all(s >= -BOUND_SLACK for s in worst.values())
    detail = ", ".join(f"n={n} min epoch slack {s:.4f}" for n, s in worst.items())
    verdict(capsys, 2, "per-epoch regret bound on complete epochs", ok, detail)


# --------------------------------------------------------------------------
# 3, 4: Markov and i.i.d. sources


def _markov_losses(source: MarkovSource, n: int, estimator: str) -> tuple[float, float]:
    realized, expected = [], []
    for s in SEEDS:
        ledger = predict_sequence(generate(source, n, s).tolist(), seed=s, estimator=estimator, record_experts=False)
        realized.append(cumulative_loss(ledger))
        expected.append(expected_loss_exact(ledger))
    return float(np.mean(realized)), float(np.mean(expected))


def test_markov_source_near_bayes(capsys):
    source = MarkovSource(1, (0.3, 0.8))
    target = bayes_loss(source) + 0.05
    loss, expected = _markov_losses(source, 10**5, "laplace")
    verdict(capsys, 3, "order-1 source (0.3, 0.8), Laplace, n=1e5", loss <= target, f"mean loss {loss:.4f} <= {target:.2f} (expected {expected:.4f}, L* 0.24)")


def test_bernoulli_source_near_bayes(capsys):
    loss, expected = _markov_losses(bernoulli(0.7), 10**5, "empirical")
    verdict(capsys, 4, "Bernoulli 0.7, n=1e5", loss <= 0.33, f"mean loss {loss:.4f} <= 0.33 (expected {expected:.4f}, L* 0.30)")


# --------------------------------------------------------------------------
# 5: concentration of the randomized loss


def test_randomization_concentration(capsys):
    bits = np.random.default_rng(77).integers(0, 2, 10**4).tolist()
    result = hoeffding_check(bits, 200, 0.02)
    ok = result.exceedances <= 1
    detail = f"{result.exceedances} of 200 seeds beyond 0.02 (max deviation {result.deviations.max():.4f}, bound per seed {result.bound:.2e})"
    verdict(capsys, 5, "randomization concentration, n=1e4", ok, detail)


# --------------------------------------------------------------------------
# 6: side information


def test_side_information_near_bayes(capsys):
    source = SideInfoSource(StepLink((0.5,), (0.1, 0.9)))
    assert side_info_bayes_loss(source) == pytest.approx(0.1)
    n = 10**5
    full, early = [], []
    for s in SEEDS:
        x, y = side_info_generate(source, n, s)
        ledger = predict_sequence(y.tolist(), x, seed=s, record_experts=False)
        full.append(cumulative_loss(ledger))
        early.append(cumulative_loss(ledger, 1, 1000))
    r_full, r_early = float(np.mean(full)), float(np.mean(early))
    ok = r_full <= 0.16 and r_full < r_early
    verdict(capsys, 6, "side information, step link, n=1e5", ok, f"mean loss {r_full:.4f} <= 0.16, below {r_early:.4f} at n=1e3 (R* 0.10)")


# --------------------------------------------------------------------------
# 7: minimax rate of the order-0 majority vote


def test_minimax_gap(capsys):
    rows = minimax_experiment([100, 400, 1600], scale=0.5, replicates=10_000, seed=0)
    ok = all(r.scaled_gap >= 0.05 for r in rows)
    detail = ", ".join(f"n={r.n} {r.scaled_gap:.3f}+-{r.scaled_stderr:.3f}" for r in rows)
    verdict(capsys, 7, "minimax scaled gap >= 0.05", ok, detail)


# --------------------------------------------------------------------------
# 8: structural invariants, exact


def _structural_failures() -> list[str]:
    rng = np.random.default_rng(8)
    failures: list[str] = []
    for trial in range(60):
        n_bits = int(rng.integers(0, 64))
        bits = (rng.random(n_bits) < rng.random()).astype(int).tolist()
        cap = int(rng.integers(1, 9))
        table = CountTable(order_cap=cap, bits=bits)
        y = [None] + bits
        n = n_bits + 1
        for k in range(1, cap + 1):
            if table.order_totals(k) != max(0, n_bits - k):
                failures.append(f"count conservation k={k} trial={trial}")
        for k in range(1, 9):
            for b in (0, 1):
                if empirical_frequency(table, b, k=k) != scan_frequency(y, n, k, b):
                    failures.append(f"scan equivalence k={k} trial={trial}")
                if laplace_frequency(table, b, k=k) != scan_frequency(y, n, k, b, "laplace"):
                    failures.append(f"laplace scan equivalence k={k} trial={trial}")
            if markov_expert_predict(k, table).bit != markov_expert_predict(k, table, estimator="laplace").bit:
                failures.append(f"estimator decision k={k} trial={trial}")
            if markov_expert_predict(k, table).bit != expert_bit(y, n, k):
                failures.append(f"expert decision k={k} trial={trial}")
            expect = scan_counts(y, n, k) if n > k + 1 else [0, 0]
            if n > k + 1 and table.counts(k) != tuple(expect):
                failures.append(f"counts k={k} trial={trial}")
    for trial in range(20):
        bits = rng.integers(0, 2, int(rng.integers(1, 129))).tolist()
        y = [None] + bits
        for n in range(1, len(bits) + 1):
            top = 2 ** (epoch_of(n) + 1)
            ref = expert_bit(y, n, top)
            if any(expert_bit(y, n, k) != ref for k in range(top + 1, 2 * top + 1)):
                failures.append(f"grid truncation n={n} trial={trial}")
    part = DyadicPartition(2)
    try:
        check_partition_family(part)
    except Exception as exc:  # noqa: BLE001
        failures.append(f"partition family: {exc}")
    for _ in range(500):
        x = rng.normal(scale=2, size=2)
        level = int(rng.integers(1, 40))
        if part.cell_id(level, x) != dyadic_cell(level, x.tolist()):
            failures.append(f"cell id level={level}")
        if part.cell_id(level + 1, x) == part.cell_id(level + 1, x + 1e-9):
            if part.cell_id(level, x) != part.cell_id(level, x + 1e-9):
                failures.append(f"nestedness level={level}")
        side = 2.0**-level
        corner = np.floor(x / side) * side
        other = corner + rng.random(2) * side * 0.999
        if np.all(np.abs(x) < 2) and part.cell_id(level, x) == part.cell_id(level, other):
            if np.linalg.norm(x - other) > part.cell_diameter(level):
                failures.append(f"diameter level={level}")
    bits = rng.integers(0, 2, 500).tolist()
    a, b = predict_sequence(bits, seed=5), predict_sequence(bits, seed=5)
    if (a.thresholds, a.draws, a.predictions) != (b.thresholds, b.draws, b.predictions):
        failures.append("seeded determinism")
    xs = rng.random((200, 1))
    a, b = predict_sequence(bits[:200], xs, seed=5), predict_sequence(bits[:200], xs, seed=5)
    if (a.thresholds, a.draws, a.predictions) != (b.thresholds, b.draws, b.predictions):
        failures.append("seeded determinism with side information")
    return failures


def test_structural_invariants(capsys):
    failures = _structural_failures()
    detail = "all exact checks hold" if not failures else f"{len(failures)} failures, first: {failures[0]}"
    verdict(capsys, 8, "structural invariants", not failures, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
