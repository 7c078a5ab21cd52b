import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodic_predict.evaluation import report_from_ledger
from ergodic_predict.experts import InvalidRandomizationError
from ergodic_predict.mixer import (
    DegeneratePoolError,
    InvalidTimeError,
    ProtocolError,
    SideInfoPredictor,
    UniversalPredictor,
    epoch_of,
    eta,
    mixture_threshold,
    predict_sequence,
    randomized_decision,
    weights,
)
from oracles import expert_bit, naive_thresholds, whole_run_best


def test_epoch_of():
    assert [epoch_of(n) for n in (1, 2, 3, 4, 7, 8, 1023, 1024)] == [0, 1, 1, 2, 2, 3, 9, 10]
    with pytest.raises(InvalidTimeError):
        epoch_of(0)


def test_eta_values():
    # sqrt(8 ln K / 2**m)
    assert eta(0, 2) == pytest.approx(2.354820, abs=1e-6)
    assert eta(2, 8) == pytest.approx(2.039334, abs=1e-6)
    assert eta(0, 4) == pytest.approx(3.330218, abs=1e-6)
    with pytest.raises(DegeneratePoolError):
        eta(0, 1)


def test_weights_and_threshold():
    w = weights([0, 2], eta(2, 8))
    assert w[1] == pytest.approx(math.exp(-2 * math.sqrt(2 * math.log(8))), rel=1e-12)
    assert w[1] == pytest.approx(0.0169300, abs=1e-7)
    # one expert for 1 with no mistakes, one for 0 with weight e^-1
    assert mixture_threshold([1.0, math.exp(-1)], [1, 0]) == pytest.approx(1 / (1 + math.exp(-1)))
    assert mixture_threshold([1.0, 1.0], [1, 1], multiplicity=[3, 5]) == 1.0
    with pytest.raises(DegeneratePoolError):
        mixture_threshold([], [])


def test_randomized_decision():
    assert randomized_decision(0.3, 0.3) == 1
    assert randomized_decision(0.3, 0.31) == 0
    assert randomized_decision(1.0, 1.0) == 1
    assert randomized_decision(0.0, 0.0) == 1
    assert randomized_decision(0.0, 1e-12) == 0
    with pytest.raises(InvalidRandomizationError):
        randomized_decision(0.5, -0.1)


def test_first_step_threshold_is_one():
    # every expert predicts 1 before any data
    p = UniversalPredictor(seed=0)
    assert p.step().threshold == 1.0


@pytest.mark.parametrize("estimator", ["empirical", "laplace"])
def test_matches_full_grid_reference(estimator):
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(1, 40))
        bits = (rng.random(n) < rng.random()).astype(int).tolist()
        ledger = predict_sequence(bits, seed=0, estimator=estimator, order_cap=int(rng.integers(1, 6)))
        expect, _ = naive_thresholds(bits, estimator=estimator)
        np.testing.assert_allclose(ledger.thresholds, expect, rtol=0, atol=1e-12)


def test_side_info_matches_full_grid_reference():
    rng = np.random.default_rng(5)
    for _ in range(12):
        n = int(rng.integers(1, 14))
        xs = rng.choice([0.1, 0.3, 0.31, 0.7, 1.9, -0.2], n)
        bits = rng.integers(0, 2, n).tolist()
        ledger = predict_sequence(bits, [[x] for x in xs], seed=0, order_cap=2, resolution_cap=2)
        expect, epochs = naive_thresholds(bits, xs=[[x] for x in xs])
        np.testing.assert_allclose(ledger.thresholds, expect, rtol=0, atol=1e-12)
        for record in ledger.epochs:
            if record.steps:
                assert record.best_expert_mistakes == epochs[record.m][1]


def test_saturated_levels_stand_for_the_rest():
    # duplicate side vectors never separate, so every level beyond the data is one expert
    p = SideInfoPredictor(seed=1, order_cap=2, resolution_cap=2)
    for y in [0, 0, 1, 0] * 300:
        p.step([0.25])
        p.reveal(y)
    assert p.m == 10
    assert p.ledger.epochs[-1].grid_size == (2**11) ** 2
    assert all(0 <= q <= 1 for q in p.ledger.thresholds)


@settings(max_examples=40, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=70))
def test_comparator_is_whole_run_best(bits):
    ledger = predict_sequence(bits, seed=0, order_cap=3)
    assert ledger.best_expert_mistakes[-1] == whole_run_best(bits, len(bits) + 1)


@settings(max_examples=30, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=128))
def test_grid_truncation_is_lossless(bits):
    """Orders above 2**(m+1) repeat the top in-grid expert throughout epoch m."""
    y = [None] + bits
    for n in range(1, len(bits) + 1):
        top = 2 ** (epoch_of(n) + 1)
        ref = expert_bit(y, n, top)
        for k in range(top + 1, 2 * top + 1):
            assert expert_bit(y, n, k) == ref


def test_extended_grid_keeps_best_loss_but_moves_threshold():
    # Doubling the grid adds clones of the top expert: the best in-grid loss is
    # unchanged but the clones carry weight, so q itself moves.
    bits = [0, 0, 0, 1, 1, 0, 1]
    base_q, base_epochs = naive_thresholds(bits)
    wide_q, wide_epochs = naive_thresholds(bits, grid=lambda m: 2 ** (m + 2))
    assert {m: e[1] for m, e in base_epochs.items()} == {m: e[1] for m, e in wide_epochs.items()}
    assert base_q[2] == pytest.approx(3 / 4)
    assert wide_q[2] == pytest.approx(7 / 8)


def test_seeded_runs_are_bit_exact():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 300).tolist()
    a = predict_sequence(bits, seed=42)
    b = predict_sequence(bits, seed=42)
    c = predict_sequence(bits, seed=43)
    assert a.thresholds == b.thresholds and a.draws == b.draws and a.predictions == b.predictions
    assert a.thresholds == c.thresholds  # thresholds never depend on the draws
    assert a.draws != c.draws
    np.testing.assert_array_equal(a.draws, np.random.default_rng(42).random(300))


def test_explicit_draws_override_generator():
    p = UniversalPredictor(seed=0)
    r = p.step(u=0.999)
    assert r.draw == 0.999 and r.prediction == 1  # q = 1 at the first step
    p.reveal(0)
    p.step()
    p.reveal(0)
    r = p.step(u=0.999)
    assert r.threshold < 0.999 and r.prediction == 0


def test_protocol_errors():
    p = UniversalPredictor(seed=0)
    with pytest.raises(ProtocolError):
        p.reveal(1)
    p.step()
    with pytest.raises(ProtocolError):
        p.step()
    p.reveal(1)
    q = SideInfoPredictor(seed=0)
    q.step([0.1])
    with pytest.raises(ProtocolError):
        q.step([0.2])


def test_epoch_boundaries():
    ledger = predict_sequence([1, 0] * 40, seed=0)
    starts = [e.start for e in ledger.epochs]
    assert starts == [1, 2, 4, 8, 16, 32, 64]
    assert [e.steps for e in ledger.epochs] == [1, 2, 4, 8, 16, 32, 17]
    assert [e.complete for e in ledger.epochs] == [True] * 6 + [False]
    assert all(e.grid_size == 2 ** (e.m + 1) for e in ledger.epochs)


def test_epoch_state_weights():
    p = UniversalPredictor(seed=0)
    for y in [0, 0, 0, 0, 0]:
        p.step()
        p.reveal(y)
    state = p.epoch_state()
    assert state.m == 2 and state.epoch_start == 4
    # every expert predicting 1 so far missed both zeros of this epoch
    assert state.mistakes_of(8) == state.default_mistakes == 2
    assert state.weight_of(8) == pytest.approx(math.exp(-2 * state.eta))


@settings(max_examples=60, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=200), seed=st.integers(0, 2**16))
def test_regret_bounds_hold_for_any_sequence(bits, seed):
    report = report_from_ledger(predict_sequence(bits, seed=seed), check=False)
    assert report.slack >= -1e-9
    assert all(s >= -1e-9 for s in report.epoch_slacks)
    assert all(0.0 <= q <= 1.0 for q in predict_sequence(bits, seed=seed).thresholds)


@settings(max_examples=20, deadline=None)
@given(
    data=st.lists(st.tuples(st.floats(-2, 2, allow_nan=False), st.integers(0, 1)), min_size=1, max_size=80),
)
def test_side_info_regret_bounds_hold(data):
    xs = [[d[0]] for d in data]
    bits = [d[1] for d in data]
    report = report_from_ledger(predict_sequence(bits, xs, seed=0), check=False)
    assert report.slack >= -1e-9
    assert all(s >= -1e-9 for s in report.epoch_slacks)
