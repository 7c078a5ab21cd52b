import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergodic_predict.context_stats import (
    CountTable,
    JointCountTable,
    MalformedInputError,
    UnknownResolutionError,
    empirical_frequency,
    encode_context,
    joint_frequency,
    laplace_frequency,
)
from oracles import dyadic_cell, scan_counts, scan_frequency

bit_lists = st.lists(st.integers(0, 1), min_size=0, max_size=64)


def test_order_one_example():
    # y = 0,1,0,1,1; at n = 6 the context y_5 = 1 was followed by 0 at i = 3 and by 1 at i = 5
    table = CountTable(bits=[0, 1, 0, 1, 1])
    assert table.counts(1) == (1, 1)
    assert empirical_frequency(table, 0, k=1) == 0.5
    assert empirical_frequency(table, 1, s=[0], k=1) == 1.0


def test_empty_index_set_gives_half():
    table = CountTable(bits=[1, 1])
    # n = 3 <= k + 1 for k = 2
    assert empirical_frequency(table, 0, k=2) == 0.5
    assert laplace_frequency(table, 1, k=2) == 0.5
    assert empirical_frequency(CountTable(), 1, k=1) == 0.5


def test_unseen_context_gives_half():
    table = CountTable(bits=[0, 0, 0, 0])
    assert empirical_frequency(table, 1, s=[1], k=1) == 0.5
    assert laplace_frequency(table, 1, s=[1], k=1) == 0.5


def test_laplace_values():
    table = CountTable(bits=[0, 0, 0, 0, 0])
    # context 0 is followed by 0 at i = 2..5
    assert laplace_frequency(table, 0, k=1) == pytest.approx(5 / 6)
    assert empirical_frequency(table, 0, k=1) == 1.0


def test_order_zero_counts_every_bit():
    table = CountTable(bits=[1, 0, 1, 1])
    assert table.counts(0) == (1, 3)


def test_rejects_bad_bits():
    with pytest.raises(MalformedInputError):
        CountTable(bits=[0, 2])
    with pytest.raises(MalformedInputError):
        CountTable().absorb("1")
    with pytest.raises(MalformedInputError):
        encode_context([0, 1], 3)


def test_time_mismatch_is_rejected():
    table = CountTable(bits=[0, 1])
    with pytest.raises(ValueError):
        empirical_frequency(table, 0, k=1, n=10)


def test_encode_context_forms_agree():
    assert encode_context("0110") == encode_context([0, 1, 1, 0]) == encode_context(6, 4) == 6


@settings(max_examples=150, deadline=None)
@given(bits=bit_lists, k=st.integers(1, 8), cap=st.integers(1, 6))
def test_scan_equivalence(bits, k, cap):
    """Tallies match a direct scan of the history for every tracked and untracked order."""
    table = CountTable(order_cap=cap, bits=bits)
    y = [None] + bits
    n = len(bits) + 1
    for bit in (0, 1):
        assert empirical_frequency(table, bit, k=k) == scan_frequency(y, n, k, bit)
        assert laplace_frequency(table, bit, k=k) == pytest.approx(scan_frequency(y, n, k, bit, "laplace"), abs=0)


@settings(max_examples=100, deadline=None)
@given(bits=bit_lists, cap=st.integers(1, 4))
def test_suffix_counts_match_scan_at_all_orders(bits, cap):
    table = CountTable(order_cap=cap, bits=bits)
    c0, c1 = table.suffix_counts()
    y = [None] + bits
    n = len(bits) + 1
    for k in range(1, n + 1):
        expect = scan_counts(y, n, k) if n > k + 1 else [0, 0]
        got = (int(c0[k - 1]), int(c1[k - 1])) if k <= len(c0) else (0, 0)
        assert got == tuple(expect), k


@settings(max_examples=100, deadline=None)
@given(bits=bit_lists, cap=st.integers(1, 8))
def test_count_conservation(bits, cap):
    """Order-k tallies sum to the size of the index set, max(0, t - k)."""
    table = CountTable(order_cap=cap, bits=bits)
    t = len(bits)
    for k in range(1, cap + 1):
        assert table.order_totals(k) == max(0, t - k)


def test_long_contexts_beyond_cap():
    rng = np.random.default_rng(3)
    block = rng.integers(0, 2, 40).tolist()
    bits = block + [1, 0] + block  # a 40-bit repeat
    table = CountTable(order_cap=4, bits=bits)
    y = [None] + bits
    n = len(bits) + 1
    c0, c1 = table.suffix_counts()
    for k in (5, 20, 39, 40, 41):
        expect = scan_counts(y, n, k)
        got = (int(c0[k - 1]), int(c1[k - 1])) if k <= len(c0) else (0, 0)
        assert got == tuple(expect)


# --------------------------------------------------------------------------
# joint contexts


def _joint(xs, bits, **kw):
    table = JointCountTable(**kw)
    for x, b in zip(xs, bits):
        table.observe([x])
        table.absorb(b)
    return table


def test_joint_counts_example():
    xs = [0.1, 0.2, 0.1, 0.7]
    bits = [0, 1, 0, 1]
    table = _joint(xs, bits)
    table.observe([0.2])
    # order 1, level 1: cells of 0.1 and 0.2 coincide ([0, 0.5)), 0.7 differs
    # context (y_{n-1} = 1, cells (x_4, x_5)) = (1, (c(0.7), c(0.2)))
    assert table.counts(1, 1) == (0, 0)
    assert joint_frequency(table, 0, k=1, level=1) == 0.5


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(st.tuples(st.sampled_from([0.1, 0.3, 0.35, 0.6, 0.8, -3.0, 5.0]), st.integers(0, 1)), max_size=24),
    k=st.integers(1, 4),
    level=st.integers(1, 5),
)
def test_joint_scan_equivalence(data, k, level):
    xs = [d[0] for d in data] + [0.3]
    bits = [d[1] for d in data]
    table = _joint(xs[:-1], bits, order_cap=2, resolution_cap=2)
    table.observe([xs[-1]])
    y = [None] + bits
    z = [None] + [dyadic_cell(level, [x]) for x in xs]
    n = len(bits) + 1
    expect = tuple(scan_counts(y, n, k, z)) if n > k + 1 else (0, 0)
    assert table.counts(k, level) == expect


def test_joint_rejects_level_zero():
    table = _joint([0.1, 0.2], [0, 1])
    table.observe([0.4])
    with pytest.raises(UnknownResolutionError):
        joint_frequency(table, 0, k=1, level=0)


def test_joint_requires_side_vector_first():
    table = JointCountTable()
    with pytest.raises(MalformedInputError):
        table.absorb(1)
    table.observe([0.5])
    with pytest.raises(MalformedInputError):
        table.observe([0.5])
