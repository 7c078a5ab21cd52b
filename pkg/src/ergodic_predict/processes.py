"""Stationary benchmark sources and their exact Bayes losses.

A Markov source of order ``m`` is described by ``p(1 | s)`` for each state
``s`` (the last ``m`` bits, oldest first, read as a binary number).  Sampling
starts from the stationary distribution, so every finite window has the
stationary law and ``L*`` is the per-step Bayes loss from the first bit.

Side-information sources draw ``X`` i.i.d. uniform on a box and
``Y ~ Bernoulli(eta(X))`` with a piecewise link ``eta``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "NonErgodicSpecError",
    "SpecError",
    "UnsupportedOracleError",
    "MarkovSource",
    "StepLink",
    "LinearLink",
    "SideInfoSource",
    "bernoulli",
    "stationary_distribution",
    "transition_matrix",
    "bayes_loss",
    "generate",
    "side_info_bayes_loss",
    "side_info_generate",
    "load_spec",
    "parse_spec",
]

EXACT_SOLVE_MAX_ORDER = 10


class SpecError(ValueError):
    """Malformed source description."""


class NonErgodicSpecError(SpecError):
    """The chain has more than one closed class, so no unique stationary law."""


class UnsupportedOracleError(SpecError):
    pass


@dataclass(frozen=True)
class MarkovSource:
    order: int
    p_one: tuple[float, ...]  # p(1 | s) indexed by int(s, 2)

    def __post_init__(self) -> None:
        if self.order < 0:
            raise SpecError("order must be >= 0")
        if len(self.p_one) != 2**self.order:
            raise SpecError(f"order {self.order} needs {2 ** self.order} transition entries, got {len(self.p_one)}")
        p = np.asarray(self.p_one, dtype=float)
        if not np.all((p >= 0) & (p <= 1)):
            raise SpecError("transition probabilities must lie in [0, 1]")
        object.__setattr__(self, "p_one", tuple(float(v) for v in p))

    @classmethod
    def from_states(cls, order: int, transition: dict[str, float]) -> "MarkovSource":
        """Build from ``{"01": p, ...}`` keyed by state bit strings, oldest bit first."""
        p = [None] * 2**order
        for state, value in transition.items():
            state = str(state)
            if len(state) != order or set(state) - {"0", "1"}:
                raise SpecError(f"bad state {state!r} for order {order}")
            p[int(state, 2) if order else 0] = float(value)
        missing = [format(i, f"0{order}b") for i, v in enumerate(p) if v is None]
        if missing:
            raise SpecError(f"missing transition entries for states {missing}")
        return cls(order, tuple(p))


def bernoulli(p: float) -> MarkovSource:
    return MarkovSource(0, (p,))


def transition_matrix(source: MarkovSource) -> np.ndarray:
    """Dense ``2**m x 2**m`` state transition matrix (``m >= 1``)."""
    m = source.order
    size = 2**m
    mask = size - 1
    states = np.arange(size)
    p1 = np.asarray(source.p_one)
    P = np.zeros((size, size))
    P[states, (states << 1) & mask] += 1 - p1
    P[states, ((states << 1) | 1) & mask] += p1
    return P


def _check_single_closed_class(source: MarkovSource) -> None:
    m = source.order
    size = 2**m
    mask = size - 1
    states = np.arange(size)
    p1 = np.asarray(source.p_one)
    rows = np.concatenate([states[p1 < 1], states[p1 > 0]])
    cols = np.concatenate([((states << 1) & mask)[p1 < 1], (((states << 1) | 1) & mask)[p1 > 0]])
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(size, size))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    # a component is closed if no edge leaves it
    leaves = np.zeros(n_comp, dtype=bool)
    leaves[labels[rows][labels[rows] != labels[cols]]] = True
    if np.count_nonzero(~leaves) != 1:
        raise NonErgodicSpecError(f"chain has {np.count_nonzero(~leaves)} closed classes; stationary law is not unique")


def stationary_distribution(source: MarkovSource, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Unique stationary law ``pi`` over the ``2**m`` states."""
    if source.order == 0:
        return np.ones(1)
    _check_single_closed_class(source)
    size = 2**source.order
    if source.order <= EXACT_SOLVE_MAX_ORDER:
        P = transition_matrix(source)
        A = P.T - np.eye(size)
        A[-1] = 1.0
        b = np.zeros(size)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
    else:
        # lazy chain: same fixed point, aperiodic even if the chain is not
        mask = size - 1
        states = np.arange(size)
        p1 = np.asarray(source.p_one)
        pi = np.full(size, 1.0 / size)
        for _ in range(max_iter):
            nxt = np.zeros(size)
            np.add.at(nxt, (states << 1) & mask, pi * (1 - p1))
            np.add.at(nxt, ((states << 1) | 1) & mask, pi * p1)
            nxt = 0.5 * (pi + nxt)
            if np.max(np.abs(nxt - pi)) < tol:
                pi = nxt
                break
            pi = nxt
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def bayes_loss(source: MarkovSource) -> float:
    """``L* = sum_s pi(s) min(p(1|s), 1 - p(1|s))``."""
    p1 = np.asarray(source.p_one)
    return float(stationary_distribution(source) @ np.minimum(p1, 1 - p1))


def generate(source: MarkovSource, n: int, seed: int) -> np.ndarray:
    """``n`` bits from the stationary source, reproducible per ``seed``."""
    if n < 0:
        raise ValueError("length must be >= 0")
    rng = np.random.default_rng(seed)
    m = source.order
    p1 = np.asarray(source.p_one)
    if m == 0:
        return (rng.random(n) < p1[0]).astype(np.int8)
    mask = 2**m - 1
    state = int(rng.choice(2**m, p=stationary_distribution(source)))
    u = rng.random(n)
    out = np.empty(n, dtype=np.int8)
    for i in range(n):
        bit = 1 if u[i] < p1[state] else 0
        out[i] = bit
        state = ((state << 1) | bit) & mask
    return out


# --------------------------------------------------------------------------
# Side information


@dataclass(frozen=True)
class StepLink:
    """``eta(x) = values[j]`` on the ``j``-th interval of ``x[axis]``, intervals right-closed."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    axis: int = 0

    def __post_init__(self) -> None:
        if len(self.values) != len(self.breakpoints) + 1:
            raise SpecError("a step link needs one more value than breakpoints")
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise SpecError("breakpoints must be strictly increasing")
        if not all(0 <= v <= 1 for v in self.values):
            raise SpecError("link values must lie in [0, 1]")

    def __call__(self, x) -> np.ndarray:
        t = np.asarray(x, dtype=float)[..., self.axis]
        return np.asarray(self.values)[np.searchsorted(self.breakpoints, t, side="left")]

    def pieces(self, low: float, high: float):
        """``(a, b, eta_a, eta_b)`` linear pieces covering ``[low, high]``."""
        edges = [low, *[b for b in self.breakpoints if low < b < high], high]
        for a, b in zip(edges, edges[1:]):
            v = float(self(np.full(self.axis + 1, (a + b) / 2)))
            yield a, b, v, v


@dataclass(frozen=True)
class LinearLink:
    """Piecewise linear ``eta`` through ``(knots[j], values[j])`` along ``x[axis]``, constant outside."""

    knots: tuple[float, ...]
    values: tuple[float, ...]
    axis: int = 0

    def __post_init__(self) -> None:
        if len(self.knots) != len(self.values) or len(self.knots) < 1:
            raise SpecError("a linear link needs matching, nonempty knots and values")
        if any(b >= c for b, c in zip(self.knots, self.knots[1:])):
            raise SpecError("knots must be strictly increasing")
        if not all(0 <= v <= 1 for v in self.values):
            raise SpecError("link values must lie in [0, 1]")

    def __call__(self, x) -> np.ndarray:
        t = np.asarray(x, dtype=float)[..., self.axis]
        return np.interp(t, self.knots, self.values)

    def pieces(self, low: float, high: float):
        edges = [low, *[k for k in self.knots if low < k < high], high]
        for a, b in zip(edges, edges[1:]):
            ends = self(np.array([[a] * (self.axis + 1), [b] * (self.axis + 1)]))
            yield a, b, float(ends[0]), float(ends[1])


@dataclass(frozen=True)
class SideInfoSource:
    """``X`` uniform on ``[low, high]**dimension``; ``Y | X ~ Bernoulli(link(X))``."""

    link: StepLink | LinearLink
    dimension: int = 1
    low: float = 0.0
    high: float = 1.0
    memoryless: bool = field(default=True)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise SpecError("dimension must be >= 1")
        if not self.low < self.high:
            raise SpecError("need low < high")
        if not 0 <= self.link.axis < self.dimension:
            raise SpecError(f"link axis {self.link.axis} outside dimension {self.dimension}")


def _mean_min_linear(a: float, b: float, fa: float, fb: float) -> float:
    """Integral over ``[a, b]`` of ``min(f, 1 - f)`` for linear ``f``."""

    def g(t0, t1, f0, f1):
        return (t1 - t0) * (min(f0, 1 - f0) + min(f1, 1 - f1)) / 2

    if (fa - 0.5) * (fb - 0.5) < 0:
        c = a + (0.5 - fa) * (b - a) / (fb - fa)
        return g(a, c, fa, 0.5) + g(c, b, 0.5, fb)
    return g(a, b, fa, fb)


def side_info_bayes_loss(source: SideInfoSource) -> float:
    """``R* = E[min(eta(X), 1 - eta(X))]``, exact for the piecewise links."""
    if not source.memoryless:
        raise UnsupportedOracleError("Bayes loss is only available when Y depends on the past through X alone")
    total = sum(_mean_min_linear(*piece) for piece in source.link.pieces(source.low, source.high))
    return float(total / (source.high - source.low))


def side_info_generate(source: SideInfoSource, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``(x, y)`` with ``x`` of shape ``(n, d)``."""
    if n < 0:
        raise ValueError("length must be >= 0")
    rng = np.random.default_rng(seed)
    x = rng.uniform(source.low, source.high, size=(n, source.dimension))
    y = (rng.random(n) < source.link(x)).astype(np.int8)
    return x, y


# --------------------------------------------------------------------------
# Source description files


def parse_spec(doc: dict) -> MarkovSource | SideInfoSource:
    """Source from a decoded JSON document.

    ``{"kind": "bernoulli", "p": 0.7}``,
    ``{"kind": "markov", "order": 1, "transition": {"0": 0.3, "1": 0.8}}`` or
    ``{"kind": "side_info", "dimension": 1, "x_law": {...}, "link": {...}}``.
    """
    try:
        kind = doc["kind"]
        if kind == "bernoulli":
            return bernoulli(float(doc["p"]))
        if kind == "markov":
            order = int(doc["order"])
            transition = doc["transition"]
            if order == 0 and not isinstance(transition, dict):
                return bernoulli(float(transition))
            return MarkovSource.from_states(order, {str(k): v for k, v in transition.items()})
        if kind == "side_info":
            law = doc.get("x_law", {"type": "uniform", "low": 0.0, "high": 1.0})
            if law.get("type", "uniform") != "uniform":
                raise SpecError(f"unsupported x law {law.get('type')!r}")
            link_doc = doc["link"]
            axis = int(link_doc.get("axis", 0))
            if link_doc["type"] == "step":
                link = StepLink(tuple(map(float, link_doc["breakpoints"])), tuple(map(float, link_doc["values"])), axis)
            elif link_doc["type"] == "linear":
                link = LinearLink(tuple(map(float, link_doc["knots"])), tuple(map(float, link_doc["values"])), axis)
            else:
                raise SpecError(f"unknown link type {link_doc['type']!r}")
            return SideInfoSource(
                link,
                dimension=int(doc.get("dimension", 1)),
                low=float(law.get("low", 0.0)),
                high=float(law.get("high", 1.0)),
                memoryless=bool(doc.get("memoryless", True)),
            )
    except (KeyError, TypeError, AttributeError) as exc:
        raise SpecError(f"malformed source description: {exc!r}") from None
    raise SpecError(f"unknown source kind {kind!r}")


def load_spec(path: str | Path) -> MarkovSource | SideInfoSource:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError(f"{path}: expected a JSON object")
    source = parse_spec(doc)
    if isinstance(source, MarkovSource):
        stationary_distribution(source)  # reject non-ergodic chains at load
    return source
