"""Named example machines and random machine generators."""

from __future__ import annotations

import numpy as np

from .machine import Machine, validate


def iid_coin(p: float = 0.5) -> Machine:
    return Machine.from_edges(["A"], ["0", "1"], [("A", "0", "A", p), ("A", "1", "A", 1 - p)])


def duplicate_iid(p: float = 0.5, split: float = 0.3) -> Machine:
    """Two-state presentation of an IID process: both states emit alike.

    ``split`` is the fraction of each symbol's mass that lands in state ``B``.
    """
    edges = []
    for s in "AB":
        for x, px in (("0", p), ("1", 1 - p)):
            edges.append((s, x, "A", px * (1 - split)))
            edges.append((s, x, "B", px * split))
    return Machine.from_edges(["A", "B"], ["0", "1"], edges)


def period2() -> Machine:
    return Machine.from_edges(["A", "B"], ["0", "1"], [("A", "1", "B", 1.0), ("B", "0", "A", 1.0)])


def period3() -> Machine:
    """Deterministic cycle emitting ...011011..."""
    return Machine.from_edges(
        ["A", "B", "C"], ["0", "1"], [("A", "0", "B", 1.0), ("B", "1", "C", 1.0), ("C", "1", "A", 1.0)]
    )


def golden_mean(p: float = 0.5) -> Machine:
    """No two consecutive 1s; state ``A`` emits ``0`` with probability ``p``."""
    return Machine.from_edges(
        ["A", "B"], ["0", "1"], [("A", "0", "A", p), ("A", "1", "B", 1 - p), ("B", "0", "A", 1.0)]
    )


def even_process(p: float = 0.5) -> Machine:
    """Blocks of 1s have even length."""
    return Machine.from_edges(
        ["A", "B"], ["0", "1"], [("A", "0", "A", p), ("A", "1", "B", 1 - p), ("B", "1", "A", 1.0)]
    )


NAMED = {
    "iid_coin": iid_coin,
    "duplicate_iid": duplicate_iid,
    "period2": period2,
    "period3": period3,
    "golden_mean": golden_mean,
    "even_process": even_process,
}


def _labels(n: int) -> list[str]:
    return [chr(ord("A") + i) for i in range(n)]


def _finish(T: np.ndarray, n: int, k: int) -> Machine | None:
    sums = T.sum(axis=(0, 1))
    if np.any(sums == 0):
        return None
    T = T / sums[None, None, :]
    m = Machine(_labels(n), [str(i) for i in range(k)], T)
    return m if validate(m).valid else None


def random_machine(rng: np.random.Generator, n_states: int, n_symbols: int = 2, density: float = 0.5) -> Machine:
    """Random recurrent generator; each edge present with probability ``density``."""
    while True:
        mask = rng.random((n_symbols, n_states, n_states)) < density
        T = np.where(mask, rng.random(mask.shape) + 0.05, 0.0)
        m = _finish(T, n_states, n_symbols)
        if m is not None:
            return m


def random_unifilar(rng: np.random.Generator, n_states: int, n_symbols: int = 2, p_edge: float = 0.8) -> Machine:
    while True:
        T = np.zeros((n_symbols, n_states, n_states))
        for s in range(n_states):
            for x in range(n_symbols):
                if rng.random() < p_edge:
                    T[x, rng.integers(n_states), s] = rng.random() + 0.05
        m = _finish(T, n_states, n_symbols)
        if m is not None:
            return m


def random_counifilar(rng: np.random.Generator, n_states: int, n_symbols: int = 2, p_edge: float = 0.8) -> Machine:
    """Random co-unifilar generator: every ``(to, symbol)`` has at most one source."""
    while True:
        T = np.zeros((n_symbols, n_states, n_states))
        for s2 in range(n_states):
            for x in range(n_symbols):
                if rng.random() < p_edge:
                    T[x, s2, rng.integers(n_states)] = rng.random() + 0.05
        m = _finish(T, n_states, n_symbols)
        if m is not None:
            return m


def named_corpus() -> dict[str, Machine]:
    return {
        "iid_coin": iid_coin(),
        "period2": period2(),
        "period3": period3(),
        "golden_mean": golden_mean(),
        "even_process": even_process(),
    }


def acceptance_corpus(seed: int = 0) -> dict[str, Machine]:
    """Named machines plus 20 random 3-4 state generators and 10 random co-unifilar ones.

    Half of the 20 random generators are unifilar so that the quantum
    constructions have a nontrivial population to act on.
    """
    rng = np.random.default_rng(seed)
    corpus = named_corpus()
    for i in range(20):
        n = 3 + i % 2
        if i < 10:
            corpus[f"random_{i:02d}"] = random_machine(rng, n)
        else:
            corpus[f"random_{i:02d}"] = random_unifilar(rng, n)
    for i in range(10):
        corpus[f"counifilar_{i:02d}"] = random_counifilar(rng, 3 + i % 2)
    return corpus
