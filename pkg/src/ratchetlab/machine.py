"""Classical hidden Markov generators.

A :class:`Machine` stores one column-stochastic-in-aggregate matrix per
symbol, indexed ``T[x][to, from] = Pr(to, x | from)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import tolerances as tol
from .errors import EnumerationCapExceeded, InvalidMachine, NonConvergence, UnknownSymbol

Word = tuple


@dataclass(frozen=True, eq=False)
class Machine:
    """Labeled stochastic transition family over finite states and alphabet.

    Parameters
    ----------
    states, alphabet : sequences of identifiers (stored as strings)
    transitions : array of shape ``(len(alphabet), n, n)``; ``transitions[x, j, i]``
        is the probability of moving from state ``i`` to ``j`` while emitting ``x``.
    """

    states: tuple
    alphabet: tuple
    transitions: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        alphabet = tuple(str(x) for x in self.alphabet)
        T = np.array(self.transitions, dtype=float, copy=True)
        n, k = len(states), len(alphabet)
        if len(set(states)) != n:
            raise InvalidMachine(["duplicate state identifiers"])
        if len(set(alphabet)) != k:
            raise InvalidMachine(["duplicate symbol identifiers"])
        if T.shape != (k, n, n):
            raise InvalidMachine([f"transition array has shape {T.shape}, expected {(k, n, n)}"])
        T.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "transitions", T)

    @classmethod
    def from_edges(cls, states, alphabet, edges: Iterable[tuple]) -> "Machine":
        """Build from ``(from, symbol, to, prob)`` tuples; unlisted edges are 0."""
        states = [str(s) for s in states]
        alphabet = [str(x) for x in alphabet]
        si = {s: i for i, s in enumerate(states)}
        xi = {x: i for i, x in enumerate(alphabet)}
        T = np.zeros((len(alphabet), len(states), len(states)))
        seen = set()
        for src, sym, dst, p in edges:
            key = (str(src), str(sym), str(dst))
            if key in seen:
                raise InvalidMachine([f"duplicate transition {key}"])
            seen.add(key)
            try:
                T[xi[key[1]], si[key[2]], si[key[0]]] = float(p)
            except KeyError as e:
                raise InvalidMachine([f"transition {key} references unknown identifier {e.args[0]!r}"]) from None
        return cls(tuple(states), tuple(alphabet), T)

    def edges(self, threshold: float = 0.0) -> list[tuple[str, str, str, float]]:
        out = []
        for i, s in enumerate(self.states):
            for x, sym in enumerate(self.alphabet):
                for j, s2 in enumerate(self.states):
                    p = float(self.transitions[x, j, i])
                    if p > threshold:
                        out.append((s, sym, s2, p))
        return out

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)

    @property
    def total(self) -> np.ndarray:
        """The symbol-marginal transition matrix ``sum_x T[x]``."""
        return self.transitions.sum(axis=0)

    def symbol_index(self, symbol) -> int:
        try:
            return self.alphabet.index(str(symbol))
        except ValueError:
            raise UnknownSymbol(symbol) from None

    def state_index(self, state) -> int:
        return self.states.index(str(state))

    def as_word(self, word) -> Word:
        """Normalize a word given as a string or a sequence of symbols.

        A plain string is split into characters, which requires every symbol
        of the alphabet to be a single character.
        """
        if isinstance(word, str):
            if word in self.alphabet:
                return (word,)
            if any(len(x) != 1 for x in self.alphabet):
                raise UnknownSymbol(word)
            word = tuple(word)
        word = tuple(str(x) for x in word)
        for x in word:
            self.symbol_index(x)
        return word

    def word_indices(self, word) -> list[int]:
        return [self.symbol_index(x) for x in self.as_word(word)]

    @cached_property
    def stationary(self) -> np.ndarray:
        return stationary_distribution(self)

    def relabel(self, states: Sequence[Hashable]) -> "Machine":
        return Machine(tuple(states), self.alphabet, self.transitions)

    def permuted(self, order: Sequence[int]) -> "Machine":
        """Reorder states: new state ``k`` is old state ``order[k]``."""
        order = list(order)
        T = self.transitions[:, order][:, :, order]
        return Machine(tuple(self.states[i] for i in order), self.alphabet, T)

    def allclose(self, other: "Machine", atol: float = 1e-12) -> bool:
        return (
            self.states == other.states
            and self.alphabet == other.alphabet
            and np.allclose(self.transitions, other.transitions, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"Machine(states={list(self.states)}, alphabet={list(self.alphabet)})"


# ---------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    violations: list[str]
    column_residuals: dict[str, float]
    irreducible: bool

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid


def is_irreducible(matrix: np.ndarray, threshold: float = tol.PROB_ZERO) -> bool:
    n = matrix.shape[0]
    if n == 1:
        return True
    ncomp, _ = connected_components(matrix > threshold, directed=True, connection="strong")
    return ncomp == 1


def validate(machine: Machine) -> ValidationReport:
    violations = []
    T = machine.transitions
    if not np.all(np.isfinite(T)):
        violations.append("transition entries must be finite")
    if np.any(T < 0) or np.any(T > 1):
        violations.append("transition entries must lie in [0, 1]")
    sums = T.sum(axis=(0, 1))
    residuals = {s: float(abs(sums[i] - 1.0)) for i, s in enumerate(machine.states)}
    for i, s in enumerate(machine.states):
        if residuals[s] > tol.STOCHASTIC:
            violations.append(f"column {s} not stochastic (sums to {sums[i]:.12g})")
    irreducible = is_irreducible(machine.total)
    if not irreducible:
        violations.append("not irreducible")
    return ValidationReport(violations, residuals, irreducible)


def require_valid(machine: Machine) -> None:
    report = validate(machine)
    if not report.valid:
        raise InvalidMachine(report.violations)


# ---------------------------------------------------------- stationary state


def stationary_distribution(machine: Machine) -> np.ndarray:
    """Unique ``pi`` with ``T pi = pi`` by power iteration on the lazy chain.

    The lazy chain ``(T + I) / 2`` shares ``T``'s stationary vector and is
    aperiodic, so iteration converges for periodic machines too. The iterate
    is then polished with one solve of ``(I - T + 1 1^T) pi = 1``; the
    polished vector is kept only if its residual is smaller.
    """
    require_valid(machine)
    T = machine.total
    n = T.shape[0]
    lazy = 0.5 * (T + np.eye(n))
    pi = np.full(n, 1.0 / n)
    residual = np.inf
    iterations = 0
    for iterations in range(1, tol.STATIONARY_MAX_ITER + 1):
        pi = lazy @ pi
        pi /= pi.sum()
        if iterations % 8 == 0 or n == 1:
            residual = float(np.max(np.abs(T @ pi - pi)))
            if residual <= tol.STATIONARY_TARGET:
                break
    try:
        polished = np.linalg.solve(np.eye(n) - T + np.ones((n, n)), np.ones(n))
        polished /= polished.sum()
        pres = float(np.max(np.abs(T @ polished - polished)))
        if pres < residual and np.all(polished > 0):
            pi, residual = polished, pres
    except np.linalg.LinAlgError:
        pass
    if residual > tol.STATIONARY_ACCEPT:
        raise NonConvergence("stationary distribution", residual, iterations)
    return pi


# ------------------------------------------------------------ word statistics


def word_probability(machine: Machine, word) -> float:
    v = machine.stationary
    for x in machine.word_indices(word):
        v = machine.transitions[x] @ v
    return float(v.sum())


def all_words(alphabet: Sequence[str], length: int):
    return itertools.product(alphabet, repeat=length)


@dataclass(frozen=True, eq=False)
class JointWordState:
    """Exact joint distribution ``Pr(x_1..x_t, s_t)``.

    ``table[i, j]`` is the probability of ``words[i]`` jointly with ending in
    ``states[j]``. Words are in lexicographic order of alphabet index.
    """

    t: int
    words: list
    states: tuple
    table: np.ndarray = field(repr=False)

    def word_distribution(self) -> np.ndarray:
        return self.table.sum(axis=1)

    def state_distribution(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def as_dict(self) -> dict:
        return {
            (w, s): float(self.table[i, j])
            for i, w in enumerate(self.words)
            for j, s in enumerate(self.states)
        }


def _check_cap(required: int, cap: int | None) -> None:
    cap = tol.ENUMERATION_CAP if cap is None else cap
    if required > cap:
        raise EnumerationCapExceeded(required, cap)


def forward_tables(machine: Machine, t: int, *, prune: bool = False, cap: int | None = None):
    """Yield ``(word_index_array, table)`` for lengths ``0..t``.

    ``word_index_array`` has shape ``(n_words, length)`` of symbol indices and
    ``table`` has shape ``(n_words, n_states)``. With ``prune`` words of
    exactly zero probability are dropped as they are generated, which keeps
    the enumeration proportional to the process' support rather than
    ``|X|^t`` without perturbing any nonzero value.
    """
    T = machine.transitions
    k, n = machine.n_symbols, machine.n_states
    words = np.zeros((1, 0), dtype=np.int64)
    table = machine.stationary[None, :].copy()
    yield words, table
    for _ in range(t):
        _check_cap(len(words) * k * n, cap)
        # new[w, x, :] = T[x] @ table[w]
        new = np.einsum("xij,wj->wxi", T, table).reshape(-1, n)
        words = np.concatenate(
            [np.repeat(words, k, axis=0), np.tile(np.arange(k), len(words))[:, None]], axis=1
        )
        table = new
        if prune:
            keep = table.sum(axis=1) > 0
            words, table = words[keep], table[keep]
        yield words, table


def joint_word_state(machine: Machine, t: int, cap: int | None = None) -> JointWordState:
    require_valid(machine)
    if t < 0:
        raise ValueError("length must be nonnegative")
    _check_cap(machine.n_symbols**t * machine.n_states, cap)
    for words, table in forward_tables(machine, t, cap=cap):
        pass
    labels = [tuple(machine.alphabet[i] for i in row) for row in words]
    return JointWordState(t, labels, machine.states, table)


def word_distribution(machine: Machine, t: int, cap: int | None = None) -> dict:
    """All words of length ``t`` mapped to their probability."""
    jw = joint_word_state(machine, t, cap=cap)
    return dict(zip(jw.words, jw.word_distribution().tolist()))


# --------------------------------------------------------------- time reversal


def time_reverse(machine: Machine) -> Machine:
    """Generator of the reverse process on the same states.

    Every edge ``s -x-> s'`` with probability ``p`` becomes ``s' -x-> s`` with
    probability ``p * pi(s) / pi(s')``; the result is column-stochastic.
    """
    pi = machine.stationary
    T = machine.transitions
    # rev[x, s, s'] = T[x, s', s] * pi[s] / pi[s']
    rev = np.transpose(T, (0, 2, 1)) * pi[None, :, None] / pi[None, None, :]
    rev /= rev.sum(axis=(0, 1))[None, None, :]
    return Machine(machine.states, machine.alphabet, rev)


# ------------------------------------------------------- structural predicates


def successor_function(machine: Machine, threshold: float = tol.PROB_ZERO):
    """``{(s, x): s'}`` if the machine is unifilar, else ``None``."""
    f = {}
    T = machine.transitions
    for x, sym in enumerate(machine.alphabet):
        for i, s in enumerate(machine.states):
            targets = np.flatnonzero(T[x, :, i] > threshold)
            if len(targets) > 1:
                return None
            if len(targets) == 1:
                f[(s, sym)] = machine.states[targets[0]]
    return f


def predecessor_function(machine: Machine, threshold: float = tol.PROB_ZERO):
    """``{(s', x): s}`` if the machine is co-unifilar, else ``None``."""
    f = {}
    T = machine.transitions
    for x, sym in enumerate(machine.alphabet):
        for j, s2 in enumerate(machine.states):
            sources = np.flatnonzero(T[x, j, :] > threshold)
            if len(sources) > 1:
                return None
            if len(sources) == 1:
                f[(s2, sym)] = machine.states[sources[0]]
    return f


def counifilarity_violation(machine: Machine, threshold: float = tol.PROB_ZERO):
    """First ``(s', x, predecessors)`` with two or more predecessors, or ``None``."""
    T = machine.transitions
    for x, sym in enumerate(machine.alphabet):
        for j, s2 in enumerate(machine.states):
            sources = np.flatnonzero(T[x, j, :] > threshold)
            if len(sources) > 1:
                return s2, sym, [machine.states[i] for i in sources]
    return None


def is_unifilar(machine: Machine) -> bool:
    return successor_function(machine) is not None


def is_counifilar(machine: Machine) -> bool:
    return predecessor_function(machine) is not None
