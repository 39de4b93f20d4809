"""State equivalence, state merging and epsilon-machine construction.

Equivalence of states is decided exactly: the conditional word
distributions of a state are linear functionals of iterated transition
matrices, so two states agree on every word iff they agree on a basis of the
invariant subspace generated from the initial vector. That subspace
stabilizes after at most ``n`` extensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import tolerances as tol
from .errors import BeliefCapExceeded, EnumerationCapExceeded, InvalidPartition, NotSynchronized
from .machine import (
    Machine,
    forward_tables,
    is_counifilar,
    is_unifilar,
    require_valid,
    time_reverse,
)


@dataclass(frozen=True)
class Partition:
    """Disjoint blocks of state identifiers covering a state set."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(str(s) for s in b) for b in self.blocks)
        seen = set()
        for b in blocks:
            if not b:
                raise InvalidPartition("empty block")
            for s in b:
                if s in seen:
                    raise InvalidPartition(f"state {s!r} appears in more than one block")
                seen.add(s)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_labels(cls, states, labels) -> "Partition":
        """Group ``states`` by block label, blocks ordered by first appearance."""
        order, groups = [], {}
        for s, lab in zip(states, labels):
            if lab not in groups:
                groups[lab] = []
                order.append(lab)
            groups[lab].append(s)
        return cls(tuple(tuple(groups[lab]) for lab in order))

    @classmethod
    def singletons(cls, states) -> "Partition":
        return cls(tuple((s,) for s in states))

    @property
    def block_of(self) -> dict:
        return {s: i for i, b in enumerate(self.blocks) for s in b}

    @property
    def states(self) -> set:
        return {s for b in self.blocks for s in b}

    def covers(self, states) -> bool:
        return self.states == {str(s) for s in states}

    def is_trivial(self) -> bool:
        """All blocks are singletons."""
        return all(len(b) == 1 for b in self.blocks)

    def canonical(self) -> frozenset:
        return frozenset(frozenset(b) for b in self.blocks)

    def same_as(self, other: "Partition") -> bool:
        return self.canonical() == other.canonical()

    def block_labels(self, sep: str = "+") -> list[str]:
        return [sep.join(b) for b in self.blocks]

    def to_json(self) -> dict:
        return {"blocks": [list(b) for b in self.blocks]}

    def __len__(self):
        return len(self.blocks)


# ------------------------------------------------------------- span machinery


def _invariant_basis(start: np.ndarray, maps: list[np.ndarray], rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of the smallest subspace containing ``start``
    and invariant under every matrix in ``maps`` (acting on column vectors)."""
    basis: list[np.ndarray] = []

    def add(v):
        scale = np.linalg.norm(v)
        if scale == 0:
            return None
        w = v.astype(float).copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        norm = np.linalg.norm(w)
        if norm <= rtol * max(scale, 1.0):
            return None
        w /= norm
        basis.append(w)
        return w

    queue = [start]
    while queue:
        v = queue.pop(0)
        w = add(v)
        if w is None:
            continue
        for M in maps:
            queue.append(M @ w)
    return np.array(basis)


def _column_classes(C: np.ndarray, atol: float = tol.SUPPORT) -> list[int]:
    """Label columns of ``C`` so equal (within tolerance) columns share a label."""
    n = C.shape[1]
    labels = [-1] * n
    reps: list[int] = []
    for j in range(n):
        for lab, r in enumerate(reps):
            a, b = C[:, j], C[:, r]
            scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1.0)
            if np.max(np.abs(a - b)) <= atol * scale:
                labels[j] = lab
                break
        else:
            labels[j] = len(reps)
            reps.append(j)
    return labels


def retrodictive_partition(machine: Machine) -> Partition:
    """States grouped by identical conditional past-word distributions."""
    require_valid(machine)
    pi = machine.stationary
    basis = _invariant_basis(pi, list(machine.transitions))
    C = basis / pi[None, :]
    return Partition.from_labels(machine.states, _column_classes(C))


def predictive_partition(machine: Machine) -> Partition:
    """States grouped by identical conditional future-word distributions."""
    require_valid(machine)
    ones = np.ones(machine.n_states)
    basis = _invariant_basis(ones, [Tx.T for Tx in machine.transitions])
    return Partition.from_labels(machine.states, _column_classes(basis))


# ---------------------------------------------------------------- merging


def _aggregation(machine: Machine, partition: Partition):
    if not partition.covers(machine.states):
        raise InvalidPartition("partition does not cover the machine's states")
    pi = machine.stationary
    nb = len(partition)
    block_of = partition.block_of
    agg = np.zeros((nb, machine.n_states))
    for i, s in enumerate(machine.states):
        agg[block_of[s], i] = 1.0
    block_pi = agg @ pi
    # weights[s, theta] = pi(s | theta)
    weights = (agg * pi[None, :] / block_pi[:, None]).T
    return agg, weights, block_pi


def merge(machine: Machine, partition: Partition) -> Machine:
    """Merged generator over partition blocks, weighted by ``pi(s | block)``."""
    require_valid(machine)
    agg, weights, _ = _aggregation(machine, partition)
    T = np.einsum("ti,xij,jb->xtb", agg, machine.transitions, weights)
    return Machine(tuple(partition.block_labels()), machine.alphabet, T)


def process_distance(a: Machine, b: Machine, max_len: int = 8, cap: int | None = None) -> float:
    """Largest word-probability difference between two generators over all
    words of length ``1..max_len`` (no pruning, so spurious words count)."""
    if a.alphabet != b.alphabet:
        if set(a.alphabet) != set(b.alphabet):
            return 1.0
        order = [b.alphabet.index(x) for x in a.alphabet]
        b = Machine(b.states, a.alphabet, b.transitions[order])
    worst = 0.0
    for (wa, ta), (wb, tb) in zip(forward_tables(a, max_len, cap=cap), forward_tables(b, max_len, cap=cap)):
        worst = max(worst, float(np.max(np.abs(ta.sum(axis=1) - tb.sum(axis=1)))))
    return worst


def is_mergeable(machine: Machine, partition: Partition, max_len: int = 8, cap: int | None = None) -> bool:
    """Bounded-length certificate: the merged machine reproduces every word
    probability up to ``max_len`` within 1e-9.

    Passing is necessary for mergeability; it is sufficient only up to the
    checked length.
    """
    require_valid(machine)
    merged = merge(machine, partition)
    return process_distance(machine, merged, max_len, cap=cap) <= 1e-9


# ------------------------------------------------------- epsilon machines


def _verification_length(machine: Machine, limit: int = 8, cap: int | None = None) -> int:
    cap = tol.ENUMERATION_CAP if cap is None else cap
    L = 1
    while L < limit and machine.n_symbols ** (L + 1) * machine.n_states * machine.n_symbols <= cap:
        L += 1
    return L


def _mixed_state_machine(machine: Machine, belief_cap: int) -> Machine:
    """Recurrent part of the mixed-state presentation started from ``pi``."""
    T = machine.transitions
    beliefs = [machine.stationary.copy()]
    edges = []
    frontier = [0]
    while frontier:
        i = frontier.pop(0)
        for x in range(machine.n_symbols):
            v = T[x] @ beliefs[i]
            p = float(v.sum())
            if p <= tol.PROB_ZERO:
                continue
            v = v / p
            for j, b in enumerate(beliefs):
                if np.max(np.abs(b - v)) <= tol.BELIEF:
                    break
            else:
                beliefs.append(v)
                j = len(beliefs) - 1
                if len(beliefs) > belief_cap:
                    raise BeliefCapExceeded(belief_cap)
                frontier.append(j)
            edges.append((i, x, j, p))
    n = len(beliefs)
    adj = np.zeros((n, n), dtype=bool)
    for i, _, j, _ in edges:
        adj[i, j] = True
    ncomp, comp = connected_components(adj, directed=True, connection="strong")
    leaves_comp = set(range(ncomp))
    for i, _, j, _ in edges:
        if comp[i] != comp[j]:
            leaves_comp.discard(comp[i])
    # an ergodic source has exactly one closed class in its belief graph
    closed = min(leaves_comp, key=lambda c: min(np.flatnonzero(comp == c)))
    keep = [i for i in range(n) if comp[i] == closed]
    index = {old: new for new, old in enumerate(keep)}
    Tm = np.zeros((machine.n_symbols, len(keep), len(keep)))
    for i, x, j, p in edges:
        if i in index and j in index:
            Tm[x, index[j], index[i]] = p
    Tm /= Tm.sum(axis=(0, 1))[None, None, :]
    return Machine(tuple(f"s{k}" for k in range(len(keep))), machine.alphabet, Tm)


def forward_epsilon_machine(machine: Machine, belief_cap: int = tol.BELIEF_CAP) -> Machine:
    """Minimal unifilar generator with predictively distinct states.

    Unifilar inputs are merged directly by predictive equivalence; others go
    through the mixed-state (belief) presentation first.
    """
    require_valid(machine)
    base = machine if is_unifilar(machine) else _mixed_state_machine(machine, belief_cap)
    result = merge(base, predictive_partition(base))
    L = _verification_length(machine)
    gap = process_distance(machine, result, L)
    if gap > 1e-9 or not is_unifilar(result):
        raise ArithmeticError(f"epsilon-machine construction failed verification (word gap {gap:.2e})")
    return result


def reverse_epsilon_machine(machine: Machine, belief_cap: int = tol.BELIEF_CAP) -> Machine:
    """Minimal co-unifilar generator: reverse, build the forward one, reverse back."""
    require_valid(machine)
    result = time_reverse(forward_epsilon_machine(time_reverse(machine), belief_cap))
    L = _verification_length(machine)
    gap = process_distance(machine, result, L)
    if gap > 1e-9 or not is_counifilar(result):
        raise ArithmeticError(f"reverse epsilon-machine construction failed verification (word gap {gap:.2e})")
    return result


def is_forward_epsilon_machine(machine: Machine) -> bool:
    return is_unifilar(machine) and predictive_partition(machine).is_trivial()


def is_reverse_epsilon_machine(machine: Machine) -> bool:
    return is_counifilar(machine) and retrodictive_partition(machine).is_trivial()


# ------------------------------------------------- forward -> reverse channel


@dataclass
class StateChannel:
    """Conditional table ``matrix[s, p] = Pr(s | p)``."""

    sources: tuple
    targets: tuple
    matrix: np.ndarray = field(repr=False)
    disagreement: float = 0.0
    unsynchronized_mass: float = 0.0

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if np.any(self.matrix < -1e-12) or np.max(np.abs(self.matrix.sum(axis=0) - 1)) > 1e-10:
            raise ValueError("channel columns must be nonnegative and sum to 1")

    def to_json(self) -> dict:
        return {
            "sources": list(self.sources),
            "targets": list(self.targets),
            "matrix": self.matrix.tolist(),
            "disagreement": self.disagreement,
            "unsynchronized_mass": self.unsynchronized_mass,
        }


def forward_state_channel(fwd: Machine, rev: Machine, horizon: int = 12, cap: int | None = None) -> StateChannel:
    """Estimate ``Pr(s | p)`` from forward causal state ``p`` to reverse-machine state ``s``.

    Every word of length ``1..horizon`` whose forward belief is synchronized
    (mass at least ``1 - 1e-6`` on one state) contributes the reverse
    machine's filtered belief to that state's average, weighted by word
    probability. ``disagreement`` is the largest deviation of any
    contributing belief from its group's average.
    """
    require_valid(fwd)
    require_valid(rev)
    L = min(8, _verification_length(fwd, cap=cap))
    if process_distance(fwd, rev, L, cap=cap) > 1e-9:
        raise ValueError("forward and reverse machines do not generate the same process")
    nf, nr = fwd.n_states, rev.n_states
    sums = np.zeros((nr, nf))
    weight = np.zeros(nf)
    beliefs_by_p: list[list[np.ndarray]] = [[] for _ in range(nf)]
    unsync = 0.0
    pi_f, pi_r = fwd.stationary, rev.stationary
    tf, tr = pi_f[None, :], pi_r[None, :]
    for t in range(1, horizon + 1):
        required = len(tf) * fwd.n_symbols * max(nf, nr)
        if required > (tol.ENUMERATION_CAP if cap is None else cap):
            raise EnumerationCapExceeded(required, tol.ENUMERATION_CAP if cap is None else cap)
        tf = np.einsum("xij,wj->wxi", fwd.transitions, tf).reshape(-1, nf)
        tr = np.einsum("xij,wj->wxi", rev.transitions, tr).reshape(-1, nr)
        pf = tf.sum(axis=1)
        pr = tr.sum(axis=1)
        keep = (pf > 1e-300) & (pr > 1e-300)
        tf, tr, pf, pr = tf[keep], tr[keep], pf[keep], pr[keep]
        bf = tf / pf[:, None]
        br = tr / pr[:, None]
        top = bf.argmax(axis=1)
        synced = bf[np.arange(len(bf)), top] >= 1 - tol.SYNC
        if t == horizon:
            unsync = float(pf[~synced].sum())
        for i in np.flatnonzero(synced):
            p = top[i]
            sums[:, p] += pf[i] * br[i]
            weight[p] += pf[i]
            beliefs_by_p[p].append(br[i])
    missing = [fwd.states[p] for p in range(nf) if weight[p] == 0]
    if missing:
        raise NotSynchronized(f"no word of length <= {horizon} synchronizes to forward state(s) {missing}")
    matrix = sums / weight[None, :]
    matrix /= matrix.sum(axis=0)[None, :]
    disagreement = 0.0
    for p in range(nf):
        if beliefs_by_p[p]:
            dev = np.max(np.abs(np.array(beliefs_by_p[p]) - matrix[:, p][None, :]))
            disagreement = max(disagreement, float(dev))
    return StateChannel(fwd.states, rev.states, matrix, disagreement, unsync)


def ergodic_partition(channel: StateChannel, fwd_stationary, rev_stationary) -> Partition:
    """Finest partition of target states with ``Pr_E(s' | s) > 0`` only within blocks,
    where ``Pr_E(s' | s) = sum_p Pr(s | p) Pr(s' | p) lambda_p / pi_s``.

    Channel entries are only resolved to the synchronization tolerance, so
    couplings below ``10 * 1e-6`` are treated as absent.
    """
    C = channel.matrix
    lam = np.asarray(fwd_stationary, dtype=float)
    pi = np.asarray(rev_stationary, dtype=float)
    E = np.einsum("sp,tp,p->ts", C, C, lam) / pi[None, :]
    ncomp, labels = connected_components(E > 10 * tol.SYNC, directed=True, connection="weak")
    return Partition.from_labels(channel.targets, labels.tolist())
