"""Classical information measures, locality dissipation and efficiency verdicts."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import tolerances as tol
from .equivalence import Partition, merge, retrodictive_partition
from .errors import EnumerationCapExceeded, InconsistentVerdicts, NegativeProbability
from .machine import (
    Machine,
    counifilarity_violation,
    forward_tables,
    predecessor_function,
    require_valid,
    successor_function,
)

#: Boltzmann constant, J/K
K_B = 1.380649e-23


def _plogp(p: np.ndarray) -> float:
    """``-sum p log2 p`` over positive entries; no normalization."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def shannon_entropy(dist) -> float:
    """Entropy in bits of a probability vector (any shape); ``0 log 0 = 0``."""
    p = np.asarray(dist, dtype=float)
    if np.any(p < -tol.PROB_ZERO):
        raise NegativeProbability(f"negative probability {p.min():.3g}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"distribution sums to {p.sum():.12g}")
    return _plogp(np.clip(p, 0, None))


def joint_entropy(joint) -> float:
    return shannon_entropy(joint)


def conditional_entropy(joint, given: int = 1) -> float:
    """``H(A | B)`` for a 2-D table ``joint[a, b]``; ``given`` selects the axis of B."""
    joint = np.asarray(joint, dtype=float)
    return shannon_entropy(joint) - shannon_entropy(joint.sum(axis=1 - given))


def mutual_information(joint) -> float:
    """``I(A : B)`` for a 2-D table ``joint[a, b]``."""
    joint = np.asarray(joint, dtype=float)
    return shannon_entropy(joint.sum(axis=1)) + shannon_entropy(joint.sum(axis=0)) - shannon_entropy(joint)


def conditional_mutual_information(joint) -> float:
    """``I(A : B | C)`` for a 3-D table ``joint[a, b, c]``."""
    joint = np.asarray(joint, dtype=float)
    return (
        shannon_entropy(joint.sum(axis=1))
        + shannon_entropy(joint.sum(axis=0))
        - shannon_entropy(joint)
        - shannon_entropy(joint.sum(axis=(0, 1)))
    )


# ----------------------------------------------------------------- rates


def symbol_distribution(machine: Machine) -> np.ndarray:
    """``out[x, s] = Pr(x | s)``."""
    return machine.transitions.sum(axis=1)


def block_entropy(machine: Machine, t: int, cap: int | None = None) -> float:
    for _, table in forward_tables(machine, t, prune=True, cap=cap):
        pass
    return _plogp(table.sum(axis=1))


def block_entropies(machine: Machine, t_max: int, cap: int | None = None) -> list[float]:
    """``[H(0), H(1), ..., H(t_max)]``, stopping early if the cap is hit."""
    out = []
    try:
        for _, table in forward_tables(machine, t_max, prune=True, cap=cap):
            out.append(_plogp(table.sum(axis=1)))
    except EnumerationCapExceeded:
        if len(out) < 2:
            raise
    return out


def entropy_rate(machine: Machine, t_max: int = 16, cap: int | None = None) -> float:
    """Entropy rate in bits per symbol.

    Exact for unifilar machines. Otherwise ``H(t) - H(t-1)`` at the largest
    ``t <= t_max`` the enumeration cap allows (see :func:`entropy_rate_estimate`).
    """
    return entropy_rate_estimate(machine, t_max, cap)["rate"]


def entropy_rate_estimate(machine: Machine, t_max: int = 16, cap: int | None = None) -> dict:
    require_valid(machine)
    if successor_function(machine) is not None:
        emit = symbol_distribution(machine)
        rate = float(sum(machine.stationary[s] * _plogp(emit[:, s]) for s in range(machine.n_states)))
        return {"rate": rate, "method": "unifilar closed form"}
    H = block_entropies(machine, t_max, cap)
    t = len(H) - 1
    return {
        "rate": H[t] - H[t - 1],
        "method": "block entropy difference",
        "t": t,
        "H_t": H[t],
        "H_t_minus_1": H[t - 1],
    }


# ----------------------------------------------------- locality dissipation


@dataclass
class DissipationTrace:
    """Per-step locality dissipation in bits (units of ``k_B T ln 2``).

    Each record holds ``t``, ``I(S_t : X_1..t)``, ``I(S_t+1 X_t+1 : X_1..t)``
    and their difference.
    """

    records: list = field(default_factory=list)
    kind: str = "classical"

    @property
    def values(self) -> np.ndarray:
        return np.array([r["dissipation"] for r in self.records])

    @property
    def max(self) -> float:
        return float(self.values.max()) if self.records else 0.0

    @property
    def min(self) -> float:
        return float(self.values.min()) if self.records else 0.0

    def joules(self, temperature: float) -> np.ndarray:
        return self.values * K_B * temperature * np.log(2)

    def to_json(self) -> dict:
        return {"kind": self.kind, "unit": "bits", "tolerance": 1e-10, "records": self.records}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["t", "info_state", "info_post", "dissipation"], lineterminator="\n")
        w.writeheader()
        for r in self.records:
            w.writerow(r)
        return buf.getvalue()


def _trace_from_tables(tables, entropy, pre_state: float, post_state, t_max: int, kind: str):
    """Shared assembly for classical and quantum traces.

    ``tables`` yields per-length stacks of (unnormalized) word-conditioned
    memory states; ``entropy`` maps a stack to the sum of its entries'
    ``-Tr A log A``. ``post_state`` is ``H(S_t+1 X_t+1)`` (time-independent).
    """
    records = []
    stacks = list(tables)
    for t in range(1, t_max + 1):
        words_t, A_t = stacks[t]
        _, A_next = stacks[t + 1]
        p_words = _word_mass(A_t)
        H_words = _plogp(p_words)
        info_state = pre_state + H_words - entropy(A_t)
        info_post = post_state + H_words - entropy(A_next)
        records.append(
            {
                "t": t,
                "info_state": float(info_state),
                "info_post": float(info_post),
                "dissipation": float(info_state - info_post),
            }
        )
    return DissipationTrace(records, kind)


def _word_mass(stack: np.ndarray) -> np.ndarray:
    if stack.ndim == 2:
        return stack.sum(axis=1)
    return np.real(np.einsum("wii->w", stack))


def classical_dissipation(machine: Machine, t_max: int = 6, cap: int | None = None) -> DissipationTrace:
    """Exact locality dissipation for ``t = 1..t_max`` from joint word/state tables."""
    require_valid(machine)
    pi = machine.stationary
    post = np.einsum("xij,j->xi", machine.transitions, pi)
    tables = forward_tables(machine, t_max + 1, prune=True, cap=cap)
    return _trace_from_tables(tables, _plogp, _plogp(pi), _plogp(post), t_max, "classical")


# ---------------------------------------------------------- efficiency


@dataclass
class EfficiencyVerdict:
    efficient: bool
    merged_machine: Machine
    partition: Partition
    witness: object

    def to_json(self) -> dict:
        if self.efficient:
            witness = {"predecessor": [{"state": s, "symbol": x, "predecessor": p} for (s, x), p in self.witness.items()]}
        else:
            s, x, preds = self.witness
            witness = {"state": s, "symbol": x, "predecessors": preds}
        return {
            "efficient": self.efficient,
            "partition": self.partition.to_json(),
            "merged_states": list(self.merged_machine.states),
            "witness": witness,
        }


def classify_efficiency(machine: Machine) -> EfficiencyVerdict:
    """Zero locality dissipation at every ``t`` iff the retrodictively merged
    machine is co-unifilar. The witness is the predecessor map when efficient,
    else a ``(state, symbol, predecessors)`` triple with two or more predecessors."""
    require_valid(machine)
    partition = retrodictive_partition(machine)
    merged = merge(machine, partition)
    f = predecessor_function(merged)
    if f is not None:
        return EfficiencyVerdict(True, merged, partition, f)
    return EfficiencyVerdict(False, merged, partition, counifilarity_violation(merged))


def retrodiction_gap(machine: Machine, t: int, h: int, anchored: bool = True, cap: int | None = None) -> float:
    """Conditional mutual information between the past ``X_1..t`` and ``S_t``.

    With ``anchored`` the condition is the next ``h`` symbols together with
    ``S_t+h``; without it, the next ``h`` symbols only. The anchored form is
    exactly zero at every ``h`` for generators whose retrodictive merge is
    co-unifilar, while the unanchored form only vanishes as ``h`` grows.
    """
    require_valid(machine)
    n = machine.n_states
    for _, past in forward_tables(machine, t, cap=cap):
        pass
    # fut[u, s_end, s_t]: Pr(future word u, S_t+h = s_end | S_t = s_t)
    fut = np.eye(n)[None, :, :]
    for _ in range(h):
        fut = np.einsum("xij,ujk->uxik", machine.transitions, fut).reshape(-1, n, n)
    # joint[w, s_t, u, s_end]
    joint = np.einsum("ws,ues->wsue", past, fut)
    if anchored:
        cond = joint.reshape(past.shape[0], n, -1)
    else:
        cond = joint.sum(axis=3)
    return max(0.0, conditional_mutual_information(cond))


def is_retrodictor(machine: Machine, horizon: int = 6, cap: int | None = None) -> bool:
    """Finite-horizon retrodictor test combined with the structural verdict.

    The numeric part requires the anchored retrodiction gap to vanish within
    1e-9 for every split ``t + h = horizon`` with ``t, h >= 1``.
    """
    if not classify_efficiency(machine).efficient:
        return False
    for t in range(1, horizon):
        if retrodiction_gap(machine, t, horizon - t, anchored=True, cap=cap) > 1e-9:
            return False
    return True


def classical_local_reversibility_check(joint, channel) -> bool:
    """Whether applying ``channel[z, x] = Pr(z | x)`` to ``X`` preserves ``I(X : Y)``.

    Computes ``I(X:Y) = I(Z:Y)`` within 1e-10 and, independently, the
    structural condition ``Pr(y | z) = Pr(y | x)`` wherever ``Pr(z | x) > 0``;
    raises :class:`InconsistentVerdicts` if they disagree.
    """
    joint = np.asarray(joint, dtype=float)
    channel = np.asarray(channel, dtype=float)
    if np.any(joint < -tol.PROB_ZERO) or np.any(channel < -tol.PROB_ZERO):
        raise NegativeProbability("negative entries in joint or channel")
    if channel.shape[1] != joint.shape[0]:
        raise ValueError("channel input dimension does not match X")
    if np.max(np.abs(channel.sum(axis=0) - 1)) > 1e-9:
        raise ValueError("channel columns must sum to 1")
    zy = channel @ joint
    numeric = abs(mutual_information(joint) - mutual_information(zy)) <= 1e-10

    px = joint.sum(axis=1)
    pz = zy.sum(axis=1)
    structural = True
    for x in np.flatnonzero(px > tol.PROB_ZERO):
        y_given_x = joint[x] / px[x]
        for z in np.flatnonzero(channel[:, x] > tol.SUPPORT):
            if np.max(np.abs(zy[z] / pz[z] - y_given_x)) > tol.SUPPORT:
                structural = False
                break
        if not structural:
            break
    if numeric != structural:
        raise InconsistentVerdicts(f"numeric={numeric} structural={structural}")
    return numeric
