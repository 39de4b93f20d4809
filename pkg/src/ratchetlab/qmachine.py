"""Quantum implementations of epsilon-machines and their thermodynamics.

Forward q-machines encode the states of a forward epsilon-machine into
generally nonorthogonal vectors fixed by a self-consistent overlap matrix.
Reverse q-machines encode a reverse epsilon-machine orthogonally; their
compression lives in a stationary state that is not diagonal in the encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import tolerances as tol
from .equivalence import (
    Partition,
    is_forward_epsilon_machine,
    is_reverse_epsilon_machine,
    merge,
    predictive_partition,
    retrodictive_partition,
)
from .errors import (
    EnumerationCapExceeded,
    NonConvergence,
    NotEpsilonMachine,
    NotReverseEpsilonMachine,
    RatchetError,
)
from .info import DissipationTrace, _trace_from_tables
from .machine import Machine, is_counifilar, is_unifilar, require_valid, time_reverse
from .quantum import entropy_unnormalized, renyi_from_spectrum


class InvariantViolation(RatchetError, ArithmeticError):
    pass


def phase_table(machine: Machine, phases=None) -> np.ndarray:
    """Phases as an array ``[symbol, state]`` in radians.

    ``phases`` may be ``None`` (all zero), an array of that shape, or a
    mapping ``{symbol: {state: phase}}`` with missing entries zero.
    """
    table = np.zeros((machine.n_symbols, machine.n_states))
    if phases is None:
        return table
    if isinstance(phases, dict):
        for sym, row in phases.items():
            for state, value in row.items():
                table[machine.symbol_index(sym), machine.state_index(state)] = float(value)
    else:
        table = np.array(phases, dtype=float)
        if table.shape != (machine.n_symbols, machine.n_states):
            raise ValueError(f"phase table shape {table.shape}, expected {(machine.n_symbols, machine.n_states)}")
    if not np.all(np.isfinite(table)):
        raise ValueError("phases must be finite")
    return table


def _amplitudes(machine: Machine, phases: np.ndarray) -> np.ndarray:
    """``M[x][f(s,x), s] = exp(i phi_xs) sqrt(T^x_{f(s,x), s})`` for a unifilar machine."""
    return np.sqrt(machine.transitions) * np.exp(1j * phases)[:, None, :]


# ---------------------------------------------------------------- overlaps


def _overlap_map(omega: np.ndarray, amps: np.ndarray) -> np.ndarray:
    # Omega_rs <- sum_x conj(a_xr) a_xs Omega_{f(r,x) f(s,x)}
    return np.einsum("xir,ij,xjs->rs", amps.conj(), omega, amps)


def overlap_residual(omega: np.ndarray, machine: Machine, phases=None) -> float:
    amps = _amplitudes(machine, phase_table(machine, phases))
    return float(np.max(np.abs(_overlap_map(omega, amps) - omega)))


def solve_overlaps(machine: Machine, phases=None) -> np.ndarray:
    """Unique solution of the overlap self-consistency equation.

    Plain fixed-point iteration from the identity until successive iterates
    differ by less than 1e-14; the result must satisfy the equation to 1e-12.
    """
    require_valid(machine)
    if not is_unifilar(machine):
        raise NotEpsilonMachine("overlap equation needs a unifilar machine")
    amps = _amplitudes(machine, phase_table(machine, phases))
    omega = np.eye(machine.n_states, dtype=complex)
    step = np.inf
    for it in range(1, tol.OVERLAP_MAX_ITER + 1):
        nxt = _overlap_map(omega, amps)
        step = float(np.max(np.abs(nxt - omega)))
        omega = nxt
        if step < tol.OVERLAP_STEP:
            break
    residual = float(np.max(np.abs(_overlap_map(omega, amps) - omega)))
    if residual > tol.OVERLAP_RESIDUAL:
        raise NonConvergence("overlap fixed point", residual, it)
    return omega


# --------------------------------------------------------------- q-machines


@dataclass(eq=False)
class QMachine:
    """A quantum generator built from a classical source machine.

    ``encodings[s]`` is the vector encoding state ``s``; ``kraus[x]`` acts on
    the memory space; ``rho`` is the stationary memory state. ``overlap`` is
    the Gram matrix of the encodings (forward kind) or the overlap matrix of
    the time-reversed source (reverse kind).
    """

    source: Machine
    phases: np.ndarray
    encodings: np.ndarray = field(repr=False)
    kraus: list = field(repr=False)
    rho: np.ndarray = field(repr=False)
    kind: str
    overlap: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.encodings.shape[1]

    @property
    def rank(self) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.rho) > tol.SINGULAR_CUTOFF))

    def kraus_for(self, symbol) -> np.ndarray:
        return self.kraus[self.source.symbol_index(symbol)]

    def spectrum(self) -> np.ndarray:
        return np.clip(np.linalg.eigvalsh(self.rho), 0, None)[::-1]


def validate_qmachine(qm: QMachine, atol: float = tol.OPERATOR) -> list[str]:
    """Invariant violations (empty when valid)."""
    problems = []
    d = qm.dimension
    completeness = sum(k.conj().T @ k for k in qm.kraus)
    if np.max(np.abs(completeness - np.eye(d))) > atol:
        problems.append("Kraus operators are not complete")
    if np.max(np.abs(sum(k @ qm.rho @ k.conj().T for k in qm.kraus) - qm.rho)) > atol:
        problems.append("stationary state is not invariant")
    if abs(np.trace(qm.rho).real - 1) > atol or np.max(np.abs(qm.rho - qm.rho.conj().T)) > atol:
        problems.append("stationary state is not a unit-trace Hermitian operator")
    m = qm.source
    amps = _amplitudes(m, qm.phases)
    psi = qm.encodings
    if qm.kind == "forward":
        gram = psi.conj() @ psi.T
        if np.max(np.abs(gram - qm.overlap)) > atol:
            problems.append("encoding Gram matrix differs from the overlap matrix")
        for x in range(m.n_symbols):
            # K^x |psi_s> = sum_s' amps[x, s', s] |psi_s'>  (a single term for unifilar machines)
            lhs = (qm.kraus[x] @ psi.T).T
            rhs = amps[x].T @ psi
            if np.max(np.abs(lhs - rhs)) > atol:
                problems.append(f"Kraus operator for {m.alphabet[x]!r} violates the encoding dynamics")
        rho = (psi.T * m.stationary) @ psi.conj()
        if np.max(np.abs(rho - qm.rho)) > atol:
            problems.append("stationary state differs from the encoded stationary ensemble")
    elif qm.kind == "reverse":
        if np.max(np.abs(psi.conj() @ psi.T - np.eye(m.n_states))) > atol:
            problems.append("reverse encoding is not orthonormal")
        expected = _reverse_kraus(m, qm.phases)
        if any(np.max(np.abs(a - b)) > atol for a, b in zip(expected, qm.kraus)):
            problems.append("Kraus operators differ from the explicit reverse form")
    else:
        problems.append(f"unknown kind {qm.kind!r}")
    return problems


def _require(qm: QMachine) -> QMachine:
    problems = validate_qmachine(qm)
    if problems:
        raise InvariantViolation("; ".join(problems))
    return qm


def build_qmachine(machine: Machine, phases=None) -> QMachine:
    """Forward q-machine of a forward epsilon-machine.

    The weighted overlap matrix ``sqrt(pi_r pi_s) Omega_rs = U diag(lam) U^dag``
    fixes the memory dimension (eigenvalues above 1e-10), the encodings
    ``psi_s[a] = sqrt(lam_a / pi_s) conj(U_sa)`` and the Kraus operators; the
    stationary state is ``diag(lam)``.
    """
    require_valid(machine)
    if not is_forward_epsilon_machine(machine):
        raise NotEpsilonMachine("machine is not a forward epsilon-machine (needs unifilar, predictively distinct states)")
    ph = phase_table(machine, phases)
    omega = solve_overlaps(machine, ph)
    pi = machine.stationary
    root = np.sqrt(pi)
    lam, U = np.linalg.eigh(0.5 * ((root[:, None] * omega * root[None, :]) + (root[:, None] * omega * root[None, :]).conj().T))
    keep = np.flatnonzero(lam > tol.SINGULAR_CUTOFF)[::-1]
    lam, U = lam[keep], U[:, keep]
    psi = np.sqrt(lam)[None, :] * U.conj() / root[:, None]
    amps = _amplitudes(machine, ph)
    # K^x = sum_s a_xs |psi_f(s,x)><dual_s|, dual_s[a] = U_sa sqrt(pi_s / lam_a)
    dual = U * root[:, None] / np.sqrt(lam)[None, :]
    kraus = [psi.T @ amps[x] @ dual for x in range(machine.n_symbols)]
    rho = np.diag(lam).astype(complex)
    qm = QMachine(machine, ph, psi, kraus, rho, "forward", omega)
    return _require(qm)


def _reverse_kraus(machine: Machine, phases: np.ndarray) -> list[np.ndarray]:
    # K^x = sum_s' exp(i phi_xs') sqrt(T^x_{s' f(s',x)}) |psi_s'><psi_f(s',x)|
    return [np.sqrt(machine.transitions[x]) * np.exp(1j * phases[x])[:, None] for x in range(machine.n_symbols)]


def build_reverse_qmachine(machine: Machine, phases=None) -> QMachine:
    """Reverse q-machine of a reverse epsilon-machine.

    Encodings are the standard basis. The stationary state has matrix
    elements ``<psi_s|rho|psi_r> = sqrt(pi_r pi_s) W_sr`` where ``W`` is the
    overlap matrix of the time-reversed machine solved with negated phases.
    """
    require_valid(machine)
    if not is_reverse_epsilon_machine(machine):
        raise NotReverseEpsilonMachine(
            "machine is not a reverse epsilon-machine (needs co-unifilar, retrodictively distinct states)"
        )
    ph = phase_table(machine, phases)
    reversed_machine = time_reverse(machine)
    omega_rev = solve_overlaps(reversed_machine, -ph)
    root = np.sqrt(machine.stationary)
    rho = root[:, None] * omega_rev * root[None, :]
    n = machine.n_states
    qm = QMachine(machine, ph, np.eye(n, dtype=complex), _reverse_kraus(machine, ph), rho, "reverse", omega_rev)
    return _require(qm)


def _word_ops(qm: QMachine, word) -> np.ndarray:
    K = np.eye(qm.dimension, dtype=complex)
    for x in qm.source.word_indices(word):
        K = qm.kraus[x] @ K
    return K


def qword_probability(qm: QMachine, word) -> float:
    """``Tr[K^(w) rho K^(w)^dagger]`` with ``K^(x_1..x_t) = K^(x_t)...K^(x_1)``."""
    K = _word_ops(qm, word)
    return float(np.real(np.trace(K @ qm.rho @ K.conj().T)))


def word_states(qm: QMachine, t: int, cap: int | None = None, prune: float = 1e-15):
    """Yield ``(words, stack)`` for lengths ``0..t``; ``stack[w]`` is the
    unnormalized memory state ``K^(w) rho K^(w)^dagger``. Words of probability
    at or below ``prune`` are dropped."""
    cap = tol.ENUMERATION_CAP if cap is None else cap
    d = qm.dimension
    k = qm.source.n_symbols
    K = np.array(qm.kraus)
    words = np.zeros((1, 0), dtype=np.int64)
    stack = qm.rho[None, :, :]
    yield words, stack
    for _ in range(t):
        required = len(words) * k * d * d
        if required > cap:
            raise EnumerationCapExceeded(required, cap)
        stack = np.einsum("xab,wbc,xdc->wxad", K, stack, K.conj()).reshape(-1, d, d)
        words = np.concatenate([np.repeat(words, k, axis=0), np.tile(np.arange(k), len(words))[:, None]], axis=1)
        keep = np.real(np.einsum("wii->w", stack)) > prune
        words, stack = words[keep], stack[keep]
        yield words, stack


def _stack_entropy(stack: np.ndarray) -> float:
    w = np.linalg.eigvalsh(0.5 * (stack + np.conj(np.swapaxes(stack, 1, 2))))
    w = w[w > tol.EIG_CLAMP]
    return float(-np.sum(w * np.log2(w)))


def quantum_dissipation(qm: QMachine, t_max: int = 4, cap: int | None = None) -> DissipationTrace:
    """Locality dissipation with quantum mutual informations, in bits.

    The tape is classical, so each information is a Holevo quantity:
    ``I(S_t : A_1..t) = H(rho) + H(X_1..t) - sum_w S(K^w rho K^w^dag)`` and the
    post-emission term replaces the memory by ``(+)_x K^x rho_w K^x^dag``.
    """
    _require(qm)
    post = sum(entropy_unnormalized(k @ qm.rho @ k.conj().T) for k in qm.kraus)
    tables = word_states(qm, t_max + 1, cap=cap)
    return _trace_from_tables(tables, _stack_entropy, entropy_unnormalized(qm.rho), post, t_max, f"quantum-{qm.kind}")


# -------------------------------------------------------------- partitions


def mcp(qm: QMachine) -> Partition:
    """Maximal commuting partition: components of the coupling graph.

    Forward kind couples ``r, s`` when ``|<psi_r|psi_s>| > 1e-9``; reverse kind
    when ``|<psi_s|rho|psi_r>| > 1e-9``.
    """
    psi = qm.encodings
    if qm.kind == "forward":
        coupling = np.abs(psi.conj() @ psi.T)
    else:
        coupling = np.abs(psi.conj() @ qm.rho @ psi.T)
    _, labels = connected_components(coupling > tol.SUPPORT, directed=False)
    return Partition.from_labels(qm.source.states, labels.tolist())


@dataclass
class TheoremVerdict:
    efficient: bool
    mcp_trivially_maximal: bool
    merged_condition: bool
    mcp: Partition
    merged_machine: Machine
    max_dissipation: float | None = None
    t_checked: int | None = None
    kind: str = "forward"

    @property
    def consistent(self) -> bool | None:
        """Whether the dissipation trace corroborates the structural verdict."""
        if self.max_dissipation is None:
            return None
        return self.efficient == (self.max_dissipation <= 1e-9)

    def to_json(self) -> dict:
        key = "merged_counifilar" if self.kind == "forward" else "merged_unifilar"
        return {
            "efficient": self.efficient,
            "mcp_trivially_maximal": self.mcp_trivially_maximal,
            key: self.merged_condition,
            "mcp": self.mcp.to_json(),
            "max_dissipation": self.max_dissipation,
            "t_checked": self.t_checked,
            "consistent": self.consistent,
            "tolerance": 1e-9,
        }


def _cross_check(qm: QMachine, t_max: int, cap):
    try:
        trace = quantum_dissipation(qm, t_max, cap=cap)
    except EnumerationCapExceeded:
        return None, None
    return trace.max, t_max


def check_forward_efficiency(qm: QMachine, t_max: int = 4, cross_check: bool = True, cap: int | None = None) -> TheoremVerdict:
    """Efficient iff the MCP is all singletons and the retrodictively merged
    source machine is co-unifilar."""
    if qm.kind != "forward":
        raise ValueError("forward efficiency applies to forward q-machines")
    partition = mcp(qm)
    merged = merge(qm.source, retrodictive_partition(qm.source))
    trivial = partition.is_trivial()
    counif = is_counifilar(merged)
    verdict = TheoremVerdict(trivial and counif, trivial, counif, partition, merged, kind="forward")
    if cross_check:
        verdict.max_dissipation, verdict.t_checked = _cross_check(qm, t_max, cap)
    return verdict


def check_reverse_efficiency(qm: QMachine, t_max: int = 4, cross_check: bool = True, cap: int | None = None) -> TheoremVerdict:
    """Efficient iff the stationary state's block partition is all singletons
    and the predictively merged source machine is unifilar."""
    if qm.kind != "reverse":
        raise ValueError("reverse efficiency applies to reverse q-machines")
    partition = mcp(qm)
    merged = merge(qm.source, predictive_partition(qm.source))
    trivial = partition.is_trivial()
    unif = is_unifilar(merged)
    verdict = TheoremVerdict(trivial and unif, trivial, unif, partition, merged, kind="reverse")
    if cross_check:
        verdict.max_dissipation, verdict.t_checked = _cross_check(qm, t_max, cap)
    return verdict


# ------------------------------------------------------------------ memory


DEFAULT_ALPHAS = (0.0, 1.0, 2.0, float("inf"))


def memory_metrics(obj, alphas=DEFAULT_ALPHAS) -> dict:
    """Memory size of a classical machine (``|S|``, ``H_a[pi]``) or a
    q-machine (``d``, ``H_a[rho]``), Renyi orders ``alphas`` in bits."""
    if isinstance(obj, QMachine):
        spectrum = obj.spectrum()
        out = {"kind": f"quantum-{obj.kind}", "dimension": obj.dimension, "rank": obj.rank}
    elif isinstance(obj, Machine):
        spectrum = obj.stationary
        out = {"kind": "classical", "dimension": obj.n_states, "rank": int(np.sum(spectrum > tol.PROB_ZERO))}
    else:
        raise TypeError(f"expected Machine or QMachine, got {type(obj).__name__}")
    out["log_dimension"] = float(np.log2(out["dimension"]))
    out["renyi"] = {_alpha_key(a): renyi_from_spectrum(spectrum, a) for a in alphas}
    out["entropy"] = renyi_from_spectrum(spectrum, 1.0)
    return out


def _alpha_key(a: float) -> str:
    return "inf" if np.isinf(a) else f"{a:g}"


# --------------------------------------------------------- synchronization


@dataclass
class SyncStats:
    t: list
    low_fidelity_mass: list
    alpha: float
    fit_rate: float | None
    fit_prefactor: float | None
    method: str

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "low_fidelity_mass": self.low_fidelity_mass,
            "alpha": self.alpha,
            "fit": {"rate": self.fit_rate, "prefactor": self.fit_prefactor},
            "method": self.method,
        }


def _fidelities(qm: QMachine, words: np.ndarray, stack: np.ndarray):
    """Probabilities and ``F = <psi_hat|rho_w|psi_hat>`` with ``psi_hat`` the
    encoding of the classically most likely state after each word."""
    m = qm.source
    belief = np.tile(m.stationary, (len(words), 1))
    for col in range(words.shape[1]):
        belief = np.einsum("wij,wj->wi", m.transitions[words[:, col]], belief)
        belief /= belief.sum(axis=1, keepdims=True)
    best = belief.argmax(axis=1)
    probs = np.real(np.einsum("wii->w", stack))
    psi = qm.encodings[best]
    F = np.real(np.einsum("wa,wab,wb->w", psi.conj(), stack, psi)) / probs
    return probs, F


def synchronization_stats(
    qm: QMachine,
    t_values=range(1, 11),
    alpha: float = 0.9,
    samples: int | None = None,
    seed: int = 0,
    cap: int | None = None,
) -> SyncStats:
    """Probability mass of words whose memory fidelity with the most likely
    encoded state falls below ``1 - alpha^t``.

    Exact enumeration is used unless ``samples`` is given, in which case
    words are drawn from the process with a seeded generator. An exponential
    envelope ``K alpha_fit^t`` is fitted to the positive masses (reported only).
    """
    if qm.kind != "forward":
        raise ValueError("synchronization statistics are defined for forward q-machines")
    t_values = list(t_values)
    masses = []
    if samples is None:
        stacks = word_states(qm, max(t_values), cap=cap)
        by_t = {}
        for t, (words, stack) in enumerate(stacks):
            if t in t_values:
                probs, F = _fidelities(qm, words, stack)
                low = F < 1 - alpha**t - 1e-12
                by_t[t] = float(probs[low].sum())
        masses = [by_t[t] for t in t_values]
        method = "enumeration"
    else:
        rng = np.random.default_rng(seed)
        words = _sample_words(qm.source, max(t_values), samples, rng)
        for t in t_values:
            prefix = words[:, :t]
            stack = np.broadcast_to(qm.rho, (samples,) + qm.rho.shape).copy()
            for col in range(t):
                K = np.array(qm.kraus)[prefix[:, col]]
                stack = np.einsum("wab,wbc,wdc->wad", K, stack, K.conj())
            _, F = _fidelities(qm, prefix, stack)
            masses.append(float(np.mean(F < 1 - alpha**t - 1e-12)))
        method = f"sampling ({samples} words, seed {seed})"
    rate = pref = None
    pos = [(t, m) for t, m in zip(t_values, masses) if m > 0]
    if len(pos) >= 2:
        ts, ms = np.array(pos).T
        slope, intercept = np.polyfit(ts, np.log(ms), 1)
        rate, pref = float(np.exp(slope)), float(np.exp(intercept))
    return SyncStats(t_values, masses, alpha, rate, pref, method)


def _sample_words(machine: Machine, t: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    n, k = machine.n_states, machine.n_symbols
    # flat[to * k + x, from] = Pr(to, x | from)
    flat = np.transpose(machine.transitions, (1, 0, 2)).reshape(n * k, n)
    cdf = np.cumsum(flat, axis=0)
    states = rng.choice(n, size=samples, p=machine.stationary)
    words = np.zeros((samples, t), dtype=np.int64)
    for col in range(t):
        u = rng.random(samples) * cdf[-1, states]
        idx = (cdf[:, states] < u[None, :]).sum(axis=0)
        idx = np.minimum(idx, n * k - 1)
        words[:, col] = idx % k
        states = idx // k
    return words
