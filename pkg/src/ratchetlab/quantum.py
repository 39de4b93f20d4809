"""Dense quantum-information toolbox.

Every matrix function goes through one Hermitian eigendecomposition with
eigenvalues clamped at :data:`~ratchetlab.tolerances.EIG_CLAMP`. Logs are
base 2, so all information quantities are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import tolerances as tol
from .errors import (
    DegenerateGeneric,
    DimensionMismatch,
    InconsistentVerdicts,
    InvalidAlpha,
    NotHermitian,
    NotPositive,
    NotUnitTrace,
    SingularOutput,
    SupportViolation,
)


# ------------------------------------------------------------- primitives


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def eigh(m: np.ndarray):
    """Eigendecomposition of the Hermitian part of ``m``."""
    return np.linalg.eigh(hermitian_part(np.asarray(m, dtype=complex)))


def psd_function(m: np.ndarray, f, clamp: float = tol.EIG_CLAMP) -> np.ndarray:
    """Apply ``f`` to eigenvalues above ``clamp``; smaller ones map to 0."""
    w, v = eigh(m)
    fw = np.zeros_like(w)
    mask = w > clamp
    fw[mask] = f(w[mask])
    return (v * fw) @ v.conj().T


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    return psd_function(m, np.sqrt)


def inv_sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Pseudo-inverse square root on the support."""
    return psd_function(m, lambda w: 1 / np.sqrt(w))


def support_projector(m: np.ndarray, clamp: float = tol.EIG_CLAMP) -> np.ndarray:
    return psd_function(m, np.ones_like, clamp)


def ket(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return v / np.linalg.norm(v)


def projector(v) -> np.ndarray:
    v = ket(v)
    return np.outer(v, v.conj())


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitian_part(m)))))


def check_density(rho, atol: float = tol.OPERATOR) -> np.ndarray:
    """Validate and return ``rho`` as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatch(f"density operator must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise NotHermitian("operator is not Hermitian")
    w = np.linalg.eigvalsh(hermitian_part(rho))
    if w.min() < -atol:
        raise NotPositive(f"operator has eigenvalue {w.min():.3e}")
    if abs(np.trace(rho).real - 1) > atol:
        raise NotUnitTrace(f"trace is {np.trace(rho).real:.12g}")
    return rho


def _spectrum(rho) -> np.ndarray:
    w = np.linalg.eigvalsh(hermitian_part(np.asarray(rho, dtype=complex)))
    return np.where(w > tol.EIG_CLAMP, w, 0.0)


def entropy_unnormalized(a) -> float:
    """``-Tr A log2 A`` for a positive operator of any trace."""
    w = _spectrum(a)
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


# ------------------------------------------------------------ entropies


def von_neumann_entropy(rho) -> float:
    return max(0.0, entropy_unnormalized(check_density(rho)))


def renyi_entropy(rho, alpha: float) -> float:
    """Renyi-von Neumann entropy; ``alpha`` in ``[0, inf]``, limits taken analytically."""
    w = _spectrum(rho)
    return renyi_from_spectrum(w, alpha)


def renyi_from_spectrum(p, alpha: float) -> float:
    if alpha < 0:
        raise InvalidAlpha(f"alpha must be nonnegative, got {alpha}")
    p = np.asarray(p, dtype=float)
    p = p[p > tol.EIG_CLAMP]
    if alpha == 0:
        h = np.log2(len(p))
    elif alpha == 1:
        h = -np.sum(p * np.log2(p))
    elif np.isinf(alpha):
        h = -np.log2(p.max())
    else:
        h = np.log2(np.sum(p**alpha)) / (1 - alpha)
    # rounding can push a pure spectrum slightly below zero
    return max(0.0, float(h))


def fidelity(rho, sigma) -> float:
    """``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"{rho.shape} vs {sigma.shape}")
    s = sqrtm_psd(rho)
    w = np.linalg.eigvalsh(hermitian_part(s @ sigma @ s))
    # sqrt amplifies rounding noise, so clamp before taking it
    f = float(np.sum(np.sqrt(w[w > tol.EIG_CLAMP])) ** 2)
    return min(max(f, 0.0), 1.0)


def relative_entropy(rho, sigma) -> float:
    """``D(rho || sigma)`` in bits; ``inf`` when ``rho`` leaves ``sigma``'s support."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionMismatch(f"{rho.shape} vs {sigma.shape}")
    mu, v = eigh(sigma)
    weights = np.real(np.einsum("ij,ik,kj->j", v.conj(), hermitian_part(rho), v))
    on = mu > tol.EIG_CLAMP
    if np.sum(np.abs(weights[~on])) > tol.OPERATOR:
        return float("inf")
    cross = float(np.sum(weights[on] * np.log2(mu[on])))
    return max(-entropy_unnormalized(rho) - cross, 0.0)


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduce ``rho`` on subsystems of sizes ``dims`` to the subsystems in ``keep``."""
    dims = list(dims)
    rho = np.asarray(rho, dtype=complex)
    if int(np.prod(dims)) != rho.shape[0]:
        raise DimensionMismatch(f"dims {dims} do not factor dimension {rho.shape[0]}")
    n = len(dims)
    keep = sorted(keep)
    traced = [i for i in range(n) if i not in keep]
    t = rho.reshape(dims + dims)
    for i in sorted(traced, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return t.reshape(d, d)


def mutual_information(rho_ab, dims: Sequence[int]) -> float:
    """``I(A : B)`` for a bipartite operator with ``dims = (d_A, d_B)``."""
    rho_ab = check_density(rho_ab)
    a = partial_trace(rho_ab, dims, [0])
    b = partial_trace(rho_ab, dims, [1])
    return entropy_unnormalized(a) + entropy_unnormalized(b) - entropy_unnormalized(rho_ab)


@dataclass
class CQEnsemble:
    probs: np.ndarray
    states: list = field(repr=False)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        self.states = [check_density(s) for s in self.states]
        if len(self.probs) != len(self.states):
            raise DimensionMismatch("one probability per member is required")
        if len({s.shape for s in self.states}) > 1:
            raise DimensionMismatch("ensemble members must share a dimension")
        if np.any(self.probs < -tol.PROB_ZERO) or abs(self.probs.sum() - 1) > 1e-10:
            raise ValueError("ensemble probabilities must be a distribution")

    @property
    def average(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.probs, self.states))

    def cq_state(self) -> np.ndarray:
        """Block-diagonal ``sum_x Pr(x) |x><x| (x) rho_x``."""
        k = len(self.states)
        return sum(p * np.kron(projector(np.eye(k)[i]), s) for i, (p, s) in enumerate(zip(self.probs, self.states)))


def holevo(ensemble: CQEnsemble) -> float:
    return entropy_unnormalized(ensemble.average) - sum(
        p * entropy_unnormalized(s) for p, s in zip(ensemble.probs, ensemble.states)
    )


# --------------------------------------------------------------- channels


@dataclass
class KrausChannel:
    """Completely positive map ``rho -> sum_a K_a rho K_a^dagger``."""

    ops: list = field(repr=False)

    def __post_init__(self):
        self.ops = [np.asarray(k, dtype=complex) for k in self.ops]
        if not self.ops:
            raise ValueError("a channel needs at least one Kraus operator")
        if len({k.shape for k in self.ops}) > 1:
            raise DimensionMismatch("Kraus operators must share a shape")

    @property
    def d_in(self) -> int:
        return self.ops[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.ops[0].shape[0]

    def completeness(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.ops)

    def is_trace_preserving(self, support=None, atol: float = tol.OPERATOR) -> bool:
        """``sum K^dag K`` equals the identity, or ``support`` if given."""
        target = np.eye(self.d_in) if support is None else support
        return bool(np.max(np.abs(self.completeness() - target)) <= atol)

    def __call__(self, rho):
        return apply(self, rho)


def apply(channel: KrausChannel, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (channel.d_in, channel.d_in):
        raise DimensionMismatch(f"channel acts on dimension {channel.d_in}, state has {rho.shape}")
    return sum(k @ rho @ k.conj().T for k in channel.ops)


def adjoint(channel: KrausChannel) -> KrausChannel:
    """Heisenberg-picture map ``M -> sum_a K_a^dagger M K_a`` as a Kraus list."""
    return KrausChannel([k.conj().T for k in channel.ops])


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    return KrausChannel([b @ a for b in second.ops for a in first.ops])


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel([np.eye(d)])


def unitary_channel(u) -> KrausChannel:
    return KrausChannel([np.asarray(u, dtype=complex)])


def dephasing_channel(d: int) -> KrausChannel:
    return KrausChannel([projector(np.eye(d)[i]) for i in range(d)])


def petz_recovery(channel: KrausChannel, sigma) -> KrausChannel:
    """Petz recovery map of ``channel`` with respect to ``sigma``.

    Kraus operators ``sigma^1/2 K_a^dagger E(sigma)^-1/2``, the inverse taken on
    the support of ``E(sigma)``. The result is trace preserving on that support.
    """
    sigma = check_density(sigma)
    out = apply(channel, sigma)
    inv = inv_sqrtm_psd(out)
    root = sqrtm_psd(sigma)
    recovery = KrausChannel([root @ k.conj().T @ inv for k in channel.ops])
    if not recovery.is_trace_preserving(support_projector(out), atol=1e-8):
        raise SingularOutput("Petz map is not trace preserving on the support of E(sigma)")
    return recovery


@dataclass
class DPIResult:
    saturated: bool
    recovered: bool
    relative_entropy_in: float
    relative_entropy_out: float
    recovery_error: float

    @property
    def gap(self) -> float:
        return self.relative_entropy_in - self.relative_entropy_out

    def to_json(self) -> dict:
        return {
            "saturated": self.saturated,
            "recovered": self.recovered,
            "relative_entropy_in": self.relative_entropy_in,
            "relative_entropy_out": self.relative_entropy_out,
            "gap": self.gap,
            "recovery_error": self.recovery_error,
            "tolerance": 1e-8,
        }


def dpi_saturation_check(rho, sigma, channel: KrausChannel, strict: bool = True) -> DPIResult:
    """Compare relative-entropy saturation against Petz recoverability.

    ``saturated``: ``|D(rho||sigma) - D(E rho||E sigma)| <= 1e-8``;
    ``recovered``: ``||R_sigma(E(rho)) - rho||_1 <= 1e-8``. With ``strict``
    a disagreement raises :class:`InconsistentVerdicts`.
    """
    rho = check_density(rho)
    sigma = check_density(sigma)
    d_in = relative_entropy(rho, sigma)
    if np.isinf(d_in):
        raise SupportViolation("support of rho is not contained in support of sigma")
    d_out = relative_entropy(apply(channel, rho), apply(channel, sigma))
    recovery = petz_recovery(channel, sigma)
    err = trace_norm(apply(recovery, apply(channel, rho)) - rho)
    result = DPIResult(abs(d_in - d_out) <= 1e-8, err <= 1e-8, d_in, d_out, err)
    if strict and result.saturated != result.recovered:
        raise InconsistentVerdicts(f"saturated={result.saturated} recovered={result.recovered} (gap {result.gap:.3e}, error {err:.3e})")
    return result


# ------------------------------------------------------------------ MLCM


@dataclass
class MLCMResult:
    """Orthogonal block decomposition; ``blocks[i]`` has orthonormal columns."""

    blocks: list = field(repr=False)
    degenerate: bool = False
    gap: float = float("inf")

    @property
    def sizes(self) -> list[int]:
        return [b.shape[1] for b in self.blocks]

    def projectors(self) -> list[np.ndarray]:
        return [b @ b.conj().T for b in self.blocks]


def cq_mlcm(ensemble: CQEnsemble, seed: int = 0, retries: int = 5, strict: bool = False) -> MLCMResult:
    """Finest orthogonal decomposition block-diagonalizing every ensemble member.

    Eigenvectors of a random positive combination of the members are linked
    whenever some member couples them; connected components give the blocks.
    If the combination stays degenerate after ``retries`` draws, degenerate
    eigenspaces are kept whole and the result is flagged (or
    :class:`DegenerateGeneric` is raised with ``strict``).
    """
    rng = np.random.default_rng(seed)
    states = ensemble.states
    d = states[0].shape[0]
    best = None
    for _ in range(retries):
        weights = rng.random(len(states)) + 0.1
        combo = sum(w * s for w, s in zip(weights, states))
        w, v = eigh(combo)
        gap = float(np.min(np.diff(w))) if d > 1 else float("inf")
        if best is None or gap > best[0]:
            best = (gap, w, v)
        if gap > 1e-8:
            break
    gap, w, v = best
    degenerate = gap <= 1e-8
    if degenerate and strict:
        raise DegenerateGeneric(gap)
    # nodes: eigenspaces (clusters of near-equal eigenvalues)
    cluster = np.zeros(d, dtype=int)
    for i in range(1, d):
        cluster[i] = cluster[i - 1] + (0 if w[i] - w[i - 1] <= 1e-8 else 1)
    nc = cluster[-1] + 1 if d else 0
    adj = np.zeros((nc, nc), dtype=bool)
    for s in states:
        c = np.abs(v.conj().T @ s @ v) > tol.SUPPORT
        for i, j in zip(*np.nonzero(c)):
            adj[cluster[i], cluster[j]] = True
    _, labels = connected_components(adj, directed=False)
    blocks = []
    for lab in range(labels.max() + 1 if nc else 0):
        cols = [i for i in range(d) if labels[cluster[i]] == lab]
        blocks.append(v[:, cols])
    return MLCMResult(blocks, degenerate, gap)


# --------------------------------------------------------- random instances


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_channel(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Kraus operators cut from a random isometry ``C^d_in -> C^(n_kraus d_out)``.

    ``n_kraus`` is raised to ``ceil(d_in / d_out)`` if needed for an isometry to exist.
    """
    n_kraus = max(n_kraus, -(-d_in // d_out))
    z = rng.standard_normal((n_kraus * d_out, d_in)) + 1j * rng.standard_normal((n_kraus * d_out, d_in))
    q, _ = np.linalg.qr(z)
    return KrausChannel([q[i * d_out : (i + 1) * d_out] for i in range(n_kraus)])
