"""Numerical tolerance policy shared by every module.

All strict ``> 0`` tests on probabilities go through :data:`PROB_ZERO`; all
"support" conditions (graph edges, synchronization, coupling) use
:data:`SUPPORT`. Matrix functions clamp eigenvalues at :data:`EIG_CLAMP`.
"""

import os

#: entries at or below this are treated as exact zeros in transition matrices
PROB_ZERO = 1e-12
#: column-stochasticity residual accepted by ``validate``
STOCHASTIC = 1e-12
#: power-iteration residual target / acceptance for stationary distributions
STATIONARY_TARGET = 1e-12
STATIONARY_ACCEPT = 1e-10
STATIONARY_MAX_ITER = 10**6
#: support threshold for ">0 only when" conditions and coupling graphs
SUPPORT = 1e-9
#: L-infinity coincidence tolerance between belief states
BELIEF = 1e-9
#: mass a belief must put on a single state to count as synchronized
SYNC = 1e-6
#: Hermitian eigenvalue clamp for logs, square roots and pseudo-inverses
EIG_CLAMP = 1e-12
#: Hermiticity / positivity / trace checks on density operators and channels
OPERATOR = 1e-10
#: singular values at or below this are dropped when building encodings
SINGULAR_CUTOFF = 1e-10
#: overlap fixed-point iteration: successive-iterate step and final residual
OVERLAP_STEP = 1e-14
OVERLAP_RESIDUAL = 1e-12
OVERLAP_MAX_ITER = 10**5
#: default maximum number of belief states in the mixed-state construction
BELIEF_CAP = 256


def _cap_from_env(default: int = 2**20) -> int:
    raw = os.environ.get("RATCHETLAB_CAP")
    if raw is None:
        return default
    try:
        return int(float(raw))
    except ValueError:
        return default


#: maximum number of (word, state) table entries any enumeration may build
ENUMERATION_CAP = _cap_from_env()


def as_dict() -> dict:
    """Snapshot of the policy, recorded in report provenance blocks."""
    return {
        "prob_zero": PROB_ZERO,
        "stochastic": STOCHASTIC,
        "stationary_accept": STATIONARY_ACCEPT,
        "support": SUPPORT,
        "belief": BELIEF,
        "sync": SYNC,
        "eig_clamp": EIG_CLAMP,
        "operator": OPERATOR,
        "singular_cutoff": SINGULAR_CUTOFF,
        "overlap_residual": OVERLAP_RESIDUAL,
        "enumeration_cap": ENUMERATION_CAP,
    }
