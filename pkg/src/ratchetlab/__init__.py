"""Thermodynamic efficiency of classical and quantum generators of stochastic processes."""

from .equivalence import (
    Partition,
    forward_epsilon_machine,
    merge,
    predictive_partition,
    retrodictive_partition,
    reverse_epsilon_machine,
)
from .info import classical_dissipation, classify_efficiency, entropy_rate
from .machine import Machine, stationary_distribution, time_reverse, validate, word_probability
from .qmachine import (
    QMachine,
    build_qmachine,
    build_reverse_qmachine,
    check_forward_efficiency,
    check_reverse_efficiency,
    quantum_dissipation,
    qword_probability,
)

__version__ = "0.1.0"

__all__ = [
    "Machine",
    "Partition",
    "QMachine",
    "build_qmachine",
    "build_reverse_qmachine",
    "check_forward_efficiency",
    "check_reverse_efficiency",
    "classical_dissipation",
    "classify_efficiency",
    "entropy_rate",
    "forward_epsilon_machine",
    "merge",
    "predictive_partition",
    "quantum_dissipation",
    "qword_probability",
    "retrodictive_partition",
    "reverse_epsilon_machine",
    "stationary_distribution",
    "time_reverse",
    "validate",
    "word_probability",
]
