"""Exception hierarchy."""


class RatchetError(Exception):
    """Base class for every error raised by ratchetlab."""


class InvalidMachine(RatchetError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid machine")


class MachineFormatError(RatchetError, ValueError):
    """Malformed machine / partition / operator file."""


class NonConvergence(RatchetError, ArithmeticError):
    def __init__(self, what: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{what} did not converge after {iterations} iterations (residual {residual:.3e})")


class UnknownSymbol(RatchetError, KeyError):
    def __str__(self):
        return f"unknown symbol {self.args[0]!r}"


class EnumerationCapExceeded(RatchetError, MemoryError):
    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(f"enumeration needs {required} table entries; cap is {cap} (set RATCHETLAB_CAP to raise it)")


class BeliefCapExceeded(RatchetError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"more than {cap} reachable belief states; no finite unifilar presentation found under this cap")


class NotSynchronized(RatchetError):
    pass


class NotEpsilonMachine(RatchetError, ValueError):
    pass


class NotReverseEpsilonMachine(RatchetError, ValueError):
    pass


class NegativeProbability(RatchetError, ValueError):
    pass


class NotHermitian(RatchetError, ValueError):
    pass


class NotPositive(RatchetError, ValueError):
    pass


class NotUnitTrace(RatchetError, ValueError):
    pass


class DimensionMismatch(RatchetError, ValueError):
    pass


class SingularOutput(RatchetError, ArithmeticError):
    pass


class DegenerateGeneric(RatchetError, ArithmeticError):
    def __init__(self, gap: float):
        self.gap = gap
        super().__init__(f"generic combination is degenerate (smallest eigenvalue gap {gap:.3e})")


class InvalidAlpha(RatchetError, ValueError):
    pass


class InvalidPartition(RatchetError, ValueError):
    pass


class SupportViolation(RatchetError, ValueError):
    """Support of one operator is not contained in that of another."""


class InconsistentVerdicts(RatchetError, AssertionError):
    """Two independent verdicts on the same question disagree."""
