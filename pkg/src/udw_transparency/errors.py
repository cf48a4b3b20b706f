"""Exceptions raised by the trajectory, integral, gate and oracle modules.

Precondition failures derive from `ValueError`; numerical non-convergence derives
from `RuntimeError`.  Every class also derives from `TransparencyError`, so callers
(the CLI in particular) can catch the whole family at once.
"""


class TransparencyError(Exception):
    pass


# trajectory


class EmptySegmentList(TransparencyError, ValueError):
    pass


class VelocityOutOfRange(TransparencyError, ValueError):
    pass


class InvalidSegment(TransparencyError, ValueError):
    pass


class InadmissibleParams(TransparencyError, ValueError):
    pass


class VelocityBoundViolated(TransparencyError, ValueError):
    pass


class UnphysicalGammaB(TransparencyError, ValueError):
    pass


class NonCyclicInterval(TransparencyError, ValueError):
    pass


# phase integrals


class InsufficientDetectors(TransparencyError, ValueError):
    pass


class TransparencyAssertionFailed(TransparencyError, ValueError):
    pass


class QuadratureNonConvergent(TransparencyError, RuntimeError):
    pass


# transparency search


class InsufficientIntersections(TransparencyError, ValueError):
    pass


class PolishDiverged(TransparencyError, RuntimeError):
    pass


class LabelNotFound(TransparencyError, ValueError):
    pass


# gates


class ZeroRotation(TransparencyError, ValueError):
    pass


class Unreachable(TransparencyError, ValueError):
    pass


class DriveCeilingExceeded(TransparencyError, ValueError):
    pass


# entanglement


class TransparencyRequired(TransparencyError, ValueError):
    pass


class ThetaDegenerate(TransparencyError, ValueError):
    pass


# tradeoff


class GateUnreachable(TransparencyError, ValueError):
    pass


# oracle


class TruncationLeakage(TransparencyError, ValueError):
    pass


class StepNonConvergence(TransparencyError, RuntimeError):
    pass
