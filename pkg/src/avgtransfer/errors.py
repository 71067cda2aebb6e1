"""Exception hierarchy.  Everything derives from ``AvgTransferError``."""


class AvgTransferError(Exception):
    pass


class NumericalFailure(AvgTransferError):
    """Base of the failures the CLI maps to exit code 1."""


class QuadratureNonConvergence(NumericalFailure):
    pass


class StepFailure(NumericalFailure):
    pass


class EscapeDomain(NumericalFailure):
    pass


class GraphViolation(NumericalFailure):
    pass


class BracketFailure(NumericalFailure):
    pass


class BracketNotFound(NumericalFailure):
    def __init__(self, msg, lam_range=None):
        super().__init__(msg)
        self.lam_range = lam_range


class VerificationFailed(NumericalFailure):
    pass


class Capped(NumericalFailure):
    """Trajectory hit the tau cap before reaching the target."""

    def __init__(self, tau_max, c_end, lam):
        super().__init__(f"tau cap {tau_max} reached (c={c_end:.3g})")
        self.tau_max = tau_max
        self.c_end = c_end
        self.lam = lam


class DomainError(AvgTransferError, ValueError):
    pass


class SingularCircular(DomainError):
    pass


class CircularSingularity(DomainError):
    pass


class OutOfSector(DomainError):
    pass
