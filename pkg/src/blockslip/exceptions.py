"""Exception types raised by the solver library."""


class InvalidArgument(ValueError):
    pass


class CoverError(ValueError):
    """A patch set does not satisfy the cover / strong-overlap requirements."""


class PatchTooLarge(ValueError):
    pass


class SolverFailure(RuntimeError):
    """A linear solve or subproblem solve did not reach its tolerance."""


class ContractViolation(AssertionError):
    """An algorithmic invariant was violated at runtime."""
