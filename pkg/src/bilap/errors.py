"""Exception types shared across the toolkit."""


class NumericalFailure(RuntimeError):
    """A numerical procedure could not reach its stopping criterion."""


class NoConvergence(NumericalFailure):
    """A series or iteration hit its term/iteration cap."""


class BracketFailure(NumericalFailure):
    """A scan found no sign change where one was required."""


class NotSingular(RuntimeError):
    """Null-vector extraction requested at a point where the system is regular."""


class FrameError(ValueError):
    """A corner's local polar frame does not map its edges to theta = 0 and theta = alpha."""


class SingularPairingMatrix(RuntimeError):
    """The corner pairing matrix is rank deficient; the plain corrected solve does not apply."""


class NotSolvable(RuntimeError):
    """Compatibility conditions of a constrained solve are violated."""
