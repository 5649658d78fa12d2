"""Exception types shared across the toolkit."""


class WagnerSisError(Exception):
    """Base class for all toolkit errors."""


class BadDimensions(WagnerSisError):
    pass


class DimensionMismatch(WagnerSisError):
    pass


class RankDeficient(WagnerSisError):
    """No set of n columns forms an invertible n x n submatrix mod q."""


class NonInvertiblePivot(WagnerSisError):
    """Composite modulus: a pivot search found only non-unit entries."""


class BudgetExceeded(WagnerSisError):
    """An enumeration or memory budget would be exceeded."""


class WidthTooSmall(WagnerSisError):
    """Gaussian width below the exact-sampler requirement."""


class PreconditionViolated(WagnerSisError):
    """A stated precondition fails; the message names the failing inequality."""


class NotInLattice(WagnerSisError):
    pass


class BlockSumMismatch(WagnerSisError):
    pass


class InsufficientInputs(WagnerSisError):
    pass


class InfeasibleSchedule(WagnerSisError):
    pass


class InsufficientSamples(WagnerSisError):
    pass


class Infeasible(WagnerSisError):
    pass
