"""Exception hierarchy for greenblocks."""


class GreenBlocksError(Exception):
    """Base class for all errors raised by this package."""


class BlockStructureError(GreenBlocksError, ValueError):
    """A block matrix or partition violates its structural invariants."""


class ParseError(GreenBlocksError, ValueError):
    """A matrix file could not be parsed; the message names the field."""


class SingularBlockError(GreenBlocksError, ArithmeticError):
    """A diagonal block is singular or too ill-conditioned to invert.

    ``index`` is the 1-based block index.
    """

    def __init__(self, index, rcond):
        self.index = index
        self.rcond = rcond
        super().__init__(
            f"diagonal block {index} is singular or ill-conditioned "
            f"(reciprocal condition {rcond:.3e})"
        )


class SpectrumError(GreenBlocksError, ArithmeticError):
    """Eigenvalue computation failed."""


class ContourError(GreenBlocksError, ValueError):
    """A contour does not satisfy its geometric preconditions."""


class SpectrumOnAxisError(GreenBlocksError, ValueError):
    """The spectrum touches the imaginary axis.

    The bounded-solutions problem then has no unique bounded solution for
    every bounded forcing term and the Green's function is undefined.
    """

    def __init__(self, gap, tol):
        self.gap = gap
        self.tol = tol
        super().__init__(
            "spectrum intersects the imaginary axis: the bounded-solution "
            "hypothesis (spectrum disjoint from the imaginary axis) fails "
            f"(distance {gap:.3e} < tolerance {tol:.3e})"
        )


class UndefinedAtZeroError(GreenBlocksError, ValueError):
    """exp+, exp- and g are undefined for t = 0."""

    def __init__(self, what="kernel"):
        super().__init__(f"{what} is undefined for t=0")


class ConfluentPointsError(GreenBlocksError, ValueError):
    """Interpolation points coincide where distinct points are required."""


class PoleError(GreenBlocksError, ZeroDivisionError):
    """Evaluation point coincides with a pole."""


class RegionError(GreenBlocksError, ValueError):
    """Laplace transform requested outside its region of convergence."""


class NotDiagonalizableError(GreenBlocksError, ArithmeticError):
    """The eigendecomposition oracle cannot represent the matrix."""
