"""Exception types shared across the package.

Error names follow the operational vocabulary used throughout the library:
summation-kernel obstructions, Darboux singularities, and so on, so that the
CLI can surface module errors verbatim.
"""


class EmtodaError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(EmtodaError):
    """Operands carry incompatible matrix dimension or lattice."""


class SummationKernelObstructionError(EmtodaError):
    """(Lambda - 1) g = f has no solution with the requested conventions.

    On a periodic lattice this fires when the source has a nonzero lattice
    mean (per shift-residue class) and projection was not requested.
    """


class BarredDressingUndefinedError(EmtodaError):
    """The upper dressing march cannot be built (singular v or monodromy)."""


class TruncationOrderError(EmtodaError):
    """A truncated series does not hold enough orders for the request."""


class FlowLeavesLaxManifoldError(EmtodaError):
    """A flow commutator leaks outside the (Lambda^0, Lambda^-1) band.

    Signals that the truncation order is too coarse for the requested flow.
    """


class DarbouxSingularityError(EmtodaError):
    """A Darboux step needs the inverse of a (nearly) singular wave value."""

    def __init__(self, message, sites=None):
        super().__init__(message)
        self.sites = [] if sites is None else list(sites)


class DegenerateSpectralDataError(EmtodaError):
    """The n-fold Darboux block system is singular at some site."""

    def __init__(self, message, sites=None, condition=None):
        super().__init__(message)
        self.sites = [] if sites is None else list(sites)
        self.condition = condition


class NumericalAbortError(EmtodaError):
    """Time integration produced non-finite values; carries the valid prefix."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class ScenarioError(EmtodaError):
    """A scenario document failed validation."""
