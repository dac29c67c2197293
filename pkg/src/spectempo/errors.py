"""Exception types raised across the toolkit."""


class SpectempoError(Exception):
    """Base class for all toolkit errors."""


class NonFinite(SpectempoError):
    """Input contains NaN or Inf entries."""


class NotSymmetric(SpectempoError):
    """Matrix is not symmetric within tolerance."""


class DimensionMismatch(SpectempoError):
    """Operands have incompatible shapes."""


class IndexOutOfRange(SpectempoError):
    """Index set refers outside its declared universe."""


class IsolatedNode(SpectempoError):
    """Normalized Laplacian requested for a graph with a degree-zero node."""


class BadParameters(SpectempoError):
    """Generator or request parameters outside their valid range."""


class NoneFound(SpectempoError):
    """No candidate column satisfied the same-sign test."""


class Ambiguous(SpectempoError):
    """More than one column satisfied the same-sign test."""


class IncompleteBasis(SpectempoError):
    """Operation requires a full orthonormal basis (K = n)."""


class DegreeEigenvectorMissing(SpectempoError):
    """Laplacian certificate requires the same-sign eigenvector among the known templates."""


class Infeasible(SpectempoError):
    """Constraint system admits no solution."""


class NeverFeasible(SpectempoError):
    """No ball radius in the search bracket admits a feasible point."""


class SingularSystem(SpectempoError):
    """Certificate linear system is singular at the requested delta."""


class ConditionsFail(SpectempoError):
    """Robust-recovery preconditions (rank test, certificate value < 1) do not hold."""


class SingularShift(SpectempoError):
    """I + T is singular; deconvolution formula undefined."""


class DegenerateVariance(SpectempoError):
    """A signal coordinate has zero variance; correlation undefined."""
