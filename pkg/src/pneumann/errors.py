"""Exception hierarchy shared by all modules."""


class PNeumannError(Exception):
    """Base class for library errors."""


class InvalidParameterError(PNeumannError, ValueError):
    """A constructor or operation received an out-of-range parameter."""


class MeshError(PNeumannError):
    """A mesh or radial model violates a structural invariant."""


class SizeMismatchError(PNeumannError, ValueError):
    """A field or data array does not match the domain it is used with."""


class SingularityError(PNeumannError, ArithmeticError):
    """The p-energy derivative is undefined (p < 2, eps = 0, zero gradient)."""


class SolverError(PNeumannError):
    """A minimization failed in a way that is not a legitimate outcome."""
