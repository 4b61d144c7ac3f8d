"""Exception hierarchy.

Everything raised on purpose derives from :class:`CDShearError`; the CLI maps
:class:`ValidationError` to exit code 2 and :class:`SolverError` to 3.
"""


class CDShearError(Exception):
    pass


class ValidationError(CDShearError, ValueError):
    pass


class SolverError(CDShearError, RuntimeError):
    pass


class InvalidParameter(ValidationError):
    pass


class DomainError(ValidationError):
    """Argument outside the domain of a stored-energy function."""


class RangeError(ValidationError):
    """Dual variable outside the range of the constitutive map."""


class DegenerateConjugate(CDShearError):
    """The Legendre conjugate is not a function (affine energies)."""


class DegenerateBranch(CDShearError):
    """Energy requested at the zero dual branch."""


class NoBranch(SolverError):
    pass


class ForceImbalance(ValidationError):
    pass


class SolverDivergence(SolverError):
    pass


class BoxTooSmall(ValidationError):
    pass
