"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: input errors -> 1, guard/contract
violations -> 2, solver failures -> 3.
"""


class GibbsCertifyError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GibbsCertifyError, ValueError):
    """Malformed model/observable definitions or invalid arguments."""


class ContractError(GibbsCertifyError, ValueError):
    """A precondition of an operation does not hold (coverage, support, ...)."""


class ImplicitLatticeError(ContractError):
    """The operation needs the finite site set V, which an implicit lattice lacks."""


class GuardError(ContractError):
    """A brute-force or LP size guard would be exceeded."""


class SolverError(GibbsCertifyError, RuntimeError):
    """The LP solver could not produce a trustworthy answer."""


class IterationLimitError(SolverError):
    """The simplex iteration cap was reached before optimality was proven."""
