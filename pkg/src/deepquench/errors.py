"""Exception types raised by the solvers and the config layer."""


class GridError(ValueError):
    """Field shape does not match its grid, or the grid is unsupported."""


class DomainError(ValueError):
    """Scalar argument outside the domain of a function."""


class SolverError(RuntimeError):
    """An iterative solver failed to converge.

    ``step`` is the time step (1-based) at which the failure happened, when known.
    """

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (time step {step})")
        self.step = step


class NumericError(ArithmeticError):
    """NaN/Inf in a solve, a singular system, or an infeasible obstacle pin."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (time step {step})")
        self.step = step


class ValidationError(ValueError):
    """One or more modelling assumptions are violated.

    ``violations`` is a list of ``(code, detail)`` pairs, e.g.
    ``("A5_violation", "circle 0, i=3: ...")``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{code}: {detail}" for code, detail in self.violations]
        super().__init__("; ".join(lines))

    @property
    def codes(self):
        return [code for code, _ in self.violations]
