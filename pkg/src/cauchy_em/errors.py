"""Exception types raised across the package."""


class CauchyEMError(Exception):
    """Base class for all package errors."""


class DomainError(CauchyEMError, ValueError):
    """Invalid parameter values or non-finite inputs."""


class EmptyRequestError(DomainError):
    """A sampler or simulator was asked for zero draws."""


class DegenerateScaleError(CauchyEMError, ValueError):
    """Total scale (or the Gaussian scale component) is zero or too small."""


class NumericalError(CauchyEMError, ArithmeticError):
    """Quadrature or density evaluation failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateMomentsError(CauchyEMError, ArithmeticError):
    """Conditional moment sums vanish, so the M-step is undefined."""


class InsufficientDataError(CauchyEMError, ValueError):
    """Too few (or too few distinct) observations for the requested fit."""


class OptimizationError(CauchyEMError, RuntimeError):
    """Likelihood search did not converge; ``best`` holds the best point seen."""

    def __init__(self, message, best=None, loglik=None):
        super().__init__(message)
        self.best = best
        self.loglik = loglik


class ResponsibilityUnderflowError(CauchyEMError, ArithmeticError):
    def __init__(self, index):
        super().__init__(f"all component densities underflow at observation {index}")
        self.index = index


class StarvedComponentError(CauchyEMError, RuntimeError):
    def __init__(self, component, mass, iteration=None):
        where = "" if iteration is None else f" at iteration {iteration}"
        super().__init__(
            f"mixture component {component} lost its mass (sum of responsibilities {mass:.3g}){where}"
        )
        self.component = component
        self.mass = mass
        self.iteration = iteration


class DatasetError(CauchyEMError, ValueError):
    """Malformed input data file."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
