"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant (bad shape, sign, range, file)."""


class NumericalError(ArithmeticError):
    """A computation failed numerically: divergence, singularity, non-convergence."""
