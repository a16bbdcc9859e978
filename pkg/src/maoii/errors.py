"""Exception types raised across the package."""


class OutOfRange(ValueError):
    """A parameter violates its admissible range."""

    def __init__(self, field, value, bound):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r} out of range: {bound}")


class NoStationary(ValueError):
    """The chain induced by a threshold has no stationary distribution."""


class NonConvergence(RuntimeError):
    pass


class VolatilityRequired(ValueError):
    """Oscillating source without the (N-1)r >= 4p volatility condition."""


class NoRoot(ValueError):
    pass


class InsufficientCheckpoints(ValueError):
    pass
