"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Bad static configuration: unknown dataset, unsupported step count, ..."""


class DomainError(ValueError):
    """A time or argument lies outside the schedule's domain."""


class StateError(RuntimeError):
    """Operation applied to an object in an unusable state (e.g. empty dataset)."""


class NumericsError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class TrainingDivergence(NumericsError):
    """Loss or parameters became non-finite during training."""

    def __init__(self, iteration, message=""):
        self.iteration = iteration
        super().__init__(f"training diverged at iteration {iteration}" +
                         (f": {message}" if message else ""))
