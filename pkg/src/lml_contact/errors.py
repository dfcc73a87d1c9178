"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Non-finite, mis-shaped or out-of-domain input."""


class InvalidConfigError(ValueError):
    """Configuration that violates a documented schema or constraint."""


class RankDeficientError(ValueError):
    """Normal equations are singular and no regularization was supplied."""

    def __init__(self, deficiency: int, size: int):
        self.deficiency = deficiency
        self.size = size
        super().__init__(
            f"Gram matrix is rank deficient: {deficiency}-dimensional null space "
            f"out of {size} parameters; supply regularization"
        )


class ExcitationError(ValueError):
    """A calibration sequence does not excite every command direction."""


class InvariantViolation(RuntimeError):
    """An internal invariant (e.g. positive semidefinite covariance) broke."""
