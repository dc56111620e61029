"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised for out-of-contract arguments (non-positive sizes, bad shapes)."""


class DomainError(ValueError):
    """Raised when a formula is undefined for the given parameters (e.g. rho == 1)."""


class InfeasibleError(RuntimeError):
    """An optimization stage could not produce a feasible point.

    ``family`` names the violated constraint family, e.g. ``"qos"``,
    ``"power"`` or ``"covertness"``.
    """

    def __init__(self, message: str, family: str = "unknown"):
        super().__init__(message)
        self.family = family
