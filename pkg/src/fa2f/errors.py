"""Exception types shared across the package."""


class SiteCapError(ValueError):
    """A region or state space is larger than the configured cap."""


class GeometryError(ValueError):
    """Regions overlap, do not tile, or have the wrong shape for an operation."""


class NumericGuardError(ArithmeticError):
    """A numeric guard tripped (overflow, reducibility, infinite constant)."""


class ReducibleChainError(NumericGuardError):
    """The chain is not irreducible; ``components`` lists the communicating classes."""

    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = components or []


class HypothesisViolation(ValueError):
    """Hypotheses of an auxiliary-chain inequality do not hold for the given instance."""


class EngineError(RuntimeError):
    """An internal consistency self-test failed (signals a bug, not bad input)."""
