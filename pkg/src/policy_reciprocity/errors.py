"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or malformed experiment config file."""


class ContractViolationError(ValueError):
    """Structural mismatch between arguments (shapes, dimensions, domains)."""


class NoAdjacentStateError(LookupError):
    """An adjacency query produced an empty candidate set."""


class EmptyNeighborhoodError(RuntimeError):
    """An agent has no neighbors in the connectivity graph."""


class DivergenceError(RuntimeError):
    """A learned value became NaN/inf (or exploded) during training."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class UsageError(RuntimeError):
    """An API was driven in an unsupported order (e.g. step after done)."""


class NotFittedError(RuntimeError):
    """Estimator attributes were requested before fit() completed."""
