"""Exception types shared across the package."""


class UramimoError(Exception):
    """Base class for all package-specific errors."""


class SpecError(UramimoError, ValueError):
    """A domain object (channel spec, code spec, parameter) violates its contract."""


class ConfigError(UramimoError, ValueError):
    """Malformed, inconsistent, or unknown configuration input."""


class ResourceLimitError(UramimoError):
    """A requested allocation exceeds the configured budget."""


class NumericalError(UramimoError, ArithmeticError):
    """A numeric operation produced an unusable result (non-finite cost,
    nonpositive quadratic form, singular rank-one update)."""


class TreeDecodeOverflow(UramimoError):
    """Surviving-path count exceeded the decoder budget at some stage."""

    def __init__(self, stage: int, count: int, max_paths: int):
        self.stage = stage
        self.count = count
        self.max_paths = max_paths
        super().__init__(
            f"tree decoder overflow at stage {stage}: "
            f"{count} surviving paths exceed the budget of {max_paths}"
        )
