"""Exception hierarchy for collapse-lab."""


class CollapseLabError(Exception):
    """Base class for all collapse-lab errors."""


class DimensionError(CollapseLabError, ValueError):
    """Subsystem dimensions or operator shapes do not match."""


class NormalizationError(CollapseLabError, ValueError):
    """A state that must carry norm (close to) 1 does not."""


class NullOutcomeError(CollapseLabError, ValueError):
    """Projection onto a branch of (numerically) zero weight."""


class CompletenessError(CollapseLabError, ValueError):
    """A projector family does not resolve the identity."""


class InputError(CollapseLabError, ValueError):
    """A scalar argument is outside its documented domain."""


class CausalityError(CollapseLabError, ValueError):
    """A schedule permutation would reorder causally linked events."""


class ModelError(CollapseLabError, ValueError):
    """A hidden-variable model violated its response contract."""


class InsufficientDataError(CollapseLabError, ValueError):
    """A count table lacks the populated settings a statistic needs."""


class EngineInvariantError(CollapseLabError, RuntimeError):
    """An internal collapse-engine invariant was violated."""


class ConfigError(CollapseLabError, ValueError):
    """A run configuration is malformed; carries the offending key path."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
