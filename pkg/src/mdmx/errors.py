"""Exception hierarchy shared across the toolkit."""


class MdmxError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(MdmxError):
    """An argument violates a documented precondition."""


class DomainError(MdmxError):
    """A value lies outside its mathematical domain (e.g. q outside (0,1))."""


class RankDeficient(MdmxError):
    """A matrix expected to have full column rank does not."""


class InsufficientData(MdmxError):
    """Too few observations to perform the requested operation."""


class BracketError(MdmxError):
    """Root finding requested on an interval without a sign change."""


class TrainingDiverged(MdmxError):
    """Network training produced a non-finite loss."""


class OptimizationFailed(MdmxError):
    """A numerical optimizer could not make progress."""


class ParseError(MdmxError):
    """A data file failed to parse; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DuplicateKey(MdmxError):
    """Two input rows share the same (pop, sex, year, age) key."""


class PoolingError(MdmxError):
    """Adaptive pooling impossible, e.g. exposures missing for a population."""


class EmptyTensor(MdmxError):
    """No population retained any observed years."""


class DecompositionError(MdmxError):
    """A mode unfolding is degenerate (all-zero) or SVD failed."""


class ExtrapolationError(MdmxError):
    """Trajectory queried outside its supported life-expectancy range."""

    def __init__(self, message, supported_range=None):
        super().__init__(message)
        self.supported_range = supported_range


class NoSupport(MdmxError):
    """Temporal interpolation lacks non-exceptional anchor years."""


class SingleProfileFallback(MdmxError):
    """Sub-clustering degenerate; caller should keep the single type profile."""
