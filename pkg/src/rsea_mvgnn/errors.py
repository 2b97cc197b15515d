"""Exception hierarchy shared across the package."""


class RseaError(Exception):
    """Base class for all package errors."""


class ShapeError(RseaError):
    """Operand shapes do not conform for the requested operation."""


class NonFiniteError(RseaError):
    """An operation received or produced NaN/Inf values."""


class DomainError(RseaError):
    """Argument outside the mathematical domain of a function."""


class BackwardError(RseaError):
    """Invalid use of the differentiation tape."""


class ConfigError(RseaError):
    """Invalid configuration value."""


class DatasetError(RseaError):
    """Base class for dataset loading/validation failures."""

    def __init__(self, message: str, instance_id: str | None = None):
        super().__init__(message)
        self.instance_id = instance_id


class DatasetParseError(DatasetError):
    """File could not be parsed as the dataset JSON format."""


class InconsistentViewsError(DatasetError):
    """Views of one instance disagree on the node count."""


class NegativeEdgeWeightError(DatasetError):
    """An adjacency matrix contains a negative entry."""


class NonzeroDiagonalError(DatasetError):
    """An adjacency matrix has a nonzero diagonal entry."""


class InvalidLabelError(DatasetError):
    """An instance label is outside [0, num_classes)."""


class SplitError(RseaError):
    """Dataset cannot be split as requested."""


class EnhancementError(RseaError):
    """Structural enhancement aborted (bad probe output or bad input)."""


class TrainingDivergedError(RseaError):
    """Loss became non-finite during training."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class EvaluationError(RseaError):
    """Downstream evaluation received invalid inputs."""
