"""Exception hierarchy. Every error carries a short machine-readable category."""


class SalRefineError(Exception):
    category = "error"


class ValidationError(SalRefineError, ValueError):
    category = "validation"


class DimensionMismatchError(ValidationError):
    category = "dimension_mismatch"

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class NonBinaryMaskError(ValidationError):
    category = "non_binary_mask"


class NonFiniteValueError(ValidationError):
    category = "non_finite"


class ConfigError(ValidationError):
    category = "config"


class TrajectoryOutOfBoundsError(ValidationError):
    category = "trajectory_out_of_bounds"


class DisplacementRangeError(ValidationError):
    category = "displacement_exceeds_range"


class IndivisibleResolutionError(ValidationError):
    category = "indivisible_resolution"


class ChannelMismatchError(ValidationError):
    category = "channel_mismatch"


class ShapeMismatchError(ValidationError):
    category = "shape_mismatch"


class EmptyInputError(ValidationError):
    category = "empty_input"


class ZeroNormAttributeError(ValidationError):
    category = "zero_norm_attribute"


class EmptyGroundTruthError(ValidationError):
    category = "empty_ground_truth"


class DatasetError(SalRefineError):
    category = "dataset"


class MissingFileError(DatasetError, FileNotFoundError):
    category = "missing_file"

    def __init__(self, path):
        super().__init__(f"missing file: {path}")
        self.path = str(path)


class VersionMismatchError(DatasetError):
    category = "version_mismatch"


class CorruptImageError(DatasetError):
    category = "corrupt_image"


class ArchitectureMismatchError(SalRefineError):
    category = "architecture_mismatch"


class NonFiniteLossError(SalRefineError, FloatingPointError):
    category = "non_finite_loss"
