"""Exception hierarchy shared by all modules."""


class EnsvimError(Exception):
    pass


class ConfigurationError(EnsvimError, ValueError):
    """Unknown names, invalid option values, malformed config files."""


class DomainError(EnsvimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(EnsvimError, ValueError):
    pass


class CalibrationError(EnsvimError, ArithmeticError):
    pass


class UndefinedMetricError(EnsvimError, ArithmeticError):
    """A metric is undefined for the given input (constant vector, single class)."""


class UnsupportedDependenceError(EnsvimError, ValueError):
    pass


class RefusalError(EnsvimError, ValueError):
    """The requested computation is too large to run."""


class DegenerateSamplerError(EnsvimError, ValueError):
    pass


class TrainingDivergenceError(EnsvimError, RuntimeError):
    def __init__(self, epoch, model_index=None):
        self.epoch = epoch
        self.model_index = model_index
        where = "" if model_index is None else f" (model {model_index})"
        super().__init__(f"non-finite loss at epoch {epoch}{where}")


class RefitError(EnsvimError, RuntimeError):
    def __init__(self, feature, member, cause):
        self.feature = feature
        self.member = member
        super().__init__(f"refit failed for feature {feature}, member {member}: {cause}")
