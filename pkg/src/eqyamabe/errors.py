"""Exception hierarchy shared by all modules."""


class EqYamabeError(Exception):
    """Base class for every error raised by the package."""


class DomainError(EqYamabeError, ValueError):
    """Input outside the mathematical domain of an operation."""


class RangeError(EqYamabeError, ValueError):
    """Evaluation point outside the range covered by a metric or table."""


class DegenerateInputError(EqYamabeError, ValueError):
    pass


class SingularityError(EqYamabeError, ValueError):
    """Evaluation at a pole of a Green's function."""


class SolverError(EqYamabeError, RuntimeError):
    """An iterative or shooting solver failed to converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class HorizonError(EqYamabeError, RuntimeError):
    pass


class DecayFitError(EqYamabeError, RuntimeError):
    pass


class BoundaryError(EqYamabeError, ValueError):
    pass


class SymmetryError(EqYamabeError, ValueError):
    pass


class PreconditionError(EqYamabeError, ValueError):
    pass


class IntegrabilityError(EqYamabeError, ValueError):
    pass


class ConsistencyError(EqYamabeError, ValueError):
    pass


class ModelConstructionError(EqYamabeError, RuntimeError):
    pass


class DataError(EqYamabeError, ValueError):
    pass


class SizeError(EqYamabeError, ValueError):
    pass


class ConfigError(EqYamabeError, ValueError):
    """Scenario configuration problem; ``field`` and ``line`` locate it."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.field = field
        self.line = line
