"""Exception hierarchy shared by every module of the package."""


class BallQcqpError(Exception):
    """Base class for all package errors."""


class NumericalError(BallQcqpError):
    pass


class ShapeError(BallQcqpError, ValueError):
    pass


class SizeError(BallQcqpError, ValueError):
    pass


class ConfigError(BallQcqpError, ValueError):
    pass


class SchemaError(BallQcqpError, ValueError):
    """Raised when an instance file fails validation; message names the field."""


class PreconditionFailed(BallQcqpError):
    pass


class DecompositionNotFound(BallQcqpError):
    pass
