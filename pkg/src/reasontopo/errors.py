"""Exception hierarchy shared across the pipeline.

Each class carries the CLI exit code its family maps to, so the command
layer never has to guess.
"""


class ReasonTopoError(Exception):
    exit_code = 2


class ConfigError(ReasonTopoError, ValueError):
    exit_code = 1


class ChainFormatError(ReasonTopoError, ValueError):
    """Malformed chain document; ``position`` is (line, column) when known."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (line {position[0]}, column {position[1]})"
        super().__init__(message)
        self.position = position


class ChainValidationError(ReasonTopoError, ValueError):
    def __init__(self, message, rule=None, step_id=None):
        super().__init__(message)
        self.rule = rule
        self.step_id = step_id


class StructureError(ChainValidationError):
    pass


class EmbeddingError(ReasonTopoError, ValueError):
    pass


class EmbeddingFormatError(EmbeddingError):
    pass


class EmbeddingServiceError(EmbeddingError):
    def __init__(self, message, status=None, body=None):
        super().__init__(message)
        self.status = status
        self.body = body


class ParameterError(ReasonTopoError, ValueError):
    exit_code = 1


class NumericalError(ReasonTopoError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EmptyCloudError(ReasonTopoError, ValueError):
    pass


class FiltrationOrderError(ReasonTopoError, AssertionError):
    exit_code = 3


class RangeError(ReasonTopoError, ValueError):
    pass


class UndefinedEntropyError(ReasonTopoError, ValueError):
    pass


class OracleRefusal(ReasonTopoError, ValueError):
    pass


class RenderError(ReasonTopoError, ValueError):
    pass
