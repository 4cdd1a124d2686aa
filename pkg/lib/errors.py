class FlowCurvError(Exception):
    """Base class for every error raised by the flowcurv library."""


class FieldSyntaxError(FlowCurvError, ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownIdentifierError(FieldSyntaxError):
    def __init__(self, name: str, line: int, column: int):
        super().__init__(f"unknown identifier '{name}' (not x/y/z and not a declared parameter)", line, column)
        self.name = name


class UnknownSystemError(FlowCurvError, ValueError):
    pass


class UnknownParameterError(FlowCurvError, ValueError):
    pass


class NotAFixedPointError(FlowCurvError, ValueError):
    pass


class InputFileError(FlowCurvError, ValueError):
    pass


class UsageError(FlowCurvError):
    pass


class NumericalFailure(FlowCurvError, RuntimeError):
    """Divergence, step-size underflow or an empty fixed-point search."""
