"""Exception hierarchy shared by all modules."""


class StochRobustError(Exception):
    """Base class for every error raised by the package."""


class ModelSyntaxError(StochRobustError):
    """A model document could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class ModelError(StochRobustError):
    """A model is structurally invalid (undeclared names, bad counts, ...)."""


class ModelEvaluationError(StochRobustError):
    """A rate, hazard or flow expression produced a negative or non-finite value."""


class FormulaSyntaxError(StochRobustError):
    def __init__(self, message, column=None):
        self.column = column
        if column is not None:
            message = f"column {column}: {message}"
        super().__init__(message)


class MonitorError(StochRobustError):
    """Robustness could not be computed on the given trajectory."""


class NumericalError(StochRobustError):
    """A linear-algebra operation was numerically unsafe."""


class RunError(StochRobustError):
    """One run of an ensemble failed; ``index`` identifies it and the cause is chained."""

    def __init__(self, index, cause):
        self.index = index
        super().__init__(f"run {index}: {type(cause).__name__}: {cause}")

    def __reduce__(self):
        return (_rebuild_run_error, (self.index, str(self), self.__cause__))


def _rebuild_run_error(index, message, cause):
    err = RunError.__new__(RunError)
    StochRobustError.__init__(err, message)
    err.index = index
    err.__cause__ = cause
    return err
