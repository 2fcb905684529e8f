"""Exception hierarchy shared by all modules."""


class LieCLFError(Exception):
    """Base class for every error raised by this package."""


class EvaluationError(LieCLFError):
    pass


class KinkEvaluation(EvaluationError):
    """A derivative was requested exactly on an abs/min/max switching surface."""


class NonFinite(EvaluationError):
    """Evaluation overflowed, divided by zero or left the real domain."""


class EmptyPieceSet(EvaluationError):
    """No piece of a piecewise field owns the query point."""


class DegreeError(LieCLFError, ValueError):
    pass


class NonpositiveMargin(LieCLFError):
    """Sampled margin is not positive: the candidate is not a CLF on the region."""

    def __init__(self, message, level=None, margin=None):
        super().__init__(message)
        self.level = level
        self.margin = margin


class SamplingError(LieCLFError):
    pass


class StepFailure(LieCLFError):
    """The descent test could not be met; the model assumptions are violated."""


class NoDescentDirection(StepFailure):
    """No direction of degree <= k pairs below -gamma(U(x))."""


class MaxStepsExceeded(LieCLFError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NonMonotoneInput(LieCLFError, ValueError):
    pass


class ParseError(LieCLFError, ValueError):
    def __init__(self, message, column=None):
        super().__init__(message if column is None else f"{message} (column {column})")
        self.column = column


class ConfigError(LieCLFError):
    """Invalid configuration; ``diagnostics`` holds ``(message, line, column)`` tuples."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = []
        for msg, line, col in self.diagnostics:
            where = f"line {line}" if line is not None else "config"
            if col is not None:
                where += f", column {col}"
            lines.append(f"{where}: {msg}")
        super().__init__("; ".join(lines))
