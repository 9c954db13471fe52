"""
Exception hierarchy for mrwlab

ValidationError subclasses describe bad input or configuration (CLI exit 2),
ComputationError subclasses describe numerical failures (CLI exit 3).
"""


class MrwLabError(Exception):
    """Root of all mrwlab errors"""


class ValidationError(MrwLabError, ValueError):
    """Input data or configuration violates a precondition"""


class ComputationError(MrwLabError, RuntimeError):
    """A numerical procedure failed or did not converge"""


# Input / configuration errors

class ConfigValidationError(ValidationError):
    pass


class QuoteParseError(ValidationError):
    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class QuoteValidationError(ValidationError):
    def __init__(self, tick, message, line_number=None):
        self.tick = tick
        self.line_number = line_number
        where = f"line {line_number}: " if line_number is not None else ''
        super().__init__(f"{where}{message} ({tick})")


class EmptyDayError(ValidationError):
    pass


class ScaleRangeError(ValidationError):
    pass


class ProfileError(ValidationError):
    pass


class EmptyWindowError(ValidationError):
    pass


class SegmentMismatchError(ValidationError):
    pass


class EmptyJoinError(ValidationError):
    pass


# Numerical errors

class ZeroVarianceError(ComputationError):
    pass


class DegenerateProfileError(ComputationError):
    pass


class CovarianceFactorizationError(ComputationError):
    pass


class NewtonConvergenceError(ComputationError):
    def __init__(self, gradient_norm, iterations):
        self.gradient_norm = gradient_norm
        self.iterations = iterations
        super().__init__(
            f"posterior mode search did not converge after {iterations} iterations "
            f"(gradient max-norm {gradient_norm:.3e})"
        )


class DegenerateWindowError(ComputationError):
    pass


class FitConvergenceError(ComputationError):
    def __init__(self, message, best_point=None, best_value=None):
        self.best_point = best_point
        self.best_value = best_value
        super().__init__(message)


class SegmentFitError(ComputationError):
    def __init__(self, segment_index, cause):
        self.segment_index = segment_index
        self.cause = cause
        super().__init__(f"segment {segment_index}: {cause}")


class EnsembleError(ComputationError):
    pass
