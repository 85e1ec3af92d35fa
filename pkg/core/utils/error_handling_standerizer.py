from typing import Dict, Any, Optional


class PromptCalError(Exception):
    """Base exception for toolkit errors"""
    exit_code = 2

    def __init__(self, message: str, exit_code: Optional[int] = None, **context: Any):
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.context = context
        super().__init__(self.message)


# ============================================================================
# VALIDATION ERRORS (exit code 1)
# ============================================================================

class ValidationError(PromptCalError):
    """Input artifact or configuration is invalid"""
    exit_code = 1


class InputError(ValidationError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"cannot read input '{path}': {reason}", path=path)


class MalformedRecordError(ValidationError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}", line_number=line_number)


class DuplicateSampleError(ValidationError):
    def __init__(self, sample_id: str, line_number: Optional[int] = None):
        where = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{where}duplicate sample_id '{sample_id}'",
                         sample_id=sample_id, line_number=line_number)


class InconsistentPromptSetError(ValidationError):
    pass


class ProbabilityRangeError(ValidationError):
    def __init__(self, sample_id: str, prompt_id: int, value: float):
        super().__init__(
            f"sample '{sample_id}' prompt {prompt_id}: p_unsafe={value} outside [0, 1]",
            sample_id=sample_id, prompt_id=prompt_id,
        )


class MissingLabelError(ValidationError):
    pass


class InvalidLogitError(ValidationError):
    def __init__(self, message: str, sample_id: Optional[str] = None, prompt_id: Optional[int] = None):
        if sample_id is not None:
            message = f"sample '{sample_id}' prompt {prompt_id}: {message}"
        super().__init__(message, sample_id=sample_id, prompt_id=prompt_id)


class UnknownFamilyError(ValidationError):
    pass


class EmptySplitError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class RuleError(ValidationError):
    pass


# ============================================================================
# COMPUTATION ERRORS (exit code 2)
# ============================================================================

class ComputationError(PromptCalError):
    """A well-formed input on which an operation is not defined"""
    exit_code = 2


class InsufficientDataError(ComputationError):
    pass


class UndefinedMetricError(ComputationError):
    pass


class ConvergenceError(ComputationError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)", iterations=iterations)
        self.iterations = iterations


class OracleLimitError(ComputationError):
    pass


def format_error_response(error: Exception, stage: Optional[str] = None) -> Dict[str, Any]:
    """
    Standardized error formatter.
    Used as the gap marker for a report stage that could not be computed.
    """
    if isinstance(error, PromptCalError):
        response = {
            "error": error.message,
            "error_type": type(error).__name__,
            "exit_code": error.exit_code,
        }
        response.update({k: v for k, v in error.context.items() if v is not None})
    else:
        response = {"error": str(error), "error_type": type(error).__name__, "exit_code": 2}
    if stage is not None:
        response["stage"] = stage
    return response
