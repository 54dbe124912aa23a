import sys
import logging


def error_message_detail(error: Exception, error_detail: sys) -> str:
    """
    Extracts detailed error information including file name, line number, and the error message.

    :param error: The exception that occurred.
    :param error_detail: The sys module to access traceback details.
    :return: A formatted error message string.
    """
    _, _, exc_tb = error_detail.exc_info()

    if exc_tb is None:
        return f"An error occurred: {error}"

    # deepest frame is where the failure happened
    while exc_tb.tb_next is not None:
        exc_tb = exc_tb.tb_next

    file_name = exc_tb.tb_frame.f_code.co_filename
    line_number = exc_tb.tb_lineno
    error_message = f"Error in file [{file_name}], line [{line_number}]: {str(error)}"

    logging.getLogger("graphprompt").error(error_message)
    return error_message


class CustomException(Exception):
    """
    Base error of the package. Every subclass carries the process exit code the CLI reports.
    Wrapping another CustomException keeps the wrapped exit code.
    """
    exit_code: int = 1

    def __init__(self, error_message, error_detail: sys = sys):
        """
        :param error_message: A message or the exception being wrapped.
        :param error_detail: The sys module to access traceback details.
        """
        super().__init__(error_message)
        if isinstance(error_message, CustomException):
            self.exit_code = error_message.exit_code
        self.error_message = error_message_detail(error_message, error_detail)

    def __str__(self) -> str:
        return self.error_message


class ConfigError(CustomException):
    """Unknown key, bad value or violated config invariant."""
    exit_code = 2


class MissingArtifactError(CustomException):
    """An input file or an upstream stage artifact does not exist."""
    exit_code = 3


class InvariantViolationError(CustomException):
    exit_code = 4


class GraphFormatError(InvariantViolationError):
    """A graph manifest is inconsistent."""


class FeatureShapeError(GraphFormatError):
    pass


class DanglingNodeError(GraphFormatError):
    pass


class SplitPartitionError(GraphFormatError):
    pass


class GraphInvariantError(GraphFormatError):
    pass


class TensorShapeError(InvariantViolationError):
    pass


class FrozenParameterError(InvariantViolationError):
    """A gradient or an update reached a parameter that must stay frozen."""


class PromptError(InvariantViolationError):
    pass


class ProbeError(InvariantViolationError):
    pass


class NumericError(CustomException):
    """NaN/Inf produced, undefined cosine, or a numeric routine that did not converge."""
    exit_code = 5


class ConvergenceError(NumericError):
    def __init__(self, error_message, residual: float, error_detail: sys = sys):
        super().__init__(error_message, error_detail)
        self.residual = residual
