from typing import Optional


class PipelineError(Exception):
    """Base class for every error raised by the generation pipeline."""

    exit_code = 1
    kind = "pipeline"


class InputDomainError(PipelineError, ValueError):
    """An argument lies outside the domain an operation accepts."""

    exit_code = 3
    kind = "input_domain"


class ParseError(InputDomainError):
    """A record or string could not be parsed.

    Args:
        message: Human readable reason.
        line: 1-based line number in the source file, when known.
        offset: 0-based byte offset inside the parsed string, when known.
    """

    kind = "parse"

    def __init__(
        self, message: str, line: Optional[int] = None, offset: Optional[int] = None
    ):
        self.line = line
        self.offset = offset
        location = []
        if line is not None:
            location.append(f"line {line}")
        if offset is not None:
            location.append(f"offset {offset}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class ContractError(PipelineError, RuntimeError):
    """An operation was called in a state its contract forbids."""

    exit_code = 3
    kind = "contract"


class CheckpointError(PipelineError, FileNotFoundError):
    """A checkpoint is missing or does not match the model definition."""

    exit_code = 3
    kind = "checkpoint"


class NumericDivergenceError(PipelineError, ArithmeticError):
    """Training produced a non-finite loss."""

    exit_code = 4
    kind = "numeric_divergence"


class UsageError(PipelineError):
    """Bad command line or configuration."""

    exit_code = 2
    kind = "usage"
