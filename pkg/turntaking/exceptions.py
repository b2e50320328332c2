"""
Exception Hierarchy

Every error the pipeline raises derives from TurnTakingError and falls into one
of two branches, which the CLI maps onto exit codes:

- PipelineInputError: the inputs (files, config, requested windows, datasets)
  are unusable. Exit code 2.
- PipelineInvariantError: an internal invariant did not hold. Exit code 3.

Modules define their own named subclasses next to the code that raises them.
"""


class TurnTakingError(Exception):
    """Base class for all pipeline errors."""
    pass


class PipelineInputError(TurnTakingError):
    """Raised when inputs cannot be processed as given."""
    pass


class PipelineInvariantError(TurnTakingError):
    """Raised when an internal invariant is violated."""
    pass


class InvalidConfig(PipelineInputError):
    """Raised when a configuration document fails validation."""
    pass


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def exit_code_for(exc: BaseException) -> int:
    """Map an exception onto the CLI exit code contract."""
    if isinstance(exc, (PipelineInputError, FileNotFoundError)):
        return EXIT_INPUT
    return EXIT_INTERNAL
