"""Exception hierarchy shared by every lie-entropy module.

Domain errors are declared next to the code that raises them; they all derive from
one of the classes below so the runner and the CLI can map them to a stage and an
exit code.
"""

from typing import Any, Dict, Optional


class LieEntropyError(Exception):
    """Base class for all errors raised by the package."""

    def __init__(self, message: str, stage: Optional[str] = None):
        """Initialize the error.

        Args:
            message: Human readable description
            stage: Optional pipeline stage in which the error surfaced
        """
        self.message = message
        self.stage = stage
        super().__init__(message)

    def with_stage(self, stage: str) -> "LieEntropyError":
        """Attach a pipeline stage name unless one is already set."""
        if self.stage is None:
            self.stage = stage
        return self

    def to_dict(self) -> Dict[str, Any]:
        """Convert the error to a dictionary for report serialization."""
        return {
            "error_type": type(self).__name__,
            "message": self.message,
            "stage": self.stage,
        }

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class ValidationError(LieEntropyError):
    """Raised for invalid inputs, configurations or scenario files."""

    pass


class BudgetError(LieEntropyError):
    """Raised when a computation would exceed a configured budget."""

    pass
