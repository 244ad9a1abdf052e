"""Detect and categorize self-affirmed refactoring in commit messages."""

from .corpus import Commit, Dataset, Label, Task
from .errors import DataError, ModelFileError

__version__ = "0.1.0"

__all__ = ["Commit", "Dataset", "Label", "Task", "DataError", "ModelFileError"]
