"""
advlab - Error hierarchy
Engines raise these; the runner and the CLI translate them into error rows and exit codes
"""

from typing import Optional


class AdvlabError(Exception):
    """Base class for every error raised by advlab"""


class InvalidArgumentError(AdvlabError, ValueError):
    """Scalar argument or array shape outside the documented range"""


class PreconditionError(AdvlabError):
    """An operation precondition does not hold (e.g. no critical index)"""


class UndefinedRankError(PreconditionError):
    """Effective rank requested for an empty spectral tail"""


class NumericalError(AdvlabError):
    """Singular systems, detected divergence, non-finite intermediate values"""


class ConfigError(AdvlabError):
    """Invalid experiment configuration; carries the offending field path"""

    def __init__(self, field: str, message: str, value: Optional[object] = None):
        self.field = field
        self.value = value
        detail = f"{field}: {message}"
        if value is not None:
            detail += f" (got {value!r})"
        super().__init__(detail)
