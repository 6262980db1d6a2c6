"""Error-exponent bounds and entropy-duality checks for classical-quantum problems.

Rates and entropies are in bits throughout.
"""

from cqexp.config import DEFAULTS, Settings
from cqexp.errors import ConvergenceError, CQExpError, ResourceError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "DEFAULTS",
    "Settings",
    "CQExpError",
    "ConvergenceError",
    "ResourceError",
    "ValidationError",
]
