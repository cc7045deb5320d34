"""Q-tensor liquid-crystal flow laboratory on the periodic square [-pi, pi]^2."""

from berislab.errors import (
    BerisError,
    DegenerateFlowError,
    DegenerateInputError,
    DivergenceError,
    DomainError,
    SnapshotError,
)
from berislab.qtensor import Params

__version__ = "0.1.0"

__all__ = [
    "BerisError",
    "DegenerateFlowError",
    "DegenerateInputError",
    "DivergenceError",
    "DomainError",
    "Params",
    "SnapshotError",
    "__version__",
]
