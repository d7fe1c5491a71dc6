"""Lower bounds, certificates and distortion distances for discrete Gromov-Wasserstein problems."""

from ._gwsos import (
    CapacityError,
    InvalidInput,
    Space,
    ToleranceError,
    distance,
    lower_bound,
    oracle,
    triangle,
)

__all__ = [
    "CapacityError",
    "InvalidInput",
    "Space",
    "ToleranceError",
    "distance",
    "lower_bound",
    "oracle",
    "triangle",
]
