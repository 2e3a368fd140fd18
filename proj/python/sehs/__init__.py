"""Vehicle-bridge simulation, piezoelectric harvesting, WSST imaging,
CVAE damage detection and surrogate-based design search."""

from ._core import (  # noqa: F401
    ConfigError,
    DomainError,
    Error,
    NumericalError,
    cvae,
    opt,
    peh,
    pipeline,
    tf,
    vbi,
)

__all__ = ["Error", "DomainError", "NumericalError", "ConfigError", "vbi", "peh", "tf", "cvae", "opt", "pipeline"]
