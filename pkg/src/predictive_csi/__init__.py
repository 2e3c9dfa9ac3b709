"""Differential CSI feedback with shared Kalman predictors at both link ends."""

from . import channel, kalman, metrics, protocol, quantizer
from .errors import (
    ConfigError,
    ContractViolation,
    DegenerateChannelError,
    NumericalError,
    ProtocolDesyncError,
    ProtocolError,
)

__version__ = "0.1.0"

__all__ = [
    "channel",
    "kalman",
    "metrics",
    "protocol",
    "quantizer",
    "ConfigError",
    "ContractViolation",
    "DegenerateChannelError",
    "NumericalError",
    "ProtocolDesyncError",
    "ProtocolError",
]
