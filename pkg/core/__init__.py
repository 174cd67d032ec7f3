"""
Physics core: parameters, noise, filter functions, Purcell back-action,
cavity output field, single nuclear spin model, oracle and signal
"""

__version__ = "0.4.0"

from .exceptions import (
    AcceptanceError,
    CavityEchoError,
    ConfigError,
    ContractError,
    DomainError,
    NumericalError,
    ParameterError,
)
from .model import EchoEnvelope, PulseSequence, SequenceKind, SpinEnvParams, SystemParams, validate
from .noise import SpectralDensity, gaussian_average

__all__ = [
    "AcceptanceError",
    "CavityEchoError",
    "ConfigError",
    "ContractError",
    "DomainError",
    "NumericalError",
    "ParameterError",
    "EchoEnvelope",
    "PulseSequence",
    "SequenceKind",
    "SpinEnvParams",
    "SystemParams",
    "validate",
    "SpectralDensity",
    "gaussian_average",
]
