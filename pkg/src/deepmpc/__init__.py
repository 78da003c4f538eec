"""Secure three-party training of neural networks over fixed-point rings."""
from .backend import EmulatorBackend, MPCBackend, make_backend
from .quantring import ConfigError, FixedConfig, RangeError, decode, encode

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EmulatorBackend",
    "FixedConfig",
    "MPCBackend",
    "RangeError",
    "decode",
    "encode",
    "make_backend",
]
