"""Simulator and test bench for diffusion-based molecular communication with
per-symbol synchronization carried by a faster-diffusing molecule type.

Units are fixed package-wide: lengths in micrometers, times in seconds,
diffusion coefficients in um^2/s.
"""

__version__ = "0.1.0"

from .channel import ChannelGeometry, MoleculeKind, MoleculeSpec
from .errors import ConfigError, SeriesTooShortError, UndefinedEyeError

__all__ = [
    "ChannelGeometry",
    "MoleculeKind",
    "MoleculeSpec",
    "ConfigError",
    "SeriesTooShortError",
    "UndefinedEyeError",
    "__version__",
]
