"""Security bounds and key-rate curves for two-way Gaussian QKD protocols."""

__version__ = "0.1.0"

from . import attacks, bounds, channels, estimation, gaussian, protocols, reduction

__all__ = [
    "__version__",
    "attacks",
    "bounds",
    "channels",
    "estimation",
    "gaussian",
    "protocols",
    "reduction",
]
