"""Two-population cell front models: an individual-based mass-spring chain,
its free-boundary continuum limit, and the travelling waves of the latter."""

from .config import SimConfig, load_config, paper_config, parse_config
from .errors import CellfrontError
from .mechanics import ForceLaw, GrowthLaw, JkrForce, JkrParams, jkr_coefficients

__all__ = [
    "CellfrontError",
    "ForceLaw",
    "GrowthLaw",
    "JkrForce",
    "JkrParams",
    "SimConfig",
    "jkr_coefficients",
    "load_config",
    "paper_config",
    "parse_config",
]

__version__ = "0.1.0"
