"""Front tracking for strictly hyperbolic systems with nondegenerate flux."""

from .system import HyperbolicSystem, builtin, scalar_system, with_bump
from .wave_curves import WavePacket, wave_curve
from .errors import HypertrackError

__all__ = ["HyperbolicSystem", "builtin", "scalar_system", "with_bump", "WavePacket", "wave_curve",
           "HypertrackError"]
__version__ = "0.1.0"
