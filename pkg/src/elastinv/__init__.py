"""Two-step reconstruction of a rigid elastic obstacle from far-field data.

Localisation by the extended sampling method, then shape recovery by an
ensemble Kalman inversion of starlike Fourier coefficients.
"""
from .dataset import FarFieldData, simulate, simulate_data
from .forward import ElasticScatterer, IncidentWave, Medium, solve_scattering
from .geometry import BoundaryCurve, ShapeState, hausdorff, preset_curve, starlike_boundary

__version__ = "0.1.0"

__all__ = [
    "BoundaryCurve",
    "ElasticScatterer",
    "FarFieldData",
    "IncidentWave",
    "Medium",
    "ShapeState",
    "hausdorff",
    "preset_curve",
    "simulate",
    "simulate_data",
    "solve_scattering",
    "starlike_boundary",
]
