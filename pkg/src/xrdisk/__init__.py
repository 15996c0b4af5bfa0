"""X-ray transforms and their spectral theory on constant curvature disks."""

__version__ = "0.1.0"

from .errors import XRDiskError
from .geometry import DiskModel, FanBeamCoord, PhasePoint
from .basis import BoundaryExpansion, ZernikeExpansion
from .transform import Sinogram, SinogramGrid, backproject, xray
from .spectral import SobolevSpec, SpectralFilter, singular_value, svd_reconstruct
from .attenuated import AttenuationField

__all__ = [
    "AttenuationField",
    "BoundaryExpansion",
    "DiskModel",
    "FanBeamCoord",
    "PhasePoint",
    "Sinogram",
    "SinogramGrid",
    "SobolevSpec",
    "SpectralFilter",
    "XRDiskError",
    "ZernikeExpansion",
    "backproject",
    "singular_value",
    "svd_reconstruct",
    "xray",
]
