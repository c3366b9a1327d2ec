"""Mesh-free plane-elastic fracture solver built on holomorphic potentials.

Small complex-valued networks enriched with crack-tip square-root terms
represent the two Kolosov-Muskhelishvili potentials per subdomain; training
fits boundary data only, stress intensity factors come from interaction
integrals on circular contours, and quasi-static growth advances the crack
under MTS / MERR / PLS kink criteria with transfer-learned warm starts.
"""

__version__ = "0.1.0"

from .fields import FieldSample, Material, PotentialModel, TipEnrichment
from .geometry import CrackGeometry, DomainSpec, Loads, decompose
from .network import HoloNetwork, InitConfig, init_network

__all__ = [
    "CrackGeometry",
    "DomainSpec",
    "FieldSample",
    "HoloNetwork",
    "InitConfig",
    "Loads",
    "Material",
    "PotentialModel",
    "TipEnrichment",
    "decompose",
    "init_network",
    "__version__",
]
