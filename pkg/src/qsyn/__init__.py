"""Coherent (measurement-free) feedback synthesis for linear quantum systems.

The package is layered: ``linalg`` and ``lti`` hold generic numerics,
``oqho`` the quantum parameterization, ``youla`` the stabilizing-controller
machinery and ``synth`` the constrained H2/H-infinity search.
"""

from .errors import QsynError
from .lti import FrequencyGrid, GridFunction, PartitionedPlant, StateSpace
from .oqho import OqhoParams, check_physical_realizability, close_loop_dmr, extract_dmr, realize

__version__ = "0.1.0"

__all__ = [
    "QsynError",
    "FrequencyGrid",
    "GridFunction",
    "PartitionedPlant",
    "StateSpace",
    "OqhoParams",
    "check_physical_realizability",
    "close_loop_dmr",
    "extract_dmr",
    "realize",
]
