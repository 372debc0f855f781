"""Numerical almost complex geometry: discs, Levi forms, exhaustions, contact forms."""

__version__ = "0.1.0"

from .polyfield import PolyField
from .structure import StructureField

__all__ = ["PolyField", "StructureField", "__version__"]
