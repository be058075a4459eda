"""Refractive-index models for the fiber layers.

A material is either a fixed (non-dispersive) index or a Sellmeier
coefficient set ``n^2 = 1 + sum B_i l^2 / (l^2 - C_i)`` with ``l`` in um
and ``C_i`` in um^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

WAVELENGTH_RANGE_NM = (400.0, 1000.0)


@dataclass(frozen=True)
class OpticalMaterial:
    name: str
    index: Optional[float] = None
    sellmeier_b: Tuple[float, ...] = ()
    sellmeier_c: Tuple[float, ...] = ()  # um^2

    def __post_init__(self):
        if self.index is None and not self.sellmeier_b:
            raise ValueError(f"material {self.name!r} needs an index or Sellmeier terms")
        if len(self.sellmeier_b) != len(self.sellmeier_c):
            raise ValueError("Sellmeier B and C lists differ in length")
        if self.index is not None and self.index < 1.0:
            raise ValueError(f"material {self.name!r}: index {self.index} < 1")

    @property
    def is_dispersive(self) -> bool:
        return self.index is None


def refractive_index(material: OpticalMaterial, wavelength: float) -> float:
    """Index of ``material`` at ``wavelength`` (nm).

    Raises ValueError outside the supported 400-1000 nm window.
    """
    lo, hi = WAVELENGTH_RANGE_NM
    if not (lo <= wavelength <= hi):
        raise ValueError(f"wavelength {wavelength} nm outside supported range [{lo}, {hi}] nm")
    if material.index is not None:
        return float(material.index)
    lam2 = (wavelength * 1e-3) ** 2
    n2 = 1.0 + sum(b * lam2 / (lam2 - c) for b, c in zip(material.sellmeier_b, material.sellmeier_c))
    return float(np.sqrt(n2))


VACUUM = OpticalMaterial("vacuum", index=1.0)
WATER = OpticalMaterial("water", index=1.333)
SILICA = OpticalMaterial("silica", index=1.457)

# Malitson (1965) fused silica.
SILICA_SELLMEIER = OpticalMaterial(
    "silica-sellmeier",
    sellmeier_b=(0.6961663, 0.4079426, 0.8974794),
    sellmeier_c=(0.0684043**2, 0.1162414**2, 9.896161**2),
)

# Daimon & Masumura (2007), liquid water at 20 C.
WATER_SELLMEIER = OpticalMaterial(
    "water-sellmeier",
    sellmeier_b=(5.684027565e-1, 1.726177391e-1, 2.086189578e-2, 1.130748688e-1),
    sellmeier_c=(5.101829712e-3, 1.821153936e-2, 2.620722293e-2, 1.069792721e1),
)

MATERIALS = {m.name: m for m in (VACUUM, WATER, SILICA, SILICA_SELLMEIER, WATER_SELLMEIER)}
MATERIALS["air"] = VACUUM


def material_by_name(name: str) -> OpticalMaterial:
    """Look up a built-in material; a bare number gives a fixed index."""
    key = name.strip().lower()
    if key in MATERIALS:
        return MATERIALS[key]
    try:
        return OpticalMaterial(f"n={float(key):g}", index=float(key))
    except ValueError:
        raise ValueError(f"unknown material {name!r}; known: {sorted(MATERIALS)}") from None
