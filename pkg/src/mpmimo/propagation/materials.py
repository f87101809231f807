"""Building materials and plane-interface Fresnel reflection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
EPS0 = 8.8541878128e-12

__all__ = ["Material", "CONCRETE", "PEC", "SPEED_OF_LIGHT", "EPS0", "fresnel_coefficients"]


@dataclass(frozen=True)
class Material:
    """Half-space material: relative permittivity and bulk conductivity (S/m).

    ``bulk_conductivity=inf`` is a perfect electric conductor.
    """

    relative_permittivity: float = 1.0
    bulk_conductivity: float = 0.0

    def __post_init__(self):
        if not self.relative_permittivity >= 1.0:
            raise ValueError("relative permittivity must be >= 1")
        if not self.bulk_conductivity >= 0.0:
            raise ValueError("bulk conductivity must be >= 0")

    @property
    def is_pec(self) -> bool:
        return math.isinf(self.bulk_conductivity)

    def complex_permittivity(self, frequency: float) -> complex:
        """eps_r - j sigma / (omega eps0), for an exp(+j omega t) time convention."""
        omega = 2.0 * math.pi * frequency
        return complex(self.relative_permittivity, -self.bulk_conductivity / (omega * EPS0))


CONCRETE = Material(10.0, 1.7e-5)
PEC = Material(1.0, math.inf)


def fresnel_coefficients(material: Material, cos_theta, frequency: float):
    """Reflection coefficients (perpendicular, parallel) from free space onto ``material``.

    ``cos_theta`` is the cosine of the incidence angle measured from the surface
    normal and may be an array.  The parallel coefficient tends to +1 for a
    perfect conductor.
    """
    c = np.asarray(cos_theta, dtype=float)
    if material.is_pec:
        ones = np.ones_like(c, dtype=complex)
        return -ones, ones
    eps = material.complex_permittivity(frequency)
    root = np.sqrt(eps - (1.0 - c * c) + 0j)
    perp = (c - root) / (c + root)
    par = (eps * c - root) / (eps * c + root)
    return perp, par
