"""Antenna array placements and element field patterns.

An element pattern maps a unit direction (3,) to the complex far-field
polarization vector (3,) radiated in that direction.  Boresight magnitude is 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .materials import SPEED_OF_LIGHT

__all__ = [
    "ShortDipole",
    "Isotropic",
    "TabulatedPattern",
    "ArrayPlacement",
    "slot_array_16",
    "dual_pol_handset",
]

Pattern = Callable[[np.ndarray], np.ndarray]


class ShortDipole:
    """Hertzian dipole along ``axis``: field (I - d d^T) axis, so |E| = sin(angle to axis)."""

    def __init__(self, axis):
        a = np.asarray(axis, dtype=float)
        self.axis = a / np.linalg.norm(a)

    def __call__(self, direction):
        d = np.asarray(direction, dtype=float)
        return (self.axis - (d @ self.axis) * d).astype(complex)

    def __repr__(self):
        return f"ShortDipole({self.axis.tolist()})"


class Isotropic:
    """Direction-independent field vector; the propagation dyad removes its longitudinal part."""

    def __init__(self, polarization=(0.0, 0.0, 1.0)):
        p = np.asarray(polarization, dtype=complex)
        self.polarization = p / np.linalg.norm(p)

    def __call__(self, direction):
        return self.polarization.copy()

    def __repr__(self):
        return f"Isotropic({self.polarization.tolist()})"


class TabulatedPattern:
    """Complex field vectors sampled on a (theta, phi) grid, bilinearly interpolated.

    ``values`` has shape (len(theta), len(phi), 3); theta is the polar angle
    from +z and phi the azimuth from +x, both in radians.
    """

    def __init__(self, theta, phi, values):
        self.theta = np.asarray(theta, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        v = np.asarray(values, dtype=complex)
        if v.shape != (self.theta.size, self.phi.size, 3):
            raise ValueError(f"values must be ({self.theta.size}, {self.phi.size}, 3)")
        self._interp = RegularGridInterpolator((self.theta, self.phi), v, method="linear",
                                               bounds_error=False, fill_value=None)

    def __call__(self, direction):
        d = np.asarray(direction, dtype=float)
        theta = np.arccos(np.clip(d[2], -1.0, 1.0))
        phi = np.arctan2(d[1], d[0])
        lo, hi = self.phi[0], self.phi[-1]
        if phi < lo:
            phi += 2 * np.pi
        phi = min(max(phi, lo), hi)
        return self._interp([[theta, phi]])[0]


@dataclass(frozen=True, eq=False)
class ArrayPlacement:
    """Antenna array: a reference point plus per-element offsets, patterns and amplitudes."""

    origin: np.ndarray
    offsets: np.ndarray
    patterns: tuple
    amplitudes: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        origin = np.array(self.origin, dtype=float).reshape(3)
        offsets = np.array(self.offsets, dtype=float).reshape(-1, 3)
        if not (np.all(np.isfinite(origin)) and np.all(np.isfinite(offsets))):
            raise ValueError("array positions must be finite")
        patterns = tuple(self.patterns)
        if len(patterns) != offsets.shape[0]:
            raise ValueError("one pattern per element is required")
        amps = (np.ones(len(patterns)) if self.amplitudes is None
                else np.array(self.amplitudes, dtype=complex).reshape(-1))
        if amps.size != len(patterns):
            raise ValueError("one amplitude per element is required")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self) -> int:
        return self.offsets.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.origin + self.offsets

    def field(self, k: int, direction) -> np.ndarray:
        return self.amplitudes[k] * np.asarray(self.patterns[k](direction), dtype=complex)

    def moved_to(self, origin) -> "ArrayPlacement":
        return ArrayPlacement(origin, self.offsets, self.patterns, self.amplitudes, self.name)

    def scaled(self, amplitudes) -> "ArrayPlacement":
        amps = self.amplitudes * np.asarray(amplitudes).reshape(-1)
        return ArrayPlacement(self.origin, self.offsets, self.patterns, amps, self.name)

    def element(self, k: int) -> "ArrayPlacement":
        """Single-element array located at element k."""
        return ArrayPlacement(self.positions[k], np.zeros((1, 3)), (self.patterns[k],),
                              self.amplitudes[k:k + 1], f"{self.name}[{k}]")


def slot_array_16(origin=(0.0, 0.0, 25.0), frequency: float = 3.16e9) -> ArrayPlacement:
    """16-port base-station stand-in: 4 x 2 half-wavelength grid in the y-z plane,
    each site carrying a vertical and a horizontal (y) dipole."""
    half = SPEED_OF_LIGHT / frequency / 2
    offsets, patterns = [], []
    for iz in range(2):
        for iy in range(4):
            site = [0.0, (iy - 1.5) * half, (iz - 0.5) * half]
            offsets += [site, site]
            patterns += [ShortDipole([0, 0, 1]), ShortDipole([0, 1, 0])]
    return ArrayPlacement(origin, offsets, patterns, name="bs")


def dual_pol_handset(origin=(0.0, 0.0, 1.5)) -> ArrayPlacement:
    """Two-port handset stand-in: orthogonal dipoles in opposite corners of a 7 x 14 cm body.

    Port 1 (top-left) is horizontal along x, port 2 (bottom-right) vertical.
    """
    offsets = [[-0.035, 0.0, 0.07], [0.035, 0.0, -0.07]]
    patterns = [ShortDipole([1, 0, 0]), ShortDipole([0, 0, 1])]
    return ArrayPlacement(origin, offsets, patterns, name="ue")
