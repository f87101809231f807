"""Image-method specular ray tracing (line of sight plus up to two bounces).

Each path carries a 3x3 field-transfer dyad: free-space spreading 1/(4 pi d)
times the product of Fresnel reflection operators, applied to the transverse
part of the departing field.  The carrier phase exp(-j 2 pi f d / c) is kept
separate so a path set can be re-evaluated at any frequency.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .arrays import ArrayPlacement
from .geometry import GeometryError, Scene
from .materials import SPEED_OF_LIGHT, fresnel_coefficients

__all__ = ["Path", "PathSet", "trace_paths", "assemble_srt", "chain_geometry", "MAX_BOUNCES"]

MAX_BOUNCES = 2
_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class Path:
    facets: tuple
    points: np.ndarray
    length: float
    coefficient: np.ndarray  # 3x3 dyad without the delay phase
    departure: np.ndarray
    arrival: np.ndarray

    @property
    def bounces(self) -> int:
        return len(self.facets)

    @property
    def delay(self) -> float:
        return self.length / SPEED_OF_LIGHT

    def transfer(self, frequency: float) -> np.ndarray:
        return self.coefficient * np.exp(-2j * math.pi * frequency * self.delay)

    def gain(self, tx_pol, rx_pol, frequency: float) -> complex:
        """Complex gain between a transmit and a receive polarization vector."""
        return complex(np.asarray(rx_pol) @ self.transfer(frequency) @ np.asarray(tx_pol))

    def polarization_gains(self, tx_basis, rx_basis, frequency: float) -> np.ndarray:
        """2x2 gains for every (rx-pol, tx-pol) pair of the two bases (rows are vectors)."""
        return np.asarray(rx_basis) @ self.transfer(frequency) @ np.asarray(tx_basis).T


@dataclass(frozen=True, eq=False)
class PathSet:
    paths: tuple
    tx_point: np.ndarray
    rx_point: np.ndarray
    frequency: float
    max_bounces: int

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def by_bounces(self, n: int) -> list:
        return [p for p in self.paths if p.bounces == n]

    def to_dict(self) -> dict:
        out = []
        for p in self.paths:
            out.append({
                "facets": list(p.facets),
                "bounces": p.bounces,
                "length_m": p.length,
                "delay_s": p.delay,
                "departure": p.departure.tolist(),
                "arrival": p.arrival.tolist(),
                "points_m": p.points.tolist(),
                "coefficient_re": p.coefficient.real.tolist(),
                "coefficient_im": p.coefficient.imag.tolist(),
            })
        return {
            "frequency_hz": self.frequency,
            "max_bounces": self.max_bounces,
            "tx_m": self.tx_point.tolist(),
            "rx_m": self.rx_point.tolist(),
            "paths": out,
        }


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _perpendicular(n):
    ref = np.where(np.abs(n[..., :1]) < 0.9, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    return _unit(np.cross(n, ref))


def chain_geometry(scene: Scene, facets: Sequence[int], src, dst, frequency: float):
    """Image-method geometry for a fixed reflection sequence, vectorized over M pairs.

    Returns a dict with ``points`` (M, K+2, 3), ``t`` (M, K) segment parameters of
    the reflection points, ``length`` (M,), ``coefficient`` (M, 3, 3) and unit
    ``departure`` / ``arrival`` directions (M, 3).
    """
    src = np.atleast_2d(np.asarray(src, dtype=float))
    dst = np.atleast_2d(np.asarray(dst, dtype=float))
    m = max(src.shape[0], dst.shape[0])
    src = np.broadcast_to(src, (m, 3))
    dst = np.broadcast_to(dst, (m, 3))
    fs = [scene.facets[i] for i in facets]

    images = [src]
    for f in fs:
        images.append(f.mirror(images[-1]))
    target = dst
    hits = []
    ts = []
    for k in range(len(fs) - 1, -1, -1):
        f, img = fs[k], images[k + 1]
        u = target - img
        den = u @ f.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((f.origin - img) @ f.normal) / den
        p = img + t[:, None] * u
        hits.append(p)
        ts.append(t)
        target = p
    hits.reverse()
    ts.reverse()
    points = np.stack([src] + hits + [dst], axis=1)
    legs = np.diff(points, axis=1)
    dirs = _unit(legs)
    length = np.linalg.norm(dst - images[-1], axis=-1)

    k0 = dirs[:, 0]
    dyad = np.eye(3)[None] - k0[:, :, None] * k0[:, None, :]
    dyad = dyad.astype(complex)
    for j, f in enumerate(fs):
        kin, kout = dirs[:, j], dirs[:, j + 1]
        n = np.broadcast_to(f.normal, kin.shape)
        cos = np.abs(kin @ f.normal)
        s = np.cross(kin, n)
        sn = np.linalg.norm(s, axis=-1)
        s = np.where(sn[:, None] > 1e-12, s / np.where(sn > 0, sn, 1.0)[:, None], _perpendicular(n))
        p_in = np.cross(s, kin)
        p_out = np.cross(s, kout)
        g_perp, g_par = fresnel_coefficients(f.material, cos, frequency)
        refl = (g_perp[:, None, None] * s[:, :, None] * s[:, None, :]
                + g_par[:, None, None] * p_out[:, :, None] * p_in[:, None, :])
        dyad = refl @ dyad
    coefficient = dyad / (4.0 * math.pi * length)[:, None, None]
    return {
        "points": points,
        "t": np.stack(ts, axis=1) if ts else np.zeros((m, 0)),
        "length": length,
        "coefficient": coefficient,
        "departure": dirs[:, 0],
        "arrival": dirs[:, -1],
    }


def _valid(scene: Scene, facets: Sequence[int], geo: dict) -> bool:
    t = geo["t"][0]
    if np.any(~np.isfinite(t)) or np.any(t <= _EPS) or np.any(t >= 1 - _EPS):
        return False
    pts = geo["points"][0]
    for j, fi in enumerate(facets):
        if not scene.facets[fi].contains(pts[j + 1])[0]:
            return False
    # every leg must be clear of facets other than its own end facets
    ends = [None] + list(facets) + [None]
    for j in range(len(pts) - 1):
        own = {ends[j], ends[j + 1]}
        for fi, f in enumerate(scene.facets):
            if fi in own:
                continue
            if f.blocks(pts[j], pts[j + 1]):
                return False
    return True


def trace_paths(scene: Scene, tx: ArrayPlacement, rx: ArrayPlacement,
                max_bounces: int = MAX_BOUNCES) -> PathSet:
    """Trace LOS and specular paths between the two array reference points."""
    if max_bounces not in (0, 1, 2):
        raise ValueError("max_bounces must be 0, 1 or 2")
    a, b = tx.origin, rx.origin
    scene.check_clearance(a, "transmit array")
    scene.check_clearance(b, "receive array")
    if np.linalg.norm(b - a) < _EPS:
        raise GeometryError("degenerate geometry: transmit and receive arrays coincide")
    n = len(scene.facets)
    sequences: list[tuple] = [()]
    for k in range(1, max_bounces + 1):
        sequences += [s for s in itertools.product(range(n), repeat=k)
                      if all(s[i] != s[i + 1] for i in range(k - 1))]
    paths = []
    for seq in sequences:
        # sequences that cannot reflect produce non-finite t and are discarded
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = chain_geometry(scene, seq, a, b, scene.carrier)
        if not _valid(scene, seq, geo):
            continue
        paths.append(Path(
            facets=tuple(seq),
            points=geo["points"][0],
            length=float(geo["length"][0]),
            coefficient=geo["coefficient"][0],
            departure=geo["departure"][0],
            arrival=geo["arrival"][0],
        ))
    return PathSet(tuple(paths), a.copy(), b.copy(), scene.carrier, max_bounces)


def assemble_srt(paths: PathSet, tx: ArrayPlacement, rx: ArrayPlacement,
                 frequency: Optional[float] = None, scene: Optional[Scene] = None) -> np.ndarray:
    """Propagation transmission block S_RT (n_rx x n_tx) at ``frequency``.

    Every path's reflection sequence is re-evaluated exactly for each
    element pair (image positions, Fresnel angles, spreading and phase), so
    array phase offsets are spherical rather than plane-wave.  ``scene`` is
    required as soon as any path has a bounce.
    """
    if len(paths) == 0:
        raise ValueError("empty path set")
    f = paths.frequency if frequency is None else float(frequency)
    n_tx, n_rx = len(tx), len(rx)
    # element pairs ordered (r, t) row-major
    rr, tt = np.meshgrid(np.arange(n_rx), np.arange(n_tx), indexing="ij")
    rr, tt = rr.ravel(), tt.ravel()
    src = tx.positions[tt]
    dst = rx.positions[rr]
    srt = np.zeros(n_rx * n_tx, dtype=complex)
    for path in paths:
        if path.bounces and scene is None:
            raise ValueError("scene is needed to re-evaluate reflected paths")
        geo = chain_geometry(scene, path.facets, src, dst, f)
        phase = np.exp(-2j * math.pi * f * geo["length"] / SPEED_OF_LIGHT)
        dep, arr = geo["departure"], geo["arrival"]
        for i in range(rr.size):
            et = tx.field(tt[i], dep[i])
            er = rx.field(rr[i], -arr[i])
            srt[i] += (er @ geo["coefficient"][i] @ et) * phase[i]
    return srt.reshape(n_rx, n_tx)
