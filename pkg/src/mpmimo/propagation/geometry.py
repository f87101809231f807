"""Planar-facet scenes and the small amount of vector geometry tracing needs."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import yaml

from .materials import CONCRETE, Material

__all__ = [
    "GeometryError",
    "Facet",
    "Scene",
    "FACET_KINDS",
    "PLANARITY_TOL",
    "load_scene",
    "dump_scene",
    "save_scene",
    "scene_hash",
]

FACET_KINDS = ("building", "road", "terrain")
PLANARITY_TOL = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Facet:
    """Planar polygon with a material.  Vertices are in metres, in order."""

    vertices: np.ndarray
    material: Material = CONCRETE
    kind: str = "building"
    name: str = ""
    normal: np.ndarray = field(init=False, repr=False)
    _basis: np.ndarray = field(init=False, repr=False)
    _poly2d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
            raise GeometryError(f"facet {self.name!r}: need >= 3 vertices in 3D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError(f"facet {self.name!r}: non-finite vertex")
        if self.kind not in FACET_KINDS:
            raise GeometryError(f"facet {self.name!r}: unknown kind {self.kind!r}")
        # Newell's method is robust for any simple polygon
        nxt = np.roll(v, -1, axis=0)
        n = np.array([
            np.sum((v[:, 1] - nxt[:, 1]) * (v[:, 2] + nxt[:, 2])),
            np.sum((v[:, 2] - nxt[:, 2]) * (v[:, 0] + nxt[:, 0])),
            np.sum((v[:, 0] - nxt[:, 0]) * (v[:, 1] + nxt[:, 1])),
        ])
        norm = np.linalg.norm(n)
        if norm == 0:
            raise GeometryError(f"facet {self.name!r}: degenerate polygon (zero area)")
        n = n / norm
        off = (v - v[0]) @ n
        if np.max(np.abs(off)) > PLANARITY_TOL:
            raise GeometryError(
                f"facet {self.name!r}: not planar (deviation {np.max(np.abs(off)):.3e} m)"
            )
        e1 = v[1] - v[0]
        e1 = e1 - (e1 @ n) * n
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        basis = np.stack([e1, e2])
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "_basis", basis)
        object.__setattr__(self, "_poly2d", (v - v[0]) @ basis.T)

    @property
    def origin(self) -> np.ndarray:
        return self.vertices[0]

    def signed_distance(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.origin) @ self.normal

    def mirror(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        d = self.signed_distance(p)
        return p - 2.0 * d[..., None] * self.normal

    def contains(self, points) -> np.ndarray:
        """Crossing-number test of points already lying in the facet plane."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        q = (p - self.origin) @ self._basis.T
        x, y = q[:, 0:1], q[:, 1:2]
        a = self._poly2d
        b = np.roll(a, -1, axis=0)
        ay, by = a[:, 1][None, :], b[:, 1][None, :]
        ax, bx = a[:, 0][None, :], b[:, 0][None, :]
        straddle = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
        crossings = np.sum(straddle & (x < xint), axis=1)
        return crossings % 2 == 1

    def blocks(self, a, b, eps: float = 1e-9) -> bool:
        """True when the open segment a-b passes through the facet interior."""
        da = float(self.signed_distance(a))
        db = float(self.signed_distance(b))
        if not ((da > eps and db < -eps) or (da < -eps and db > eps)):
            return False
        t = da / (da - db)
        p = np.asarray(a, float) + t * (np.asarray(b, float) - np.asarray(a, float))
        return bool(self.contains(p)[0])


@dataclass(frozen=True)
class Scene:
    facets: tuple
    carrier: float

    def __init__(self, facets: Sequence[Facet], carrier: float):
        if not carrier > 0:
            raise GeometryError("carrier frequency must be positive")
        object.__setattr__(self, "facets", tuple(facets))
        object.__setattr__(self, "carrier", float(carrier))

    def __len__(self) -> int:
        return len(self.facets)

    def check_clearance(self, point, what: str = "point", tol: float = PLANARITY_TOL):
        for i, f in enumerate(self.facets):
            if abs(float(f.signed_distance(point))) < tol:
                raise GeometryError(
                    f"degenerate geometry: {what} lies on the plane of facet {i} {f.name!r}"
                )


# ---------------------------------------------------------------------------
# scene documents


def _scene_dict(scene: Scene) -> dict:
    materials: dict[str, dict] = {}
    names: dict[Material, str] = {}
    facets = []
    for f in scene.facets:
        if f.material not in names:
            key = f"m{len(names)}"
            names[f.material] = key
            materials[key] = {
                "relative_permittivity": f.material.relative_permittivity,
                "conductivity_s_per_m": (
                    "inf" if f.material.is_pec else f.material.bulk_conductivity
                ),
            }
        facets.append({
            "name": f.name,
            "kind": f.kind,
            "material": names[f.material],
            "vertices_m": f.vertices.tolist(),
        })
    return {"carrier_hz": scene.carrier, "materials": materials, "facets": facets}


def dump_scene(scene: Scene) -> str:
    return yaml.safe_dump(_scene_dict(scene), sort_keys=False)


def save_scene(scene: Scene, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(dump_scene(scene))
    return path


def scene_hash(scene: Scene) -> str:
    blob = json.dumps(_scene_dict(scene), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _material(spec: dict, name: str) -> Material:
    try:
        eps = float(spec["relative_permittivity"])
        sigma = float(spec.get("conductivity_s_per_m", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise GeometryError(f"material {name!r}: {exc}") from None
    return Material(eps, math.inf if sigma == math.inf else sigma)


def load_scene(source: Union[str, Path, dict]) -> Scene:
    """Build a Scene from a YAML scene document (path, text or parsed dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        p = Path(source) if not isinstance(source, str) or "\n" not in source else None
        text = p.read_text() if p is not None else source
        doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise GeometryError("scene document must be a mapping")
    if "carrier_hz" not in doc:
        raise GeometryError("scene document needs 'carrier_hz'")
    materials = {"concrete": CONCRETE}
    for name, spec in (doc.get("materials") or {}).items():
        materials[name] = _material(spec, name)
    facets = []
    for i, fd in enumerate(doc.get("facets") or []):
        mat = fd.get("material", "concrete")
        if isinstance(mat, dict):
            material = _material(mat, f"facet {i}")
        elif mat in materials:
            material = materials[mat]
        else:
            raise GeometryError(f"facet {i}: unknown material {mat!r}")
        if "vertices_m" not in fd:
            raise GeometryError(f"facet {i}: needs 'vertices_m'")
        facets.append(Facet(fd["vertices_m"], material, fd.get("kind", "building"),
                            fd.get("name", f"facet{i}")))
    return Scene(facets, float(doc["carrier_hz"]))
