"""Desk-scale propagation: planar-facet scenes, image-method tracing, channel ensembles."""

from .arrays import ArrayPlacement, Isotropic, ShortDipole, TabulatedPattern, dual_pol_handset, slot_array_16
from .ensemble import (
    ChannelEnsemble,
    RingSampler,
    generate_ensemble,
    generate_stochastic_ensemble,
    load_ensemble,
    save_ensemble,
)
from .geometry import Facet, GeometryError, Scene, dump_scene, load_scene, save_scene, scene_hash
from .materials import CONCRETE, PEC, SPEED_OF_LIGHT, Material, fresnel_coefficients
from .tracing import Path, PathSet, assemble_srt, trace_paths

__all__ = [
    "ArrayPlacement", "Isotropic", "ShortDipole", "TabulatedPattern", "dual_pol_handset",
    "slot_array_16", "ChannelEnsemble", "RingSampler", "generate_ensemble",
    "generate_stochastic_ensemble", "load_ensemble", "save_ensemble", "Facet", "GeometryError",
    "Scene", "dump_scene", "load_scene", "save_scene", "scene_hash", "CONCRETE", "PEC",
    "SPEED_OF_LIGHT", "Material", "fresnel_coefficients", "Path", "PathSet", "assemble_srt",
    "trace_paths",
]
