"""Per-user channel ensembles, traced or stochastic, and their on-disk format."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..multiport import TerminationSet, cascade_channel, radiation_efficiency
from .arrays import ArrayPlacement
from .geometry import Scene, scene_hash
from .tracing import MAX_BOUNCES, assemble_srt, trace_paths

__all__ = [
    "ChannelEnsemble",
    "RingSampler",
    "generate_ensemble",
    "generate_stochastic_ensemble",
    "save_ensemble",
    "load_ensemble",
    "ENSEMBLE_FORMAT_VERSION",
]

ENSEMBLE_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    """Channel matrices H (n_users, n_rx, n_tx) with the user positions they belong to."""

    positions: np.ndarray
    channels: np.ndarray
    carrier: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.channels, dtype=complex)
        if h.ndim != 3 or h.shape[0] < 1:
            raise ValueError(f"channels must be (n_users>=1, n_rx, n_tx), got {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("ensemble contains non-finite channel entries")
        pos = np.asarray(self.positions, dtype=float).reshape(h.shape[0], 3)
        object.__setattr__(self, "channels", h)
        object.__setattr__(self, "positions", pos)

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    @property
    def n_rx(self) -> int:
        return self.channels.shape[1]

    @property
    def n_tx(self) -> int:
        return self.channels.shape[2]

    def mean_receive_gain(self) -> float:
        """Average squared channel norm per receive port, ||H||_F^2 / n_rx over users."""
        return float(np.mean(np.sum(np.abs(self.channels) ** 2, axis=(1, 2))) / self.n_rx)


@dataclass(frozen=True)
class RingSampler:
    """Uniform-in-area user drops on an annulus around ``center`` (x, y) at ``height``."""

    count: int
    r_min: float
    r_max: float
    seed: int = 0
    height: float = 1.5
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sampler count must be >= 1")
        if not 0 <= self.r_min <= self.r_max:
            raise ValueError("ring needs 0 <= r_min <= r_max")

    def positions(self) -> np.ndarray:
        # one child stream per user: serial and parallel draws agree
        children = np.random.SeedSequence(self.seed).spawn(self.count)
        out = np.empty((self.count, 3))
        for i, child in enumerate(children):
            rng = np.random.default_rng(child)
            u, phi = rng.random(2)
            r = math.sqrt(self.r_min ** 2 + u * (self.r_max ** 2 - self.r_min ** 2))
            a = 2 * math.pi * phi
            out[i] = (self.center[0] + r * math.cos(a), self.center[1] + r * math.sin(a),
                      self.height)
        return out


def _efficiency_scaling(s) -> Optional[np.ndarray]:
    return None if s is None else np.sqrt(radiation_efficiency(s))


def generate_ensemble(
    scene: Scene,
    bs: ArrayPlacement,
    ue_template: ArrayPlacement,
    placements: Union[Sequence, RingSampler],
    *,
    s_t=None,
    s_r=None,
    terminations: Optional[TerminationSet] = None,
    frequency: Optional[float] = None,
    max_bounces: int = MAX_BOUNCES,
    embed_mismatch: bool = False,
    threads: int = 1,
) -> ChannelEnsemble:
    """Downlink channels from ``bs`` (transmit) to the handset at every placement.

    ``s_t`` / ``s_r`` are the base-station and handset scattering matrices at
    ``frequency`` (default: the scene carrier); zero matrices when omitted.
    With ``embed_mismatch`` each element field is scaled by the square root of
    its port's accepted-power fraction, so antenna mismatch shows up in S_RT
    even with matched terminations.
    """
    f = scene.carrier if frequency is None else float(frequency)
    if isinstance(placements, RingSampler):
        positions = placements.positions()
        seed = placements.seed
    else:
        positions = np.asarray(placements, dtype=float).reshape(-1, 3)
        seed = None
    if positions.shape[0] < 1:
        raise ValueError("need at least one user placement")
    n_tx, n_rx = len(bs), len(ue_template)
    s_t = np.zeros((n_tx, n_tx), complex) if s_t is None else np.asarray(s_t, complex)
    s_r = np.zeros((n_rx, n_rx), complex) if s_r is None else np.asarray(s_r, complex)
    if embed_mismatch:
        bs = bs.scaled(_efficiency_scaling(s_t))
        ue_template = ue_template.scaled(_efficiency_scaling(s_r))

    def one(pos):
        ue = ue_template.moved_to(pos)
        paths = trace_paths(scene, bs, ue, max_bounces)
        srt = assemble_srt(paths, bs, ue, f, scene=scene)
        return cascade_channel(s_t, s_r, srt, terminations)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            channels = list(pool.map(one, positions))
    else:
        channels = [one(p) for p in positions]
    meta = {
        "source": "traced",
        "scene_hash": scene_hash(scene),
        "seed": seed,
        "max_bounces": max_bounces,
        "embed_mismatch": embed_mismatch,
    }
    return ChannelEnsemble(positions, np.stack(channels), f, meta)


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("correlation must be a square matrix")
    if not np.allclose(c, c.conj().T, atol=1e-12):
        raise ValueError("correlation must be Hermitian")
    w, v = np.linalg.eigh(c)
    if w.min() < -1e-10 * max(1.0, abs(w).max()):
        raise ValueError(f"correlation is not positive semidefinite (eigenvalue {w.min():.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def generate_stochastic_ensemble(n_users: int, n_rx: int, n_tx: int, correlation=None,
                                 seed: int = 0, carrier: float = 3.16e9) -> ChannelEnsemble:
    """Rayleigh channels with receive-side correlation: H = C^(1/2) H_iid.

    ``correlation`` is scaled to unit mean diagonal so entries have unit
    average power.
    """
    if n_users < 1 or n_rx < 1 or n_tx < 1:
        raise ValueError("dimensions must be positive")
    c = np.eye(n_rx, dtype=complex) if correlation is None else np.asarray(correlation, complex)
    if c.shape != (n_rx, n_rx):
        raise ValueError(f"correlation must be {n_rx}x{n_rx}")
    root = _psd_sqrt(c)
    scale = np.real(np.trace(c)) / n_rx
    if not scale > 0:
        raise ValueError("correlation has zero trace")
    root = root / math.sqrt(scale)
    rng = np.random.default_rng(seed)
    iid = (rng.standard_normal((n_users, n_rx, n_tx))
           + 1j * rng.standard_normal((n_users, n_rx, n_tx))) / math.sqrt(2.0)
    h = root @ iid
    meta = {"source": "stochastic", "seed": seed, "correlation_re": c.real.tolist(),
            "correlation_im": c.imag.tolist()}
    return ChannelEnsemble(np.zeros((n_users, 3)), h, carrier, meta)


def save_ensemble(ens: ChannelEnsemble, path: Union[str, Path]) -> Path:
    """Write an .npz with a JSON header (dims, carrier, seed, scene hash) and the arrays."""
    path = Path(path)
    header = {
        "format_version": ENSEMBLE_FORMAT_VERSION,
        "n_users": ens.n_users,
        "n_rx": ens.n_rx,
        "n_tx": ens.n_tx,
        "carrier_hz": ens.carrier,
        **ens.metadata,
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)),
                 positions=ens.positions, channels=ens.channels)
    return path


def load_ensemble(path: Union[str, Path]) -> ChannelEnsemble:
    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        if header.get("format_version") != ENSEMBLE_FORMAT_VERSION:
            raise ValueError(f"unsupported ensemble format {header.get('format_version')!r}")
        ens = ChannelEnsemble(z["positions"], z["channels"], header["carrier_hz"])
    if ens.channels.shape != (header["n_users"], header["n_rx"], header["n_tx"]):
        raise ValueError("ensemble header does not match stored arrays")
    meta = {k: v for k, v in header.items()
            if k not in ("format_version", "n_users", "n_rx", "n_tx", "carrier_hz")}
    return ChannelEnsemble(ens.positions, ens.channels, ens.carrier, meta)
