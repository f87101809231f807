"""Run configuration: loading, unit conversion and validation diagnostics.

Config documents are YAML (JSON also parses).  Powers are given in dBm and
converted to watts here, once.  Relative paths resolve against the config's
directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from .linkproc import Scheme, dbm_to_watts
from .multiport import MultiportError, interpolate_network
from .touchstone import TouchstoneError, read_touchstone

__all__ = ["Diagnostic", "RunConfig", "ConfigError", "load_config", "validate", "validate_document"]

REQUIRED = ("scene", "frequency_hz", "bandwidth_hz", "signal_power_dbm", "noise_power_dbm")
DEFAULTS: dict[str, Any] = {
    "bs_touchstone": None,
    "ue_touchstone": None,
    "schemes": [s.value for s in Scheme],
    "seed": 0,
    "output_dir": "out",
    "diversity_threshold_quantile": 0.1,
    "n_users": 140,
    "ring_m": [90.0, 200.0],
    "bs_position_m": [0.0, 0.0, 25.0],
    "ue_height_m": 1.5,
    "max_bounces": 2,
    "embed_mismatch": False,
    "beam_target": "auto",
}
KNOWN = set(REQUIRED) | set(DEFAULTS)
# above this the value was probably meant in dBm or mW
MAX_SIGNAL_W = 100.0
MAX_NOISE_DBM = 0.0
MIN_FREQUENCY_HZ = 1e6
BS_PORTS, UE_PORTS = 16, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "warning"
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.key}: {self.message}"


@dataclass
class RunConfig:
    scene: Union[Path, dict]
    frequency: float
    bandwidth: float
    signal_power: float
    noise_powers: list
    noise_powers_dbm: list
    bs_touchstone: Optional[Path] = None
    ue_touchstone: Optional[Path] = None
    schemes: list = field(default_factory=lambda: list(Scheme))
    seed: int = 0
    output_dir: Path = Path("out")
    diversity_threshold_quantile: float = 0.1
    n_users: int = 140
    ring_m: tuple = (90.0, 200.0)
    bs_position_m: tuple = (0.0, 0.0, 25.0)
    ue_height_m: float = 1.5
    max_bounces: int = 2
    embed_mismatch: bool = False
    beam_target: Union[str, int] = "auto"
    document: dict = field(default_factory=dict, repr=False)

    @property
    def stochastic(self) -> Optional[dict]:
        if isinstance(self.scene, dict):
            return self.scene.get("stochastic", self.scene)
        return None

    def config_hash(self) -> str:
        blob = json.dumps(self.document, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _read_document(source: Union[str, Path, dict]) -> tuple[dict, Path]:
    if isinstance(source, dict):
        return dict(source), Path.cwd()
    path = Path(source)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    # a run manifest carries the fully resolved config
    if "manifest_version" in doc and isinstance(doc.get("config"), dict):
        doc = doc["config"]
    return doc, path.resolve().parent


def _resolve(base: Path, value) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def _normalized(doc: dict, base: Path) -> dict:
    """Defaults filled in and paths made absolute; used for hashing and manifests."""
    out = {**DEFAULTS, **doc}
    for key in ("bs_touchstone", "ue_touchstone", "output_dir"):
        if out.get(key) is not None:
            out[key] = str(_resolve(base, out[key]).resolve())
    if isinstance(out.get("scene"), str):
        out["scene"] = str(_resolve(base, out["scene"]).resolve())
    nd = out.get("noise_power_dbm")
    if nd is not None and not isinstance(nd, list):
        out["noise_power_dbm"] = [nd]
    return out


def validate_document(doc: dict, base: Path) -> list:
    """All rule violations of a config document; never raises on bad content."""
    diags: list[Diagnostic] = []

    def err(key, msg):
        diags.append(Diagnostic("error", key, msg))

    def warn(key, msg):
        diags.append(Diagnostic("warning", key, msg))

    for key in REQUIRED:
        if key not in doc:
            err(key, "required key missing")
    for key in sorted(set(doc) - KNOWN):
        warn(key, "unknown key (units belong in key names, e.g. noise_power_dbm)")

    def number(key) -> Optional[float]:
        if key not in doc:
            return None
        try:
            return float(doc[key])
        except (TypeError, ValueError):
            err(key, f"not a number: {doc[key]!r}")
            return None

    freq = number("frequency_hz")
    bw = number("bandwidth_hz")
    sig = number("signal_power_dbm")
    if freq is not None:
        if freq <= 0:
            err("frequency_hz", "must be positive")
        elif freq < MIN_FREQUENCY_HZ:
            warn("frequency_hz", f"{freq:g} Hz is below 1 MHz; was GHz or MHz intended?")
    if bw is not None:
        if bw <= 0:
            err("bandwidth_hz", "must be positive")
        elif freq is not None and bw >= freq:
            err("bandwidth_hz", f"bandwidth {bw:g} Hz is not below the carrier {freq:g} Hz")
    if sig is not None and float(dbm_to_watts(sig)) > MAX_SIGNAL_W:
        warn("signal_power_dbm",
             f"{sig:g} dBm is {float(dbm_to_watts(sig)):.3g} W (> {MAX_SIGNAL_W:g} W); "
             "value given in W or mW instead of dBm?")
    if "noise_power_dbm" in doc:
        noise = doc["noise_power_dbm"]
        noise = noise if isinstance(noise, list) else [noise]
        if not noise:
            err("noise_power_dbm", "needs at least one noise power")
        for v in noise:
            try:
                v = float(v)
            except (TypeError, ValueError):
                err("noise_power_dbm", f"not a number: {v!r}")
                continue
            if v > MAX_NOISE_DBM:
                warn("noise_power_dbm", f"{v:g} dBm is above {MAX_NOISE_DBM:g} dBm; dB vs dBm mix-up?")

    for s in doc.get("schemes", DEFAULTS["schemes"]) or []:
        try:
            Scheme(s)
        except ValueError:
            err("schemes", f"unknown scheme {s!r} (known: {[x.value for x in Scheme]})")
    if not doc.get("schemes", DEFAULTS["schemes"]):
        err("schemes", "no schemes selected")
    q = doc.get("diversity_threshold_quantile", DEFAULTS["diversity_threshold_quantile"])
    try:
        if not 0 < float(q) < 1:
            err("diversity_threshold_quantile", "must lie strictly between 0 and 1")
    except (TypeError, ValueError):
        err("diversity_threshold_quantile", f"not a number: {q!r}")

    scene = doc.get("scene")
    traced = isinstance(scene, str)
    if traced:
        p = _resolve(base, scene)
        if not p.exists():
            err("scene", f"file not found: {p}")
        n = doc.get("n_users", DEFAULTS["n_users"])
        if not isinstance(n, int) or n < 1:
            err("n_users", "must be a positive integer")
        ring = doc.get("ring_m", DEFAULTS["ring_m"])
        if not (isinstance(ring, list) and len(ring) == 2 and 0 <= ring[0] <= ring[1]):
            err("ring_m", "must be [r_min, r_max] with 0 <= r_min <= r_max")
    elif isinstance(scene, dict):
        spec = scene.get("stochastic", scene)
        for key in ("n_users", "n_rx", "n_tx"):
            v = spec.get(key)
            if v is None and key == "n_users":
                v = doc.get("n_users", DEFAULTS["n_users"])
            if not isinstance(v, int) or v < 1:
                err(f"scene.stochastic.{key}", "must be a positive integer")
    elif scene is not None:
        err("scene", "must be a scene file path or a 'stochastic' mapping")

    for key, ports in (("bs_touchstone", BS_PORTS), ("ue_touchstone", UE_PORTS)):
        value = doc.get(key)
        if value is None:
            if traced:
                err(key, "required for traced scenes")
            continue
        p = _resolve(base, value)
        if not p.exists():
            err(key, f"file not found: {p}")
            continue
        try:
            net = read_touchstone(p)
        except TouchstoneError as exc:
            err(key, f"{p.name}: {exc}")
            continue
        if traced and net.n_ports != ports:
            err(key, f"{p.name} has {net.n_ports} ports, the array model needs {ports}")
        if freq is not None and freq > 0:
            try:
                interpolate_network(net, freq)
            except MultiportError:
                err(key, f"frequency {freq:g} Hz outside the sweep of {p.name} "
                         f"[{net.frequencies[0]:g}, {net.frequencies[-1]:g}] Hz")
    return diags


def validate(source: Union[str, Path, dict]) -> list:
    """Diagnostics for a config file; an empty list means the config is clean."""
    try:
        doc, base = _read_document(source)
    except (OSError, yaml.YAMLError, ConfigError) as exc:
        return [Diagnostic("error", "config", str(exc))]
    return validate_document(doc, base)


def load_config(source: Union[str, Path, dict], *, seed: Optional[int] = None,
                output_dir: Optional[Union[str, Path]] = None) -> RunConfig:
    """Parse and convert a config; raises ConfigError listing every error diagnostic.

    ``seed`` and ``output_dir`` override the document (command-line flags).
    """
    doc, base = _read_document(source)
    if seed is not None:
        doc["seed"] = int(seed)
    if output_dir is not None:
        doc["output_dir"] = str(Path(output_dir).resolve())
    errors = [d for d in validate_document(doc, base) if d.level == "error"]
    if errors:
        raise ConfigError("; ".join(str(d) for d in errors))
    norm = _normalized(doc, base)
    scene = norm["scene"]
    return RunConfig(
        scene=Path(scene) if isinstance(scene, str) else scene,
        frequency=float(norm["frequency_hz"]),
        bandwidth=float(norm["bandwidth_hz"]),
        signal_power=float(dbm_to_watts(norm["signal_power_dbm"])),
        noise_powers=[float(dbm_to_watts(v)) for v in norm["noise_power_dbm"]],
        noise_powers_dbm=[float(v) for v in norm["noise_power_dbm"]],
        bs_touchstone=_resolve(base, norm["bs_touchstone"]),
        ue_touchstone=_resolve(base, norm["ue_touchstone"]),
        schemes=[Scheme(s) for s in norm["schemes"]],
        seed=int(norm["seed"]),
        output_dir=Path(norm["output_dir"]),
        diversity_threshold_quantile=float(norm["diversity_threshold_quantile"]),
        n_users=int(norm["n_users"]),
        ring_m=tuple(float(v) for v in norm["ring_m"]),
        bs_position_m=tuple(float(v) for v in norm["bs_position_m"]),
        ue_height_m=float(norm["ue_height_m"]),
        max_bounces=int(norm["max_bounces"]),
        embed_mismatch=bool(norm["embed_mismatch"]),
        beam_target=norm["beam_target"],
        document=norm,
    )

