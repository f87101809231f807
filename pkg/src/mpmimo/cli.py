"""Command-line driver.

Subcommands: ``run``, ``validate``, ``parse-touchstone``, ``trace``.
Exit codes: 0 success, 1 validation failure, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (
    CSV_SCHEMA_VERSION,
    GainReport,
    ThresholdOutOfRange,
    curves_to_csv,
    diversity_gain,
    ecc_from_sparams,
    isolation_db,
    multiplexing_gain,
    outage_cdf,
)
from .config import ConfigError, RunConfig, load_config, validate
from .linkproc import LinkBudget, Scheme, average_receive_snr, scheme_rates
from .multiport import interpolate_network
from .propagation import (
    ChannelEnsemble,
    RingSampler,
    dual_pol_handset,
    generate_ensemble,
    generate_stochastic_ensemble,
    load_scene,
    save_ensemble,
    slot_array_16,
    trace_paths,
)
from .propagation.arrays import Isotropic, ArrayPlacement
from .touchstone import TouchstoneNetwork, read_touchstone, serialize_touchstone

log = logging.getLogger("mpmimo")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
MANIFEST_VERSION = 1
# GainReport headline diversity is read in the middle SNR regime
HEADLINE_SNR_DB = 10.0


def _load_network(path: Optional[Path]) -> Optional[TouchstoneNetwork]:
    return None if path is None else read_touchstone(path)


def _correlation(spec: dict, n_rx: int) -> np.ndarray:
    c = spec.get("correlation", 0.0)
    if np.isscalar(c):
        m = np.full((n_rx, n_rx), complex(c))
        np.fill_diagonal(m, 1.0)
        return m
    return np.asarray(c, dtype=complex)


def build_ensemble(cfg: RunConfig, threads: int = 1) -> ChannelEnsemble:
    """Channel ensemble for a config: traced over a scene file or stochastic."""
    spec = cfg.stochastic
    if spec is not None:
        n_rx, n_tx = int(spec["n_rx"]), int(spec["n_tx"])
        return generate_stochastic_ensemble(
            int(spec.get("n_users", cfg.n_users)), n_rx, n_tx,
            _correlation(spec, n_rx), seed=cfg.seed, carrier=cfg.frequency,
        )
    scene = load_scene(cfg.scene)
    bs = slot_array_16(cfg.bs_position_m, cfg.frequency)
    ue = dual_pol_handset((0.0, 0.0, cfg.ue_height_m))
    s_t = interpolate_network(_load_network(cfg.bs_touchstone), cfg.frequency)
    s_r = interpolate_network(_load_network(cfg.ue_touchstone), cfg.frequency)
    sampler = RingSampler(cfg.n_users, cfg.ring_m[0], cfg.ring_m[1], cfg.seed,
                          cfg.ue_height_m, tuple(cfg.bs_position_m[:2]))
    return generate_ensemble(scene, bs, ue, sampler, s_t=s_t, s_r=s_r, frequency=cfg.frequency,
                             max_bounces=cfg.max_bounces, embed_mismatch=cfg.embed_mismatch,
                             threads=threads)


def _beam_target(cfg: RunConfig, ue_s: Optional[np.ndarray], n_rx: int) -> int:
    """Receive row used by the single-antenna and MRC schemes (0-based)."""
    if cfg.beam_target != "auto":
        t = int(cfg.beam_target) - 1
        if not 0 <= t < n_rx:
            raise ConfigError(f"beam_target {cfg.beam_target} outside 1..{n_rx}")
        return t
    if ue_s is not None and ue_s.shape[0] == n_rx:
        # the antenna best matched at the analysis frequency is the dedicated one
        return int(np.argmin(np.abs(np.diag(ue_s))))
    return 0


def _noise_tag(dbm: float) -> str:
    return f"{dbm:g}dBm".replace("-", "m").replace("+", "p").replace(".", "p")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(cfg: RunConfig, threads: int = 1) -> dict:
    """Execute a configured analysis and write CSVs, the gain report and a manifest."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    ens = build_ensemble(cfg, threads)
    ue_net = _load_network(cfg.ue_touchstone)
    ue_s = None if ue_net is None else interpolate_network(ue_net, cfg.frequency)
    target = _beam_target(cfg, ue_s, ens.n_rx)
    multi_rx = [Scheme.MRC_2X1, Scheme.LMMSE_ONE_LAYER, Scheme.LMMSE_TWO_LAYER]
    schemes = [s for s in cfg.schemes if ens.n_rx >= 2 or s not in multi_rx]
    if len(schemes) < len(cfg.schemes):
        log.warning("single receive antenna: skipping %s",
                    [s.value for s in cfg.schemes if s not in schemes])

    artifacts: list[Path] = []
    notes: list[str] = []
    snr_points: list[float] = []
    curves_by_noise = []
    for noise_w, noise_dbm in zip(cfg.noise_powers, cfg.noise_powers_dbm):
        lb = LinkBudget(cfg.bandwidth, cfg.signal_power, noise_w)
        snr_db = float(10 * np.log10(average_receive_snr(ens.channels, lb)))
        snr_points.append(snr_db)
        curves = {}
        for scheme in schemes:
            curve = outage_cdf(scheme_rates(scheme, ens.channels, lb, target), scheme, lb)
            curves[scheme] = curve
            path = out / f"cdf_{scheme.value}_{_noise_tag(noise_dbm)}.csv"
            path.write_text(curves_to_csv([curve], snr_db))
            artifacts.append(path)
        curves_by_noise.append((noise_dbm, snr_db, curves))

    div_by_snr = {}
    for noise_dbm, snr_db, curves in curves_by_noise:
        if Scheme.MISO_1X1 not in curves or Scheme.MRC_2X1 not in curves:
            continue
        try:
            d = diversity_gain(curves[Scheme.MRC_2X1], curves[Scheme.MISO_1X1],
                               quantile=cfg.diversity_threshold_quantile)
            div_by_snr[f"{noise_dbm:g}"] = d
        except ThresholdOutOfRange as exc:
            notes.append(f"diversity gain at {noise_dbm:g} dBm not measurable: {exc}")
    headline = threshold = None
    usable = [(n, s, c) for n, s, c in curves_by_noise if f"{n:g}" in div_by_snr]
    if usable:
        n, s, c = min(usable, key=lambda x: abs(x[1] - HEADLINE_SNR_DB))
        headline = div_by_snr[f"{n:g}"]
        threshold = c[Scheme.MISO_1X1].quantile(cfg.diversity_threshold_quantile)
    elif not div_by_snr:
        notes.append("diversity gain needs both miso_1x1 and mrc_2x1 with measurable outage")

    mux = None
    if Scheme.OPTIMAL in schemes:
        medians = [(s, c[Scheme.OPTIMAL].median()) for _, s, c in curves_by_noise]
        try:
            mux = multiplexing_gain(medians, cfg.bandwidth)
        except ValueError as exc:
            notes.append(f"multiplexing gain not measurable: {exc}")

    ecc = iso = None
    if ue_s is not None and ue_s.shape == (2, 2):
        ecc = ecc_from_sparams(ue_s)
        iso = isolation_db(ue_s)
    report = GainReport(headline, mux, ecc, iso, threshold, snr_points, div_by_snr, notes)
    report_path = out / "gain_report.json"
    report_path.write_text(report.to_json())
    artifacts.append(report_path)

    ens_path = save_ensemble(ens, out / "ensemble.npz")
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "config": cfg.document,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "beam_target": target + 1,
        "versions": {
            "mpmimo": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "artifacts": {p.name: _sha256(p) for p in artifacts},
        "ensemble": ens_path.name,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"artifacts": artifacts, "report": report, "manifest": manifest_path,
            "ensemble": ens}


# ---------------------------------------------------------------------------
# argument handling


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        for part in str(exc).split("; "):
            print(part, file=sys.stderr)
        return EXIT_INVALID
    result = run(cfg, threads=args.threads)
    print(f"wrote {len(result['artifacts'])} artifacts to {cfg.output_dir}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    diags = validate(args.config)
    for d in diags:
        print(d)
    return EXIT_INVALID if any(d.level == "error" for d in diags) else EXIT_OK


def _cmd_touchstone(args) -> int:
    net = read_touchstone(args.path)
    if args.to:
        text = serialize_touchstone(net, args.to, args.unit)
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    print(f"ports: {net.n_ports}")
    print(f"points: {len(net)}")
    print(f"frequency: {net.frequencies[0]:.6g} .. {net.frequencies[-1]:.6g} Hz")
    print(f"reference impedance: {net.reference_impedance:g} ohm")
    if args.frequency is not None:
        s = interpolate_network(net, args.frequency)
        with np.errstate(divide="ignore"):
            db = 20 * np.log10(np.abs(s))
        print(f"|S| (dB) at {args.frequency:.6g} Hz:")
        for row in db:
            print("  " + " ".join(f"{v:8.2f}" for v in row))
    return EXIT_OK


def _point(text: str) -> np.ndarray:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("expected x,y,z")
    return np.array(vals)


def _cmd_trace(args) -> int:
    scene = load_scene(args.scene)
    tx = ArrayPlacement(args.tx, np.zeros((1, 3)), (Isotropic(),))
    rx = ArrayPlacement(args.rx, np.zeros((1, 3)), (Isotropic(),))
    paths = trace_paths(scene, tx, rx, args.max_bounces)
    text = json.dumps(paths.to_dict(), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpmimo", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate all schemes and write curves and reports")
    r.add_argument("--config", required=True, help="run config (YAML) or a previous manifest.json")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--out", help="override the output directory")
    r.add_argument("--threads", type=int, default=1, help="worker threads for ray tracing")
    r.add_argument("--format", choices=["csv"], default="csv")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("--config", required=True)
    v.set_defaults(func=_cmd_validate)

    t = sub.add_parser("parse-touchstone", help="inspect or convert a Touchstone file")
    t.add_argument("path")
    t.add_argument("--to", choices=["RI", "MA", "DB"], help="re-serialize in this format")
    t.add_argument("--unit", default="Hz", choices=["Hz", "kHz", "MHz", "GHz"])
    t.add_argument("--output", "-o")
    t.add_argument("--frequency", type=float, help="print |S| in dB at this frequency (Hz)")
    t.set_defaults(func=_cmd_touchstone)

    tr = sub.add_parser("trace", help="dump the traced paths between two points as JSON")
    tr.add_argument("--scene", required=True)
    tr.add_argument("--tx", type=_point, required=True, help="x,y,z in metres")
    tr.add_argument("--rx", type=_point, required=True, help="x,y,z in metres")
    tr.add_argument("--max-bounces", type=int, default=2, choices=[0, 1, 2])
    tr.add_argument("--output", "-o")
    tr.set_defaults(func=_cmd_trace)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # surface with module provenance
        origin = type(exc).__module__
        if origin == "builtins":
            tb = exc.__traceback__
            while tb is not None and tb.tb_next is not None:
                tb = tb.tb_next
            origin = tb.tb_frame.f_globals.get("__name__", "?") if tb else "?"
        print(f"error [{origin}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
