"""Touchstone v1 reader and writer for S-parameter sweeps.

Only scattering parameters are supported.  Frequencies are always stored in
Hz, whatever unit the file declares.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "TouchstoneError",
    "TouchstoneNetwork",
    "parse_touchstone",
    "serialize_touchstone",
    "read_touchstone",
    "write_touchstone",
    "ports_from_filename",
    "check_scattering",
]

FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FORMATS = ("RI", "MA", "DB")
PASSIVITY_TOL = 1e-9
# v1 writers wrap N>2 rows after four complex pairs
PAIRS_PER_LINE = 4
# floor used when writing an exact zero in dB format
DB_FLOOR = -400.0


class TouchstoneError(ValueError):
    """Raised for malformed or unsupported Touchstone content."""


def check_scattering(m, passive: bool = False) -> np.ndarray:
    """Validate a square complex scattering matrix and return it as an array."""
    s = np.asarray(m, dtype=complex)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 1:
        raise ValueError(f"scattering matrix must be square, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scattering matrix has non-finite entries")
    if passive:
        norm = np.linalg.norm(s, 2)
        if norm > 1.0 + PASSIVITY_TOL:
            raise ValueError(f"scattering matrix is not passive (spectral norm {norm:.6g})")
    return s


@dataclass(frozen=True)
class TouchstoneNetwork:
    """An N-port S-parameter sweep.

    ``s`` has shape ``(n_freq, n_ports, n_ports)``; ``frequencies`` are in Hz
    and strictly increasing.  Arrays are made read-only on construction.
    """

    frequencies: np.ndarray
    s: np.ndarray
    reference_impedance: float = 50.0
    source_comment: Optional[str] = None

    def __post_init__(self):
        f = np.array(self.frequencies, dtype=float).reshape(-1)
        s = np.array(self.s, dtype=complex)
        if s.ndim == 2 and f.size == 1:
            s = s[None]
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[1] < 1:
            raise TouchstoneError(f"S array must be (n_freq, N, N), got {s.shape}")
        if s.shape[0] != f.size or f.size == 0:
            raise TouchstoneError("number of frequencies and matrices differ")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(s)):
            raise TouchstoneError("non-finite frequency or S-parameter value")
        if np.any(np.diff(f) <= 0):
            raise TouchstoneError("frequencies must be strictly increasing")
        if not self.reference_impedance > 0:
            raise TouchstoneError("reference impedance must be positive")
        f.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "reference_impedance", float(self.reference_impedance))

    @property
    def n_ports(self) -> int:
        return self.s.shape[1]

    @property
    def points(self) -> list[Tuple[float, np.ndarray]]:
        return list(zip(self.frequencies.tolist(), self.s))

    def __len__(self) -> int:
        return self.frequencies.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TouchstoneNetwork):
            return NotImplemented
        return (
            self.reference_impedance == other.reference_impedance
            and np.array_equal(self.frequencies, other.frequencies)
            and np.array_equal(self.s, other.s)
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# parsing


@dataclass
class _Options:
    unit: str = "GHZ"
    fmt: str = "MA"
    z0: float = 50.0


def _parse_option_line(line: str, lineno: int) -> _Options:
    opts = _Options()
    tokens = line[1:].split()
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok.lower() in FREQ_UNITS:
            opts.unit = tok
        elif tok in FORMATS:
            opts.fmt = tok
        elif tok == "S":
            pass
        elif tok in ("Y", "Z", "H", "G"):
            raise TouchstoneError(
                f"line {lineno}: unsupported parameter type {tok!r} (only S is supported)"
            )
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneError(f"line {lineno}: malformed option line, R without value")
            try:
                opts.z0 = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(
                    f"line {lineno}: malformed option line, bad reference {tokens[i + 1]!r}"
                ) from None
            if not opts.z0 > 0:
                raise TouchstoneError(f"line {lineno}: reference impedance must be positive")
            i += 1
        else:
            raise TouchstoneError(f"line {lineno}: malformed option line, unknown token {tok!r}")
        i += 1
    return opts


def _to_complex(fmt: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    if fmt == "MA":
        mag = a
    else:
        mag = 10.0 ** (a / 20.0)
    return mag * np.exp(1j * np.deg2rad(b))


def _data_lines(text: str) -> Iterator[Tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        yield lineno, raw


def _floats(tokens: Sequence[str], lineno: int) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise TouchstoneError(f"line {lineno}: non-numeric data ({exc})") from None


def _parse_records(data: list[Tuple[int, list[str]]], n: int) -> Tuple[list, list, list, bool]:
    """Group tokenized data lines into (freq, values) records for an n-port.

    Returns (freqs, value rows, first line of each record, saw_noise_block).
    """
    width = 2 * n * n
    freqs: list[float] = []
    rows: list[list[float]] = []
    starts: list[int] = []
    noise = False
    i = 0
    while i < len(data):
        lineno, toks = data[i]
        if n <= 2:
            if n == 2 and len(toks) == 5 and freqs:
                f = _floats(toks[:1], lineno)[0]
                if f <= freqs[-1]:
                    noise = True
                    break
            if len(toks) != width + 1:
                raise TouchstoneError(
                    f"line {lineno}: expected {width + 1} columns for a {n}-port, got {len(toks)}"
                )
            vals = _floats(toks, lineno)
            freqs.append(vals[0])
            rows.append(vals[1:])
            starts.append(lineno)
            i += 1
            continue
        # N > 2: one matrix row per group of lines, each row begins on a new line
        vals = _floats(toks, lineno)
        freq = vals[0]
        starts.append(lineno)
        record: list[float] = []
        row: list[float] = list(vals[1:])
        i += 1
        while True:
            if len(row) > 2 * n:
                raise TouchstoneError(
                    f"line {lineno}: inconsistent column count, row overflows {2 * n} values"
                )
            if len(row) == 2 * n:
                record.extend(row)
                row = []
                if len(record) == width:
                    break
            if i >= len(data):
                raise TouchstoneError(f"line {lineno}: truncated record at end of data")
            lineno, toks = data[i]
            row.extend(_floats(toks, lineno))
            i += 1
        freqs.append(freq)
        rows.append(record)
    return freqs, rows, starts, noise


def _values_to_matrices(rows: list[list[float]], n: int, fmt: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=float).reshape(len(rows), n * n, 2)
    s = _to_complex(fmt, arr[..., 0], arr[..., 1]).reshape(len(rows), n, n)
    if n == 2:
        # v1 two-port column order is S11 S21 S12 S22
        s = np.swapaxes(s, 1, 2)
    return s


def parse_touchstone(text: str, declared_ports: Optional[int] = None) -> TouchstoneNetwork:
    """Parse Touchstone v1 text.

    ``declared_ports`` is normally taken from the ``.sNp`` extension.  When it
    is omitted the port count is inferred; the inference must be unambiguous.
    """
    opts: Optional[_Options] = None
    comments: list[str] = []
    data: list[Tuple[int, list[str]]] = []
    for lineno, raw in _data_lines(text):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("!"):
            comments.append(line[1:].strip())
            continue
        if "!" in line:
            line = line.split("!", 1)[0].strip()
        if line.startswith("["):
            raise TouchstoneError(
                f"line {lineno}: Touchstone v2 keyword {line.split()[0]!r}; only v1 is supported"
            )
        if line.startswith("#"):
            if opts is not None:
                raise TouchstoneError(f"line {lineno}: duplicate option line")
            opts = _parse_option_line(line, lineno)
            continue
        if opts is None:
            raise TouchstoneError(f"line {lineno}: data before option line")
        data.append((lineno, line.split()))
    if opts is None:
        raise TouchstoneError("missing option line")
    if not data:
        raise TouchstoneError("no data lines")

    if declared_ports is not None:
        if declared_ports < 1:
            raise TouchstoneError("declared port count must be positive")
        candidates = [declared_ports]
    else:
        candidates = list(range(1, 65))
    parsed = []
    last_error: Optional[TouchstoneError] = None
    for n in candidates:
        try:
            parsed.append((n, _parse_records(data, n)))
        except TouchstoneError as exc:
            last_error = exc
    if not parsed:
        assert last_error is not None
        raise last_error
    if len(parsed) > 1:
        raise TouchstoneError(
            f"ambiguous port count {[p[0] for p in parsed]}; pass declared_ports"
        )
    n, (freqs, rows, starts, noise) = parsed[0]
    if noise:
        log.warning("noise parameter block skipped")

    scale = FREQ_UNITS[opts.unit.lower()]
    f = np.asarray(freqs, dtype=float) * scale
    bad = np.nonzero(np.diff(f) <= 0)[0]
    if bad.size:
        raise TouchstoneError(f"line {starts[bad[0] + 1]}: non-monotonic frequency")
    s = _values_to_matrices(rows, n, opts.fmt)
    comment = "\n".join(comments) if comments else None
    return TouchstoneNetwork(f, s, opts.z0, comment)


# ---------------------------------------------------------------------------
# writing


def _num(x: float) -> str:
    # shortest repr that round-trips exactly
    x = float(x)
    if x == 0:
        return "0"
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _pairs(values: np.ndarray, fmt: str) -> list[Tuple[float, float]]:
    if fmt == "RI":
        return list(zip(values.real.tolist(), values.imag.tolist()))
    mag = np.abs(values)
    ang = np.degrees(np.angle(values))
    if fmt == "MA":
        return list(zip(mag.tolist(), ang.tolist()))
    with np.errstate(divide="ignore"):
        db = np.where(mag > 0, 20.0 * np.log10(np.where(mag > 0, mag, 1.0)), DB_FLOOR)
    return list(zip(db.tolist(), ang.tolist()))


def serialize_touchstone(net: TouchstoneNetwork, format: str = "RI", unit: str = "Hz") -> str:
    """Render ``net`` as Touchstone v1 text in RI, MA or DB format."""
    fmt = format.upper()
    if fmt not in FORMATS:
        raise TouchstoneError(f"unknown data format {format!r}")
    if unit.lower() not in FREQ_UNITS:
        raise TouchstoneError(f"unknown frequency unit {unit!r}")
    scale = FREQ_UNITS[unit.lower()]
    n = net.n_ports
    out: list[str] = []
    if net.source_comment:
        out.extend(f"! {c}" if c else "!" for c in net.source_comment.split("\n"))
    out.append(f"# {unit} S {fmt} R {_num(net.reference_impedance)}")
    for f, m in zip(net.frequencies, net.s):
        fs = _num(f / scale)
        if n <= 2:
            flat = m.T.reshape(-1) if n == 2 else m.reshape(-1)
            cells = [f"{_num(a)} {_num(b)}" for a, b in _pairs(flat, fmt)]
            out.append(" ".join([fs] + cells))
            continue
        for r in range(n):
            cells = [f"{_num(a)} {_num(b)}" for a, b in _pairs(m[r], fmt)]
            for k in range(0, n, PAIRS_PER_LINE):
                chunk = " ".join(cells[k:k + PAIRS_PER_LINE])
                lead = fs if (r == 0 and k == 0) else " " * len(fs)
                out.append(f"{lead} {chunk}")
    return "\n".join(out) + "\n"


_SNP = re.compile(r"\.s(\d+)p$", re.IGNORECASE)


def ports_from_filename(path: Union[str, Path]) -> Optional[int]:
    m = _SNP.search(str(path))
    return int(m.group(1)) if m else None


def read_touchstone(path: Union[str, Path]) -> TouchstoneNetwork:
    path = Path(path)
    return parse_touchstone(path.read_text(), ports_from_filename(path))


def write_touchstone(net: TouchstoneNetwork, path: Union[str, Path], format: str = "RI",
                     unit: str = "Hz") -> Path:
    path = Path(path)
    declared = ports_from_filename(path)
    if declared is not None and declared != net.n_ports:
        raise TouchstoneError(f"{path.name} implies {declared} ports, network has {net.n_ports}")
    path.write_text(serialize_touchstone(net, format, unit))
    return path
