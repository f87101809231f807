"""Outage curves, diversity and multiplexing gains, and S-parameter ECC."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .linkproc import LinkBudget, Scheme
from .touchstone import check_scattering

__all__ = [
    "AnalysisError",
    "ThresholdOutOfRange",
    "OutageCurve",
    "GainReport",
    "outage_cdf",
    "diversity_gain",
    "multiplexing_gain",
    "ecc_from_sparams",
    "isolation_db",
    "curves_to_csv",
    "CSV_COLUMNS",
    "CSV_SCHEMA_VERSION",
    "REPORT_SCHEMA_VERSION",
]

CSV_COLUMNS = ("scheme", "snr_db", "rate_bps", "cdf")
CSV_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
DEFAULT_OUTAGE_QUANTILE = 0.1


class AnalysisError(ValueError):
    pass


class ThresholdOutOfRange(AnalysisError):
    def __init__(self, message: str, suggestion: Optional[float] = None):
        self.suggestion = suggestion
        if suggestion is not None:
            message += f"; nearest usable threshold {suggestion:.6g} bits/s"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class OutageCurve:
    """Empirical rate CDF stored as the sorted-sample staircase."""

    scheme: Scheme
    rates: np.ndarray
    budget: Optional[LinkBudget] = None

    @property
    def n_samples(self) -> int:
        return self.rates.size

    @property
    def cdf(self) -> np.ndarray:
        return np.arange(1, self.n_samples + 1) / self.n_samples

    @property
    def points(self) -> list:
        return list(zip(self.rates.tolist(), self.cdf.tolist()))

    def probability(self, threshold: float) -> float:
        """Outage probability P(R <= threshold)."""
        return int(np.searchsorted(self.rates, threshold, side="right")) / self.n_samples

    def quantile(self, q: float) -> float:
        """Smallest sample rate whose CDF reaches ``q``."""
        if not 0 < q <= 1:
            raise AnalysisError("quantile must be in (0, 1]")
        k = max(int(math.ceil(q * self.n_samples - 1e-9)), 1)
        return float(self.rates[k - 1])

    def median(self) -> float:
        return float(np.median(self.rates))


def outage_cdf(rates: Iterable[float], scheme, budget: Optional[LinkBudget] = None) -> OutageCurve:
    r = np.sort(np.asarray(list(rates) if not isinstance(rates, np.ndarray) else rates,
                           dtype=float).reshape(-1))
    if r.size == 0:
        raise AnalysisError("outage curve needs at least one rate sample")
    if not np.all(np.isfinite(r)):
        raise AnalysisError("rates must be finite")
    r.flags.writeable = False
    return OutageCurve(Scheme(scheme), r, budget)


def _usable_threshold(c2: OutageCurve, c1: OutageCurve, threshold: float) -> Optional[float]:
    grid = np.union1d(c1.rates, c2.rates)
    ok = [t for t in grid if 0 < c1.probability(t) < 1 and 0 < c2.probability(t) < 1]
    if not ok:
        return None
    ok = np.asarray(ok)
    return float(ok[np.argmin(np.abs(ok - threshold))])


def diversity_gain(curve_2x1: OutageCurve, curve_1x1: OutageCurve,
                   threshold_rate: Optional[float] = None,
                   quantile: float = DEFAULT_OUTAGE_QUANTILE) -> float:
    """log10(p_2x1) / log10(p_1x1) at a common rate threshold.

    The default threshold is the rate where the 1x1 curve reaches ``quantile``.
    """
    if threshold_rate is None:
        threshold_rate = curve_1x1.quantile(quantile)
    p2 = curve_2x1.probability(threshold_rate)
    p1 = curve_1x1.probability(threshold_rate)
    if not (0 < p2 < 1 and 0 < p1 < 1):
        raise ThresholdOutOfRange(
            f"threshold {threshold_rate:.6g} bits/s outside measurable range "
            f"(outage {p2:.4g} vs {p1:.4g})",
            _usable_threshold(curve_2x1, curve_1x1, threshold_rate),
        )
    return math.log10(p2) / math.log10(p1)


def multiplexing_gain(curves_by_snr: Sequence, bandwidth: float) -> float:
    """Least-squares slope of median rate / B against log2(SNR).

    ``curves_by_snr`` holds (snr_db, median_rate) pairs.
    """
    pts = np.asarray([(float(s), float(r)) for s, r in curves_by_snr])
    if pts.shape[0] < 2:
        raise AnalysisError("multiplexing gain needs at least two SNR points")
    if np.ptp(pts[:, 0]) < 10.0:
        raise AnalysisError(
            f"insufficient SNR span {np.ptp(pts[:, 0]):.3g} dB (need >= 10 dB)"
        )
    if not bandwidth > 0:
        raise AnalysisError("bandwidth must be positive")
    x = pts[:, 0] / 10.0 * math.log2(10.0)
    y = pts[:, 1] / bandwidth
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def ecc_from_sparams(s) -> float:
    """Envelope correlation coefficient of a passive two-port from its S-matrix."""
    s = check_scattering(s)
    if s.shape != (2, 2):
        raise AnalysisError("ECC needs a 2x2 scattering matrix")
    s11, s12, s21, s22 = s[0, 0], s[0, 1], s[1, 0], s[1, 1]
    num = abs(np.conj(s11) * s12 + np.conj(s21) * s22) ** 2
    d1 = 1 - abs(s11) ** 2 - abs(s21) ** 2
    d2 = 1 - abs(s22) ** 2 - abs(s12) ** 2
    if d1 <= 0 or d2 <= 0:
        raise AnalysisError("port efficiency degenerate (non-positive ECC denominator)")
    return float(num / (d1 * d2))


def isolation_db(s) -> float:
    s = check_scattering(s)
    if s.shape != (2, 2):
        raise AnalysisError("isolation needs a 2x2 scattering matrix")
    mag = abs(s[1, 0])
    return -math.inf if mag == 0 else 20.0 * math.log10(mag)


@dataclass
class GainReport:
    """Summary metrics of one run.  Unmeasurable quantities are ``None`` with a note."""

    diversity_gain: Optional[float]
    multiplexing_gain: Optional[float]
    ecc: Optional[float]
    isolation_db: Optional[float]
    threshold_rate: Optional[float]
    snr_points: list
    diversity_gain_by_snr: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    schema_version: int = REPORT_SCHEMA_VERSION

    def __post_init__(self):
        if self.ecc is not None and not 0.0 <= self.ecc <= 1.0:
            raise AnalysisError(f"ECC {self.ecc} outside [0, 1]")
        if self.diversity_gain is not None and not self.diversity_gain > 0:
            raise AnalysisError("diversity gain must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GainReport":
        doc = json.loads(text)
        if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise AnalysisError(f"unsupported report schema {doc.get('schema_version')!r}")
        return cls(**doc)


def curves_to_csv(curves: Sequence, snr_db: float) -> str:
    """CSV text with one row per staircase point of every curve."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for curve in curves:
        for rate, p in zip(curve.rates.tolist(), curve.cdf.tolist()):
            w.writerow([curve.scheme.value, repr(float(snr_db)), repr(rate), repr(p)])
    return buf.getvalue()
