"""Transmit/receive processing schemes and their achievable rates.

All kernels accept a single channel (n_rx, n_tx) or a stack (n_users, n_rx, n_tx);
rows of H are the per-antenna channels h_i^T, so MRT toward row i is
w = conj(h_i) / ||h_i||.  The multi-stream precoder is W = H^H / ||H||_F.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "Scheme",
    "LinkBudget",
    "RateResult",
    "dbm_to_watts",
    "watts_to_dbm",
    "rate_miso_1x1",
    "rate_mrc_2x1",
    "lmmse_equalize",
    "rate_lmmse_two_layer",
    "rate_lmmse_one_layer",
    "rate_optimal",
    "sic_layer_rates",
    "scheme_rates",
    "average_receive_snr",
    "noise_power_for_snr",
]

LN2 = math.log(2.0)


class Scheme(str, enum.Enum):
    MISO_1X1 = "miso_1x1"
    MRC_2X1 = "mrc_2x1"
    LMMSE_ONE_LAYER = "lmmse_one_layer"
    LMMSE_TWO_LAYER = "lmmse_two_layer"
    OPTIMAL = "optimal"

    def __str__(self) -> str:
        return self.value


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass(frozen=True)
class LinkBudget:
    """Bandwidth B (Hz), signal power P_x (W) and noise power P_n (W)."""

    bandwidth: float
    signal_power: float
    noise_power: float

    def __post_init__(self):
        for name in ("bandwidth", "signal_power", "noise_power"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @classmethod
    def from_dbm(cls, bandwidth: float, signal_dbm: float, noise_dbm: float) -> "LinkBudget":
        return cls(bandwidth, float(dbm_to_watts(signal_dbm)), float(dbm_to_watts(noise_dbm)))

    @property
    def snr(self) -> float:
        return self.signal_power / self.noise_power


@dataclass(frozen=True)
class RateResult:
    scheme: Scheme
    rate: float
    per_layer: Optional[Tuple[float, ...]] = None
    effective_sinr: Optional[Tuple[float, ...]] = None
    degenerate: bool = False


def _capacity(bandwidth, sinr):
    return bandwidth * np.log1p(sinr) / LN2


def _stack(h, min_rx: int = 1) -> np.ndarray:
    a = np.asarray(h, dtype=complex)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise ValueError(f"channel must be 1-, 2- or 3-dimensional, got shape {a.shape}")
    if a.shape[1] < min_rx:
        raise ValueError(f"need at least {min_rx} receive antennas, got {a.shape[1]}")
    return a


# ---------------------------------------------------------------------------
# batch kernels


def miso_sinr(h, snr: float) -> np.ndarray:
    """||h||^2 P_x / P_n for MRT toward h; h is (n_tx,) or (n_users, n_tx)."""
    h = np.asarray(h, dtype=complex)
    return np.sum(np.abs(h) ** 2, axis=-1) * snr


def mrc_sinr(H, snr: float, target: int = 0) -> np.ndarray:
    H = _stack(H, 2)
    ht = H[:, target, :]
    norms = np.linalg.norm(ht, axis=-1)
    if np.any(norms == 0):
        raise ValueError(f"MRT target row {target} is zero")
    w = ht.conj() / norms[:, None]
    g = np.einsum("urt,ut->ur", H, w)
    return np.sum(np.abs(g) ** 2, axis=-1) * snr


def _precoded(H) -> np.ndarray:
    """G = H W with W = H^H / ||H||_F."""
    norms = np.linalg.norm(H, axis=(1, 2))
    if np.any(norms == 0):
        raise ValueError("channel is zero")
    return H @ np.conj(np.swapaxes(H, 1, 2)) / norms[:, None, None]


def lmmse_batch(H, lb: LinkBudget):
    """Per-layer equivalent gains |h~_i| and error powers P_e_i, both (n_users, n_layers)."""
    H = _stack(H)
    G = _precoded(H)
    n = G.shape[1]
    px, pn = lb.signal_power, lb.noise_power
    Gh = np.conj(np.swapaxes(G, 1, 2))
    cov = px * G @ Gh + pn * np.eye(n)
    # L = P_x G^H cov^-1, computed as solve(cov^H, P_x G)^H
    L = np.conj(np.swapaxes(np.linalg.solve(np.conj(np.swapaxes(cov, 1, 2)), px * G), 1, 2))
    A = L @ G
    diag = np.abs(np.diagonal(A, axis1=1, axis2=2))
    interference = (np.sum(np.abs(A) ** 2, axis=2) - diag ** 2) * px
    filtered_noise = np.real(np.einsum("uij,uij->ui", L, L.conj())) * pn
    return diag, interference + filtered_noise


def sic_layer_rates(H, lb: LinkBudget) -> np.ndarray:
    """MMSE-SIC per-layer rates (n_users, n_layers); layer k sees layers > k as interference."""
    H = _stack(H)
    G = _precoded(H)
    snr = lb.snr
    n = G.shape[1]
    out = np.empty((G.shape[0], n))
    for k in range(n):
        rest = G[:, :, k + 1:]
        cov = np.eye(n) + snr * rest @ np.conj(np.swapaxes(rest, 1, 2))
        g = G[:, :, k]
        x = np.linalg.solve(cov, g[..., None])[..., 0]
        sinr = snr * np.real(np.einsum("ui,ui->u", g.conj(), x))
        out[:, k] = _capacity(lb.bandwidth, sinr)
    return out


def optimal_rates(H, lb: LinkBudget) -> np.ndarray:
    """B log2 det(I + (P_x/P_n) H^H W W^H H), evaluated as det(I + rho G^H G)."""
    H = _stack(H)
    norms = np.linalg.norm(H, axis=(1, 2))
    out = np.zeros(H.shape[0])
    ok = norms > 0
    if np.any(ok):
        G = _precoded(H[ok])
        n = G.shape[1]
        m = np.eye(n) + lb.snr * np.conj(np.swapaxes(G, 1, 2)) @ G
        sign, logdet = np.linalg.slogdet(m)
        out[ok] = lb.bandwidth * logdet / LN2
    return out


def one_layer_sinr(gain, err, px: float) -> np.ndarray:
    """(sum |h~|^2)^2 P_x / sum |h~|^2 P_e over layers (last axis)."""
    g2 = np.asarray(gain) ** 2
    return np.sum(g2, axis=-1) ** 2 * px / np.sum(g2 * np.asarray(err), axis=-1)


# ---------------------------------------------------------------------------
# single-channel API


def rate_miso_1x1(h, lb: LinkBudget) -> RateResult:
    """Single antenna, MRT at the base station: B log2(1 + ||h||^2 P_x / P_n)."""
    h = np.asarray(h, dtype=complex).reshape(-1)
    sinr = float(miso_sinr(h, lb.snr))
    return RateResult(Scheme.MISO_1X1, float(_capacity(lb.bandwidth, sinr)),
                      effective_sinr=(sinr,), degenerate=sinr == 0.0)


def rate_mrc_2x1(H, beam_target: int, lb: LinkBudget) -> RateResult:
    """MRT toward row ``beam_target``, maximal-ratio combining over all receive rows."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] < 2:
        raise ValueError("MRC needs a (>=2, n_tx) channel")
    if not 0 <= beam_target < H.shape[0]:
        raise ValueError(f"beam target {beam_target} out of range")
    sinr = float(mrc_sinr(H, lb.snr, beam_target)[0])
    return RateResult(Scheme.MRC_2X1, float(_capacity(lb.bandwidth, sinr)), effective_sinr=(sinr,))


def lmmse_equalize(H, lb: LinkBudget):
    """Scalar equivalent gains |h~_i| and error powers P_e_i after LMMSE equalization."""
    gain, err = lmmse_batch(np.asarray(H, dtype=complex)[None], lb)
    return gain[0], err[0]


def rate_lmmse_two_layer(H, lb: LinkBudget) -> RateResult:
    gain, err = lmmse_equalize(H, lb)
    sinr = gain ** 2 * lb.signal_power / err
    layers = _capacity(lb.bandwidth, sinr)
    return RateResult(Scheme.LMMSE_TWO_LAYER, float(np.sum(layers)),
                      per_layer=tuple(layers.tolist()), effective_sinr=tuple(sinr.tolist()))


def rate_lmmse_one_layer(H, lb: LinkBudget) -> RateResult:
    gain, err = lmmse_equalize(H, lb)
    sinr = float(one_layer_sinr(gain, err, lb.signal_power))
    return RateResult(Scheme.LMMSE_ONE_LAYER, float(_capacity(lb.bandwidth, sinr)),
                      effective_sinr=(sinr,))


def rate_optimal(H, lb: LinkBudget) -> RateResult:
    """Log-det rate with W = H^H/||H||_F; ``per_layer`` is the MMSE-SIC split."""
    H = np.asarray(H, dtype=complex)
    if H.ndim == 1:
        H = H[None, :]
    rate = float(optimal_rates(H, lb)[0])
    if not np.any(H):
        return RateResult(Scheme.OPTIMAL, 0.0, per_layer=(0.0,) * H.shape[0], degenerate=True)
    layers = sic_layer_rates(H, lb)[0]
    return RateResult(Scheme.OPTIMAL, rate, per_layer=tuple(layers.tolist()))


# ---------------------------------------------------------------------------
# ensemble helpers


def scheme_rates(scheme, channels, lb: LinkBudget, beam_target: int = 0) -> np.ndarray:
    """Rates (bits/s) of ``scheme`` for every channel in a (n_users, n_rx, n_tx) stack.

    ``beam_target`` selects the dedicated receive antenna used by the
    single-antenna and MRC schemes.
    """
    scheme = Scheme(scheme)
    H = _stack(channels)
    if scheme is Scheme.MISO_1X1:
        return _capacity(lb.bandwidth, miso_sinr(H[:, beam_target, :], lb.snr))
    if scheme is Scheme.MRC_2X1:
        return _capacity(lb.bandwidth, mrc_sinr(H, lb.snr, beam_target))
    if scheme is Scheme.OPTIMAL:
        return optimal_rates(H, lb)
    gain, err = lmmse_batch(H, lb)
    if scheme is Scheme.LMMSE_TWO_LAYER:
        return np.sum(_capacity(lb.bandwidth, gain ** 2 * lb.signal_power / err), axis=1)
    return _capacity(lb.bandwidth, one_layer_sinr(gain, err, lb.signal_power))


def average_receive_snr(channels, lb: LinkBudget) -> float:
    """Mean over users and receive ports of the single-antenna MRT SNR ||h_i||^2 P_x / P_n."""
    H = _stack(channels)
    return float(np.mean(np.sum(np.abs(H) ** 2, axis=2)) * lb.snr)


def noise_power_for_snr(channels, signal_power: float, snr_db: float) -> float:
    """Noise power (W) that puts :func:`average_receive_snr` at ``snr_db``."""
    H = _stack(channels)
    gain = float(np.mean(np.sum(np.abs(H) ** 2, axis=2)))
    return gain * signal_power / 10.0 ** (snr_db / 10.0)
