"""Scattering-matrix algebra and the cascaded multiport channel.

The end-to-end voltage gain from transmit sources to receive loads is::

    H = (I + S_L) (I - S_R S_L)^-1  S_RT  (I - S_S S_T)^-1 (I - S_S)

with S_T / S_R the transmit / receive antenna reflection blocks, S_RT the
propagation transmission block and S_S / S_L the source and load
terminations.  Matched 50 ohm terminations are S_S = S_L = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .touchstone import TouchstoneNetwork, check_scattering

__all__ = [
    "CONDITION_LIMIT",
    "MultiportError",
    "MatchingNetworkResonance",
    "TerminationSet",
    "cascade_channel",
    "frobenius_norm",
    "interpolate_network",
    "radiation_efficiency",
]

CONDITION_LIMIT = 1e12


class MultiportError(ValueError):
    pass


class MatchingNetworkResonance(MultiportError):
    """An inverted factor of the cascade is numerically singular."""

    def __init__(self, which: str, condition: float):
        self.which = which
        self.condition = condition
        super().__init__(
            f"matching network resonance: {which} has condition number {condition:.3e} "
            f"(limit {CONDITION_LIMIT:.0e})"
        )


@dataclass(frozen=True)
class TerminationSet:
    """Source (transmit side) and load (receive side) termination matrices."""

    source: np.ndarray
    load: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "source", check_scattering(self.source, passive=True))
        object.__setattr__(self, "load", check_scattering(self.load, passive=True))

    @classmethod
    def matched(cls, n_tx: int, n_rx: int) -> "TerminationSet":
        return cls(np.zeros((n_tx, n_tx), complex), np.zeros((n_rx, n_rx), complex))

    @property
    def n_tx(self) -> int:
        return self.source.shape[0]

    @property
    def n_rx(self) -> int:
        return self.load.shape[0]


def _guarded_solve(a: np.ndarray, b: np.ndarray, which: str) -> np.ndarray:
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise MatchingNetworkResonance(which, float(cond))
    return np.linalg.solve(a, b)


def cascade_channel(s_t, s_r, s_rt, term: Optional[TerminationSet] = None) -> np.ndarray:
    """Channel matrix H (n_rx x n_tx) of the cascaded source/antenna/medium/load chain.

    Parameters
    ----------
    s_t : (n_tx, n_tx) complex
        Transmit antenna scattering matrix.
    s_r : (n_rx, n_rx) complex
        Receive antenna scattering matrix.
    s_rt : (n_rx, n_tx) complex
        Transmission block of the propagation medium.
    term : TerminationSet, optional
        Source and load terminations; matched (zero) when omitted.

    Raises
    ------
    MultiportError
        On any dimension mismatch.
    MatchingNetworkResonance
        When ``I - S_R S_L`` or ``I - S_S S_T`` has condition number above 1e12.
    """
    s_t = check_scattering(s_t)
    s_r = check_scattering(s_r)
    s_rt = np.asarray(s_rt, dtype=complex)
    n_tx, n_rx = s_t.shape[0], s_r.shape[0]
    if s_rt.shape != (n_rx, n_tx):
        raise MultiportError(
            f"S_RT shape {s_rt.shape} does not match ({n_rx} rx, {n_tx} tx) antenna ports"
        )
    if not np.all(np.isfinite(s_rt)):
        raise MultiportError("S_RT has non-finite entries")
    if term is None:
        term = TerminationSet.matched(n_tx, n_rx)
    if term.n_tx != n_tx or term.n_rx != n_rx:
        raise MultiportError(
            f"terminations are ({term.n_rx} rx, {term.n_tx} tx), antennas are ({n_rx}, {n_tx})"
        )
    eye_t = np.eye(n_tx, dtype=complex)
    eye_r = np.eye(n_rx, dtype=complex)
    # transmit side: (I - S_S S_T)^-1 (I - S_S)
    tx = _guarded_solve(eye_t - term.source @ s_t, eye_t - term.source, "I - S_S S_T")
    rx = _guarded_solve(eye_r - s_r @ term.load, s_rt @ tx, "I - S_R S_L")
    return (eye_r + term.load) @ rx


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=complex)))


def interpolate_network(net: TouchstoneNetwork, f: float) -> np.ndarray:
    """Scattering matrix at ``f`` Hz by linear interpolation of real and imaginary parts."""
    freqs = net.frequencies
    if not freqs[0] <= f <= freqs[-1]:
        raise MultiportError(
            f"frequency {f:.6g} Hz outside sweep [{freqs[0]:.6g}, {freqs[-1]:.6g}] Hz"
        )
    k = int(np.searchsorted(freqs, f, side="left"))
    if freqs[k] == f:
        return np.array(net.s[k])
    f0, f1 = freqs[k - 1], freqs[k]
    t = (f - f0) / (f1 - f0)
    return (1.0 - t) * net.s[k - 1] + t * net.s[k]


def radiation_efficiency(s) -> np.ndarray:
    """Per-port accepted power fraction ``1 - sum_i |S_ij|^2`` of a passive antenna block."""
    s = check_scattering(s)
    return np.clip(1.0 - np.sum(np.abs(s) ** 2, axis=0), 0.0, 1.0)
