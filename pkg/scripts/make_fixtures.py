#!/usr/bin/env python3
"""Regenerate the shipped scene and S-parameter fixtures in src/mpmimo/data/."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from mpmimo.analysis import ecc_from_sparams
from mpmimo.propagation import CONCRETE, Facet, Scene, save_scene
from mpmimo.touchstone import TouchstoneNetwork, write_touchstone

DATA = Path(__file__).resolve().parents[1] / "src" / "mpmimo" / "data"

ISOLATION = 10 ** (-22 / 20)   # |S21| = -22 dB
MATCHED = 10 ** (-20 / 20)     # |S11| = -20 dB
TARGET_ECC = 0.04


def ue_network() -> TouchstoneNetwork:
    # port 1 is the 2.46 GHz antenna, port 2 the 3.16 GHz antenna
    def ecc_at(s11):
        return ecc_from_sparams([[s11, ISOLATION], [ISOLATION, MATCHED]]) - TARGET_ECC

    s11_316 = brentq(ecc_at, 0.0, 0.99, xtol=1e-15)
    rows = [
        # f GHz, |S11|, |S22|, S11 phase deg, S22 phase deg
        (2.40, 0.20, 0.80, -30.0, 60.0),
        (2.46, MATCHED, 0.786, 0.0, 45.0),
        (2.52, 0.20, 0.75, 30.0, 30.0),
        (3.10, 0.88, 0.20, -20.0, -40.0),
        (3.16, s11_316, MATCHED, 0.0, 0.0),
        (3.22, 0.90, 0.20, 20.0, 40.0),
    ]
    freqs, mats = [], []
    for f, a, b, pa, pb in rows:
        s21 = ISOLATION * (1.0 if f == 3.16 else np.exp(1j * math.radians(10 * (f - 3.16))))
        m = np.array([[a * np.exp(1j * math.radians(pa)), s21],
                      [s21, b * np.exp(1j * math.radians(pb))]])
        freqs.append(f * 1e9)
        mats.append(m)
    return TouchstoneNetwork(freqs, mats, 50.0,
                             "dual-band handset pair, port 1: 2.46 GHz, port 2: 3.16 GHz\n"
                             "3.16 GHz point built for |S21| = -22 dB and S-parameter ECC = 0.04")


def bs_network(seed: int = 16) -> TouchstoneNetwork:
    rng = np.random.default_rng(seed)
    n = 16
    freqs = np.array([1.0, 2.0, 3.0, 3.16, 4.0, 5.0]) * 1e9
    mats = []
    for _ in freqs:
        m = np.zeros((n, n), complex)
        for i in range(n):
            m[i, i] = 10 ** (rng.uniform(-18, -14) / 20) * np.exp(2j * np.pi * rng.random())
        for i in range(n):
            for j in range(i + 1, n):
                # co-sited dual-pol pairs and grid neighbours couple more strongly
                level = -25.0 if (i // 2 == j // 2 or abs(i - j) == 2) else -40.0
                c = 10 ** ((level + rng.uniform(-2, 2)) / 20) * np.exp(2j * np.pi * rng.random())
                m[i, j] = m[j, i] = c
        assert np.linalg.norm(m, 2) < 1
        mats.append(m)
    return TouchstoneNetwork(freqs, mats, 50.0, "16-port connected slot array stand-in, 1-5 GHz")


def synthetic_scene() -> Scene:
    ground = Facet([[-300, -300, 0], [300, -300, 0], [300, 300, 0], [-300, 300, 0]],
                   CONCRETE, "road", "ground")
    east = Facet([[230, -220, 0], [230, 220, 0], [230, 220, 40], [230, -220, 40]],
                 CONCRETE, "building", "east wall")
    north = Facet([[-220, 240, 0], [220, 240, 0], [220, 240, 30], [-220, 240, 30]],
                  CONCRETE, "building", "north wall")
    west = Facet([[-235, -200, 0], [-235, 200, 0], [-235, 200, 35], [-235, -200, 35]],
                 CONCRETE, "building", "west wall")
    return Scene([ground, east, north, west], 3.16e9)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    write_touchstone(ue_network(), DATA / "ue_dualband.s2p", "MA", "GHz")
    write_touchstone(bs_network(), DATA / "bs_slot16.s16p", "RI", "GHz")
    save_scene(synthetic_scene(), DATA / "scene_synthetic.yaml")


if __name__ == "__main__":
    main()
