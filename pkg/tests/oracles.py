"""Independent reference implementations used as test oracles.

Each one is written from the underlying physics or algebra, without calling
into the library code it checks.
"""

import cmath
import math

import numpy as np

C0 = 299_792_458.0
EPS0 = 8.8541878128e-12


def cascade_block_oracle(s_t, s_r, s_rt, s_s, s_l):
    """Solve the joint incident/reflected wave system and read off the voltage gain.

    Unknowns are the waves at the transmit ports (a_T into the array, b_T out of
    it) and receive ports (a_R, b_R).  A unit-amplitude source wave x launches
    (I - S_S) x; the load reflects b_R back as a_R = S_L b_R; the port voltage
    is a_R + b_R.  Each column of H is obtained from a unit source vector.
    """
    nt, nr = s_t.shape[0], s_r.shape[0]
    It, Ir = np.eye(nt), np.eye(nr)
    Z = np.zeros
    # rows: transmit-array scattering, source junction, receive-array scattering, load
    A = np.block([
        [-s_t, It, Z((nt, nr)), Z((nt, nr))],
        [It, -s_s, Z((nt, nr)), Z((nt, nr))],
        [-s_rt, Z((nr, nt)), -s_r, Ir],
        [Z((nr, nt)), Z((nr, nt)), Ir, -s_l],
    ]).astype(complex)
    H = np.zeros((nr, nt), dtype=complex)
    for k in range(nt):
        x = np.zeros(nt)
        x[k] = 1.0
        rhs = np.concatenate([np.zeros(nt), (It - s_s) @ x, np.zeros(2 * nr)])
        sol = np.linalg.solve(A, rhs)
        a_r, b_r = sol[2 * nt:2 * nt + nr], sol[2 * nt + nr:]
        H[:, k] = a_r + b_r
    return H


def fresnel_scalar(eps_r, sigma, theta_deg, f):
    """Fresnel reflection from Snell's law with a complex refractive index.

    Returns (Gamma_perp, Gamma_par) in the TE/TM textbook form written with the
    transmitted-angle cosine.
    """
    eps_c = complex(eps_r, -sigma / (2 * math.pi * f * EPS0))
    n = cmath.sqrt(eps_c)
    ti = math.radians(theta_deg)
    cos_i = math.cos(ti)
    sin_t = math.sin(ti) / n
    cos_t = cmath.sqrt(1 - sin_t ** 2)
    # TE: (n1 cos_i - n2 cos_t)/(n1 cos_i + n2 cos_t); TM: (n2 cos_i - n1 cos_t)/(n2 cos_i + n1 cos_t)
    perp = (cos_i - n * cos_t) / (cos_i + n * cos_t)
    par = (n * cos_i - cos_t) / (n * cos_i + cos_t)
    return perp, par


def interp_scalar(freqs, values, f):
    """Linear interpolation of one complex entry written as a plain bracket search."""
    for i in range(len(freqs) - 1):
        f0, f1 = freqs[i], freqs[i + 1]
        if f0 <= f <= f1:
            w = (f - f0) / (f1 - f0)
            re = values[i].real + w * (values[i + 1].real - values[i].real)
            im = values[i].imag + w * (values[i + 1].imag - values[i].imag)
            return complex(re, im)
    raise ValueError("out of range")


def lmmse_sinr_closed_form(G, snr):
    """Per-layer LMMSE SINR 1/[(I + snr G^H G)^-1]_ii - 1."""
    n = G.shape[1]
    m = np.linalg.inv(np.eye(n) + snr * G.conj().T @ G)
    return 1.0 / np.real(np.diag(m)) - 1.0


# ---------------------------------------------------------------------------
# scalar image-method retrace for rectangular, axis-aligned facets


class Rect:
    """Axis-aligned rectangle: plane coordinate ``axis`` = ``level`` with bounds on the others."""

    def __init__(self, axis, level, bounds, eps_r, sigma):
        self.axis, self.level, self.bounds = axis, level, bounds
        self.eps_r, self.sigma = eps_r, sigma
        self.n = np.zeros(3)
        self.n[axis] = 1.0

    def image(self, p):
        q = np.array(p, float)
        q[self.axis] = 2 * self.level - q[self.axis]
        return q

    def inside(self, p):
        others = [i for i in range(3) if i != self.axis]
        return all(lo < p[i] < hi for i, (lo, hi) in zip(others, self.bounds))

    def hit(self, a, b):
        """Intersection parameter of segment a->b with the plane, or None."""
        da, db = a[self.axis] - self.level, b[self.axis] - self.level
        if da * db >= 0:
            return None
        return da / (da - db)


def _blocked(rects, a, b, skip):
    for j, r in enumerate(rects):
        if j in skip:
            continue
        t = r.hit(a, b)
        if t is not None and 1e-9 < t < 1 - 1e-9 and r.inside(a + t * (b - a)):
            return True
    return False


def _reflect_field(e, k_in, k_out, n, gperp, gpar):
    s = np.cross(k_in, n)
    if np.linalg.norm(s) < 1e-12:
        ref = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
        s = np.cross(n, ref)
    s /= np.linalg.norm(s)
    p_in, p_out = np.cross(s, k_in), np.cross(s, k_out)
    return gperp * (e @ s) * s + gpar * (e @ p_in) * p_out


def retrace_pair(rects, a, b, f, e_tx, e_rx, max_bounces=2):
    """Sum over LOS and specular paths for one element pair.

    ``e_tx(direction)`` and ``e_rx(direction)`` return element field vectors;
    the receive pattern is evaluated toward the arriving ray's source.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    total = 0j
    seqs = [()]
    n = len(rects)
    if max_bounces >= 1:
        seqs += [(i,) for i in range(n)]
    if max_bounces >= 2:
        seqs += [(i, j) for i in range(n) for j in range(n) if i != j]
    for seq in seqs:
        images = [a]
        for i in seq:
            images.append(rects[i].image(images[-1]))
        # walk back from the receiver to find the reflection points
        pts = [b]
        ok = True
        target = b
        for k in range(len(seq) - 1, -1, -1):
            r = rects[seq[k]]
            t = r.hit(images[k + 1], target)
            if t is None:
                ok = False
                break
            p = images[k + 1] + t * (target - images[k + 1])
            if not r.inside(p):
                ok = False
                break
            pts.append(p)
            target = p
        if not ok:
            continue
        pts.append(a)
        pts = pts[::-1]
        # legs must not be blocked by facets other than their own end points
        blocked = False
        for i in range(len(pts) - 1):
            skip = set()
            if i > 0:
                skip.add(seq[i - 1])
            if i < len(seq):
                skip.add(seq[i])
            blocked |= _blocked(rects, pts[i], pts[i + 1], skip)
        if blocked:
            continue
        legs = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
        length = sum(np.linalg.norm(v) for v in legs)
        dirs = [v / np.linalg.norm(v) for v in legs]
        e = e_tx(dirs[0]).astype(complex)
        e = e - (dirs[0] @ e) * dirs[0]
        for k, i in enumerate(seq):
            r = rects[i]
            cos_i = abs(dirs[k] @ r.n)
            theta = math.degrees(math.acos(min(1.0, cos_i)))
            gperp, gpar = fresnel_scalar(r.eps_r, r.sigma, theta, f)
            e = _reflect_field(e, dirs[k], dirs[k + 1], r.n, gperp, gpar)
        er = e_rx(-dirs[-1]).astype(complex)
        total += (er @ e) * cmath.exp(-2j * math.pi * f * length / C0) / (4 * math.pi * length)
    return total
