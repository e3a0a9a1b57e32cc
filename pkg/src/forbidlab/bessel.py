"""Modified Bessel function K0 for real and complex arguments (principal
branch): power series below |z| = 8, Hankel asymptotic expansion above."""
from __future__ import annotations

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SWITCH = 8.0


def _k0_series(z):
    q = 0.25 * z * z
    term = np.ones_like(z)
    i0 = np.ones_like(z)
    tail = np.zeros_like(z)
    harm = 0.0
    for k in range(1, 80):
        term = term * q / (k * k)
        harm += 1.0 / k
        i0 = i0 + term
        tail = tail + term * harm
        if np.all(np.abs(term) * max(harm, 1.0) < 1e-18 * np.abs(i0)):
            break
    return -(np.log(0.5 * z) + EULER_GAMMA) * i0 + tail


def _k0_asymptotic(z):
    s = np.ones_like(z)
    term = np.ones_like(z)
    best = np.abs(term)
    for k in range(1, 60):
        term = term * (-(2 * k - 1) ** 2) / (8.0 * k * z)
        mag = np.abs(term)
        # stop at the smallest term (optimal truncation)
        grow = mag > best
        if np.all(grow) or np.all(mag < 1e-17):
            break
        term = np.where(grow, 0.0, term)
        s = s + term
        best = np.minimum(best, mag)
    return np.sqrt(np.pi / (2 * z)) * np.exp(-z) * s


def k0(z):
    """K0(z); complex input gives the principal branch, real input must be > 0."""
    z = np.asarray(z)
    cplx = np.iscomplexobj(z)
    zz = z.astype(complex) if cplx else z.astype(float)
    if not cplx and np.any(zz <= 0):
        raise ValueError("K0 of a nonpositive real argument")
    out = np.empty(zz.shape, dtype=zz.dtype)
    small = np.abs(zz) < SWITCH
    if small.any():
        out[small] = _k0_series(zz[small])
    if (~small).any():
        out[~small] = _k0_asymptotic(zz[~small])
    return out if out.ndim else out[()]
