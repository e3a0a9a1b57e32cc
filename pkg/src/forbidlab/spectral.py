"""Fourier tools on the periodic grid: symbols, derivatives, off-grid
trigonometric interpolation and mollified point sources."""
from __future__ import annotations

import numpy as np

from .geometry import TorusDomain


def wavenumbers(domain: TorusDomain) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(domain.n, d=domain.dx)


def laplace_symbol(domain: TorusDomain, scheme="spectral") -> np.ndarray:
    """Symbol of -Delta, shape (n, n), in FFT ordering."""
    return symbol_1d(domain, scheme)[:, None] + symbol_1d(domain, scheme)[None, :]


def symbol_1d(domain: TorusDomain, scheme="spectral", k=None):
    k = wavenumbers(domain) if k is None else k
    if scheme == "spectral":
        return k * k
    if scheme == "fd":
        dx = domain.dx
        return (4.0 / dx ** 2) * np.sin(0.5 * k * dx) ** 2
    raise ValueError(f"unknown scheme {scheme!r}")


def gradient(u: np.ndarray, domain: TorusDomain):
    k = wavenumbers(domain)
    uh = np.fft.fft2(u)
    kx = k.copy()
    kx[domain.n // 2] = 0.0  # Nyquist derivative of a real field is dropped
    gx = np.fft.ifft2(1j * kx[:, None] * uh).real
    gy = np.fft.ifft2(1j * kx[None, :] * uh).real
    return gx, gy


class TrigInterpolant:
    """Band-limited interpolant of grid values, evaluable anywhere.

    The Nyquist mode is split symmetrically so the interpolant is real on
    real points and reproduces the grid values exactly.  Complex points give
    the holomorphic extension.
    """

    def __init__(self, values: np.ndarray, domain: TorusDomain):
        self.domain = domain
        self.coef = np.fft.fft2(values) / domain.n ** 2
        self.k = wavenumbers(domain)

    def _basis(self, s, order):
        """Matrix of d^order/ds^order of the 1D basis at offsets ``s``."""
        n = self.domain.n
        k = self.k
        B = (1j * k) ** order * np.exp(1j * np.multiply.outer(s, k))
        kn = k[n // 2]
        # symmetric Nyquist: cos(kn s) instead of exp(i kn s)
        B[..., n // 2] = kn ** order * np.cos(kn * s + 0.5 * np.pi * order)
        return B

    def derivative(self, pts, ox=0, oy=0):
        pts = np.asarray(pts)
        shape = pts.shape[:-1]
        p = pts.reshape(-1, 2)
        x0 = self.domain.x0
        out = np.empty(p.shape[0], dtype=complex)
        chunk = max(1, 2 ** 22 // self.domain.n ** 2 * 64)
        for s in range(0, p.shape[0], chunk):
            q = p[s:s + chunk]
            Bx = self._basis(q[:, 0] - x0, ox)
            By = self._basis(q[:, 1] - x0, oy)
            out[s:s + chunk] = np.einsum("pj,jl,pl->p", Bx, self.coef, By, optimize=True)
        out = out.reshape(shape)
        if np.isrealobj(pts):
            return out.real
        return out

    def __call__(self, pts):
        return self.derivative(pts)

    def grad(self, pts):
        return self.derivative(pts, 1, 0), self.derivative(pts, 0, 1)


def gaussian_source_hat(domain: TorusDomain, y, sigma: float) -> np.ndarray:
    """FFT coefficients (numpy convention) of a unit-mass periodic Gaussian at ``y``."""
    k = wavenumbers(domain)
    x0 = domain.x0
    gx = np.exp(-0.5 * sigma ** 2 * k ** 2 - 1j * k * (y[0] - x0))
    gy = np.exp(-0.5 * sigma ** 2 * k ** 2 - 1j * k * (y[1] - x0))
    return np.outer(gx, gy) / domain.dx ** 2


def periodic_coefficients(samples):
    """Fourier coefficients c_k, k=-K..K (K = N/2 - 1) of equispaced samples on [0, 2pi)."""
    v = np.asarray(samples)
    N = v.shape[-1]
    K = N // 2 - 1
    F = np.fft.fft(v, axis=-1) / N
    ks = np.arange(-K, K + 1)
    return ks, F[..., ks % N]


def eval_fourier_1d(ks, c, t):
    """sum_k c_k e^{ikt}; ``t`` may be complex."""
    t = np.asarray(t)
    flat_t = t.ravel()
    chunk = 4096
    res = np.empty(flat_t.shape, dtype=complex)
    for s in range(0, flat_t.size, chunk):
        res[s:s + chunk] = np.exp(1j * np.multiply.outer(flat_t[s:s + chunk], ks)) @ c
    return res.reshape(t.shape)


def fourier_upsample(samples, factor):
    """Values of the trigonometric interpolant on a grid ``factor`` times finer."""
    v = np.asarray(samples, dtype=float)
    N = v.size
    F = np.fft.fft(v)
    M = N * factor
    G = np.zeros(M, dtype=complex)
    half = N // 2
    G[:half] = F[:half]
    G[M - half + 1:] = F[half + 1:]
    # split the Nyquist mode
    G[half] = 0.5 * F[half]
    G[M - half] = 0.5 * F[half]
    return np.fft.ifft(G).real * factor
