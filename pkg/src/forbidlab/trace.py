"""Holomorphic continuation of the normalized curve trace into a strip and
argument-principle zero counts."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import ContourZero, NonAnalyticTrace, StripExceeded, ZeroTrace
from .nodal import CurveSamples, count_sign_changes, restriction_norms
from .spectral import eval_fourier_1d, periodic_coefficients

TAU_MAX = 1.0
TAIL_REL = 1e-8


@dataclass
class ComplexTrace:
    """F(t) = sum_{|k| <= K} c_k e^{ikt}, normalized by the L2(H) norm of the samples.

    ``kept`` marks the band below the round-off plateau; strip evaluation
    uses only those.  The tail beyond the band is modelled by the fitted
    decay ``amp * exp(-rho_hat |k|)``.
    """

    ks: np.ndarray
    coef: np.ndarray
    rho_hat: float
    tau_adm: float
    norm: float
    kept: np.ndarray
    h: float = float("nan")
    max_abs: float = 1.0
    amp: float = 0.0

    @property
    def K(self):
        return int(self.ks.max())

    @property
    def effective_K(self):
        return int(np.max(np.abs(self.ks[self.kept]))) if self.kept.any() else 0

    def tail_bound(self, tau):
        """Modelled sum_{|k| > K_eff} |c_k| e^{tau |k|} (infinite if tau >= rho_hat)."""
        if self.amp == 0 or math.isinf(self.rho_hat):
            return 0.0
        a = self.rho_hat - tau
        if a <= 0:
            return math.inf
        K = self.effective_K
        return 2 * self.amp * math.exp(-a * (K + 1)) / (1 - math.exp(-a))

    def __call__(self, t):
        return eval_fourier_1d(self.ks[self.kept], self.coef[self.kept], t)


def _envelope(ks, c):
    K = int(ks.max())
    a = np.abs(c)
    e = np.zeros(K + 1)
    for k in range(K + 1):
        e[k] = max(a[ks == k][0], a[ks == -k][0])
    return e


def decay_fit(ks, c):
    """Fit log|c_k| ~ -rho |k| on the resolved part of the spectrum.

    Returns (rho, amplitude, K_resolved, kind) with kind in
    ``"polynomial"``, ``"analytic"``, ``"noise"``.
    """
    e = _envelope(ks, c)
    K = e.size - 1
    top = e.max()
    plateau = float(np.median(e[(3 * K) // 4:])) if K >= 4 else 0.0
    floor = max(10 * plateau, 1e-15 * top)
    if floor > 1e-3 * top:
        kk = np.arange(K + 1)
        good = e > 0
        slope = np.polyfit(kk[good], np.log(e[good]), 1)[0] if good.sum() > 1 else 0.0
        return max(-slope, 0.0), 0.0, K, "noise"
    resolved = np.nonzero(e > floor)[0]
    kres = int(resolved.max())
    # a cliff straight down to the plateau means a band-limited trace
    if np.count_nonzero(resolved > 0) < 3 or e[kres] > 1e4 * floor:
        return math.inf, 0.0, kres, "polynomial"
    sel = resolved[resolved >= kres / 2]
    if sel.size < 2:
        sel = resolved[-2:]
    slope, _ = np.polyfit(sel, np.log(e[sel]), 1)
    # envelope of the fit line over the fitted points
    amp = float(np.max(e[sel] * np.exp(-slope * sel)))
    return max(-slope, 0.0), amp, kres, "analytic"


def build_trace(samples, tau_max: float = TAU_MAX, h: float | None = None) -> ComplexTrace:
    """Fourier representation of phi(q(t)) / ||phi||_{L2(H)}."""
    if isinstance(samples, CurveSamples):
        v = samples.values
        norm = restriction_norms(samples)[0]
        h = samples.h if h is None else h
    else:
        # bare samples on [0, 2pi) with unit-speed weights
        v = np.asarray(samples)
        norm = math.sqrt(np.mean(np.abs(v) ** 2) * 2 * math.pi)
    if not np.any(v != 0):
        raise ZeroTrace("trace vanishes identically")
    F = v / norm
    ks, c = periodic_coefficients(F)
    rho, amp, kres, kind = decay_fit(ks, c)
    if kind == "noise" or rho < 1e-2:
        warnings.warn(f"coefficients do not decay (rho={rho:.3g})", NonAnalyticTrace, stacklevel=2)
    kept = np.abs(ks) <= kres
    tau = min(0.5 * rho, tau_max)
    tr = ComplexTrace(ks, c, rho, tau, norm, kept, float(h) if h is not None else float("nan"),
                      float(np.max(np.abs(F))), amp)
    # keep the discarded tail below the bound on the whole strip
    bound = TAIL_REL * tr.max_abs
    if tr.tail_bound(tau) >= bound:
        lo, hi = 0.0, tau
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if tr.tail_bound(mid) < bound:
                lo = mid
            else:
                hi = mid
        tr.tau_adm = lo
    return tr


def _check_strip(trace, tau):
    if tau > trace.tau_adm * (1 + 1e-12) + 1e-15:
        raise StripExceeded(f"|Im t| = {tau:.4g} exceeds tau_adm = {trace.tau_adm:.4g}")


def eval_strip(trace: ComplexTrace, t):
    t = np.asarray(t, dtype=complex)
    _check_strip(trace, float(np.max(np.abs(t.imag))) if t.size else 0.0)
    return trace(t)


def _winding(trace, tau_line, M, max_doublings=6):
    for _ in range(max_doublings + 1):
        s = 2 * math.pi * np.arange(M + 1) / M
        vals = trace(s + 1j * tau_line)
        step = np.angle(vals[1:] / vals[:-1])
        if np.max(np.abs(step)) < 0.5 * math.pi:
            return float(np.sum(step) / (2 * math.pi)), vals
        M *= 2
    raise ContourZero("phase steps stay above pi/2 after resampling")


def count_strip_zeros(trace: ComplexTrace, tau: float) -> int:
    """Zeros of F in [0, 2pi) x (-tau, tau) by the argument principle."""
    _check_strip(trace, tau)
    M = 8 * max(trace.effective_K, 16)
    s = 2 * math.pi * np.arange(M) / M
    for side in (-tau, tau):
        mod = np.abs(trace(s + 1j * side))
        if mod.min() <= 1e-10 * max(mod.max(), trace.max_abs):
            raise ContourZero(f"|F| nearly vanishes on Im t = {side:.4g}; shrink tau")
    wb, _ = _winding(trace, -tau, M)
    wt, _ = _winding(trace, tau, M)
    return int(round(wb - wt))


def strip_log_max(trace: ComplexTrace, tau: float, n_re: int = 512, n_im: int = 64) -> float:
    """max log|F| over the closed strip, grid search plus local ascent."""
    _check_strip(trace, tau)
    re = 2 * math.pi * np.arange(n_re) / n_re
    im = np.linspace(-tau, tau, n_im)
    T = re[:, None] + 1j * im[None, :]
    vals = np.abs(trace(T))
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    best = float(vals[i, j])
    if best == 0:
        return -math.inf

    def neg(p):
        y = min(max(p[1], -tau), tau)
        return -abs(complex(trace(np.array([p[0] + 1j * y]))[0]))

    res = minimize(neg, x0=[re[i], im[j]], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-4 * best, "maxiter": 400})
    best = max(best, -float(res.fun))
    return math.log(best)


@dataclass
class JensenRow:
    h: float
    tau: float
    zeros: int | None
    real_zeros: int | None
    log_max: float | None
    ratio: float | None
    note: str = ""


def jensen_report(traces, tau=None, real_counts=None) -> list[JensenRow]:
    """Strip count against log-max per trace; ``tau=None`` uses half of each tau_adm."""
    rows = []
    for i, tr in enumerate(traces):
        real = None if real_counts is None else real_counts[i]
        t = 0.5 * tr.tau_adm if tau is None else tau
        try:
            z = count_strip_zeros(tr, t)
            lm = strip_log_max(tr, t)
            rows.append(JensenRow(tr.h, t, z, real, lm, z / max(1.0, lm)))
        except (StripExceeded, ContourZero) as exc:
            rows.append(JensenRow(tr.h, t, None, real, None, None, f"{type(exc).__name__}: {exc}"))
    return rows


def real_zero_count(samples, zero_tol_rel=1e-6):
    return count_sign_changes(samples, zero_tol_rel).count
