"""Separable eigenfunctions on a surface of revolution.

The surface carries the metric ``w(r)^2 dr^2 + f(r)^2 dtheta^2`` with
``w = sqrt(1 + f'^2)``.  In the arclength-type variable ``ds = (w / f) dr``
the Laplacian becomes ``f^{-2} (d_s^2 + d_theta^2)``, so the mode
``v(s) cos(m theta)`` with ``h = 1/m`` solves

    -h^2 v'' + (f^2 V + m^2 h^2 A) v = E f^2 v,

where ``A = 1`` for the Riemannian Laplacian and ``A = w^2`` for the
alternative angular convention.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from .errors import (ConfigError, ConvergenceFailure, ForbiddenViolation, NullRadialValue, PoleLeak,
                     QuadratureFailure)
from .nodal import count_sign_changes, CurveSamples
from .trace import build_trace, count_strip_zeros


@dataclass
class RevolutionProfile:
    f: Callable
    fp: Callable
    fpp: Callable
    delta: float = 0.05
    name: str = ""
    check_convexity: bool = True

    def __post_init__(self):
        if not 0 < self.delta < 0.5:
            raise ConfigError("pole truncation delta must lie in (0, 0.5)")
        r = np.linspace(-1 + self.delta, 1 - self.delta, 801)
        if np.any(self.f(r) <= 0):
            raise ConfigError("profile must be positive on the working interval")
        if self.check_convexity and np.any(self.fpp(r) >= 0):
            raise ConfigError("profile is not strictly concave on the working interval")

    @classmethod
    def cosine(cls, amp=0.6, delta=0.05):
        a = 0.5 * math.pi
        return cls(lambda r: amp * np.cos(a * np.asarray(r)),
                   lambda r: -amp * a * np.sin(a * np.asarray(r)),
                   lambda r: -amp * a * a * np.cos(a * np.asarray(r)), delta, f"cos:{amp}")

    @classmethod
    def cylinder(cls, delta=0.05):
        one = lambda r: np.ones_like(np.asarray(r, dtype=float))  # noqa: E731
        zero = lambda r: np.zeros_like(np.asarray(r, dtype=float))  # noqa: E731
        return cls(one, zero, zero, delta, "cylinder", check_convexity=False)

    def w(self, r):
        return np.sqrt(1 + self.fp(r) ** 2)

    @property
    def interval(self):
        return -1 + self.delta, 1 - self.delta


def profile_from_spec(spec: str, delta: float = 0.05, amp: float = 0.6) -> RevolutionProfile:
    if spec == "cos":
        return RevolutionProfile.cosine(amp, delta)
    if spec == "cylinder":
        return RevolutionProfile.cylinder(delta)
    raise ConfigError(f"unknown profile {spec!r}")


def radial_potential(spec) -> Callable:
    """``"gauss:a,c,b"`` is ``a exp(-b (r - c)^2)``; ``"const:c"``; or a callable."""
    if callable(spec):
        return spec
    kind, _, args = str(spec).partition(":")
    vals = [float(v) for v in args.split(",") if v]
    if kind == "gauss" and len(vals) == 3:
        a, c, b = vals
        return lambda r: a * np.exp(-b * (np.asarray(r) - c) ** 2)
    if kind == "const" and len(vals) == 1:
        return lambda r: np.full_like(np.asarray(r, dtype=float), vals[0])
    raise ConfigError(f"cannot parse radial potential {spec!r}")


@dataclass
class ArcParameter:
    r_nodes: np.ndarray
    s_nodes: np.ndarray
    s_of_r: CubicHermiteSpline
    r_of_s: CubicHermiteSpline

    @property
    def s_range(self):
        return float(self.s_nodes[0]), float(self.s_nodes[-1])


def arc_parameter(profile: RevolutionProfile, n_nodes: int = 4001) -> ArcParameter:
    """s(r) = int_0^r w/f by adaptive quadrature on a node table, and its inverse."""
    a, b = profile.interval
    r = np.linspace(a, b, n_nodes)
    g = lambda x: float(profile.w(x) / profile.f(x))  # noqa: E731
    i0 = int(np.argmin(np.abs(r)))
    s = np.zeros(n_nodes)
    # integrate outwards from the node closest to 0
    s0, err = quad(g, 0.0, r[i0], epsabs=1e-14, epsrel=1e-13)
    s[i0] = s0
    for i in range(i0 + 1, n_nodes):
        val, err = quad(g, r[i - 1], r[i], epsabs=1e-15, epsrel=1e-13)
        if not np.isfinite(val) or err > 1e-10:
            raise QuadratureFailure(f"arclength quadrature failed near r={r[i]:.4f}")
        s[i] = s[i - 1] + val
    for i in range(i0 - 1, -1, -1):
        val, err = quad(g, r[i], r[i + 1], epsabs=1e-15, epsrel=1e-13)
        if not np.isfinite(val) or err > 1e-10:
            raise QuadratureFailure(f"arclength quadrature failed near r={r[i]:.4f}")
        s[i] = s[i + 1] - val
    ds = profile.w(r) / profile.f(r)
    if np.any(np.diff(s) <= 0):
        raise QuadratureFailure("s(r) is not strictly increasing")
    return ArcParameter(r, s, CubicHermiteSpline(r, s, ds), CubicHermiteSpline(s, r, 1.0 / ds))


@dataclass
class RadialMode:
    m: int
    h: float
    E_h: float
    s: np.ndarray  # interior nodes
    v: np.ndarray
    r: np.ndarray
    residual: float
    convention: str
    E0: float
    arc: ArcParameter = field(repr=False, default=None)
    boundary: str = "dirichlet"

    def value_at(self, r0):
        """v at radius r0 by cubic interpolation in s."""
        s0 = float(self.arc.s_of_r(r0))
        return float(_cubic_eval(self.s, self.v, s0))


def _cubic_eval(x, y, x0):
    from scipy.interpolate import CubicSpline

    i = int(np.clip(np.searchsorted(x, x0), 4, x.size - 4))
    sl = slice(i - 4, i + 4)
    return CubicSpline(x[sl], y[sl])(x0)


def _angular_factor(profile, r, convention):
    if convention in ("1", 1, "standard"):
        return np.ones_like(r)
    if convention in ("w2", "paper"):
        return profile.w(r) ** 2
    raise ConfigError(f"unknown angular convention {convention!r}")


def _radial_matrices(profile, V, m, arc, n_s, convention):
    h = 1.0 / m
    s_a, s_b = arc.s_range
    s_full = np.linspace(s_a, s_b, n_s + 2)
    s = s_full[1:-1]
    ds = s_full[1] - s_full[0]
    r = arc.r_of_s(s)
    f2 = profile.f(r) ** 2
    A = _angular_factor(profile, r, convention)
    diag = 2 * h * h / ds ** 2 + f2 * V(r) + m * m * h * h * A
    off = -h * h / ds ** 2 * np.ones(n_s - 1)
    K = diags([off, diag, off], [-1, 0, 1], format="csc")
    M = diags(f2, 0, format="csc")
    return K, M, s, r, h


def solve_radial_mode(profile: RevolutionProfile, V, m: int, E0: float, convention="1",
                      n_s: int | None = None, arc: ArcParameter | None = None) -> RadialMode:
    """Radial factor of the mode ``e^{i m theta} v`` with eigenvalue nearest E0."""
    if m < 4:
        raise ConfigError("need m >= 4")
    V = radial_potential(V)
    arc = arc or arc_parameter(profile)
    a, b = profile.interval
    rr = np.linspace(a, b, 2001)
    Vr = V(rr)
    if np.ptp(Vr) > 0 and not (Vr.min() < E0 < Vr.max()):
        raise ConfigError("need min V < E0 < max V")
    n_s = n_s or max(4000, 100 * m)
    K, M, s, r, h = _radial_matrices(profile, V, m, arc, n_s, convention)
    try:
        vals, vecs = eigsh(K, k=3, M=M, sigma=E0, which="LM", tol=1e-13)
    except Exception as exc:  # ARPACK gives no finer classification
        raise ConvergenceFailure(f"radial eigensolve failed: {exc}", best_residual=math.inf) from exc
    j = int(np.argmin(np.abs(vals - E0)))
    E, v = float(vals[j]), vecs[:, j]
    v = v / v[np.argmax(np.abs(v))]
    Kv = K @ v
    res = float(np.linalg.norm(Kv - E * (M @ v)) / np.linalg.norm(Kv))
    if res > 1e-8:
        raise ConvergenceFailure(f"radial residual {res:.2e}", best_residual=res)
    edge = max(abs(v[0]), abs(v[-1]))
    if edge > 1e-6:
        warnings.warn(f"mode reaches the pole truncation (|v| = {edge:.2e})", PoleLeak, stacklevel=2)
    return RadialMode(m, h, E, s, v, r, res, str(convention), E0, arc)


def assemble_mode_field(mode: RadialMode, n_theta: int | None = None):
    """phi(r, theta) = v(r) cos(m theta) on the (interior s-nodes) x theta grid."""
    n_theta = n_theta or max(64, 8 * mode.m)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return mode.r, theta, np.outer(mode.v, np.cos(mode.m * theta))


def separable_residual(mode: RadialMode, profile: RevolutionProfile, V, n_theta: int | None = None) -> float:
    """Relative residual of the 2D operator applied to the assembled field.

    The angular second derivative is spectral; the radial one is the same
    three-point stencil as in the 1D solve.
    """
    V = radial_potential(V)
    r, theta, phi = assemble_mode_field(mode, n_theta)
    h = mode.h
    ds = mode.s[1] - mode.s[0]
    pad = np.pad(phi, ((1, 1), (0, 0)))
    d2s = (pad[2:] - 2 * pad[1:-1] + pad[:-2]) / ds ** 2
    kt = np.fft.fftfreq(theta.size, d=1.0 / theta.size)
    d2t = np.fft.ifft(-(kt ** 2) * np.fft.fft(phi, axis=1), axis=1).real
    f2 = profile.f(r)[:, None] ** 2
    A = _angular_factor(profile, r, mode.convention)[:, None]
    lhs = -h * h * d2s - h * h * A * d2t + f2 * V(r)[:, None] * phi
    R = lhs - mode.E_h * f2 * phi
    return float(np.linalg.norm(R) / np.linalg.norm(lhs))


def _latitude_samples(mode, r0, V, E, n_theta):
    V = radial_potential(V)
    if not float(V(r0)) > E:
        raise ForbiddenViolation(f"V(r0) = {float(V(r0)):.4g} <= E = {E:.4g}")
    vr = mode.value_at(r0)
    if vr == 0 or not np.isfinite(vr):
        raise NullRadialValue(f"v(r0) = {vr}")
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    return theta, vr * np.cos(mode.m * theta), vr


def latitude_zero_count(mode: RadialMode, r0: float, V, E: float | None = None, n_theta: int | None = None) -> int:
    """Sign changes of phi(r0, .) on the latitude circle r = r0."""
    E = mode.E_h if E is None else E
    n_theta = n_theta or max(64, 8 * mode.m)
    theta, vals, _ = _latitude_samples(mode, r0, V, E, n_theta)
    zeros = np.zeros((n_theta, 2))
    samples = CurveSamples(theta, zeros, zeros, vals, np.zeros(n_theta), np.full(n_theta, 2 * np.pi / n_theta),
                           mode.h, mode.E_h)
    return count_sign_changes(samples).count


def latitude_trace(mode: RadialMode, r0: float, V, E: float | None = None, n_theta: int | None = None):
    E = mode.E_h if E is None else E
    n_theta = n_theta or max(64, 8 * mode.m)
    _, vals, _ = _latitude_samples(mode, r0, V, E, n_theta)
    return build_trace(vals, h=mode.h)


def latitude_strip_count(mode, r0, V, tau=0.2, E=None):
    return count_strip_zeros(latitude_trace(mode, r0, V, E), tau)


def turning_point(profile, V, E, r0, convention="1"):
    """Nearest radius to r0 where the effective potential crosses E."""
    V = radial_potential(V)
    a, b = profile.interval
    r = np.linspace(a, b, 20001)
    eff = V(r) + _angular_factor(profile, r, convention) / profile.f(r) ** 2
    allowed = eff < E
    if not allowed.any():
        raise ConfigError("no classically allowed radius")
    idx = np.nonzero(allowed)[0]
    return float(r[idx[np.argmin(np.abs(r[idx] - r0))]])


def radial_agmon_integral(profile, V, E, r0, convention="1", arc=None) -> float:
    """int sqrt(f^2 (V - E) + A)_+ ds from the nearest turning point to r0 (with m h = 1)."""
    V = radial_potential(V)
    arc = arc or arc_parameter(profile)
    rt = turning_point(profile, V, E, r0, convention)
    lo, hi = sorted((rt, r0))

    def g(r):
        f = float(profile.f(r))
        A = float(_angular_factor(profile, np.array([r]), convention)[0])
        q = f * f * (float(V(r)) - E) + A
        return math.sqrt(max(q, 0.0)) * float(profile.w(r)) / f

    return quad(g, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=200)[0]


@dataclass
class RevolutionRow:
    m: int
    h: float
    E_h: float
    r0: float
    count: int
    strip_count: int
    decay_rate: float
    agmon: float


def revolution_sweep(profile, V, E0, ms=(10, 20, 40), r0=0.1, convention="1", tau=0.2):
    arc = arc_parameter(profile)
    rows = []
    for m in ms:
        mode = solve_radial_mode(profile, V, m, E0, convention, arc=arc)
        cnt = latitude_zero_count(mode, r0, V)
        strip = latitude_strip_count(mode, r0, V, tau)
        rate = -mode.h * math.log(abs(mode.value_at(r0)))
        ag = radial_agmon_integral(profile, V, mode.E_h, r0, convention, arc)
        rows.append(RevolutionRow(m, mode.h, mode.E_h, r0, cnt, strip, rate, ag))
    return rows
