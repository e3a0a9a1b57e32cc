"""Green's kernel of (-h^2 Lambda^{-1} Delta + 1) on the torus: numeric
columns, the periodized Bessel closed form, the order-zero parametrix,
complexified values and the layer-potential reproduction formula.

Kernel convention: ``G(., y)`` solves ``(-h^2 Delta + Lambda) G = delta_y``
with the Euclidean delta, i.e. the delta of the conformal metric divided by
its volume density.  ``G`` is then symmetric and the layer formula uses
Euclidean normals and arclength.  For the flat metric (Lambda = 1) this is
``(2 pi h^2)^{-1} K0(|x - y| / h)`` summed over images.

Point sources are realized as unit-mass Gaussians of width a few grid
spacings, rescaled by ``exp(-sigma^2 Lambda(y) / (2 h^2))``.  The rescaling
cancels the Gaussian's effect on the decaying solution exactly when Lambda
is constant, which removes the O(1) error an indicator source would leave.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .bessel import k0
from .errors import (BranchViolation, ConfigError, DiagonalSingularity, GeometryViolation, NonPositiveKernel,
                     QuadratureDivergence, SolverBudget, TaylorDivergence)
from .fitting import RateFit, fit_rate
from .geometry import AnalyticCurve, ConformalFactor, Region, TorusDomain
from .spectral import TrigInterpolant, gaussian_source_hat, laplace_symbol, wavenumbers

# source widths in grid spacings; the flat far field needs the wider
# spectral cutoff, the conformal columns the smaller smoothing error
FLAT_WIDTH = 2.5
CONFORMAL_WIDTH = 2.0


# ---------------------------------------------------------------- closed form


def _image_offsets(L, N):
    r = np.arange(-N, N + 1)
    a, b = np.meshgrid(r, r, indexing="ij")
    return L * np.stack([a.ravel(), b.ravel()], axis=-1)


def bessel_oracle(x, y, h, L=2.0, N_images=3):
    """(2 pi h^2)^{-1} sum_{|n|_inf <= N} K0(|x - y + L n| / h)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    dmin = np.linalg.norm(d - L * np.round(d / L), axis=-1)
    if np.any(dmin < 1e-8):
        raise DiagonalSingularity("kernel evaluated on the diagonal")
    total = 0.0
    for off in _image_offsets(L, N_images):
        total = total + k0(np.linalg.norm(d + off, axis=-1) / h)
    return total / (2 * math.pi * h * h)


def complex_distance(delta):
    """Holomorphic extension of |delta| (principal square root)."""
    delta = np.asarray(delta, dtype=complex)
    return np.sqrt(delta[..., 0] ** 2 + delta[..., 1] ** 2)


# ---------------------------------------------------------------- numeric columns


@dataclass
class GreensColumn:
    source: np.ndarray
    h: float
    metric: str
    field: np.ndarray
    residual: float
    domain: TorusDomain
    sigma: float
    lam_source: float = 1.0
    iterations: int = 0

    @cached_property
    def interpolant(self):
        return TrigInterpolant(self.field, self.domain)

    def value(self, pts):
        return self.interpolant(np.asarray(pts, dtype=float))

    def gradient(self, pts):
        return self.interpolant.grad(np.asarray(pts, dtype=float))

    def distances(self):
        X, Y = self.domain.mesh()
        d = np.stack([X - self.source[0], Y - self.source[1]], axis=-1)
        return np.linalg.norm(self.domain.min_image(d), axis=-1)


def _flat_column(domain, h, y, sigma):
    # extended precision keeps the far field above the FFT round-off floor
    ld = np.longdouble
    k = wavenumbers(domain).astype(ld)
    x0 = ld(domain.x0)
    ph = [np.exp(-1j * k.astype(np.clongdouble) * (ld(y[i]) - x0)) for i in (0, 1)]
    g = np.exp(-0.5 * ld(sigma) ** 2 * k * k)
    src_hat = np.outer(g * ph[0], g * ph[1]) / ld(domain.dx) ** 2
    src_hat *= np.exp(-ld(sigma) ** 2 / (2 * ld(h) ** 2))
    K2 = k[:, None] ** 2 + k[None, :] ** 2
    G_hat = src_hat / (1 + ld(h) ** 2 * K2)
    G = np.fft.ifft2(G_hat).real
    src = np.fft.ifft2(src_hat).real
    # residual of the discrete equation, also in extended precision
    r = ld(h) ** 2 * np.fft.ifft2(K2 * np.fft.fft2(G)).real + G - src
    res = float(np.linalg.norm(r) / np.linalg.norm(src))
    return G.astype(float), res


def resolvent_column(domain: TorusDomain, h: float, y, conformal: ConformalFactor | None = None,
                     source_width: float | None = None, tol: float = 1e-10, maxiter: int = 2000) -> GreensColumn:
    """Column G(., y) of the flat (``conformal=None``) or conformal kernel."""
    y = domain.reduce(np.asarray(y, dtype=float))
    if source_width is None:
        source_width = FLAT_WIDTH if conformal is None else CONFORMAL_WIDTH
    sigma = source_width * domain.dx
    if conformal is None:
        G, res = _flat_column(domain, h, y, sigma)
        return GreensColumn(y, h, "flat", G, res, domain, sigma)
    lam = conformal.values
    lam_y = float(conformal.at(y))
    src_hat = gaussian_source_hat(domain, y, sigma) * math.exp(-sigma ** 2 * lam_y / (2 * h * h))
    src = np.fft.ifft2(src_hat).real
    n = domain.n
    sym = h * h * laplace_symbol(domain)
    lbar = float(lam.mean())

    def A(u):
        u = u.reshape(n, n)
        return (np.fft.ifft2(sym * np.fft.fft2(u)).real + lam * u).ravel()

    def M(u):
        return np.fft.ifft2(np.fft.fft2(u.reshape(n, n)) / (sym + lbar)).real.ravel()

    its = [0]

    def cb(_):
        its[0] += 1

    N = n * n
    x0 = M(src.ravel())
    sol, info = cg(LinearOperator((N, N), matvec=A, dtype=float), src.ravel(), x0=x0,
                   M=LinearOperator((N, N), matvec=M, dtype=float), rtol=tol, atol=0.0,
                   maxiter=maxiter, callback=cb)
    res = float(np.linalg.norm(A(sol) - src.ravel()) / np.linalg.norm(src))
    if info != 0 or res > 10 * tol:
        raise SolverBudget(f"CG stopped at residual {res:.2e} after {its[0]} iterations")
    return GreensColumn(y, h, "conformal", sol.reshape(n, n), res, domain, sigma, lam_y, its[0])


def conformal_resolvent_apply(domain: TorusDomain, h: float, conformal: ConformalFactor, f, tol=1e-12):
    """(-h^2 Lambda^{-1} Delta + 1)^{-1} f, self-adjoint in the Lambda-weighted product."""
    n = domain.n
    lam = conformal.values
    sym = h * h * laplace_symbol(domain)
    lbar = float(lam.mean())
    N = n * n
    A = LinearOperator((N, N), matvec=lambda u: (np.fft.ifft2(sym * np.fft.fft2(u.reshape(n, n))).real
                                                 + lam * u.reshape(n, n)).ravel(), dtype=float)
    M = LinearOperator((N, N), matvec=lambda u: np.fft.ifft2(np.fft.fft2(u.reshape(n, n)) / (sym + lbar)).real.ravel(),
                       dtype=float)
    sol, info = cg(A, (lam * f).ravel(), M=M, rtol=tol, atol=0.0, maxiter=2000)
    if info != 0:
        raise SolverBudget("CG did not converge")
    return sol.reshape(n, n)


# ---------------------------------------------------------------- parametrix


@dataclass
class ParametrixConfig:
    order: int = 0
    shift: float | None = None  # imaginary shift of the eta_1 contour
    window: float | None = None
    step: float | None = None
    tol: float = 1e-8


def _shifted_trapezoid(d, h, u, vmax, step1, step2, chunk=256):
    # eta = (sinh v1 + i u, sinh v2): the sinh map turns the exponential decay
    # of the integrand into double-exponential decay in v
    v1 = np.arange(-vmax, vmax + 0.5 * step1, step1)
    v2 = np.arange(-vmax, vmax + 0.5 * step2, step2)
    e1, j1 = np.sinh(v1), np.cosh(v1)
    e2, j2 = np.sinh(v2), np.cosh(v2)
    e2sq = e2 ** 2
    total = 0.0 + 0.0j
    for a in range(0, v1.size, chunk):
        eta1 = e1[a:a + chunk] + 1j * u
        q = 1 + eta1[:, None] ** 2 + e2sq[None, :]
        f = np.exp(1j * d * eta1[:, None] / h - d * d * np.sqrt(q) / (4 * h)) / q
        total += (j1[a:a + chunk] @ f) @ j2
    return total * step1 * step2 / (2 * math.pi * h) ** 2


def parametrix_leading(x, y, h, L=2.0, cfg: ParametrixConfig | None = None, method="contour"):
    """Order-zero parametrix term A_G with symbol (1 + |eta|^2)^{-1}.

    ``method="contour"`` shifts the eta_1 contour into the upper half plane,
    which damps the oscillating factor by exp(-d u / h) so the trapezoid
    sum does not cancel catastrophically; ``"polar"`` integrates on the
    real contour after the angular integral (accurate only for moderate d/h).
    """
    cfg = cfg or ParametrixConfig()
    if cfg.order != 0:
        raise ConfigError("only the order-zero symbol is implemented")
    dvec = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    dvec = dvec - L * np.round(dvec / L)
    d = float(np.linalg.norm(dvec))
    if not (0 < d <= L / 4 + 1e-12):
        raise ConfigError(f"need 0 < d(x,y) <= inj/2 = {L / 4}, got {d}")
    if h > 0.2:
        raise ConfigError("parametrix is used for h <= 0.2")
    if method == "polar":
        return _polar(d, h, cfg.tol)
    u = cfg.shift if cfg.shift is not None else min(0.8, 4 / math.sqrt(16 + d * d))
    a_dec = d * d / (4 * h)
    vmax = cfg.window if cfg.window is not None else math.asinh(40 / a_dec) + 1
    # resolve e^{i d eta_1 / h} up to where the damping takes over
    step1 = cfg.step if cfg.step is not None else 4 * math.pi / (d / h * (40 / a_dec) + 20)
    step2 = 0.1
    a = _shifted_trapezoid(d, h, u, vmax, step1, step2)
    b = _shifted_trapezoid(d, h, u, 1.1 * vmax, 0.5 * step1, 0.5 * step2)
    if abs(b - a) > cfg.tol * abs(b):
        raise QuadratureDivergence(f"contour quadrature changed by {abs(b - a) / abs(b):.2e} under refinement")
    return float(b.real)


def _polar(d, h, tol):
    from scipy.integrate import IntegrationWarning, quad
    from scipy.special import j0

    # after the angular integral: (2 pi h)^{-2} 2 pi int J0(d rho/h) e^{-d^2 <rho>/(4h)} rho / (1+rho^2) d rho
    def f(r):
        return j0(d * r / h) * math.exp(-d * d * math.sqrt(1 + r * r) / (4 * h)) * r / (1 + r * r)

    R = 4 * h * 45 / (d * d) + 5
    period = 2 * math.pi * h / d
    edges = np.arange(0.0, R + period, period)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            total += quad(f, a, b, epsabs=0, epsrel=1e-12, limit=100)[0]
    return 2 * math.pi * total / (2 * math.pi * h) ** 2


def symbol_w0(eta):
    eta = np.asarray(eta, dtype=float)
    return 1.0 / (1.0 + np.sum(eta * eta, axis=-1))


# ---------------------------------------------------------------- decay fits


def decay_rate_fit(columns, x, prefactor_power: float = 1.5, min_h: int = 4) -> RateFit:
    """Rate beta in G(x, y, h) ~ h^{-p} exp(-beta / h) over a set of columns.

    The two-dimensional kernel carries the prefactor h^{-3/2}; it is removed
    before the fit (set ``prefactor_power=0`` for the plain slope).
    """
    if len(columns) < min_h:
        raise ConfigError(f"need at least {min_h} values of h")
    x = np.asarray(x, dtype=float)
    hs, logs = [], []
    for col in columns:
        if col.domain.distance(x, col.source) < 0.2:
            raise ConfigError("probe point closer than 0.2 to the source")
        g = float(col.value(x[None])[0])
        if abs(g) < 1e-300:
            continue
        if g <= 0:
            raise NonPositiveKernel(f"kernel value {g:.3e} at h={col.h}")
        hs.append(col.h)
        logs.append(math.log(g))
    if len(hs) < min_h:
        raise NonPositiveKernel("too many kernel values underflow")
    return fit_rate(hs, log_q=logs, prefactor_power=prefactor_power, min_points=min_h)


# ---------------------------------------------------------------- complexification


def complexified_kernel(x, zeta, y, h, column: GreensColumn | None = None, L=2.0, N_images=3,
                        order: int | None = None, tail_tol: float = 1e-3):
    """G(x + i zeta, y).

    Without a column the flat closed form is used (K0 at the complex
    distance).  With a column the value is the Taylor series in i zeta built
    from spectral derivatives of the real column.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    y = np.asarray(y, dtype=float)
    if column is None:
        d = x - y
        d = d - L * np.round(d / L)
        total = 0.0 + 0.0j
        for off in _image_offsets(L, N_images):
            delta = d + off + 1j * zeta
            rho = complex_distance(delta)
            if np.real(rho) <= 0:
                raise BranchViolation("complex distance leaves the right half plane")
            total += complex(k0(np.asarray(rho / h)))
        return total / (2 * math.pi * h * h)
    N = order if order is not None else min(20, int(1 / (4 * h)))
    it = column.interpolant
    p = x[None]
    value = 0.0 + 0.0j
    last = 0.0
    zx, zy = float(zeta[0]), float(zeta[1])
    for k in range(N + 1):
        # (zeta . grad)^k G / k!  times  i^k
        dk = 0.0
        for a in range(k + 1):
            c = math.comb(k, a) * zx ** a * zy ** (k - a)
            if c != 0.0:
                dk += c * float(it.derivative(p, a, k - a)[0])
        term = (1j ** k) * dk / math.factorial(k)
        value += term
        last = abs(term)
    if last > tail_tol * abs(value):
        raise TaylorDivergence(f"last Taylor term {last:.2e} exceeds {tail_tol} of the value")
    return value


# ---------------------------------------------------------------- layer potential


@dataclass
class LayerReport:
    t: np.ndarray
    reproduced: np.ndarray
    exact: np.ndarray
    residual: float
    n_boundary: int


class LayerReproducer:
    """Reproduce phi on H from its Cauchy data on gamma.

    Columns are solved with sources at the targets on H; by symmetry of the
    kernel they give G(q, .) and its gradient in the second slot directly.
    """

    def __init__(self, pair, gamma: AnalyticCurve, conformal: ConformalFactor, H: AnalyticCurve,
                 n_targets: int = 32, source_width: float | None = None):
        dom = pair.domain
        inner = Region.inside(gamma, dom.L)
        tq = 2 * np.pi * np.arange(n_targets) / n_targets
        q = H.point(tq)
        if np.any(inner.signed_distance(q[:, 0], q[:, 1]) >= 0):
            raise GeometryViolation("H is not inside the region bounded by gamma")
        g = gamma.point(2 * np.pi * np.arange(256) / 256)
        if np.any(conformal.region.signed_distance(g[:, 0], g[:, 1]) > 1e-9):
            raise GeometryViolation("Lambda is not the potential factor on all of the region bounded by gamma")
        self.pair, self.gamma, self.H = pair, gamma, H
        self.t, self.q = tq, q
        self.phi = TrigInterpolant(pair.phi, dom)
        self.exact = self.phi(q)
        self.columns = [resolvent_column(dom, pair.h, qi, conformal, source_width) for qi in q]

    def reproduce(self, n_boundary: int = 128) -> LayerReport:
        h = self.pair.h
        _, pts, _, nrm, speed = self.gamma.sample(n_boundary)
        w = speed * 2 * np.pi / n_boundary
        phi_g = self.phi(pts)
        gx, gy = self.phi.grad(pts)
        dn_phi = gx * nrm[:, 0] + gy * nrm[:, 1]
        rep = np.empty(len(self.columns))
        for j, col in enumerate(self.columns):
            G = col.value(pts)
            Gx, Gy = col.gradient(pts)
            dnG = Gx * nrm[:, 0] + Gy * nrm[:, 1]
            rep[j] = h * h * np.sum(w * (G * dn_phi - dnG * phi_g))
        scale = np.max(np.abs(self.exact))
        res = float(np.max(np.abs(rep - self.exact)) / scale) if scale > 0 else float(np.max(np.abs(rep)))
        return LayerReport(self.t, rep, self.exact, res, n_boundary)


def layer_reproduce(pair, gamma, conformal, H, n_boundary: int = 128, n_targets: int = 32) -> LayerReport:
    return LayerReproducer(pair, gamma, conformal, H, n_targets).reproduce(n_boundary)


# ---------------------------------------------------------------- maximum principle


@dataclass
class MaxPrincipleReport:
    holds: bool
    outer_max: float
    circle_max: float


def maximum_principle_check(column: GreensColumn, R: float, n_circle: int | None = None) -> MaxPrincipleReport:
    """max_{d > R} |G| <= max_{d = R} |G| (1 + 1e-6)."""
    dist = column.distances()
    outer = dist > R
    if not outer.any():
        return MaxPrincipleReport(True, 0.0, float("nan"))
    N = n_circle or max(256, int(8 * math.pi * R / column.domain.dx))
    t = 2 * np.pi * np.arange(N) / N
    pts = column.source + R * np.stack([np.cos(t), np.sin(t)], axis=-1)
    cmax = float(np.max(np.abs(column.value(pts))))
    omax = float(np.max(np.abs(column.field[outer])))
    return MaxPrincipleReport(bool(omax <= cmax * (1 + 1e-6)), omax, cmax)
