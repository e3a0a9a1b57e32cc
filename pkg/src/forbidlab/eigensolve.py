"""Discretization of P(h) = -h^2 Delta + V on the torus and eigenpairs near
a target energy.

Every operator is written in the weighted form ``K u = lambda M u`` with
``K = -h^2 Delta + diag(W)`` and ``M = diag(U)``:

* ``plain``:          W = V,        U = 1
* ``conformal``:      W = Lambda V, U = Lambda   (-h^2 Lambda^{-1} Delta + V)
* ``conformal_unit``: W = Lambda,   U = Lambda   (-h^2 Lambda^{-1} Delta + 1)

Shift-invert solves use GMRES with a two-level preconditioner: a dense LU
of the operator restricted to the lowest Fourier modes, and the diagonal
Fourier symbol on the remaining modes.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, gmres

from .errors import ConfigError, ConvergenceFailure, DegenerateCluster, ResolutionError
from .geometry import BumpPotential, ConformalFactor, Scene, TorusDomain
from .spectral import laplace_symbol, symbol_1d, wavenumbers

log = logging.getLogger(__name__)

DENSE_MAX_N = 40
COARSE_MAX = 64


@dataclass
class DiscreteOperator:
    domain: TorusDomain
    h: float
    scheme: str
    V: np.ndarray
    mode: str = "plain"
    conformal: ConformalFactor | None = None
    W: np.ndarray = field(init=False, repr=False)
    U: np.ndarray = field(init=False, repr=False)
    symbol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode == "plain":
            self.W = self.V
            self.U = np.ones_like(self.V)
        else:
            if self.conformal is None:
                raise ConfigError(f"mode {self.mode!r} needs a conformal factor")
            lam = self.conformal.values
            self.U = lam
            self.W = lam * self.V if self.mode == "conformal" else lam.copy()
        self.symbol = laplace_symbol(self.domain, self.scheme)

    @property
    def size(self):
        return self.domain.n ** 2

    def apply_K(self, u):
        u = u.reshape(self.domain.n, self.domain.n)
        lap = np.fft.ifft2(self.symbol * np.fft.fft2(u)).real
        return self.h ** 2 * lap + self.W * u

    def apply(self, u):
        """P(h) u (non-symmetric form ``M^{-1} K``)."""
        return self.apply_K(u) / self.U

    def inner(self, u, v):
        """Weighted inner product sum u v U dx^2, in which P(h) is symmetric."""
        return float(np.sum(u * v * self.U) * self.domain.cell_area)

    def dense_K(self):
        n = self.domain.n
        D = _second_derivative_1d(self.domain, self.scheme, n)
        I = np.eye(n)
        return self.h ** 2 * (np.kron(D, I) + np.kron(I, D)) + np.diag(self.W.ravel())

    def check_symmetry(self, pairs=5, seed=0):
        rng = np.random.default_rng(seed)
        n = self.domain.n
        worst = 0.0
        for _ in range(pairs):
            u = rng.standard_normal((n, n))
            v = rng.standard_normal((n, n))
            a = np.sum(self.apply_K(u) * v)
            b = np.sum(u * self.apply_K(v))
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
        return worst


def _second_derivative_1d(domain: TorusDomain, scheme, m):
    """Matrix of the 1D symbol -d^2/dx^2 acting on the m lowest modes.

    The symbol is that of the fine grid, so the coarse matrix is the exact
    Galerkin restriction of the fine operator to the retained modes.
    """
    kc = 2 * np.pi * np.fft.fftfreq(m, d=domain.L / m)
    sym = symbol_1d(domain, scheme, k=kc)
    I = np.eye(m)
    return np.fft.ifft(sym[:, None] * np.fft.fft(I, axis=0), axis=0).real


def required_n(domain: TorusDomain, h, E, Vmin):
    dx_max = 2 * np.pi * h / (10 * math.sqrt(max(E - Vmin, 1.0)))
    n = math.ceil(domain.L / dx_max)
    return n + (n % 2)


def assemble(domain: TorusDomain, potential, h: float, E: float | None = None,
             scheme="spectral", mode="plain", conformal: ConformalFactor | None = None,
             check=True) -> DiscreteOperator:
    """Build the matrix-free operator and check resolution and symmetry."""
    if h <= 0:
        raise ConfigError("h must be positive")
    V = potential.on_grid(domain) if isinstance(potential, BumpPotential) else np.asarray(potential, float)
    if V.shape != (domain.n, domain.n):
        raise ConfigError("potential samples do not match the grid")
    E_ref = float(np.max(V)) if E is None else E
    need = required_n(domain, h, E_ref, float(V.min()))
    if domain.n < need:
        raise ResolutionError(f"n={domain.n} under-resolves h={h}; need n >= {need}", need)
    op = DiscreteOperator(domain, h, scheme, V, mode, conformal)
    if check:
        asym = op.check_symmetry()
        if asym > 1e-10:
            raise ConvergenceFailure(f"operator not symmetric ({asym:.2e})")
    return op


@dataclass
class EigenPair:
    h: float
    E_h: float
    phi: np.ndarray
    residual: float
    domain: TorusDomain
    target: float = float("nan")
    degenerate: bool = False
    mode: str = "plain"

    @property
    def drift(self):
        return abs(self.E_h - self.target)


class TwoLevelPreconditioner:
    """Approximate inverse of ``K - sigma M``."""

    def __init__(self, op: DiscreteOperator, sigma: float, nc: int):
        self.op, self.sigma, self.nc = op, sigma, nc
        n = op.domain.n
        dom = op.domain
        Q = op.W - sigma * op.U
        step = n // nc
        Qc = Q[::step, ::step]
        D = _second_derivative_1d(dom, op.scheme, nc)
        I = np.eye(nc)
        Ac = op.h ** 2 * (np.kron(D, I) + np.kron(I, D)) + np.diag(Qc.ravel())
        self.lu = sla.lu_factor(Ac, check_finite=False)
        diag = op.h ** 2 * op.symbol + Q.mean()
        # guard against an accidental zero of the high-mode diagonal
        diag[np.abs(diag) < 1e-12] = 1e-12
        self.diag = diag
        lo = np.r_[0:nc // 2, n - nc // 2 + 1:n]
        loc = np.r_[0:nc // 2, nc // 2 + 1:nc]
        self.sel = np.ix_(lo, lo)
        self.selc = np.ix_(loc, loc)
        self.scale = (nc * nc) / (n * n)

    def __call__(self, b):
        n, nc = self.op.domain.n, self.nc
        bh = np.fft.fft2(b.reshape(n, n))
        xh = bh / self.diag
        cc = np.zeros((nc, nc), complex)
        cc[self.selc] = bh[self.sel] * self.scale
        xc = sla.lu_solve(self.lu, np.fft.ifft2(cc).real.ravel(), check_finite=False)
        xch = np.fft.fft2(xc.reshape(nc, nc)) / self.scale
        xh[self.sel] = xch[self.selc]
        return np.fft.ifft2(xh).real.ravel()


def coarse_size(n, h, coarse=None):
    if coarse is not None:
        if n % coarse or coarse % 2:
            raise ConfigError("coarse size must be even and divide n")
        return coarse
    want = 2 * math.ceil(0.8 / h)
    divs = [m for m in range(2, n + 1, 2) if n % m == 0]
    ok = [m for m in divs if m >= want and m <= COARSE_MAX]
    if ok:
        return ok[0]
    return max(m for m in divs if m <= COARSE_MAX)


def _normalize(op: DiscreteOperator, v):
    v = v.reshape(op.domain.n, op.domain.n)
    v = v / math.sqrt(op.inner(v, v))
    i = np.argmax(np.abs(v))
    if v.flat[i] < 0:
        v = -v
    return v


def residual(op: DiscreteOperator, phi, lam):
    r = op.apply(phi) - lam * phi
    return float(np.linalg.norm(r) / np.linalg.norm(phi))


def eigenpairs_near(op: DiscreteOperator, E: float, k: int = 1, tol: float = 1e-8,
                    inner_rtol=1e-10, maxiter=None, coarse=None) -> list[EigenPair]:
    """The ``k`` eigenpairs with eigenvalue nearest ``E``."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    n = op.domain.n
    extra = min(k + 2, op.size - 1)
    if n <= DENSE_MAX_N:
        lam, vecs = sla.eigh(op.dense_K(), np.diag(op.U.ravel()))
    else:
        lam, vecs = _shift_invert(op, E, extra, inner_rtol, maxiter, coarse)
    order = sorted(range(len(lam)), key=lambda i: (abs(lam[i] - E), lam[i]))
    lam = np.asarray(lam)
    pairs = []
    for i in order[:k]:
        phi = _normalize(op, vecs[:, i])
        res = residual(op, phi, lam[i])
        if res > tol:
            phi, lam_i, res = _refine(op, phi, lam[i], inner_rtol, coarse)
            if res > tol:
                raise ConvergenceFailure(f"residual {res:.2e} above tol {tol:.1e}", res)
            lam[i] = lam_i
        others = np.delete(lam, i)
        deg = bool(np.any(np.abs(others - lam[i]) < 1e-8))
        if deg:
            warnings.warn(f"degenerate cluster at E(h)={lam[i]:.10f}", DegenerateCluster, stacklevel=2)
        pairs.append(EigenPair(op.h, float(lam[i]), phi, res, op.domain, float(E), deg, op.mode))
    return pairs


def _shift_solver(op, sigma, inner_rtol, coarse):
    N = op.size
    nc = coarse_size(op.domain.n, op.h, coarse)
    prec = TwoLevelPreconditioner(op, sigma, nc)
    S = LinearOperator((N, N), matvec=lambda u: (op.apply_K(u) - sigma * op.U * u.reshape(op.U.shape)).ravel(),
                       dtype=float)
    P = LinearOperator((N, N), matvec=prec, dtype=float)
    stats = {"calls": 0, "fail": 0}

    def solve(b):
        stats["calls"] += 1
        x, info = gmres(S, b, M=P, rtol=inner_rtol, atol=0.0, restart=60, maxiter=4)
        if info != 0:
            stats["fail"] += 1
        return x

    return solve, stats


def _shift_invert(op, E, k, inner_rtol, maxiter, coarse):
    # offset keeps the shifted operator nonsingular when E is an exact eigenvalue
    sigma = E + 1e-5 * max(1.0, abs(E))
    N = op.size
    solve, stats = _shift_solver(op, sigma, inner_rtol, coarse)
    OP = LinearOperator((N, N), matvec=solve, dtype=float)
    A = LinearOperator((N, N), matvec=lambda u: op.apply_K(u).ravel(), dtype=float)
    kw = {}
    if not np.allclose(op.U, 1.0):
        kw["M"] = LinearOperator((N, N), matvec=lambda u: (op.U.ravel() * u), dtype=float)
    v0 = np.random.default_rng(12345).standard_normal(N)
    try:
        lam, vecs = eigsh(A, k=k, sigma=sigma, OPinv=OP, tol=1e-12, v0=v0,
                          maxiter=maxiter or 10 * N, **kw)
    except ArpackNoConvergence as exc:
        best = float("inf")
        for j in range(len(exc.eigenvalues)):
            phi = _normalize(op, exc.eigenvectors[:, j])
            best = min(best, residual(op, phi, exc.eigenvalues[j]))
        raise ConvergenceFailure("shift-invert Lanczos did not converge", best) from exc
    log.debug("shift-invert: %d inner solves, %d unconverged", stats["calls"], stats["fail"])
    return lam, vecs


def _refine(op, phi, lam, inner_rtol, coarse, steps=3):
    """A few steps of inverse iteration at the current Rayleigh quotient."""
    solve, _ = _shift_solver(op, lam + 1e-6 * max(1.0, abs(lam)), inner_rtol, coarse)
    res = residual(op, phi, lam)
    for _ in range(steps):
        w = solve((op.U * phi).ravel()).reshape(phi.shape)
        phi = _normalize(op, w)
        lam = float(np.sum(phi * op.apply_K(phi)) / np.sum(phi * op.U * phi))
        res = residual(op, phi, lam)
    return phi, lam, res


@dataclass
class SweepEntry:
    h: float
    pair: EigenPair | None
    error: str | None = None


def eigensolve_sweep(scene: Scene, h_list, n_for_h=None, tol=1e-8, scheme="spectral",
                     k=1) -> list[SweepEntry]:
    """One selected pair per h; errors are recorded and the sweep continues."""
    h_list = list(h_list)
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ConfigError("h_list must be strictly decreasing")
    out = []
    for h in h_list:
        n = scene.domain.n if n_for_h is None else n_for_h(h)
        dom = TorusDomain(scene.domain.L, n)
        try:
            op = assemble(dom, scene.potential, h, scene.energy, scheme)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateCluster)
                pair = eigenpairs_near(op, scene.energy, k, tol)[0]
            log.info("h=%.4f E(h)=%.10f drift=%.2e residual=%.1e", h, pair.E_h, pair.drift, pair.residual)
            out.append(SweepEntry(h, pair))
        except (ResolutionError, ConvergenceFailure) as exc:
            log.warning("h=%.4f failed: %s", h, exc)
            out.append(SweepEntry(h, None, f"{type(exc).__name__}: {exc}"))
    return out


def plane_wave_eigenvalue(h, j, k, L=2.0, domain: TorusDomain | None = None, scheme="spectral"):
    """Exact eigenvalue of the V=0 operator on the mode e^{2 pi i (j x + k y)/L}."""
    kj, kk = 2 * np.pi * j / L, 2 * np.pi * k / L
    if scheme == "spectral":
        return h * h * (kj ** 2 + kk ** 2)
    dx = domain.dx
    return h * h * (4 / dx ** 2) * (np.sin(kj * dx / 2) ** 2 + np.sin(kk * dx / 2) ** 2)


__all__ = [
    "DiscreteOperator", "EigenPair", "SweepEntry", "assemble", "eigenpairs_near",
    "eigensolve_sweep", "plane_wave_eigenvalue", "residual", "wavenumbers",
]
