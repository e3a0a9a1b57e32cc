"""Torus grids, Gaussian bump potentials, forbidden regions, analytic curves
and the conformal factor used by the auxiliary metric."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ConfigError,
    DegenerateCurve,
    EmptyForbiddenRegion,
    FullForbiddenRegion,
    MarginViolation,
    NonPositiveFactor,
)


@dataclass(frozen=True)
class TorusDomain:
    """Square torus of period ``L`` sampled on an ``n x n`` grid.

    Grid points are ``x_i = -L/2 + i*dx``; arrays are indexed ``[ix, iy]``.
    """

    L: float = 2.0
    n: int = 256

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ConfigError(f"grid size must be even and >= 8, got {self.n}")
        if self.L <= 0:
            raise ConfigError("period must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def x0(self) -> float:
        return -0.5 * self.L

    @property
    def coords(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    def mesh(self):
        x = self.coords
        return np.meshgrid(x, x, indexing="ij")

    def reduce(self, p):
        """Map points into the fundamental domain [-L/2, L/2)."""
        p = np.asarray(p, dtype=float)
        return np.mod(p - self.x0, self.L) + self.x0

    def min_image(self, d):
        """Shortest periodic representative of a displacement."""
        d = np.asarray(d, dtype=float)
        return d - self.L * np.round(d / self.L)

    def distance(self, p, q):
        return np.linalg.norm(self.min_image(np.asarray(p) - np.asarray(q)), axis=-1)

    def refine(self, factor=2) -> "TorusDomain":
        return TorusDomain(self.L, self.n * factor)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx


@dataclass(frozen=True)
class BumpPotential:
    """Periodized sum of Gaussian bumps ``A exp(-a |x-c|^2)``.

    ``baseline`` adds a constant, which makes constant potentials expressible.
    """

    bumps: tuple = ()
    n_per: int = 3
    L: float = 2.0
    baseline: float = 0.0

    def __post_init__(self):
        bumps = tuple((float(A), (float(c[0]), float(c[1])), float(a)) for A, c, a in self.bumps)
        for A, _, a in bumps:
            if A <= 0 or a <= 0:
                raise ConfigError("bump amplitudes and decay rates must be positive")
        if self.baseline < 0:
            raise ConfigError("baseline must be nonnegative")
        object.__setattr__(self, "bumps", bumps)

    @classmethod
    def constant(cls, value, L=2.0):
        return cls((), 0, L, float(value))

    def __call__(self, x, y=None):
        """Evaluate at points. Accepts ``(x, y)`` arrays or a ``(..., 2)`` array."""
        if y is None:
            p = np.asarray(x, dtype=float)
            x, y = p[..., 0], p[..., 1]
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast(x, y).shape, self.baseline)
        L = self.L
        imgs = range(-self.n_per, self.n_per + 1)
        for A, (cx, cy), a in self.bumps:
            # separable in x and y
            gx = sum(np.exp(-a * (x - cx + L * i) ** 2) for i in imgs)
            gy = sum(np.exp(-a * (y - cy + L * j) ** 2) for j in imgs)
            out = out + A * gx * gy
        return out

    def on_grid(self, domain: TorusDomain) -> np.ndarray:
        X, Y = domain.mesh()
        return self(X, Y)


def eval_potential(p: BumpPotential, x):
    return p(x)


@dataclass(frozen=True)
class ClassicalData:
    energy: float
    mask: np.ndarray
    band: np.ndarray
    domain: TorusDomain


def _neighbor_disagree(mask):
    out = np.zeros_like(mask)
    for ax in (0, 1):
        for s in (1, -1):
            out |= mask != np.roll(mask, s, axis=ax)
    return out


def forbidden_mask(p: BumpPotential, E: float, d: TorusDomain) -> ClassicalData:
    V = p.on_grid(d)
    mask = V > E
    if not mask.any():
        raise EmptyForbiddenRegion(f"no grid point has V > {E}")
    if mask.all():
        raise FullForbiddenRegion(f"every grid point has V > {E}")
    return ClassicalData(float(E), mask, _neighbor_disagree(mask), d)


# ---------------------------------------------------------------- curves


@dataclass(frozen=True)
class AnalyticCurve:
    """Closed curve ``q(t) = sum_k a_k e^{ikt}`` with ``a_k`` in C^2.

    ``coef`` has shape ``(2, 2K+1)`` ordered ``k = -K..K``.
    """

    coef: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=complex)
        if c.ndim != 2 or c.shape[0] != 2 or c.shape[1] % 2 != 1:
            raise ConfigError("curve coefficients must have shape (2, 2K+1)")
        # keep the curve real
        c = 0.5 * (c + np.conj(c[:, ::-1]))
        object.__setattr__(self, "coef", c)

    @property
    def order(self) -> int:
        return (self.coef.shape[1] - 1) // 2

    @property
    def modes(self):
        K = self.order
        return np.arange(-K, K + 1)

    @classmethod
    def circle(cls, center, radius, name=""):
        return cls.ellipse(center, radius, radius, 0.0, name=name)

    @classmethod
    def ellipse(cls, center, a, b, angle=0.0, name=""):
        ca, sa = np.cos(angle), np.sin(angle)
        # a cos t along (ca, sa), b sin t along (-sa, ca)
        ux = np.array([ca, sa]) * a
        uy = np.array([-sa, ca]) * b
        c = np.zeros((2, 3), complex)
        c[:, 1] = center
        c[:, 2] = 0.5 * ux - 0.5j * uy
        c[:, 0] = 0.5 * ux + 0.5j * uy
        return cls(c, name)

    @classmethod
    def from_samples(cls, pts, order=None, name=""):
        pts = np.asarray(pts, dtype=float)
        N = pts.shape[0]
        K = (N - 1) // 2 if order is None else order
        F = np.fft.fft(pts, axis=0) / N
        ks = np.arange(-K, K + 1)
        return cls(F[ks % N].T, name)

    def _basis(self, t, deriv=0):
        t = np.asarray(t)
        k = self.modes
        return (1j * k) ** deriv * np.exp(1j * np.multiply.outer(t, k))

    def point(self, t, deriv=0):
        """q^{(deriv)}(t); real for real t, holomorphic extension for complex t."""
        val = self._basis(t, deriv) @ self.coef.T
        if np.isrealobj(t):
            return val.real
        return val

    def frame(self, t):
        """Return (point, unit tangent, unit outward normal, speed)."""
        t = np.asarray(t, dtype=float)
        p = self.point(t)
        dq = self.point(t, 1)
        speed = np.linalg.norm(dq, axis=-1)
        if np.any(speed < 1e-12):
            raise DegenerateCurve("curve speed below 1e-12")
        tan = dq / speed[..., None]
        # tangent turned clockwise: outward for positively oriented curves
        nrm = np.stack([tan[..., 1], -tan[..., 0]], axis=-1)
        return p, tan, nrm, speed

    def sample(self, N):
        t = 2 * np.pi * np.arange(N) / N
        return (t, *self.frame(t))

    def length(self, N=1024):
        _, _, _, _, speed = self.sample(N)
        return speed.sum() * 2 * np.pi / N

    def signed_area(self, N=1024):
        t = 2 * np.pi * np.arange(N) / N
        p = self.point(t)
        dq = self.point(t, 1)
        return 0.5 * np.sum(p[:, 0] * dq[:, 1] - p[:, 1] * dq[:, 0]) * 2 * np.pi / N


def curve_frame(c: AnalyticCurve, t):
    return c.frame(t)


def curve_from_spec(spec: dict, name="") -> AnalyticCurve:
    kind = spec.get("kind", "circle")
    if kind == "circle":
        return AnalyticCurve.circle(spec["center"], spec["radius"], name)
    if kind == "ellipse":
        return AnalyticCurve.ellipse(spec["center"], spec["a"], spec["b"], spec.get("angle", 0.0), name)
    if kind == "fourier":
        c = np.asarray(spec["re"], float) + 1j * np.asarray(spec.get("im", np.zeros_like(spec["re"])), float)
        return AnalyticCurve(c, name)
    raise ConfigError(f"unknown curve kind {kind!r}")


# ---------------------------------------------------------------- regions


@dataclass(frozen=True)
class Region:
    """A subset of the torus with a signed distance (negative inside).

    kind is one of ``disk``, ``curve``, ``full``, ``empty``.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    curve: AnalyticCurve | None = None
    L: float = 2.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def disk(cls, center, radius, L=2.0):
        return cls("disk", tuple(map(float, center)), float(radius), None, L)

    @classmethod
    def inside(cls, curve: AnalyticCurve, L=2.0):
        if curve.signed_area() <= 0:
            raise ConfigError("region boundary must be positively oriented")
        t = 2 * np.pi * np.arange(8) / 8
        c = curve.point(t).mean(axis=0)
        return cls("curve", tuple(c), 0.0, curve, L)

    @classmethod
    def full(cls, L=2.0):
        return cls("full", L=L)

    @classmethod
    def empty(cls, L=2.0):
        return cls("empty", L=L)

    def boundary(self) -> AnalyticCurve | None:
        if self.kind == "disk":
            return AnalyticCurve.circle(self.center, self.radius)
        return self.curve

    def _rel(self, x, y):
        dx = x - self.center[0]
        dy = y - self.center[1]
        dx = dx - self.L * np.round(dx / self.L)
        dy = dy - self.L * np.round(dy / self.L)
        return dx, dy

    def signed_distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "full":
            return np.full(np.broadcast(x, y).shape, -np.inf)
        if self.kind == "empty":
            return np.full(np.broadcast(x, y).shape, np.inf)
        dx, dy = self._rel(x, y)
        if self.kind == "disk":
            return np.hypot(dx, dy) - self.radius
        # general curve: dense polygon for distances, winding test for the sign
        if "poly" not in self._cache:
            N = 4096
            t = 2 * np.pi * np.arange(N) / N
            poly = self.curve.point(t) - np.asarray(self.center)
            self._cache["poly"] = poly
            self._cache["tree"] = cKDTree(poly)
        poly = self._cache["poly"]
        pts = np.stack([dx.ravel(), dy.ravel()], axis=-1)
        dist, _ = self._cache["tree"].query(pts)
        inside = _points_in_polygon(pts, poly)
        sd = np.where(inside, -dist, dist)
        return sd.reshape(dx.shape)

    def contains(self, x, y):
        return self.signed_distance(x, y) <= 0


def _points_in_polygon(pts, poly):
    """Even-odd ray casting, vectorized over points."""
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = poly[:, 0][None, :], poly[:, 1][None, :]
    x2, y2 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    inside = np.zeros(pts.shape[0], dtype=bool)
    chunk = 2048
    for s in range(0, pts.shape[0], chunk):
        xs, ys = x[s:s + chunk], y[s:s + chunk]
        cond = (y1 > ys) != (y2 > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (ys - y1) * (x2 - x1) / (y2 - y1)
        cross = cond & (xs < xint)
        inside[s:s + chunk] = np.count_nonzero(cross, axis=1) % 2 == 1
    return inside


def region_from_spec(spec, L=2.0) -> Region:
    if isinstance(spec, Region):
        return spec
    kind = spec.get("kind", "disk")
    if kind in ("disk", "circle"):
        return Region.disk(spec["center"], spec["radius"], L)
    if kind == "full":
        return Region.full(L)
    if kind == "empty":
        return Region.empty(L)
    return Region.inside(curve_from_spec(spec), L)


# ---------------------------------------------------------------- conformal factor


def smoothstep5(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (10 - 15 * u + 6 * u * u)


@dataclass(frozen=True)
class ConformalFactor:
    """Lambda = (V - E(h)) chi + (1 - chi) on the grid."""

    values: np.ndarray
    chi: np.ndarray
    C_E: float | None
    E_h: float
    region: Region
    width: float
    domain: TorusDomain
    potential: BumpPotential

    def at(self, pts):
        """Pointwise evaluation off the grid (exact formula, not interpolation)."""
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        chi = _chi(self.region, self.width, x, y)
        return (self.potential(x, y) - self.E_h) * chi + (1 - chi)


def _chi(region, width, x, y):
    sd = region.signed_distance(x, y)
    if region.kind in ("full", "empty"):
        return np.where(np.isneginf(sd), 1.0, 0.0)
    if width <= 0:
        return (sd <= 0).astype(float)
    return 1.0 - smoothstep5(sd / width)


def build_conformal_factor(p: BumpPotential, E_h: float, domain: TorusDomain, region,
                           width: float = 0.05, energy: float | None = None,
                           margin: float | None = None) -> ConformalFactor:
    """Build Lambda for the region ``Omega_H`` with a quintic-smoothstep cutoff.

    ``energy`` defines the forbidden region used in the margin test
    (defaults to ``E_h``); ``margin`` defaults to two grid spacings.
    """
    region = region_from_spec(region, domain.L) if not isinstance(region, Region) else region
    E = E_h if energy is None else energy
    margin = 2 * domain.dx if margin is None else margin
    X, Y = domain.mesh()
    V = p(X, Y)
    if region.kind == "empty":
        ones = np.ones_like(V)
        return ConformalFactor(ones, np.zeros_like(V), None, E_h, region, width, domain, p)
    sd = region.signed_distance(X, Y)
    chi = _chi(region, width, X, Y)
    near = sd < width + margin
    if np.any(near & (V <= E)):
        raise MarginViolation("support of the cutoff is not inside the forbidden region with margin")
    supp = chi > 0
    if np.any(V[supp] - E_h <= 0):
        raise NonPositiveFactor("V - E(h) <= 0 on the support of the cutoff")
    lam = (V - E_h) * chi + (1 - chi)
    inner = sd <= 0
    C_E = float(np.min(V[inner] - E_h)) if inner.any() else None
    return ConformalFactor(lam, chi, C_E, E_h, region, width, domain, p)


# ---------------------------------------------------------------- scenes


@dataclass(frozen=True)
class Scene:
    domain: TorusDomain
    potential: BumpPotential
    energy: float
    curves: dict
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def curve(self, name) -> AnalyticCurve:
        try:
            return self.curves[name]
        except KeyError:
            raise ConfigError(f"scene has no curve {name!r}") from None

    def with_n(self, n) -> "Scene":
        return Scene(TorusDomain(self.domain.L, n), self.potential, self.energy, self.curves, self.raw)


TWO_BUMP = {
    "domain": {"L": 2.0, "n": 256},
    "potential": {"bumps": [[4, [-0.3, -0.3], 10], [3, [0.6, 0.7], 15]], "n_per": 3},
    "energy": 1.0,
    "curves": {
        "H": {"kind": "circle", "center": [-0.3, -0.3], "radius": 0.15},
        "gamma": {"kind": "circle", "center": [-0.3, -0.3], "radius": 0.25},
    },
}


def scene_from_dict(d: dict) -> Scene:
    try:
        dom = d.get("domain", {})
        domain = TorusDomain(float(dom.get("L", 2.0)), int(dom.get("n", 256)))
        pot = d.get("potential", {})
        potential = BumpPotential(tuple(pot.get("bumps", ())), int(pot.get("n_per", 3)),
                                  domain.L, float(pot.get("baseline", 0.0)))
        energy = float(d.get("energy", 1.0))
        curves = {k: curve_from_spec(v, k) for k, v in d.get("curves", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scene: {exc}") from exc
    return Scene(domain, potential, energy, curves, d)


def two_bump_scene(n=256) -> Scene:
    d = dict(TWO_BUMP)
    d["domain"] = {"L": 2.0, "n": n}
    return scene_from_dict(d)
