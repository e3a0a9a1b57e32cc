"""Curve restrictions, sign-change counts, restriction norms, the Green
identity and tunnelling inequality on a forbidden subregion, and nodal lines."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AllBelowTolerance, RegionNotForbidden, UndersampledCurve
from .geometry import AnalyticCurve, BumpPotential, Region, TorusDomain, region_from_spec
from .spectral import TrigInterpolant, eval_fourier_1d, fourier_upsample, gradient, periodic_coefficients


@dataclass
class CurveSamples:
    t: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    values: np.ndarray
    dn: np.ndarray
    weights: np.ndarray
    h: float = float("nan")
    E_h: float = float("nan")

    @property
    def N(self):
        return self.t.size


def min_samples(h):
    return max(64, math.ceil(40.0 / h))


def restrict_to_curve(pair, curve: AnalyticCurve, N_t: int | None = None, field=None,
                      domain: TorusDomain | None = None, h=None, counting=True) -> CurveSamples:
    """Sample phi and its normal derivative on a curve by spectral interpolation.

    ``pair`` is an EigenPair; alternatively pass ``field``/``domain``/``h``.
    """
    if pair is not None:
        field, domain, h, E_h = pair.phi, pair.domain, pair.h, pair.E_h
    else:
        E_h = float("nan")
    need = min_samples(h) if h and h == h else 64
    if N_t is None:
        N_t = need
        N_t += N_t % 2
    elif counting and N_t < need:
        warnings.warn(f"N_t={N_t} below counting threshold {need}", UndersampledCurve, stacklevel=2)
    t, pts, tan, nrm, speed = curve.sample(N_t)
    interp = TrigInterpolant(field, domain)
    vals = interp(pts)
    gx, gy = interp.grad(pts)
    dn = gx * nrm[:, 0] + gy * nrm[:, 1]
    w = speed * (2 * np.pi / N_t)
    return CurveSamples(t, pts, nrm, vals, dn, w, h if h is not None else float("nan"), E_h)


@dataclass
class SignCount:
    count: int
    uncertain: int
    zeros: np.ndarray = field(default_factory=lambda: np.zeros(0))
    all_below: bool = False

    def __iter__(self):
        return iter((self.count, self.uncertain))


def _bisect_zero(ks, c, a, b, fa, dt=1e-6):
    while b - a > dt:
        m = 0.5 * (a + b)
        fm = eval_fourier_1d(ks, c, np.array([m]))[0].real
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def count_sign_changes(samples, zero_tol_rel=1e-6, upsample=8, dt=1e-6) -> SignCount:
    """Strict sign alternations of the periodic trace, counted on its interpolant.

    Samples with ``|v| <= zero_tol_rel * max|v|`` are treated as undecided;
    each maximal run of them counts once in ``uncertain``.
    """
    v = samples.values if isinstance(samples, CurveSamples) else np.asarray(samples, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("samples must be finite")
    N = v.size
    vmax = np.max(np.abs(v)) if N else 0.0
    if vmax == 0:
        warnings.warn("all samples below tolerance", AllBelowTolerance, stacklevel=2)
        return SignCount(0, 1 if N else 0, np.zeros(0), True)
    fine = fourier_upsample(v, upsample) if upsample > 1 else v
    M = fine.size
    tol = zero_tol_rel * max(vmax, np.max(np.abs(fine)))
    cls = np.where(fine > tol, 1, np.where(fine < -tol, -1, 0))
    # plateaus of undecided samples (cyclic runs)
    z = cls == 0
    if z.all():
        warnings.warn("all samples below tolerance", AllBelowTolerance, stacklevel=2)
        return SignCount(0, 1, np.zeros(0), True)
    uncertain = int(np.count_nonzero(z & ~np.roll(z, 1)))
    idx = np.nonzero(cls)[0]
    s = cls[idx]
    nxt = np.roll(idx, -1)
    flips = np.nonzero(s != np.roll(s, -1))[0]
    ks, c = periodic_coefficients(v)
    tgrid = 2 * np.pi / M
    zeros = []
    for f in flips:
        a, b = idx[f], nxt[f]
        ta = a * tgrid
        tb = b * tgrid if b > a else (b + M) * tgrid
        zeros.append(_bisect_zero(ks, c, ta, tb, fine[a], dt) % (2 * np.pi))
    return SignCount(len(flips), uncertain, np.sort(np.array(zeros)), False)


def restriction_norms(samples: CurveSamples):
    """L2(H) norms of phi and d_nu phi (trapezoid, arclength weights)."""
    return (float(math.sqrt(np.sum(samples.weights * samples.values ** 2))),
            float(math.sqrt(np.sum(samples.weights * samples.dn ** 2))))


def log_restriction_norm(samples: CurveSamples):
    """log ||phi||_{L2(H)} accumulated in log scale so tiny traces do not underflow."""
    v = np.abs(samples.values)
    good = v > 0
    if not good.any():
        return -np.inf
    terms = np.log(samples.weights[good]) + 2 * np.log(v[good])
    m = terms.max()
    return 0.5 * (m + math.log(np.sum(np.exp(terms - m))))


# ---------------------------------------------------------------- region quadrature


def region_weights(domain: TorusDomain, region: Region, sub: int = 4) -> np.ndarray:
    """Fraction of each node-centred cell inside the region (sub x sub subsampling on boundary cells)."""
    X, Y = domain.mesh()
    sd = region.signed_distance(X, Y)
    dx = domain.dx
    half_diag = dx / math.sqrt(2)
    w = (sd < -half_diag).astype(float)
    cut = np.abs(sd) <= half_diag
    if cut.any():
        off = (np.arange(sub) + 0.5) / sub - 0.5
        ox, oy = np.meshgrid(off * dx, off * dx, indexing="ij")
        xs = X[cut][:, None] + ox.ravel()[None, :]
        ys = Y[cut][:, None] + oy.ravel()[None, :]
        inside = region.signed_distance(xs, ys) <= 0
        w[cut] = inside.mean(axis=1)
    return w


@dataclass
class GreenReport:
    lhs_energy: float
    potential_term: float
    boundary_term: float
    mismatch: float

    @property
    def kinetic_term(self):
        return self.lhs_energy - self.potential_term


def _region_and_curve(region, curve, L):
    region = region_from_spec(region, L) if not isinstance(region, Region) else region
    if curve is None:
        curve = region.boundary()
    return region, curve


def green_identity_check(pair, potential: BumpPotential, region, curve: AnalyticCurve | None = None,
                         N_t: int = 512, sub: int = 4, require_forbidden: bool = True) -> GreenReport:
    """Compare the energy of phi on M_H with the boundary flux h^2 <d_nu phi, phi>."""
    dom, h = pair.domain, pair.h
    region, curve = _region_and_curve(region, curve, dom.L)
    V = potential.on_grid(dom)
    w = region_weights(dom, region, sub)
    inside = w > 0
    if require_forbidden and np.min(V[inside] - pair.E_h) <= 0:
        raise RegionNotForbidden("V - E(h) <= 0 somewhere on the region")
    phi = pair.phi
    gx, gy = gradient(phi, dom)
    da = dom.cell_area
    kinetic = h * h * np.sum(w * (gx * gx + gy * gy)) * da
    pot = np.sum(w * (V - pair.E_h) * phi * phi) * da
    s = restrict_to_curve(pair, curve, N_t, counting=False)
    bnd = h * h * np.sum(s.weights * s.dn * s.values)
    lhs = kinetic + pot
    scale = max(abs(lhs), abs(bnd))
    mismatch = 0.0 if scale == 0 else abs(lhs - bnd) / scale
    return GreenReport(float(lhs), float(pot), float(bnd), float(mismatch))


@dataclass
class TunnellingReport:
    lhs: float
    rhs: float
    holds: bool
    C_E: float


def tunnelling_inequality_check(pair, potential: BumpPotential, region, curve: AnalyticCurve | None = None,
                                N_t: int = 512, sub: int = 4, eps_disc: float = 1e-2) -> TunnellingReport:
    """C_E h^-2 ||phi||^2_{M_H} <= ||phi||_H ||d_nu phi||_H."""
    dom, h = pair.domain, pair.h
    region, curve = _region_and_curve(region, curve, dom.L)
    V = potential.on_grid(dom)
    w = region_weights(dom, region, sub)
    inside = w > 0
    C_E = float(np.min(V[inside] - pair.E_h))
    if C_E <= 0:
        raise RegionNotForbidden("V - E(h) <= 0 somewhere on the region")
    mass = np.sum(w * pair.phi ** 2) * dom.cell_area
    lhs = C_E * mass / (h * h)
    s = restrict_to_curve(pair, curve, N_t, counting=False)
    a, b = restriction_norms(s)
    rhs = a * b
    return TunnellingReport(float(lhs), float(rhs), bool(lhs <= rhs * (1 + eps_disc)), C_E)


# ---------------------------------------------------------------- nodal lines


@dataclass
class NodalSet:
    polylines: list
    segments: np.ndarray

    def __len__(self):
        return len(self.polylines)


# edges of a cell, corners ordered (0,0) (1,0) (1,1) (0,1); edge e joins corner e and e+1
_CASES = {}


def _cell_cases():
    for code in range(16):
        pos = [(code >> b) & 1 for b in range(4)]
        edges = [e for e in range(4) if pos[e] != pos[(e + 1) % 4]]
        _CASES[code] = edges


_cell_cases()


def extract_nodal_set(pair=None, field=None, domain: TorusDomain | None = None) -> NodalSet:
    """Marching squares on the periodic grid with linear edge interpolation."""
    if pair is not None:
        field, domain = pair.phi, pair.domain
    u = np.asarray(field, dtype=float)
    n, dx, x0 = domain.n, domain.dx, domain.x0
    c0 = u
    c1 = np.roll(u, -1, 0)
    c2 = np.roll(np.roll(u, -1, 0), -1, 1)
    c3 = np.roll(u, -1, 1)
    corners = np.stack([c0, c1, c2, c3])
    pos = corners >= 0
    code = pos[0] * 1 + pos[1] * 2 + pos[2] * 4 + pos[3] * 8
    active = np.nonzero((code != 0) & (code != 15))
    offs = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])

    def edge_key(i, j, e):
        # canonical id of the grid edge shared by neighbouring cells
        if e == 0:
            return ("x", i, j)
        if e == 1:
            return ("y", (i + 1) % n, j)
        if e == 2:
            return ("x", i, (j + 1) % n)
        return ("y", i, j)

    points = {}
    segs = []
    for i, j in zip(*active):
        vals = corners[:, i, j]
        cd = int(code[i, j])
        edges = _CASES[cd]
        for e in edges:
            k = edge_key(i, j, e)
            if k not in points:
                a, b = vals[e], vals[(e + 1) % 4]
                s = a / (a - b) if a != b else 0.5
                p = (offs[e] + s * (offs[(e + 1) % 4] - offs[e]) + (i, j)) * dx + x0
                points[k] = p
        if len(edges) == 2:
            segs.append((edge_key(i, j, edges[0]), edge_key(i, j, edges[1])))
        else:
            centre = vals.mean()
            # saddle: join around the corner whose sign differs from the centre
            e0, e1, e2, e3 = 0, 1, 2, 3
            if (centre >= 0) == bool(pos[0, i, j]):
                pairs = ((e0, e1), (e2, e3))
            else:
                pairs = ((e3, e0), (e1, e2))
            for p_, q_ in pairs:
                segs.append((edge_key(i, j, p_), edge_key(i, j, q_)))
    segs.sort()
    seg_arr = np.array([[points[a], points[b]] for a, b in segs]) if segs else np.zeros((0, 2, 2))
    polylines = _chain(segs, points, domain)
    return NodalSet(polylines, seg_arr)


def _chain(segs, points, domain):
    adj = {}
    for s_id, (a, b) in enumerate(segs):
        adj.setdefault(a, []).append(s_id)
        adj.setdefault(b, []).append(s_id)
    used = [False] * len(segs)
    lines = []
    # start from open ends first so open chains are not split
    starts = sorted(k for k, v in adj.items() if len(v) == 1) + sorted(adj)
    for start in starts:
        for s0 in adj[start]:
            if used[s0]:
                continue
            chain = [start]
            cur, sid = start, s0
            while sid is not None:
                used[sid] = True
                a, b = segs[sid]
                nxt = b if a == cur else a
                chain.append(nxt)
                cur = nxt
                sid = next((s for s in adj[cur] if not used[s]), None)
            lines.extend(_unwrap_split(np.array([points[k] for k in chain]), domain))
    return lines


def _unwrap_split(pts, domain):
    pts = domain.reduce(pts)
    jumps = np.nonzero(np.any(np.abs(np.diff(pts, axis=0)) > 0.5 * domain.L, axis=1))[0]
    pieces = np.split(pts, jumps + 1)
    return [p for p in pieces if len(p) >= 2]
