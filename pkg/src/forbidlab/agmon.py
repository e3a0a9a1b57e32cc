"""Agmon distance in the degenerate metric (V-E)_+ g by first-order fast
marching on the periodic grid."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.integrate import quad

from .errors import CurveLeavesForbidden, EmptyForbiddenRegion
from .geometry import AnalyticCurve, BumpPotential, ClassicalData, TorusDomain


@dataclass
class AgmonDistanceField:
    values: np.ndarray
    order: np.ndarray
    front_error: float
    domain: TorusDomain
    energy: float
    potential: BumpPotential | None = None

    def at(self, pts):
        return bilinear(self.values, self.domain, pts)


def bilinear(field, domain: TorusDomain, pts):
    pts = np.asarray(pts, dtype=float)
    idx = (pts - domain.x0) / domain.dx
    coords = np.stack([idx[..., 0].ravel(), idx[..., 1].ravel()])
    out = ndimage.map_coordinates(field, coords, order=1, mode="grid-wrap")
    return out.reshape(pts.shape[:-1])


def fast_march(cost: np.ndarray, domain: TorusDomain, seeds: dict):
    """Solve |grad d| = cost with ``d = seeds[(i, j)]`` on the seed nodes.

    Returns (distance, acceptance order).  Neighbors wrap periodically.
    """
    n = domain.n
    dx = domain.dx
    d = np.full((n, n), np.inf)
    accepted = np.zeros((n, n), dtype=bool)
    order = np.full((n, n), -1, dtype=np.int64)
    heap = []
    for (i, j), v in seeds.items():
        d[i, j] = v
        heapq.heappush(heap, (v, i, j))
    cdx = cost * dx
    # work with python lists for speed in the inner loop
    dl = d.tolist()
    acc = accepted.tolist()
    cl = cdx.tolist()
    count = 0
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        v, i, j = pop(heap)
        if acc[i][j]:
            continue
        acc[i][j] = True
        order[i, j] = count
        count += 1
        for (p, q) in (((i - 1) % n, j), ((i + 1) % n, j), (i, (j - 1) % n), (i, (j + 1) % n)):
            if acc[p][q]:
                continue
            f = cl[p][q]
            rowm, rowp, row = dl[(p - 1) % n], dl[(p + 1) % n], dl[p]
            a = rowm[q] if rowm[q] < rowp[q] else rowp[q]
            b = row[(q - 1) % n] if row[(q - 1) % n] < row[(q + 1) % n] else row[(q + 1) % n]
            if a > b:
                a, b = b, a
            if b - a < f:
                t = 0.5 * (a + b + math.sqrt(2 * f * f - (b - a) ** 2))
            else:
                t = a + f
            if t < row[q]:
                row[q] = t
                push(heap, (t, p, q))
    return np.array(dl), order


def upwind_residual(d, cost, domain: TorusDomain, where):
    """Max of | |grad^- d| - cost | over ``where`` (first-order upwind)."""
    dx = domain.dx
    gx = np.maximum(np.maximum(d - np.roll(d, 1, 0), d - np.roll(d, -1, 0)), 0) / dx
    gy = np.maximum(np.maximum(d - np.roll(d, 1, 1), d - np.roll(d, -1, 1)), 0) / dx
    g = np.hypot(gx, gy)
    if not where.any():
        return 0.0
    return float(np.max(np.abs(g - cost)[where]))


def agmon_speed(potential, energy, domain):
    V = potential.on_grid(domain)
    return np.sqrt(np.maximum(V - energy, 0.0))


def solve_agmon(data: ClassicalData, potential: BumpPotential, domain: TorusDomain | None = None):
    domain = data.domain if domain is None else domain
    if not data.mask.any():
        raise EmptyForbiddenRegion("forbidden region is empty")
    speed = agmon_speed(potential, data.energy, domain)
    allowed = ~data.mask
    seeds = {(int(i), int(j)): 0.0 for i, j in zip(*np.nonzero(allowed))}
    d, order = fast_march(speed, domain, seeds)
    interior = data.mask & ~data.band
    err = upwind_residual(d, speed, domain, interior)
    return AgmonDistanceField(d, order, err, domain, data.energy, potential)


def point_source_distance(cost: np.ndarray, domain: TorusDomain, y, local_cost=None, radius=6.0):
    """Distance from an arbitrary point ``y`` in the metric cost^2 g.

    Nodes within ``radius`` grid spacings are seeded with the exact distance of
    the frozen local metric.
    """
    y = np.asarray(y, dtype=float)
    n, dx = domain.n, domain.dx
    c0 = local_cost if local_cost is not None else float(bilinear(cost, domain, y[None])[0])
    ci = (y - domain.x0) / dx
    seeds = {}
    r = int(math.ceil(radius)) + 1
    for a in range(-r, r + 1):
        for b in range(-r, r + 1):
            i, j = int(math.floor(ci[0])) + a, int(math.floor(ci[1])) + b
            p = domain.x0 + dx * np.array([i, j])
            dist = math.hypot(*(p - y))
            if dist <= radius * dx:
                seeds[(i % n, j % n)] = c0 * dist
    d, _ = fast_march(cost, domain, seeds)
    return d


def curve_agmon_distance(field: AgmonDistanceField, curve: AnalyticCurve, N: int = 512,
                         potential: BumpPotential | None = None):
    """d_E(H): minimum of the interpolated distance over samples of H."""
    N = max(int(N), 256)
    t = 2 * np.pi * np.arange(N) / N
    pts = curve.point(t)
    pot = potential if potential is not None else field.potential
    if pot is not None and np.any(pot(pts) <= field.energy):
        raise CurveLeavesForbidden("curve samples reach the classically allowed region")
    return float(np.min(field.at(pts)))


def radial_agmon_distance(A, a, E, rho):
    """1D reference for an isolated bump A exp(-a r^2): integral from rho to the turning radius."""
    r_turn = math.sqrt(math.log(A / E) / a)
    if rho >= r_turn:
        return 0.0
    val, _ = quad(lambda s: math.sqrt(max(A * math.exp(-a * s * s) - E, 0.0)), rho, r_turn,
                  epsabs=1e-13, epsrel=1e-12)
    return val
