import math

import numpy as np
import pytest
from scipy.integrate import quad

from forbidlab.agmon import (curve_agmon_distance, fast_march, point_source_distance, solve_agmon)
from forbidlab.errors import CurveLeavesForbidden
from forbidlab.geometry import AnalyticCurve, BumpPotential, TorusDomain, two_bump_scene, forbidden_mask


def radial_oracle(rho, A=4.0, a=10.0, E=1.0):
    rt = math.sqrt(math.log(A / E) / a)
    return quad(lambda s: math.sqrt(max(A * math.exp(-a * s * s) - E, 0)), rho, rt, epsabs=1e-13)[0]


@pytest.fixture(scope="module")
def fields():
    out = {}
    for n in (128, 256):
        sc = two_bump_scene(n)
        data = forbidden_mask(sc.potential, 1.0, sc.domain)
        out[n] = (sc, solve_agmon(data, sc.potential))
    return out


def test_radial_oracle_value():
    assert radial_oracle(0.15) == pytest.approx(0.212768579780527, rel=1e-10)


def test_constant_speed_strip():
    d = TorusDomain(2.0, 128)
    X, _ = d.mesh()
    c = 1.7
    strip = (X > 0) & (X < 0.5)
    cost = np.where(strip, c, 0.0)
    seeds = {(int(i), int(j)): 0.0 for i, j in zip(*np.nonzero(~strip))}
    dist, _ = fast_march(cost, d, seeds)
    exact = c * np.minimum(X, 0.5 - X)
    assert np.max(np.abs(dist - exact)[strip]) <= 2 * d.dx * c


def test_radial_profile_and_allowed_zero(fields):
    sc, f = fields[256]
    x = sc.domain.coords
    iy = np.argmin(np.abs(x + 0.3))
    for rho in (0.0, 0.1, 0.2, 0.3):
        ix = np.argmin(np.abs(x - (-0.3 + rho)))
        r = abs(x[ix] + 0.3)
        assert abs(f.values[ix, iy] - radial_oracle(r)) < 0.02
    V = sc.potential.on_grid(sc.domain)
    assert np.all(f.values[V <= 1.0] == 0.0)
    assert np.all(f.values >= 0)


def test_curve_distance_and_convergence(fields):
    oracle = radial_oracle(0.15)
    errs = []
    for n in (128, 256):
        sc, f = fields[n]
        dH = curve_agmon_distance(f, sc.curve("H"))
        errs.append(abs(dH - oracle))
    assert errs[1] < 0.7 * errs[0]
    assert errs[1] / oracle < 0.05


def test_max_norm_grid_convergence():
    # interior of the well; n vs 2n vs 4n on common nodes
    diffs = []
    sols = {}
    for n in (64, 128, 256):
        sc = two_bump_scene(n)
        sols[n] = solve_agmon(forbidden_mask(sc.potential, 1.0, sc.domain), sc.potential).values
    d1 = np.max(np.abs(sols[64] - sols[128][::2, ::2]))
    d2 = np.max(np.abs(sols[128] - sols[256][::2, ::2]))
    assert d2 < 0.7 * d1


def test_symmetry_under_swap():
    d = TorusDomain(2.0, 128)
    p = BumpPotential(((4.0, (-0.3, -0.3), 10.0),), 3)
    f = solve_agmon(forbidden_mask(p, 1.0, d), p)
    assert np.max(np.abs(f.values - f.values.T)) < 2 * d.dx * math.sqrt(3.0)


def test_comparison_principle():
    d = TorusDomain(2.0, 128)
    p1 = BumpPotential(((4.0, (0.0, 0.0), 10.0),), 3)
    p2 = BumpPotential(((4.0, (0.0, 0.0), 10.0), (1.0, (0.05, 0.0), 20.0)), 3)
    f1 = solve_agmon(forbidden_mask(p1, 1.0, d), p1)
    f2 = solve_agmon(forbidden_mask(p2, 1.0, d), p2)
    assert np.all(f2.values >= f1.values - 1e-14)


def test_level_set_curve():
    sc = two_bump_scene(256)
    f = solve_agmon(forbidden_mask(sc.potential, 1.0, sc.domain), sc.potential)
    # the field is nearly radial, so the circle through a level value is near a level set
    rho = 0.2
    c = radial_oracle(rho)
    val = curve_agmon_distance(f, AnalyticCurve.circle((-0.3, -0.3), rho))
    assert abs(val - c) <= 2 * sc.domain.dx * math.sqrt(3.0) + 0.01


def test_curve_leaving_forbidden_region():
    sc = two_bump_scene(128)
    f = solve_agmon(forbidden_mask(sc.potential, 1.0, sc.domain), sc.potential)
    with pytest.raises(CurveLeavesForbidden):
        curve_agmon_distance(f, AnalyticCurve.circle((-0.3, -0.3), 0.4))


def test_point_source_constant_metric():
    d = TorusDomain(2.0, 128)
    cost = np.full((128, 128), 2.0)
    dist = point_source_distance(cost, d, (0.013, -0.021))
    X, Y = d.mesh()
    r = np.hypot(X - 0.013, Y + 0.021)
    m = (r > 0.2) & (r < 0.6)
    assert np.max(np.abs(dist[m] - 2 * r[m]) / (2 * r[m])) < 0.05
