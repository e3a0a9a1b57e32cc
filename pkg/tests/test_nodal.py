import math
import warnings

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import synthetic_pair
from forbidlab.errors import AllBelowTolerance, RegionNotForbidden, UndersampledCurve
from forbidlab.geometry import AnalyticCurve, BumpPotential, Region, TorusDomain
from forbidlab.nodal import (count_sign_changes, extract_nodal_set, green_identity_check, region_weights,
                             restrict_to_curve, restriction_norms, tunnelling_inequality_check)

D64 = TorusDomain(2.0, 64)


def roots_on_circle(r, N=20000):
    """Independent root enumeration of sin(pi r cos t) on [0, 2pi)."""
    f = lambda t: math.sin(math.pi * r * math.cos(t))
    ts = np.linspace(0, 2 * np.pi, N, endpoint=False) + 1e-7
    vals = np.array([f(t) for t in ts])
    roots = []
    for i in range(N):
        a, b = ts[i], ts[(i + 1) % N] + (2 * np.pi if i == N - 1 else 0)
        if vals[i] * vals[(i + 1) % N] < 0:
            roots.append(brentq(f, a, b))
    return roots


def test_restriction_of_fourier_modes():
    X, Y = D64.mesh()
    c = AnalyticCurve.circle((0.5, 0.0), 0.0 + 0.3)
    s = restrict_to_curve(None, c, 128, field=np.sin(np.pi * X), domain=D64, h=1.0)
    assert np.max(np.abs(s.values - np.sin(np.pi * s.points[:, 0]))) < 1e-13
    # normal derivative of sin(pi x) on the circle
    assert np.max(np.abs(s.dn - np.pi * np.cos(np.pi * s.points[:, 0]) * s.normals[:, 0])) < 1e-12
    c2 = AnalyticCurve.circle((0.0, 0.0), 1.2)
    s2 = restrict_to_curve(None, c2, 512, field=np.sin(np.pi * X), domain=D64, h=0.1)
    assert np.max(np.abs(s2.values - np.sin(np.pi * 1.2 * np.cos(s2.t)))) < 1e-13


def test_undersampled_warning():
    X, _ = D64.mesh()
    with pytest.warns(UndersampledCurve):
        restrict_to_curve(None, AnalyticCurve.circle((0, 0), 0.5), 64, field=np.cos(np.pi * X), domain=D64, h=0.1)


def test_sign_change_examples():
    t = 2 * np.pi * np.arange(256) / 256
    assert count_sign_changes(np.cos(5 * t)).count == 10
    assert count_sign_changes(np.ones(64)).count == 0
    X, _ = D64.mesh()
    s = restrict_to_curve(None, AnalyticCurve.circle((0, 0), 1.2), 512, field=np.sin(np.pi * X), domain=D64, h=0.1)
    res = count_sign_changes(s)
    roots = roots_on_circle(1.2)
    assert res.count == len(roots) == 6
    assert np.max(np.abs(np.sort(res.zeros) - np.sort(np.mod(roots, 2 * np.pi)))) < 2e-6


def test_all_below_tolerance():
    with pytest.warns(AllBelowTolerance):
        res = count_sign_changes(np.zeros(64))
    assert res.count == 0 and res.all_below


def test_sign_change_parity_and_stability():
    rng = np.random.default_rng(3)
    for _ in range(20):
        c = rng.standard_normal(9) / (1 + np.arange(9)) ** 2
        f = lambda t: sum(c[m] * np.cos(m * t + m) for m in range(9))
        r64 = count_sign_changes(f(2 * np.pi * np.arange(64) / 64))
        r128 = count_sign_changes(f(2 * np.pi * np.arange(128) / 128))
        assert r64.count % 2 == 0 and r128.count % 2 == 0
        assert r128.count >= r64.count - r64.uncertain


def test_restriction_norms():
    t = None
    X, _ = D64.mesh()
    r = 0.3
    s = restrict_to_curve(None, AnalyticCurve.circle((0, 0), r), 256, field=np.ones((64, 64)), domain=D64, h=1.0)
    assert restriction_norms(s)[0] == pytest.approx(math.sqrt(2 * np.pi * r), rel=1e-13)
    d = TorusDomain(2 * np.pi, 64)
    X, Y = d.mesh()
    # cos(m t) on the unit circle equals Re((x+iy)^m)/r^m; m=2: x^2-y^2 is not periodic, so sample directly
    s2 = restrict_to_curve(None, AnalyticCurve.circle((0, 0), 1.0), 256, field=np.cos(X), domain=d, h=1.0)
    s2.values = np.cos(3 * s2.t)
    assert restriction_norms(s2)[0] == pytest.approx(math.sqrt(math.pi), rel=1e-13)


def test_region_weights_area():
    d = TorusDomain(2.0, 256)
    w = region_weights(d, Region.disk((-0.3, -0.3), 0.25))
    assert abs(w.sum() * d.cell_area - math.pi * 0.25 ** 2) < 2e-4


def test_green_identity_plane_wave():
    d = TorusDomain(2.0, 256)
    X, Y = d.mesh()
    h = 0.1
    phi = np.cos(np.pi * X + 0.2) * np.cos(2 * np.pi * Y)
    E_h = 2.0 + h * h * np.pi ** 2 * 5
    pair = synthetic_pair(phi, d, h, E_h)
    pot = BumpPotential.constant(2.0)
    with pytest.raises(RegionNotForbidden):
        green_identity_check(pair, pot, Region.disk((0.1, 0.05), 0.3))
    rep = green_identity_check(pair, pot, Region.disk((0.1, 0.05), 0.3), require_forbidden=False)
    assert rep.mismatch <= 1e-2
    zero = green_identity_check(synthetic_pair(np.zeros_like(phi), d, h, 0.5), pot, Region.disk((0, 0), 0.3))
    assert zero.lhs_energy == 0 and zero.boundary_term == 0 and zero.mismatch == 0


def test_green_identity_two_bump(tb_pair_005, tb_scene):
    rep = green_identity_check(tb_pair_005, tb_scene.potential, Region.disk((-0.3, -0.3), 0.25))
    assert rep.mismatch <= 1e-2
    assert rep.lhs_energy > 0


def test_tunnelling_inequality(tb_pair_005, tb_scene):
    rep = tunnelling_inequality_check(tb_pair_005, tb_scene.potential, Region.disk((-0.3, -0.3), 0.15))
    assert rep.holds and rep.lhs > 0
    d = tb_scene.domain
    z = tunnelling_inequality_check(synthetic_pair(np.zeros((256, 256)), d, 0.05, 1.0), tb_scene.potential,
                                    Region.disk((-0.3, -0.3), 0.15))
    assert z.holds and z.lhs == 0 and z.rhs == 0
    # bump supported inside the disc, zero with its normal derivative on the boundary
    X, Y = d.mesh()
    r = np.hypot(X + 0.3, Y + 0.3) / 0.12
    bump = np.where(r < 1, (1 - r * r) ** 4, 0.0)
    v = tunnelling_inequality_check(synthetic_pair(bump, d, 0.05, 1.0), tb_scene.potential,
                                    Region.disk((-0.3, -0.3), 0.15))
    assert not v.holds and v.lhs > 0 and v.rhs < 1e-6 * v.lhs


def test_nodal_set_examples():
    X, Y = D64.mesh()
    ns = extract_nodal_set(field=np.sin(np.pi * X), domain=D64)
    xs = sorted(round(float(p[:, 0].mean()), 6) for p in ns.polylines)
    assert len(ns.polylines) == 2 and np.allclose(np.abs(xs), [1.0, 0.0], atol=D64.dx)
    for p in ns.polylines:
        assert np.ptp(p[:, 0]) < D64.dx
    grid = extract_nodal_set(field=np.sin(np.pi * X) * np.sin(np.pi * Y), domain=D64)
    assert len(grid.segments) > 0
    on_line = np.minimum(np.abs(np.sin(np.pi * grid.segments[..., 0])), np.abs(np.sin(np.pi * grid.segments[..., 1])))
    assert on_line.max() < np.pi * D64.dx
    assert len(extract_nodal_set(field=np.ones((64, 64)), domain=D64)) == 0


def test_nodal_endpoints_on_sign_change_edges():
    X, Y = D64.mesh()
    u = np.cos(np.pi * X + 0.3) + 0.4 * np.sin(3 * np.pi * Y - 0.1)
    ns = extract_nodal_set(field=u, domain=D64)
    it_pts = ns.segments.reshape(-1, 2)
    # each endpoint lies on a grid line
    fx = (it_pts[:, 0] - D64.x0) / D64.dx
    fy = (it_pts[:, 1] - D64.x0) / D64.dx
    on_grid = np.minimum(np.abs(fx - np.round(fx)), np.abs(fy - np.round(fy)))
    assert on_grid.max() < 1e-9
    # and the linear interpolant vanishes there, so |u| is O(dx^2)
    from forbidlab.spectral import TrigInterpolant
    assert np.max(np.abs(TrigInterpolant(u, D64)(it_pts))) < 0.05
    again = extract_nodal_set(field=u, domain=D64)
    assert np.array_equal(again.segments, ns.segments)
