import math

import numpy as np
import pytest

from forbidlab.errors import ConfigError, ForbiddenViolation, PoleLeak
from forbidlab.revolution import (RevolutionProfile, arc_parameter, assemble_mode_field, latitude_strip_count,
                                  latitude_zero_count, radial_agmon_integral, revolution_sweep, separable_residual,
                                  solve_radial_mode)
from forbidlab.trace import strip_log_max, count_strip_zeros

V = "gauss:10,0,40"
E0 = 5.0


@pytest.fixture(scope="module")
def cosine():
    prof = RevolutionProfile.cosine(0.6)
    return prof, arc_parameter(prof)


@pytest.fixture(scope="module")
def modes(cosine):
    prof, arc = cosine
    return {(m, c): solve_radial_mode(prof, V, m, E0, c, arc=arc) for m in (10, 20, 40) for c in ("1", "w2")}


def test_profile_validation():
    with pytest.raises(ConfigError):
        RevolutionProfile(lambda r: 1 + 0 * r, lambda r: 0 * r, lambda r: 0 * r)  # not strictly concave
    with pytest.raises(ConfigError):
        RevolutionProfile.cosine(0.6, delta=0.0)


def test_arc_parameter(cosine):
    cyl = arc_parameter(RevolutionProfile.cylinder())
    r = np.linspace(-0.9, 0.9, 100)
    assert np.max(np.abs(cyl.s_of_r(r) - r)) < 1e-12
    prof, arc = cosine
    assert abs(arc.s_of_r(0.0)) < 1e-14
    assert np.max(np.abs(arc.s_of_r(r) + arc.s_of_r(-r))) < 1e-10
    assert np.all(np.diff(arc.s_nodes) > 0)
    assert np.max(np.abs(arc.r_of_s(arc.s_of_r(r)) - r)) < 1e-10


def test_cylinder_dirichlet_spectrum():
    prof = RevolutionProfile.cylinder()
    arc = arc_parameter(prof)
    m, h = 8, 1 / 8
    # the Dirichlet sine modes reach the truncation by design
    with pytest.warns(PoleLeak):
        mode = solve_radial_mode(prof, "const:0", m, 0.3, arc=arc, n_s=4000)
    length = arc.s_range[1] - arc.s_range[0]
    ks = np.arange(1, 200)
    exact = h * h * (ks ** 2 * math.pi ** 2 / length ** 2 + m * m)
    near = exact[np.argmin(np.abs(exact - 0.3))]
    # second-order stencil: relative error O((k pi ds / len)^2)
    assert abs(mode.E_h - near) / near < 1e-4
    with pytest.warns(PoleLeak):
        shifted = solve_radial_mode(prof, "const:0.7", m, 1.0, arc=arc, n_s=4000)
    assert abs(shifted.E_h - mode.E_h - 0.7) < 1e-10


@pytest.mark.parametrize("m", [10, 20, 40])
def test_latitude_count_is_2m(modes, cosine, m):
    prof, _ = cosine
    for c in ("1", "w2"):
        mode = modes[(m, c)]
        assert mode.residual <= 1e-8
        assert latitude_zero_count(mode, 0.1, V) == 2 * m
        assert latitude_strip_count(mode, 0.1, V, 0.2) == 2 * m


def test_mode_field(modes, cosine):
    prof, _ = cosine
    mode = modes[(10, "1")]
    r, theta, phi = assemble_mode_field(mode)
    assert np.max(np.abs(phi.mean(axis=1))) < 1e-14
    assert separable_residual(mode, prof, V) <= 10 * max(mode.residual, 1e-14)


def test_trace_log_max_on_latitude(modes):
    from forbidlab.revolution import latitude_trace

    tr = latitude_trace(modes[(10, "1")], 0.1, V)
    assert count_strip_zeros(tr, 0.2) == 20
    # |cos(m t)| on Im t = tau peaks at cosh(m tau); normalized by ||cos m t|| = sqrt(pi)
    assert abs(strip_log_max(tr, 0.2) - (math.log(math.cosh(2.0)) - 0.5 * math.log(math.pi))) < 1e-3


def test_forbidden_latitude_required(modes):
    with pytest.raises(ForbiddenViolation):
        latitude_zero_count(modes[(10, "1")], 0.3, V)


def test_energy_drift_and_radial_decay(modes, cosine):
    prof, arc = cosine
    drift = [abs(modes[(m, "1")].E_h - E0) for m in (10, 20, 40)]
    assert drift[-1] <= drift[0]
    # pre-asymptotic at m=10; the band is asserted from m=20
    for m in (20, 40):
        mode = modes[(m, "1")]
        rate = -mode.h * math.log(abs(mode.value_at(0.1)))
        ag = radial_agmon_integral(prof, V, mode.E_h, 0.1, "1", arc)
        assert 0.8 * ag <= rate <= 1.5 * ag


def test_no_pole_leak_for_confined_modes(modes):
    for mode in modes.values():
        assert max(abs(mode.v[0]), abs(mode.v[-1])) <= 1e-6


def test_sweep_rows():
    rows = revolution_sweep(RevolutionProfile.cosine(0.6), V, E0, (10, 20))
    assert [r.count for r in rows] == [20, 40]
    assert [r.strip_count for r in rows] == [20, 40]
