import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forbidlab.errors import ContourZero, NonAnalyticTrace, StripExceeded, ZeroTrace
from forbidlab.nodal import restrict_to_curve
from forbidlab.trace import ComplexTrace, build_trace, count_strip_zeros, eval_strip, jensen_report, strip_log_max

T = 2 * np.pi * np.arange(256) / 256
NORM_COS = 1 / math.sqrt(math.pi)  # cos(t) / ||cos||_{L2(0, 2pi)}


@pytest.mark.parametrize("m", [1, 3, 5, 12])
def test_cos_mt_zero_count(m):
    tr = build_trace(np.cos(m * T))
    for tau in (0.1 * tr.tau_adm, 0.5 * tr.tau_adm, tr.tau_adm):
        assert count_strip_zeros(tr, tau) == 2 * m


def test_nonvanishing_and_shifted_cos():
    assert count_strip_zeros(build_trace(np.exp(1j * T)), 0.5) == 0
    tr = build_trace(np.cos(3 * T) - 0.5)
    assert count_strip_zeros(tr, 0.3) == 6


def test_strip_evaluation():
    tr = build_trace(np.cos(T))
    assert abs(eval_strip(tr, np.array([0.5j]))[0] - math.cosh(0.5) * NORM_COS) < 1e-12
    tr5 = build_trace(np.cos(5 * T))
    t = 0.3 + 0.1j
    assert abs(eval_strip(tr5, np.array([t]))[0] - np.cos(5 * t) * NORM_COS) < 1e-12
    assert np.max(np.abs(eval_strip(tr5, T).real - np.cos(5 * T) * NORM_COS)) < 1e-10
    with pytest.raises(StripExceeded):
        eval_strip(tr5, np.array([2j * tr5.tau_adm]))


def test_log_max():
    tr = build_trace(np.cos(T))
    assert abs(strip_log_max(tr, 0.4) - (math.log(math.cosh(0.4)) + math.log(NORM_COS))) < 1e-3
    one = ComplexTrace(np.array([0]), np.array([1.0 + 0j]), math.inf, 1.0, 1.0, np.array([True]))
    assert abs(strip_log_max(one, 0.5)) < 1e-12
    assert count_strip_zeros(one, 0.5) == 0
    # normalized constant: 1 / sqrt(2 pi)
    const = build_trace(np.full(64, 3.0))
    assert abs(strip_log_max(const, 0.5) + 0.5 * math.log(2 * math.pi)) < 1e-12


def test_decay_rate_of_analytic_trace():
    # 1/(a - cos t) has coefficients ~ e^{-arccosh(a) |k|}
    tr = build_trace(1 / (1.5 - np.cos(T)))
    assert abs(tr.rho_hat - math.acosh(1.5)) < 1e-3
    assert tr.tau_adm <= 0.5 * tr.rho_hat + 1e-12


def test_errors():
    with pytest.raises(ZeroTrace):
        build_trace(np.zeros(64))
    rng = np.random.default_rng(1)
    with pytest.warns(NonAnalyticTrace):
        build_trace(rng.standard_normal(256))
    tr = build_trace(np.cos(T))
    # cos vanishes on the real axis
    with pytest.raises(ContourZero):
        count_strip_zeros(tr, 0.0)


def test_jensen_report_rows():
    rows = jensen_report([build_trace(np.cos(m * T)) for m in (2, 4)], tau=0.3)
    assert [r.zeros for r in rows] == [4, 8]
    assert all(r.ratio == r.zeros / max(1.0, r.log_max) for r in rows)
    bad = jensen_report([build_trace(np.cos(T))], tau=5.0)
    assert bad[0].zeros is None and "StripExceeded" in bad[0].note


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0.05, 0.4))
def test_real_symmetry_reflection_and_monotonicity(c, tau):
    v = c[0] + c[1] * np.cos(T) + c[2] * np.sin(2 * T) + c[3] * np.cos(3 * T) + 0.05
    tr = build_trace(v)
    tau = min(tau, tr.tau_adm)
    assert np.max(np.abs(tr(T).imag)) < 1e-10
    z = np.array([0.7 + 0.5j * tau, 2.1 - 0.3j * tau])
    assert np.max(np.abs(tr(np.conj(z)) - np.conj(tr(z)))) < 1e-10
    try:
        a, b = count_strip_zeros(tr, 0.5 * tau), count_strip_zeros(tr, tau)
    except ContourZero:
        return
    assert a <= b


def test_count_dominance_on_eigenfunction(tb_pair_005, tb_scene):
    s = restrict_to_curve(tb_pair_005, tb_scene.curve("H"))
    from forbidlab.nodal import count_sign_changes

    real = count_sign_changes(s).count
    tr = build_trace(s)
    assert tr.tau_adm > 0
    assert real <= count_strip_zeros(tr, 0.5 * tr.tau_adm)
