import math

import numpy as np
from hypothesis import given, settings, strategies as st
from scipy import special

from forbidlab.bessel import SWITCH, k0


def test_k0_at_five_matches_reference():
    assert abs(k0(5.0) - 0.0036910983340425942) < 1e-11
    assert abs(k0(5.0) / (2 * math.pi * 0.01) - 0.05874565) < 1e-7


def test_switchover_is_continuous():
    lo, hi = k0(SWITCH - 1e-9), k0(SWITCH + 1e-9)
    assert abs(lo - hi) / hi < 1e-7


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 60.0))
def test_k0_real_against_scipy(x):
    assert abs(k0(x) - special.k0(x)) <= 5e-8 * special.k0(x)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 40.0), st.floats(-1.2, 1.2))
def test_k0_complex_right_half_plane(r, ang):
    z = r * np.exp(1j * ang)
    ref = special.kv(0, z)
    assert abs(k0(z) - ref) <= 5e-8 * abs(ref)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 30.0), st.floats(-1.2, 1.2))
def test_k0_schwarz_reflection(r, ang):
    z = r * np.exp(1j * ang)
    assert abs(k0(np.conj(z)) - np.conj(k0(z))) <= 1e-14 * abs(k0(z))
