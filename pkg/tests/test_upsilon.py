import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hybridcd.upsilon import C_LOG_REPORTED, c_of_r, golden_section, nu, nu_ratio, upsilon, upsilon_prime

# DERIVED: golden-section values, cross-checked against the dense-grid oracle below
FROZEN_C = {
    0.0: 1.0,
    0.5: 1.1996286923861759,
    1.0: 1.3499187255574545,
    2.0: 1.5902459336953112,
    3.0: 1.7891117898581976,
    5.0: 2.122922185433995,
}


def grid_oracle(r, lo=-6.0, hi=6.0, points=2_000_001):
    w = np.linspace(lo, hi, points)
    w = w[w != 0.0]
    vals = (r * np.expm1(w) * w + (np.expm1(-w) + w) - (r - 1) * (np.expm1(w) - w)) / w**2
    return min(vals.min(), 1 + r / 2)


def test_upsilon_values():
    assert upsilon(0.0) == 0.0
    assert upsilon(1.0) == pytest.approx(math.e - 2)
    assert upsilon_prime(1.0) == pytest.approx(math.e - 1)
    assert np.all(upsilon(np.linspace(-30, 30, 101)) >= 0)


def test_nu_expanded_identity():
    w = np.linspace(-5, 5, 41)
    assert np.allclose(nu(2, 1, w), 2 * w * np.exp(w) + np.exp(-w) - np.exp(w), atol=1e-12)


def test_removable_value_and_taylor_switch():
    for r in (0.0, 1.0, 2.0, 4.5):
        assert nu_ratio(r, 0.0) == pytest.approx(1 + r / 2, abs=1e-15)
        # both branches agree at the cutoff
        below = nu_ratio(r, 0.999e-3)
        above = nu_ratio(r, 1.001e-3)
        assert abs(below - above) < 1e-5


@given(st.floats(0, 5), st.floats(-1e-3, 1e-3).filter(lambda w: abs(w) > 1e-40))
def test_taylor_branch_matches_extended_precision(r, w):
    import mpmath

    mpmath.mp.dps = 120
    W = mpmath.mpf(w)
    R = mpmath.mpf(r)
    exact = (R * (mpmath.e**W - 1) * W + (mpmath.e**-W - 1 + W) - (R - 1) * (mpmath.e**W - 1 - W)) / W**2
    assert abs(nu_ratio(r, w) - float(exact)) < 1e-14


def test_golden_section_quadratic():
    x, fx, n = golden_section(lambda z: (z - 0.3) ** 2 + 1, -2, 2, tol=1e-10)
    assert abs(x - 0.3) < 1e-8 and abs(fx - 1) < 1e-14 and n > 2
    with pytest.raises(ValueError):
        golden_section(lambda z: z, 1, 0)


@pytest.mark.parametrize("r", sorted(FROZEN_C))
def test_c_of_r_frozen_and_grid_oracle(r):
    res = c_of_r(r)
    assert res.value == pytest.approx(FROZEN_C[r], abs=1e-9)
    assert abs(res.value - grid_oracle(r)) < 1e-7
    assert res.bracket[0] <= res.argmin <= res.bracket[1]


def test_c2_reported_constant():
    # C(2) = 2 C_log with C_log reported to three digits
    assert abs(c_of_r(2).value - 2 * C_LOG_REPORTED) < 0.001


def test_c_of_r_errors():
    with pytest.raises(ValueError):
        c_of_r(-0.1)
    with pytest.raises(ValueError):
        c_of_r(1.0, tol=0)


def test_c_of_r_monotone():
    vals = [c_of_r(r).value for r in np.arange(0, 5.01, 0.5)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert min(vals) >= 1 - 1e-12


@given(st.floats(0, 6), st.floats(-40, 40))
def test_quadratic_lower_bound(r, w):
    c = c_of_r(r).value
    assert nu(r, r - 1, w) - c * w * w >= -1e-10 * max(1.0, w * w)
