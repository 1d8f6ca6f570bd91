import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from carbon_radner.gaussian import (expected_positive_part, gauss_band_integral, normal_cdf,
                                    normal_pdf, owens_t, owens_t_difference)

mpmath.mp.dps = 40


def mp_owens_t(h, d):
    f = lambda u: mpmath.exp(-h * h * (1 + u * u) / 2) / (1 + u * u)
    return float(mpmath.quad(f, [0, d]) / (2 * mpmath.pi))


def test_normal_pdf_values():
    assert normal_pdf(0.0) == pytest.approx(float(1 / mpmath.sqrt(2 * mpmath.pi)), rel=1e-15)
    assert normal_pdf(0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert normal_pdf(1.0) == pytest.approx(0.2419707245, abs=1e-10)


@given(st.floats(-30, 30))
def test_normal_pdf_even(x):
    assert normal_pdf(x) == normal_pdf(-x)


def test_normal_cdf_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
    assert 0 < normal_cdf(-8.0) < 1e-15
    assert normal_cdf(-8.0) == pytest.approx(float(mpmath.ncdf(-8)), rel=1e-13)


@given(st.floats(-37, 8))
def test_normal_cdf_matches_mpmath(x):
    assert normal_cdf(x) == pytest.approx(float(mpmath.ncdf(x)), rel=1e-12, abs=1e-300)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        normal_cdf(float("nan"))
    with pytest.raises(ValueError):
        owens_t(float("inf"), 1.0)


def test_owens_t_special_values():
    assert owens_t(3.0, 0.0) == 0.0
    assert owens_t(0.0, 1.0) == pytest.approx(0.125, abs=1e-14)
    p = normal_cdf(1.0)
    assert owens_t(1.0, 1.0) == pytest.approx(p * (1 - p) / 2, abs=1e-12)
    assert owens_t(1.0, 1.0) == pytest.approx(0.0667418, abs=1e-6)


@settings(max_examples=60)
@given(st.floats(-6, 6), st.floats(-3, 3))
def test_owens_t_matches_scipy_and_mpmath(h, d):
    got = owens_t(h, d)
    assert got == pytest.approx(float(special.owens_t(h, d)), abs=1e-12)
    assert got == pytest.approx(mp_owens_t(h, d), abs=1e-13)


@given(st.floats(-6, 6), st.floats(0, 5))
def test_owens_t_odd_in_d_even_in_h(h, d):
    assert owens_t(h, -d) == -owens_t(h, d)
    assert owens_t(-h, d) == owens_t(h, d)


def mp_band(h, lo, hi, weighted):
    # breakpoints at the peak scale near lo keep mpmath's quadrature honest
    sc = 1 / max(h * h * lo, h, 1.0)
    pts = sorted({lo, hi} | {lo + c * sc for c in (0.125, 0.25, 0.5, 1, 2, 3, 4, 6, 8, 12, 16,
                                                    24, 32, 64, 128) if lo + c * sc < hi})
    if weighted:
        f = lambda u: mpmath.exp(-h * h * (1 + u * u) / 2) / (1 + u * u)
        return float(mpmath.quad(f, pts) / (2 * mpmath.pi))
    f = lambda u: mpmath.exp(-h * h * (1 + u * u) / 2)
    return float(mpmath.quad(f, pts))


@settings(max_examples=60)
@given(st.floats(0, 40), st.floats(0, 1), st.floats(0, 1))
def test_owens_t_difference_relative_accuracy(h, a, b):
    lo, hi = min(a, b), max(a, b)
    assert owens_t_difference(h, lo, hi) == pytest.approx(mp_band(h, lo, hi, True),
                                                          rel=1e-9, abs=1e-300)


def test_owens_t_difference_where_plain_difference_is_noise():
    h, ell = 12.0, 0.9
    ref = mp_band(h, ell, 1.0, True)
    plain = owens_t(h, 1.0) - owens_t(h, ell)
    assert abs(plain / ref - 1) > 0.1
    assert owens_t_difference(h, ell, 1.0) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=60)
@given(st.floats(0, 40), st.floats(0, 1), st.floats(0, 1))
def test_gauss_band_integral_matches_erf_form(h, a, b):
    lo, hi = min(a, b), max(a, b)
    if h == 0:
        ref = hi - lo
    elif h * h * (hi - lo) * hi < 1:
        ref = mp_band(h, lo, hi, False)
    else:
        hm = mpmath.mpf(h)
        ref = float(mpmath.exp(-hm * hm / 2) * mpmath.sqrt(mpmath.pi / 2) / hm
                    * (mpmath.erfc(hm * lo / mpmath.sqrt(2)) - mpmath.erfc(hm * hi / mpmath.sqrt(2))))
    assert gauss_band_integral(h, lo, hi) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_gauss_band_integral_simple_cases():
    assert gauss_band_integral(0.0, 0.25, 1.0) == pytest.approx(0.75, rel=1e-14)
    assert gauss_band_integral(2.0, 0.5, 0.5) == 0.0
    with pytest.raises(ValueError):
        gauss_band_integral(1.0, 0.8, 0.2)


def test_expected_positive_part_values():
    assert expected_positive_part(0.0, 1.0) == pytest.approx(0.3989423, abs=1e-6)
    assert expected_positive_part(5.0, 0.0) == 5.0
    assert expected_positive_part(-5.0, 0.0) == 0.0
    assert expected_positive_part(1.0, 1.0) == pytest.approx(1.0833155, abs=1e-6)
    with pytest.raises(ValueError):
        expected_positive_part(0.0, -1.0)


@settings(max_examples=30)
@given(st.floats(-5, 5), st.floats(0.1, 5))
def test_expected_positive_part_quadrature(m, s):
    ref = mpmath.quad(lambda x: x * mpmath.npdf(x, m, s), [0, m + 12 * s]) if m + 12 * s > 0 else 0
    assert expected_positive_part(m, s) == pytest.approx(float(ref), rel=1e-9, abs=1e-14)


@given(st.floats(-50, 50), st.floats(0.01, 50))
def test_expected_positive_part_bounds(m, s):
    v = expected_positive_part(m, s)
    assert v >= max(m, 0.0) - 1e-12 * abs(m)
    assert v >= 0.0
