from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowsched.numerics import make_params, positivity_margin, sqrt_bounds, verify_params

fractions_01 = st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(999, 1000))
zetas = st.fractions(min_value=Fraction(1, 1000), max_value=Fraction(3))


def exact_R(eps, zeta, bits=60):
    lo, hi = sqrt_bounds(3 - 2 * Fraction(eps), bits)
    return (eps + lo) / 2 + zeta, (eps + hi) / 2 + zeta


def test_sqrt_bounds_perfect_squares():
    assert sqrt_bounds(Fraction(1), 40) == (1, 1)
    assert sqrt_bounds(Fraction(4), 40) == (2, 2)
    assert sqrt_bounds(Fraction(25, 9), 40) == (Fraction(5, 3), Fraction(5, 3))


def test_sqrt_bounds_fourteen_fifths():
    # independent bisection on y*y - 14/5
    lo, hi = Fraction(1), Fraction(2)
    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if mid * mid <= Fraction(14, 5) else (lo, mid)
    a, b = sqrt_bounds(Fraction(14, 5), 40)
    assert a * a <= Fraction(14, 5) <= b * b
    assert b - a <= Fraction(1, 2**40)
    assert a <= lo and hi <= b
    assert abs(float(a) - 1.6733200530681511) < 1e-11


def test_sqrt_bounds_rejects_negative_and_bad_precision():
    with pytest.raises(ValueError):
        sqrt_bounds(Fraction(-1), 40)
    with pytest.raises(ValueError):
        sqrt_bounds(Fraction(2), 0)


@given(st.fractions(min_value=0, max_value=10**6), st.integers(min_value=1, max_value=80))
def test_sqrt_bounds_bracket(x, bits):
    lo, hi = sqrt_bounds(x, bits)
    assert lo * lo <= x <= hi * hi
    assert 0 <= hi - lo <= Fraction(1, 2**bits)


def test_limit_constant_example():
    p = make_params(Fraction(1, 10**6), Fraction(1, 10**4))
    root3_half = 0.8660254037844386
    assert root3_half + 1 / 40000 <= float(p.R) <= root3_half + 1 / 10000 + 1e-5
    assert abs(float(p.ratio) - 1.8661) < 1e-3


def test_mu1_saturates():
    assert make_params(Fraction(1, 3), Fraction(2)).mu1 == Fraction(1, 4)


def test_delta_half():
    p = make_params(Fraction(1, 2), Fraction(1, 10))
    exact = (2**0.5 - 1) / 2
    assert 0 <= exact - float(p.delta) <= 2**-40 + 1e-16
    assert abs(float(p.delta) - 0.20710678) < 1e-8


def test_exact_ninth():
    # sqrt(3 - 2/9) = 5/3, so the ratio is exactly 17/9 + zeta
    zeta = Fraction(1, 10)
    p = make_params(Fraction(1, 9), zeta)
    assert p.ratio == Fraction(17, 9) + zeta


@pytest.mark.parametrize("eps,zeta", [(Fraction(1, 2), Fraction(1, 10)), (Fraction(1, 100), Fraction(1, 100)), (Fraction(99, 100), Fraction(1, 10))])
def test_verify_params_examples(eps, zeta):
    p = make_params(eps, zeta)
    assert verify_params(p)
    assert positivity_margin(p, Fraction(1)) > 0 and positivity_margin(p, Fraction(2)) > 0


def test_make_params_domain():
    for eps, zeta in [(0, Fraction(1, 10)), (1, Fraction(1, 10)), (Fraction(1, 2), 0), (Fraction(1, 2), Fraction(-1))]:
        with pytest.raises(ValueError):
            make_params(Fraction(eps), Fraction(zeta))


@given(fractions_01, zetas)
def test_params_invariants(eps, zeta):
    p = make_params(eps, zeta)
    lo, hi = exact_R(eps, zeta)
    assert p.R <= hi
    assert p.R >= lo - zeta + zeta / 4
    d_lo, d_hi = sqrt_bounds(3 - 2 * eps, 60)
    assert p.delta <= (d_hi - 1) / 2
    assert (d_lo - 1) / 2 - p.delta <= Fraction(1, 2**40)
    assert p.mu1 == min(Fraction(1), zeta) / 4
    assert p.mu2 == min(p.delta, zeta) / 4
    assert p.eta == (p.delta * (1 - p.mu2) - 2 * p.mu2) * p.mu1
    assert p.eta > 0
    # both surrogates share one root bracket
    assert p.R - p.delta == (1 + eps) / 2 + zeta


@given(fractions_01, zetas, zetas)
def test_R_increasing_in_zeta(eps, z1, z2):
    if z1 == z2:
        return
    a, b = sorted((z1, z2))
    assert make_params(eps, a).R < make_params(eps, b).R


@given(fractions_01, st.sampled_from([Fraction(1, 100), Fraction(1, 10), Fraction(1)]))
def test_verify_params_property(eps, zeta):
    assert verify_params(make_params(eps, zeta))
