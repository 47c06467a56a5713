import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate

from psitrace import specfun

import oracles


@pytest.mark.parametrize("n", [0, 1, 2, 5, 10, 20])
@pytest.mark.parametrize("kind", ["J", "J'"])
def test_zeros_match_mpmath(n, kind):
    table = specfun.bessel_zeros(n, 20, kind)
    for k in range(1, 21):
        ref = oracles.bessel_zero(n, k, derivative=kind == "J'")
        assert table[k] == pytest.approx(ref, rel=1e-13)


def test_first_zeros_known_values():
    assert specfun.bessel_zero(0, 1) == pytest.approx(2.404825557695773, abs=1e-14)
    assert specfun.bessel_zero(1, 1, "J'") == pytest.approx(1.841183781340659, abs=1e-14)
    # J_0' = -J_1, so its positive zeros are those of J_1
    assert specfun.bessel_zero(0, 3, "J'") == pytest.approx(specfun.bessel_zero(1, 3), abs=1e-13)


def test_zeros_are_roots():
    for n in (0, 3, 17):
        z = np.array(specfun.bessel_zeros(n, 30).zeros)
        assert np.max(np.abs(specfun.bessel_j(n, z))) < 1e-13


@settings(max_examples=40, deadline=None)
@given(n=st.integers(0, 40), k=st.integers(1, 30))
def test_zero_interlacing(n, k):
    # j_{n,k} < j_{n+1,k} < j_{n,k+1}
    a = specfun.bessel_zero(n, k)
    assert a < specfun.bessel_zero(n + 1, k) < specfun.bessel_zero(n, k + 1)
    # j'_{n,k} < j_{n,k}  for n >= 1
    if n >= 1:
        assert specfun.bessel_zero(n, k, "J'") < a


@settings(max_examples=25, deadline=None)
@given(n=st.integers(0, 60), k=st.integers(2, 40))
def test_zero_gaps_approach_pi_monotonically(n, k):
    # order above 1/2: gaps shrink to pi from above; order 0: grow to pi from below
    z = np.array(specfun.bessel_zeros(n, k + 1).zeros)
    gaps = np.diff(z)
    if n >= 1:
        assert np.all(gaps > math.pi) and np.all(np.diff(gaps) < 0)
    else:
        assert np.all(gaps < math.pi) and np.all(np.diff(gaps) > 0)


def test_zero_table_validation():
    t = specfun.bessel_zeros(2, 5)
    assert len(t) == 5
    with pytest.raises(IndexError):
        t[0]
    with pytest.raises(ValueError):
        specfun.BesselZeroTable(0, "J", (3.0, 2.0))


@pytest.mark.parametrize("bad", [(-1, 1), (1.5, 1)])
def test_bad_order_rejected(bad):
    with pytest.raises(ValueError):
        specfun.bessel_zeros(bad[0], 3)


def test_bad_arguments():
    with pytest.raises(ValueError):
        specfun.bessel_zero(0, 0)
    with pytest.raises(ValueError):
        specfun.bessel_zeros(0, 3, "Y")
    with pytest.raises(ValueError):
        specfun.bessel_j(0, -1.0)


@pytest.mark.parametrize("l,m", [(l, m) for l in range(0, 9) for m in range(0, l + 1)])
def test_legendre_matches_rodrigues(l, m):
    for t in (-0.9, -0.3, 0.0, 0.25, 0.7, 0.99):
        ref = oracles.legendre(l, m, t)
        assert specfun.legendre_plm(l, m, t) == pytest.approx(ref, rel=1e-11, abs=1e-12)


def test_legendre_sign_convention():
    # no Condon-Shortley phase
    assert specfun.legendre_plm(1, 1, 0.5) == pytest.approx(math.sqrt(0.75))
    for l in range(1, 30):
        assert specfun.legendre_plm(l, l, 0.3) > 0


def test_legendre_high_degree_is_finite():
    t = np.linspace(-1, 1, 101)
    v = specfun.legendre_plm(200, 3, t)
    assert np.all(np.isfinite(v))
    # P_l^l(0) = (2l-1)!! overflows only past l ~ 150; log-space value stays right before that
    l = 120
    log_ref = sum(math.log(x) for x in range(1, 2 * l, 2))
    assert math.log(specfun.legendre_plm(l, l, 0.0)) == pytest.approx(log_ref, rel=1e-12)


def test_legendre_domain_errors():
    with pytest.raises(ValueError):
        specfun.legendre_plm(3, 4, 0.1)
    with pytest.raises(ValueError):
        specfun.legendre_plm(3, 1, 1.5)


@pytest.mark.parametrize("l", [1, 2, 3, 5, 8])
def test_hemisphere_integral_exact(l):
    assert specfun.hemisphere_norm_integral(l) == pytest.approx(float(oracles.hemisphere_integral(l)), rel=1e-13)


@pytest.mark.parametrize("l", [1, 11, 41, 101])
def test_hemisphere_integral_quadrature(l):
    f = lambda th: (math.sin(th) ** (l - 1) * math.cos(th)) ** 2 * math.sin(th)
    val, _ = integrate.quad(f, 0, math.pi / 2, epsabs=0, epsrel=1e-13, limit=200)
    assert specfun.hemisphere_norm_integral(l) == pytest.approx(2 * math.pi * val, rel=1e-10)


def test_hemisphere_c_sq():
    h = specfun.hemisphere_c_sq(1)
    assert h.c_sq == pytest.approx(3 / (2 * math.pi))
    assert h.lam == 2.0
    assert float(sp.Rational(1) / oracles.hemisphere_integral(3)) == pytest.approx(specfun.hemisphere_c_sq(3).c_sq)
    with pytest.raises(ValueError):
        specfun.hemisphere_c_sq(4)
    with pytest.raises(ValueError):
        specfun.hemisphere_c_sq(0)
