import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from psitrace import closedform as cf
from psitrace import verify

import oracles


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.3, 3.0), n=st.integers(0, 20), k=st.integers(1, 20))
def test_disc_trace_norm(a, n, k):
    rec = cf.disc_mode(a, n, k)
    t = verify.disc_trace(a, n, k, nodes=4 * n + 64)
    assert verify.quad_trace_norm(t) / rec.lam == pytest.approx(2 / a, rel=1e-10)
    assert verify.rellich_check(rec.domain, rec, t) < 1e-10


def test_disc_sine_partner_has_same_norm():
    c = verify.quad_trace_norm(verify.disc_trace(1.0, 3, 2, parity="cos"))
    s = verify.quad_trace_norm(verify.disc_trace(1.0, 3, 2, parity="sin"))
    assert c == pytest.approx(s, rel=1e-12)
    with pytest.raises(ValueError):
        verify.disc_trace(1.0, 0, 1, parity="sin")


def test_radial_norm_against_adaptive_quadrature():
    j = oracles.bessel_zero(4, 7)
    ref, _ = integrate.quad(lambda r: special.jv(4, j * r) ** 2 * r, 0, 1, epsabs=0, epsrel=1e-13, limit=200)
    assert verify.radial_bessel_norm(4, j) == pytest.approx(ref, rel=1e-12)
    # closed form: J_{n+1}(j)^2 / 2 at a Dirichlet zero
    assert verify.radial_bessel_norm(4, j) == pytest.approx(special.jv(5, j) ** 2 / 2, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.5, 2.0), b=st.floats(0.5, 2.0), m=st.integers(1, 30), n=st.integers(1, 30))
def test_rectangle_trace_matches_analytic(a, b, m, n):
    rec = cf.rectangle_mode(a, b, m, n)
    t = verify.rectangle_trace(rec.domain.a, rec.domain.b, m, n)
    assert verify.quad_trace_norm(t) == pytest.approx(rec.psi_norm_sq, rel=1e-10)
    assert verify.rellich_check(rec.domain, rec, t) < 1e-10


def test_rellich_detects_wrong_eigenvalue():
    rec = cf.disc_mode(1.0, 2, 3)
    bad = cf.EigenmodeRecord(rec.domain, rec.indices, rec.lam * 1.1, rec.psi_norm_sq)
    t = verify.disc_trace(1.0, 2, 3)
    assert verify.rellich_check(rec.domain, bad, t) == pytest.approx(1 - 1 / 1.1, rel=1e-8)


def test_rellich_origin_independent_and_warns():
    rec = cf.rectangle_mode(1, 2, 2, 3)
    t = verify.rectangle_trace(1, 2, 2, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        verify.rellich_check(rec.domain, rec, t, origin=(0.0, 0.0))
    with pytest.warns(UserWarning, match="changes sign"):
        res = verify.rellich_check(rec.domain, rec, t, origin=(3.0, -1.0))
    assert res < 1e-10
    t0 = verify.BoundaryTrace(t.nodes, t.weights, t.values, t.length)
    with pytest.raises(ValueError):
        verify.rellich_check(rec.domain, rec, t0)


@pytest.mark.parametrize("l", [1, 3, 21, 101, 201])
def test_hemisphere_trace_matches_closed_form(l):
    rec = cf.hemisphere_mode(l)
    t = verify.hemisphere_trace(l)
    assert verify.quad_trace_norm(t) == pytest.approx(rec.psi_norm_sq, rel=1e-10)


@pytest.mark.parametrize("n,k", [(0, 2), (1, 1), (5, 3), (20, 5)])
def test_neumann_quadrature_identity(n, k):
    lam, chi = verify.neumann_boundary_norm(n, k)
    assert (lam - n * n) * chi == pytest.approx(2 * lam, rel=1e-10)


def test_trace_validation():
    with pytest.raises(ValueError):
        verify.BoundaryTrace(np.zeros((2, 2)), np.array([1.0, -1.0]), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        verify.BoundaryTrace(np.zeros((2, 2)), np.array([1.0, 1.0]), np.zeros(2), 3.0)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_sobolev_norm_of_single_harmonic(k):
    # psi = C cos(n th) on the unit circle: H^k norm = ||psi||^2 sum_i n^(2i)
    n = 7
    t = verify.disc_trace(1.0, n, 2, nodes=128)
    base = verify.quad_trace_norm(t)
    assert verify.boundary_sobolev_norm(t, k) == pytest.approx(base * sum(n ** (2 * i) for i in range(k + 1)), rel=1e-10)


def test_sobolev_requires_uniform_closed_sampling():
    with pytest.raises(ValueError):
        verify.boundary_sobolev_norm(verify.rectangle_trace(1, 2, 1, 1), 1)
    with pytest.raises(ValueError):
        verify.boundary_sobolev_norm(verify.disc_trace(1, 1, 1), -1)


def test_sobolev_audit_has_no_trend():
    for k in (0, 1, 2):
        rep = verify.sobolev_scaling_audit(1.0, 2000.0, k)
        assert rep["max_over_median"] < 3


def test_mode_count_and_weyl():
    sq = cf.rectangle(1, 1)
    # brute-force count of m^2 + n^2 < L / pi^2
    L = 2000.0
    brute = sum(1 for m in range(1, 30) for n in range(1, 30) if (m * m + n * n) * math.pi**2 < L)
    assert verify.mode_count(sq, L) == brute
    ok, dev = verify.weyl_guard(sq, L)
    assert ok and dev < 0.10
    disc_ok, _ = verify.weyl_guard(cf.disc(1.0), L)
    assert disc_ok


def test_ozawa_sum_rectangle():
    emp, lead = verify.ozawa_sum(cf.rectangle(1, 1), 2000.0, (0.5, 0.0))
    assert lead == pytest.approx(2000.0**2 / (8 * math.pi))
    assert 0.85 <= emp / lead <= 1.15
    # brute-force oracle: |d_y u|^2 at (1/2, 0) for u = 2 sin(m pi x) sin(n pi y)
    brute = sum((2 * n * math.pi * math.sin(m * math.pi / 2)) ** 2
                for m in range(1, 30) for n in range(1, 30) if (m * m + n * n) * math.pi**2 < 2000)
    assert emp == pytest.approx(brute, rel=1e-12)


def test_ozawa_disc_is_rotation_invariant():
    a, _ = verify.ozawa_sum(cf.disc(1.0), 800.0, (1.0, 0.0))
    b, _ = verify.ozawa_sum(cf.disc(1.0), 800.0, (math.cos(0.7), math.sin(0.7)))
    assert a == pytest.approx(b, rel=1e-12)
    with pytest.raises(ValueError):
        verify.ozawa_sum(cf.disc(1.0), 800.0, (0.5, 0.0))
    with pytest.raises(ValueError):
        verify.ozawa_sum(cf.hemisphere(), 800.0, (0.5, 0.0))


def test_ratio_summary():
    recs = [cf.rectangle_mode(1, 2, m, n) for m in range(1, 6) for n in range(1, 6)]
    s = verify.ratio_summary(recs)
    assert 2 <= s.min_ratio <= s.max_ratio <= 4
    assert s.count == 25
    with pytest.raises(ValueError):
        verify.ratio_summary(recs, window=(1e6, 2e6))
