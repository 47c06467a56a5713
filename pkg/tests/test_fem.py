import math

import numpy as np
import pytest

from psitrace import closedform as cf
from psitrace import fem, mesh as ms, specfun, verify

SQUARE_LAMBDAS = sorted(math.pi**2 * (m * m + n * n) for m in range(1, 12) for n in range(1, 12))


@pytest.fixture(scope="module")
def square_levels():
    """Nested meshes of the unit square with h <= 1/16, 1/32, 1/64 and their first six pairs."""
    m = ms.mesh_polygon(ms.UNIT_SQUARE, 1 / 16)
    out = []
    for _ in range(3):
        out.append((m, fem.solve_eigs(m, 6)))
        m = ms.refine_uniform(m)
    return out


def test_assembly_invariants():
    m = ms.mesh_polygon(ms.L_SHAPE, 0.2)
    K, M = fem.assemble(m)
    assert abs(K - K.T).max() < 1e-14 and abs(M - M.T).max() < 1e-14
    # constants lie in the kernel of the full stiffness matrix
    assert np.max(np.abs(K @ np.ones(K.shape[0]))) < 1e-12
    # mass integrates 1 * 1 to the area, and x * 1 to the first moment
    one = np.ones(M.shape[0])
    assert one @ M @ one == pytest.approx(3.0, rel=1e-12)
    assert m.vertices[:, 0] @ M @ one == pytest.approx(2.5, rel=1e-12)
    assert np.min(np.linalg.eigvalsh(M.toarray())) > 0


def test_stiffness_exact_for_linear_functions():
    # the energy of x + 2y is |grad|^2 * area
    m = ms.mesh_polygon(ms.UNIT_SQUARE, 0.25)
    K, _ = fem.assemble(m)
    u = m.vertices[:, 0] + 2 * m.vertices[:, 1]
    assert u @ K @ u == pytest.approx(5.0, rel=1e-12)


def test_boundary_mass_integrates_length():
    m = ms.mesh_polygon(ms.L_SHAPE, 0.3)
    MY = fem.boundary_mass(m)
    one = np.ones(MY.shape[0])
    assert one @ MY @ one == pytest.approx(8.0, rel=1e-12)


def test_square_first_eigenvalue(square_levels):
    m, pairs = square_levels[-1]
    assert m.h <= 1 / 64
    assert pairs[0].lambda_h == pytest.approx(2 * math.pi**2, rel=0.01)


def test_galerkin_bound_from_above(square_levels):
    for _, pairs in square_levels:
        for p, lam in zip(pairs, SQUARE_LAMBDAS):
            assert p.lambda_h >= lam


def test_pairs_sorted_normalized_converged(square_levels):
    m, pairs = square_levels[0]
    K, M = fem.assemble(m)
    inner = m.interior_vertices
    Mii = M[inner][:, inner]
    lams = [p.lambda_h for p in pairs]
    assert lams == sorted(lams)
    for p in pairs:
        assert abs(p.u_h @ Mii @ p.u_h - 1) < 1e-12
        assert p.residual <= 1e-8
        assert len(p.u_h) == len(inner)
        assert p.h == m.h


def test_richardson_ratio(square_levels):
    err = [pairs[0].lambda_h - 2 * math.pi**2 for _, pairs in square_levels]
    for coarse, fine in zip(err, err[1:]):
        assert coarse / fine == pytest.approx(4.0, rel=0.30)


def test_flux_norm_and_rellich(square_levels):
    m, pairs = square_levels[-1]
    p = pairs[0]
    tr = fem.recover_flux(m, p)
    psi = verify.quad_trace_norm(tr)
    assert psi == pytest.approx(8 * math.pi**2, rel=0.03)
    dom = fem.polygon_domain(ms.UNIT_SQUARE)
    rec = cf.EigenmodeRecord(dom, (1,), p.lambda_h, psi, provenance="fem")
    assert verify.rellich_check(dom, rec, tr) <= 2e-2


def test_flux_sign_on_convex_domain(square_levels):
    for _, pairs in square_levels:
        assert np.all(pairs[0].psi_h <= 0)
    m = ms.mesh_polygon(ms.regular_polygon(7), 0.1)
    assert np.all(fem.solve_eigs(m, 1)[0].psi_h <= 0)


def _flux_error(m, p):
    tr = fem.recover_flux(m, p)
    x, y = tr.nodes.T
    s = np.where(np.isclose(y, 0) | np.isclose(y, 1), x, y)
    exact = -2 * math.pi * np.sin(math.pi * s)
    return math.sqrt(np.sum(tr.weights * (tr.values - exact) ** 2))


def test_flux_error_decreases_over_three_halvings(square_levels):
    m8 = ms.mesh_polygon(ms.UNIT_SQUARE, 1 / 8)
    levels = [(m8, fem.solve_eigs(m8, 1))] + list(square_levels)
    errs = [_flux_error(m, pairs[0]) for m, pairs in levels]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_rellich_residual_decreases_under_refinement(square_levels):
    dom = fem.polygon_domain(ms.UNIT_SQUARE)
    res = []
    for m, pairs in square_levels:
        row = []
        for i, p in enumerate(pairs):
            tr = fem.recover_flux(m, p)
            rec = cf.EigenmodeRecord(dom, (i + 1,), p.lambda_h, verify.quad_trace_norm(tr), provenance="fem")
            row.append(verify.rellich_check(dom, rec, tr))
        res.append(row)
    res = np.array(res)
    assert np.all(res[1:] < res[:-1])


def test_consistent_mass_flux_is_also_available(square_levels):
    m, pairs = square_levels[1]
    tr = fem.recover_flux(m, pairs[0], mass="consistent")
    assert verify.quad_trace_norm(tr) == pytest.approx(8 * math.pi**2, rel=0.03)
    with pytest.raises(ValueError):
        fem.recover_flux(m, pairs[0], mass="diagonal")


def test_shift_between_clusters():
    m = ms.refine_uniform(ms.mesh_polygon(ms.UNIT_SQUARE, 1 / 16))
    low = fem.solve_eigs(m, 6)
    mid = fem.solve_eigs(m, 3, shift=0.5 * (low[0].lambda_h + low[1].lambda_h))
    assert mid[0].lambda_h == pytest.approx(low[1].lambda_h, rel=1e-10)
    # a shift sitting on an eigenvalue is perturbed downward and still finds it
    on = fem.solve_eigs(m, 2, shift=low[3].lambda_h)
    assert on[0].lambda_h == pytest.approx(low[3].lambda_h, rel=1e-10)


def test_solver_argument_errors():
    m = ms.mesh_polygon(ms.UNIT_SQUARE, 0.5)
    with pytest.raises(ValueError):
        fem.solve_eigs(m, 0)
    with pytest.raises(ValueError):
        fem.solve_eigs(m, 10_000)


def test_disc_polygon_eigenvalue():
    m = ms.mesh_polygon(ms.regular_polygon(256), 0.025)
    p = fem.solve_eigs(m, 1)[0]
    j = specfun.bessel_zero(0, 1)
    assert p.lambda_h == pytest.approx(j * j, rel=0.02)


def test_disc_ratio_tends_to_two():
    errs = []
    for n, h in ((32, 0.04), (64, 0.03), (128, 0.02)):
        m = ms.mesh_polygon(ms.regular_polygon(n), h)
        s, _ = fem.bounds_audit(m, count=3)
        errs.append(max(abs(s.min_ratio - 2), abs(s.max_ratio - 2)))
    assert errs[-1] < 0.01
    assert errs[0] > errs[1] > errs[2]


def test_square_bounds_audit_first_fifty():
    m = ms.mesh_polygon(ms.UNIT_SQUARE, 1 / 16)
    for _ in range(3):
        m = ms.refine_uniform(m)
    s, recs = fem.bounds_audit(m, count=50, domain=fem.polygon_domain(ms.UNIT_SQUARE))
    assert s.count == 50
    # every Dirichlet mode of the unit square has ||psi||^2 = 4 lambda
    for r in recs:
        assert r.ratio == pytest.approx(4.0, rel=0.05)
        assert r.provenance == "fem"


def test_l_shape_audit_positive():
    m = ms.refine_uniform(ms.refine_uniform(ms.mesh_polygon(ms.L_SHAPE, 1 / 16)))
    s, recs = fem.bounds_audit(m, count=30, domain=fem.polygon_domain(ms.L_SHAPE))
    assert s.min_ratio > 0
    assert sum(len(r.indices) for r in recs) == 30


def test_resolution_guard():
    m = ms.mesh_polygon(ms.UNIT_SQUARE, 0.1)
    with pytest.raises(fem.ResolutionError):
        fem.bounds_audit(m, count=20)
    with pytest.raises(ValueError):
        fem.bounds_audit(m)


def test_audit_by_lambda_window_keeps_whole_clusters():
    m = ms.refine_uniform(ms.refine_uniform(ms.mesh_polygon(ms.UNIT_SQUARE, 1 / 16)))
    # 5 pi^2 is a double eigenvalue; cut just above it
    s, recs = fem.bounds_audit(m, lam_max=5 * math.pi**2 * 1.01, rel_gap=1e-2)
    assert s.count == 3
    assert [len(r.indices) for r in recs] == [1, 2]
