"""Linear finite elements for the Dirichlet Laplacian on polygons.

Stiffness and mass are assembled over all vertices; the eigenproblem is
solved on interior vertices only.  The normal derivative is recovered
variationally: with u extended by zero to the boundary, the residual
r = K u - lam M u restricted to boundary rows equals the boundary mass
matrix applied to the flux, so psi = M_Y^{-1} r.  The default M_Y is the
row-sum lumped boundary mass: r_i <= 0 for a positive discrete ground
state, so the lumped flux keeps the sign of the exact one, whereas the
consistent mass overshoots to positive values at convex corners.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .closedform import DomainSpec, EigenmodeRecord
from .mesh import Mesh
from .verify import BoundaryTrace, RatioSummary

RESIDUAL_TOL = 1e-8
_GAUSS2 = np.array([0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3)])


class ConvergenceError(RuntimeError):
    pass


class ResolutionError(ValueError):
    """The mesh is too coarse for the requested eigenvalue window."""


@dataclass(frozen=True, eq=False)
class FemEigenpair:
    lambda_h: float
    u_h: np.ndarray  # interior vertices, in mesh.interior_vertices order
    psi_h: np.ndarray | None  # boundary vertices, in mesh.boundary_vertices order
    h: float
    residual: float = 0.0

    def full_vector(self, mesh: Mesh) -> np.ndarray:
        u = np.zeros(len(mesh.vertices))
        u[mesh.interior_vertices] = self.u_h
        return u


def assemble(mesh: Mesh):
    """Global P1 stiffness and consistent mass matrices (CSR, all vertices).

    Duplicate entries are summed by a single sort in ``tocsr``, so the
    result does not depend on thread scheduling.
    """
    v, t = mesh.vertices, mesh.triangles
    p = v[t]
    area = mesh.areas()
    # gradients of the barycentric functions: rotate the opposite edge
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grad = np.stack([-e[..., 1], e[..., 0]], axis=2) / (2 * area[:, None, None])
    kloc = area[:, None, None] * np.einsum("tid,tjd->tij", grad, grad)
    mloc = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = len(v)
    K = sparse.coo_matrix((kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sparse.coo_matrix((mloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def boundary_mass(mesh: Mesh):
    """1D P1 mass matrix on the boundary loops, indexed like ``mesh.boundary_vertices``."""
    bv = mesh.boundary_vertices
    local = -np.ones(len(mesh.vertices), dtype=int)
    local[bv] = np.arange(len(bv))
    e = local[mesh.boundary_edges]
    d = mesh.vertices[mesh.boundary_edges[:, 1]] - mesh.vertices[mesh.boundary_edges[:, 0]]
    ln = np.hypot(d[:, 0], d[:, 1])
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    vals = np.concatenate([ln / 3, ln / 3, ln / 6, ln / 6])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(len(bv), len(bv))).tocsc()


def _eigsh(K, M, count, shift):
    last = None
    # fixed start vector: ARPACK's default is random, which breaks reruns
    v0 = np.random.default_rng(20240101).uniform(0.5, 1.5, K.shape[0])
    # start slightly below the shift so an eigenvalue sitting on it counts as above
    base = shift - 1e-6 * abs(shift)
    for attempt in range(4):
        sigma = base - attempt * 1e-3 * (1.0 + abs(shift))
        try:
            # shift-invert maps lam to 1 / (lam - sigma); the largest such values
            # belong to the eigenvalues just above sigma
            return spla.eigsh(K, k=count, M=M, sigma=sigma, which="LA", tol=0.0, v0=v0)
        except (RuntimeError, spla.ArpackNoConvergence) as exc:
            # singular factorization means sigma sits on an eigenvalue
            last = exc
    raise ConvergenceError(f"shift-invert iteration failed: {last}")


def solve_eigs(mesh: Mesh, count: int, shift: float = 0.0, with_flux: bool = True,
               flux_mass: str = "lumped") -> list[FemEigenpair]:
    """The ``count`` smallest discrete eigenpairs above ``shift``, in increasing order.

    With the default shift 0 these are the ``count`` smallest.  Vectors are
    mass-normalized and signed so that the largest entry is positive.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    K, M = assemble(mesh)
    inner = mesh.interior_vertices
    if count >= len(inner) - 1:
        raise ValueError(f"mesh has only {len(inner)} interior vertices")
    Kii = K[inner][:, inner].tocsc()
    Mii = M[inner][:, inner].tocsc()
    lam, vec = _eigsh(Kii, Mii, count, shift)
    order = np.argsort(lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    h = mesh.h
    flux = _FluxSolver(mesh, K, M, flux_mass) if with_flux else None
    pairs = []
    for i in range(count):
        u = vec[:, i]
        u = u / math.sqrt(float(u @ (Mii @ u)))
        if u[np.argmax(np.abs(u))] < 0:
            u = -u
        res = float(np.linalg.norm(Kii @ u - lam[i] * (Mii @ u)) / np.linalg.norm(u))
        if res > RESIDUAL_TOL * max(1.0, lam[i]):
            raise ConvergenceError(f"eigenpair {i} residual {res:.2e} exceeds tolerance")
        pair = FemEigenpair(float(lam[i]), u, None, h, res)
        if flux is not None:
            pair = replace(pair, psi_h=flux(pair))
        pairs.append(pair)
    return pairs


FLUX_MASS = ("lumped", "consistent")


class _FluxSolver:
    def __init__(self, mesh: Mesh, K=None, M=None, mass: str = "lumped"):
        if mass not in FLUX_MASS:
            raise ValueError(f"mass must be one of {FLUX_MASS}")
        if K is None:
            K, M = assemble(mesh)
        self.mesh = mesh
        self.K, self.M = K, M
        self.rows = mesh.boundary_vertices
        MY = boundary_mass(mesh)
        if mass == "lumped":
            d = np.asarray(MY.sum(axis=1)).ravel()
            if np.any(d <= 0):
                raise ValueError("boundary mass matrix is singular")
            self.solve = lambda r: r / d
        else:
            try:
                self.solve = spla.factorized(MY)
            except RuntimeError as exc:
                raise ValueError("boundary mass matrix is singular") from exc

    def __call__(self, pair: FemEigenpair) -> np.ndarray:
        u = pair.full_vector(self.mesh)
        r = (self.K @ u - pair.lambda_h * (self.M @ u))[self.rows]
        return self.solve(r)


def recover_flux(mesh: Mesh, pair: FemEigenpair, mass: str | None = None) -> BoundaryTrace:
    """Recovered normal derivative as a trace with two Gauss points per boundary edge.

    The flux stored on ``pair`` is reused unless ``mass`` asks for a recomputation.
    """
    psi = pair.psi_h if pair.psi_h is not None and mass is None else _FluxSolver(mesh, mass=mass or "lumped")(pair)
    local = -np.ones(len(mesh.vertices), dtype=int)
    local[mesh.boundary_vertices] = np.arange(len(mesh.boundary_vertices))
    e = mesh.boundary_edges
    p0, p1 = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    ln = np.hypot(*(p1 - p0).T)
    s = _GAUSS2[None, :, None]
    nodes = (p0[:, None, :] * (1 - s) + p1[:, None, :] * s).reshape(-1, 2)
    g = _GAUSS2[None, :]
    values = (psi[local[e[:, 0]]][:, None] * (1 - g) + psi[local[e[:, 1]]][:, None] * g).ravel()
    weights = np.repeat(ln / 2, 2)
    normals = np.repeat(mesh.boundary_normals, 2, axis=0)
    return BoundaryTrace(nodes, weights, values, float(ln.sum()), normals=normals)


def flux_norm_sq(mesh: Mesh, pair: FemEigenpair) -> float:
    t = recover_flux(mesh, pair)
    return float(np.sum(t.weights * t.values**2))


def polygon_domain(polygon) -> DomainSpec:
    return DomainSpec("polygon", params={"vertices": [[float(x), float(y)] for x, y in np.asarray(polygon)]})


def _clusters(lams, rel_gap=1e-6):
    groups = [[0]]
    for i in range(1, len(lams)):
        if lams[i] - lams[i - 1] <= rel_gap * lams[i - 1]:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def cluster_records(domain: DomainSpec, mesh: Mesh, pairs, rel_gap: float = 1e-6) -> list[EigenmodeRecord]:
    """One record per numerically clustered eigenspace.

    ``lam`` is the cluster mean and ``psi_norm_sq`` the mean boundary norm,
    so the ratio is the basis-independent sum of norms over sum of eigenvalues.
    """
    lams = [p.lambda_h for p in pairs]
    out = []
    for g in _clusters(lams, rel_gap):
        lam = float(np.mean([lams[i] for i in g]))
        psi = float(np.mean([flux_norm_sq(mesh, pairs[i]) for i in g]))
        out.append(EigenmodeRecord(domain, tuple(i + 1 for i in g), lam, psi, provenance="fem"))
    return out


def bounds_audit(mesh: Mesh, lam_max: float | None = None, count: int | None = None,
                 domain: DomainSpec | None = None, guard: float = 0.05,
                 rel_gap: float = 1e-6, pairs=None) -> tuple[RatioSummary, list[EigenmodeRecord]]:
    """Ratio statistics ||psi_h||^2 / lambda_h over the eigenpairs below ``lam_max``
    (or the first ``count``), after clustering degenerate eigenspaces.

    Raises ResolutionError when lam_max * h^2 exceeds ``guard``.
    """
    if (lam_max is None) == (count is None) and pairs is None:
        raise ValueError("give exactly one of lam_max and count")
    if domain is None:
        domain = DomainSpec("polygon", params={})
    h = mesh.h
    if pairs is None:
        if count is not None:
            pairs = solve_eigs(mesh, count)
        else:
            # Weyl estimate plus margin; grow until lam_max is passed
            area = float(np.sum(mesh.areas()))
            n = max(4, int(1.3 * area * lam_max / (4 * math.pi)) + 8)
            while True:
                pairs = solve_eigs(mesh, n)
                if pairs[-1].lambda_h >= lam_max:
                    break
                n = int(n * 1.5) + 1
            keep = sum(p.lambda_h < lam_max for p in pairs)
            # never split a cluster at the cut
            while keep < len(pairs) and keep and pairs[keep].lambda_h - pairs[keep - 1].lambda_h <= rel_gap * pairs[keep - 1].lambda_h:
                keep += 1
            pairs = pairs[:keep]
    top = max(p.lambda_h for p in pairs)
    if top * h * h > guard:
        raise ResolutionError(f"lambda_max * h^2 = {top * h * h:.3g} exceeds {guard}; refine the mesh")
    records = cluster_records(domain, mesh, pairs, rel_gap)
    ratios = [r.ratio for r in records]
    summary = RatioSummary(
        domain=domain,
        lambda_window=(float(pairs[0].lambda_h), float(top)),
        min_ratio=float(min(ratios)),
        max_ratio=float(max(ratios)),
        count=len(pairs),
    )
    return summary, records
