"""Numerical re-derivation of boundary-trace quantities.

Traces built here do not reuse the analytic norms stored on
:class:`~psitrace.closedform.EigenmodeRecord`: eigenfunction normalization
is recomputed by Gauss-Legendre quadrature and the boundary norm by
quadrature of the sampled normal derivative.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import specfun
from .closedform import DomainSpec, EigenmodeRecord, disc_modes_below, rectangle_modes_below


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Samples of a boundary function with quadrature weights.

    ``nodes`` and ``normals`` are (N, 2) arrays (normals outward, unit);
    ``period`` is set only for uniform samplings of a closed boundary
    curve, in which case node i sits at arclength i * period / N.
    """

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    length: float
    normals: np.ndarray | None = None
    period: float | None = None
    tangential_wavenumber: int | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        if abs(w.sum() - self.length) > 1e-10 * self.length:
            raise ValueError(f"weights sum to {w.sum()!r}, boundary length is {self.length!r}")
        if len(self.values) != len(w) or len(self.nodes) != len(w):
            raise ValueError("nodes, weights and values must have equal length")


@dataclass(frozen=True)
class RatioSummary:
    domain: DomainSpec
    lambda_window: tuple[float, float]
    min_ratio: float
    max_ratio: float
    count: int

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "lambda_window": list(self.lambda_window),
            "min_ratio": self.min_ratio,
            "max_ratio": self.max_ratio,
            "count": self.count,
        }


def _gauss(q: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def radial_bessel_norm(n: int, j: float, a: float = 1.0) -> float:
    """int_0^a J_n(j r / a)^2 r dr by Gauss-Legendre quadrature."""
    q = 64 + 2 * int(j)
    r, w = _gauss(q, 0.0, a)
    return float(np.sum(w * special.jv(n, j * r / a) ** 2 * r))


def disc_trace(a: float, n: int, k: int, nodes: int = 512, parity: str = "cos") -> BoundaryTrace:
    """Normal derivative of the real disc mode (n, k) at ``nodes`` equispaced points."""
    if parity not in ("cos", "sin"):
        raise ValueError("parity must be 'cos' or 'sin'")
    if n == 0 and parity == "sin":
        raise ValueError("n = 0 has no sine mode")
    j = specfun.bessel_zero(n, k, "J")
    angular = 2 * math.pi if n == 0 else math.pi
    c = 1.0 / math.sqrt(angular * radial_bessel_norm(n, j, a))
    th = 2 * math.pi * np.arange(nodes) / nodes
    ang = np.cos(n * th) if parity == "cos" else np.sin(n * th)
    values = c * (j / a) * special.jvp(n, j) * ang
    normals = np.column_stack([np.cos(th), np.sin(th)])
    length = 2 * math.pi * a
    return BoundaryTrace(
        nodes=a * normals,
        weights=np.full(nodes, length / nodes),
        values=values,
        length=length,
        normals=normals,
        period=length,
        tangential_wavenumber=n,
    )


def _rectangle_sides(a, b):
    # (start point, unit tangent, side length, outward normal)
    return [
        ((0.0, 0.0), (1.0, 0.0), a, (0.0, -1.0)),
        ((a, 0.0), (0.0, 1.0), b, (1.0, 0.0)),
        ((a, b), (-1.0, 0.0), a, (0.0, 1.0)),
        ((0.0, b), (0.0, -1.0), b, (-1.0, 0.0)),
    ]


def _rect_grad(a, b, m, n, c, x, y):
    kx, ky = m * math.pi / a, n * math.pi / b
    return (
        c * kx * np.cos(kx * x) * np.sin(ky * y),
        c * ky * np.sin(kx * x) * np.cos(ky * y),
    )


def rectangle_trace(a: float, b: float, m: int, n: int, per_side: int | None = None) -> BoundaryTrace:
    """Normal derivative of the rectangle mode (m, n) at Gauss nodes on each side."""
    q = per_side or 64 + 2 * max(m, n)
    # normalization by tensor Gauss quadrature
    xs, wx = _gauss(q, 0.0, a)
    ys, wy = _gauss(q, 0.0, b)
    ix = np.sum(wx * np.sin(m * math.pi * xs / a) ** 2)
    iy = np.sum(wy * np.sin(n * math.pi * ys / b) ** 2)
    c = 1.0 / math.sqrt(ix * iy)
    pts, wts, vals, nrm = [], [], [], []
    for (x0, y0), (tx, ty), length, (nx, ny) in _rectangle_sides(a, b):
        s, w = _gauss(q, 0.0, length)
        x, y = x0 + s * tx, y0 + s * ty
        gx, gy = _rect_grad(a, b, m, n, c, x, y)
        pts.append(np.column_stack([x, y]))
        wts.append(w)
        vals.append(gx * nx + gy * ny)
        nrm.append(np.tile([nx, ny], (q, 1)))
    return BoundaryTrace(
        nodes=np.vstack(pts),
        weights=np.concatenate(wts),
        values=np.concatenate(vals),
        length=2 * (a + b),
        normals=np.vstack(nrm),
    )


def hemisphere_trace(l: int, nodes: int = 512, theta_nodes: int | None = None) -> BoundaryTrace:
    """Equator trace of the real form sqrt(2) c cos((l-1) phi) sin^(l-1) cos of the m = l-1 mode.

    The constant is fixed by 2-D quadrature over the hemisphere, not by the
    closed-form normalization. Nodes are (phi, 0) pairs.
    """
    q = theta_nodes or 200 + 2 * l
    th, wt = _gauss(q, 0.0, math.pi / 2)
    radial = np.sum(wt * (np.sin(th) ** (l - 1) * np.cos(th)) ** 2 * np.sin(th))
    angular = 2 * math.pi if l == 1 else math.pi
    c = 1.0 / math.sqrt(angular * radial)
    phi = 2 * math.pi * np.arange(nodes) / nodes
    ang = np.cos((l - 1) * phi)
    # d/dtheta [sin^(l-1) cos] at theta = pi/2 equals -1
    values = -c * ang
    length = 2 * math.pi
    return BoundaryTrace(
        nodes=np.column_stack([phi, np.zeros(nodes)]),
        weights=np.full(nodes, length / nodes),
        values=values,
        length=length,
        period=length,
        tangential_wavenumber=l - 1,
    )


def neumann_boundary_norm(n: int, k: int, nodes: int = 256) -> tuple[float, float]:
    """(lambda, ||chi||^2) for the Neumann disc mode, chi its boundary values.

    Normalization is by radial quadrature; no Bessel identities are used.
    """
    from .closedform import neumann_eigenvalue

    lam = neumann_eigenvalue(n, k)
    j = math.sqrt(lam)
    c = 1.0 / math.sqrt(2 * math.pi * radial_bessel_norm(n, j))
    th = 2 * math.pi * np.arange(nodes) / nodes
    chi = c * special.jv(n, j) * np.exp(1j * n * th)
    return lam, float(np.sum(np.abs(chi) ** 2) * 2 * math.pi / nodes)


def quad_trace_norm(trace: BoundaryTrace) -> float:
    """Squared L^2 norm of the trace by its own quadrature rule."""
    return float(np.sum(trace.weights * np.abs(trace.values) ** 2))


def rellich_check(domain: DomainSpec, mode: EigenmodeRecord, trace: BoundaryTrace, origin=None) -> float:
    """Relative residual of 2 lambda = int (x . nu) psi^2 dsigma."""
    if trace.normals is None:
        raise ValueError("the dilation identity needs outward normals on the trace")
    x0 = np.asarray(domain.centroid if origin is None else origin, dtype=float)
    xn = np.sum((trace.nodes - x0) * trace.normals, axis=1)
    scale = np.max(np.abs(xn))
    if xn.min() < -1e-12 * scale and xn.max() > 1e-12 * scale:
        warnings.warn("x . nu changes sign on the boundary; identity still holds", stacklevel=2)
    lhs = 2 * mode.lam
    rhs = float(np.sum(trace.weights * xn * np.abs(trace.values) ** 2))
    return abs(lhs - rhs) / lhs


def boundary_sobolev_norm(trace: BoundaryTrace, k: int) -> float:
    """sum_{i<=k} ||d^i psi / ds^i||^2 with spectral differentiation in arclength."""
    if k < 0:
        raise ValueError("Sobolev order must be non-negative")
    if trace.period is None:
        raise ValueError("Sobolev norm needs a uniform sampling of a closed boundary")
    w = np.asarray(trace.weights)
    if np.ptp(w) > 1e-12 * w.max():
        raise ValueError("Sobolev norm needs uniform quadrature weights")
    N = len(w)
    spec = np.fft.fft(trace.values)
    omega = 2 * math.pi * np.fft.fftfreq(N, d=trace.period / N)
    mult = sum(omega ** (2 * i) for i in range(k + 1))
    return float(trace.period / N**2 * np.sum(mult * np.abs(spec) ** 2))


def _eigen_multiplicity(record: EigenmodeRecord) -> int:
    if record.domain.kind == "disc" and record.indices[0] > 0:
        return 2
    return 1


def mode_count(domain: DomainSpec, lam_max: float) -> int:
    """Number of eigenvalues below lam_max, with multiplicity."""
    if domain.kind == "disc":
        return sum(_eigen_multiplicity(r) for r in disc_modes_below(domain.a, lam_max))
    if domain.kind == "rectangle":
        return len(rectangle_modes_below(domain.a, domain.b, lam_max))
    raise ValueError(f"full enumeration not available for {domain.kind}")


def weyl_count(domain: DomainSpec, lam_max: float) -> float:
    """Leading 2-D Weyl term |M| lambda / (4 pi)."""
    return domain.area * lam_max / (4 * math.pi)


def weyl_guard(domain: DomainSpec, lam_max: float, tol: float = 0.10) -> tuple[bool, float]:
    """Completeness guard: (passed, relative deviation of the count from Weyl)."""
    dev = abs(mode_count(domain, lam_max) / weyl_count(domain, lam_max) - 1)
    return dev <= tol, dev


def _disc_psi_sq_at(rec: EigenmodeRecord, point) -> float:
    # sum over the real cos/sin pair (or the single radial mode) at angle th
    a = rec.domain.a
    n, k = rec.indices
    th = math.atan2(point[1], point[0])
    j = specfun.bessel_zero(n, k, "J")
    d = (j / a) * special.jvp(n, j)
    if n == 0:
        return d * d / (2 * math.pi * radial_bessel_norm(0, j, a))
    c_sq = 1.0 / (math.pi * radial_bessel_norm(n, j, a))
    return c_sq * d * d * (math.cos(n * th) ** 2 + math.sin(n * th) ** 2)


def _rect_psi_sq_at(rec: EigenmodeRecord, point) -> float:
    a, b = rec.domain.a, rec.domain.b
    m, n = rec.indices
    x, y = point
    c = 2.0 / math.sqrt(a * b)
    gx, gy = _rect_grad(a, b, m, n, c, x, y)
    tol = 1e-12 * (a + b)
    if abs(y) < tol or abs(y - b) < tol:
        return float(gy) ** 2
    if abs(x) < tol or abs(x - a) < tol:
        return float(gx) ** 2
    raise ValueError(f"{point} is not on the rectangle boundary")


def ozawa_sum(domain: DomainSpec, lam_max: float, y) -> tuple[float, float]:
    """(sum_{lambda_j < lam_max} psi_j(y)^2, lam_max^2 / (8 pi)) for a planar domain.

    Degenerate disc eigenspaces are summed in full (cos and sin partners),
    which makes the pointwise sum basis independent.
    """
    if domain.kind == "disc":
        if abs(math.hypot(*y) - domain.a) > 1e-12 * domain.a:
            raise ValueError(f"{y} is not on the circle of radius {domain.a}")
        modes = disc_modes_below(domain.a, lam_max)
        empirical = sum(_disc_psi_sq_at(r, y) for r in modes)
    elif domain.kind == "rectangle":
        modes = rectangle_modes_below(domain.a, domain.b, lam_max)
        empirical = sum(_rect_psi_sq_at(r, y) for r in modes)
    else:
        raise ValueError(f"Ozawa sums need full mode enumeration; not available for {domain.kind}")
    # (4 pi)^(n/2) Gamma(n/2 + 2) with n = 2
    leading = lam_max**2 / ((4 * math.pi) * math.gamma(3))
    return float(empirical), leading


def ratio_summary(records, window=None) -> RatioSummary:
    """min/max of psi_norm_sq / lambda over records with lambda in ``window``."""
    records = list(records)
    lo, hi = window if window is not None else (-math.inf, math.inf)
    sel = [r for r in records if lo <= r.lam <= hi]
    if not sel:
        raise ValueError(f"no eigenmodes in window {(lo, hi)}")
    ratios = [r.ratio for r in sel]
    lams = [r.lam for r in sel]
    return RatioSummary(
        domain=sel[0].domain,
        lambda_window=(float(min(lams)) if window is None else lo, float(max(lams)) if window is None else hi),
        min_ratio=float(min(ratios)),
        max_ratio=float(max(ratios)),
        count=len(sel),
    )


def sobolev_scaling_audit(a: float, lam_max: float, k: int, bins: int = 10, nodes: int = 512) -> dict:
    """Growth-trend check of ||psi||^2_{H^k} / lambda^(k+1) over disc modes.

    The top decade [lam_max/10, lam_max] is split into ``bins`` log-spaced
    bins; the per-bin maxima should show no trend, measured by
    max / median of the bin maxima.
    """
    records = disc_modes_below(a, lam_max)
    jmax = max(r.indices[0] for r in records)
    nodes = max(nodes, 4 * jmax + 8)
    lam = np.array([r.lam for r in records])
    q = np.array(
        [boundary_sobolev_norm(disc_trace(a, *r.indices, nodes=nodes), k) / r.lam ** (k + 1) for r in records]
    )
    edges = np.geomspace(lam_max / 10, lam_max, bins + 1)
    maxima = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (lam >= lo) & (lam < hi)
        if sel.any():
            maxima.append(float(q[sel].max()))
    maxima = np.array(maxima)
    return {
        "k": k,
        "global_max": float(q.max()),
        "bin_maxima": maxima.tolist(),
        "max_over_median": float(maxima.max() / np.median(maxima)),
    }
