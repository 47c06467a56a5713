"""Boundary-collar diagnostics E(r) and L(r).

Near the boundary use coordinates (r, y): r the distance to the boundary,
y a boundary coordinate, metric dr^2 + h(r, y) dy^2 and density k^2 dr dy
with k^4 = det h.  With v = k u,

    E(r) = 1/2 int_{Y_r} (v_r^2 + (lam + f) v^2 - h^{yy} v_y^2) dy
    L(r) = int_{Y_r} v^2 dy,          f = -k_rr / k - k^{-1} d_y(h^{yy} d_y k).

All model collars here have k depending on r only, so the second term of
f vanishes.  Per domain:

    disc          y = a th,  h = ((a-r)/a)^2,  k = ((a-r)/a)^(1/2), f = 1/(4 (a-r)^2)
    rectangle     bottom side, y = x in [delta, a - delta] (corners cut), k = 1, f = 0
    hemisphere    r = pi/2 - th, y = phi, h = cos^2 r, f = 1/2 + tan^2(r)/4
    band          both circles y = +-(a - r), h = w^2, f = -w''/(2w) + (w'/w)^2/4
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from . import specfun
from .band1d import BandMode
from .closedform import DomainSpec, EigenmodeRecord
from .verify import _gauss, radial_bessel_norm


@dataclass(frozen=True, eq=False)
class RadialProfile:
    r_grid: np.ndarray
    E_values: np.ndarray
    L_values: np.ndarray
    delta: float
    lam: float
    k_factor: np.ndarray
    f_potential: np.ndarray
    psi_norm_sq: float
    label: str = ""
    heuristic: bool = False
    tangential_nodes: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.r_grid)
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("r_grid must start at 0 and increase")
        if np.any(np.asarray(self.L_values) < 0):
            raise ValueError("L(r) is a squared norm and cannot be negative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "E", "L"])
            for row in zip(self.r_grid, self.E_values, self.L_values):
                w.writerow([repr(float(x)) for x in row])

    def summary(self) -> dict:
        return {
            "label": self.label,
            "lambda": self.lam,
            "delta": self.delta,
            "grid_points": len(self.r_grid),
            "tangential_nodes": self.tangential_nodes,
            "E0": float(self.E_values[0]),
            "half_psi_norm_sq": 0.5 * self.psi_norm_sq,
            "max_abs_E_over_lambda": float(np.max(np.abs(self.E_values)) / self.lam),
            "heuristic": self.heuristic,
        }


def _disc_collar(a, n, k, r, nt):
    j = specfun.bessel_zero(n, k, "J")
    angular = 2 * math.pi if n == 0 else math.pi
    c = 1.0 / math.sqrt(angular * radial_bessel_norm(n, j, a))
    th = 2 * math.pi * np.arange(nt) / nt
    w = np.full(nt, 2 * math.pi * a / nt)
    rho = (a - r)[:, None]
    kf = np.sqrt(rho / a)
    kr = -0.5 / (a * kf)
    f = 1.0 / (4 * rho * rho)
    hinv = (a / rho) ** 2
    u = c * special.jv(n, j * rho / a) * np.cos(n * th)
    ur = -c * (j / a) * special.jvp(n, j * rho / a) * np.cos(n * th)
    uy = -c * special.jv(n, j * rho / a) * (n / a) * np.sin(n * th)
    return w, kf * u, kr * u + kf * ur, kf * uy, kf, f, hinv


def _rect_collar(a, b, m, n, r, margin, nt):
    x, w = _gauss(nt, margin, a - margin)
    c = 2.0 / math.sqrt(a * b)
    kx, ky = m * math.pi / a, n * math.pi / b
    r = r[:, None]
    u = c * np.sin(kx * x) * np.sin(ky * r)
    ur = c * ky * np.sin(kx * x) * np.cos(ky * r)
    ux = c * kx * np.cos(kx * x) * np.sin(ky * r)
    one = np.ones_like(r)
    return w, u, ur, ux, one, 0.0 * one, one


def _hemi_collar(l, r, nt):
    # real form cos((l-1) phi) cos^(l-1)(r) sin(r); the radial integral is I_l / (2 pi)
    angular = 2 * math.pi if l == 1 else math.pi
    cs = 1.0 / math.sqrt(angular * specfun.hemisphere_norm_integral(l) / (2 * math.pi))
    phi = 2 * math.pi * np.arange(nt) / nt
    w = np.full(nt, 2 * math.pi / nt)
    ang = np.cos((l - 1) * phi)
    dang = -(l - 1) * np.sin((l - 1) * phi)
    cr, sr = np.cos(r)[:, None], np.sin(r)[:, None]
    radial = cr ** (l - 1) * sr
    dradial = cr**l - (l - 1) * cr ** (l - 2) * sr * sr if l > 1 else cr
    kf = np.sqrt(cr)
    kr = -0.5 * sr / kf
    f = 0.5 + 0.25 * (sr / cr) ** 2
    hinv = 1.0 / (cr * cr)
    u = cs * ang * radial
    ur = cs * ang * dradial
    uy = cs * dang * radial
    return w, kf * u, kr * u + kf * ur, kf * uy, kf, f, hinv


def _check_grid(r_grid, max_delta, what):
    r = np.asarray(r_grid, dtype=float)
    if r[-1] >= max_delta:
        raise ValueError(f"collar width {r[-1]} exceeds the smooth range {max_delta} of the {what}")
    return r


def collar_profile(domain: DomainSpec, mode, r_grid, tangential_nodes: int | None = None) -> RadialProfile:
    """E(r) and L(r) on the parallel curves at distances ``r_grid`` from the boundary.

    ``mode`` is an :class:`EigenmodeRecord` for disc, rectangle and
    hemisphere, and a :class:`~psitrace.band1d.BandMode` for a band.
    """
    if isinstance(mode, BandMode):
        return _band_profile(mode, r_grid)
    kind = domain.kind
    lam = mode.lam
    heuristic = False
    if kind == "disc":
        r = _check_grid(r_grid, domain.a, "disc collar")
        n, k = mode.indices
        nt = tangential_nodes or 4 * n + 64
        sampler = lambda rr: _disc_collar(domain.a, n, k, rr, nt)
    elif kind == "rectangle":
        r = _check_grid(r_grid, domain.a / 2, "rectangle collar")
        m, n = mode.indices
        nt = tangential_nodes or 64 + 2 * m
        delta = float(r[-1])
        sampler = lambda rr: _rect_collar(domain.a, domain.b, m, n, rr, delta, nt)
        heuristic = True
    elif kind == "hemisphere":
        r = _check_grid(r_grid, math.pi / 2, "hemisphere collar")
        l = mode.indices[0]
        nt = tangential_nodes or 4 * l + 64
        sampler = lambda rr: _hemi_collar(l, rr, nt)
    else:
        raise ValueError(f"no collar model for {kind}")

    w, v, vr, vy, kf, f, hinv = sampler(r)
    E = 0.5 * np.sum(w * (vr**2 + (lam + f) * v**2 - hinv * vy**2), axis=1)
    L = np.sum(w * v**2, axis=1)
    kk, ff = np.ravel(kf), np.ravel(f)
    psi_sq = float(np.sum(w * vr[0] ** 2))
    return RadialProfile(
        r_grid=r,
        E_values=E,
        L_values=L,
        delta=float(r[-1]),
        lam=lam,
        k_factor=kk,
        f_potential=ff,
        psi_norm_sq=psi_sq,
        label=f"{kind}{tuple(mode.indices)}",
        heuristic=heuristic,
        tangential_nodes=nt,
    )


def _band_profile(mode: BandMode, r_grid) -> RadialProfile:
    spec = mode.spec
    r = _check_grid(r_grid, spec.a, "band collar")
    spline = CubicSpline(mode.y, mode.v)
    d1 = spline.derivative(1)
    l2 = spec.l**2
    wf = {"spherical": (np.cos, lambda y: -np.sin(y), lambda y: -np.cos(y)),
          "hyperbolic": (np.cosh, np.sinh, np.cosh),
          "flat": (np.ones_like, np.zeros_like, np.zeros_like)}[spec.curvature]
    E = np.zeros(len(r))
    L = np.zeros(len(r))
    kk = np.empty(len(r))
    ff = np.empty(len(r))
    for y in (spec.a - r, -(spec.a - r)):
        w, w1, w2 = (g(y) for g in wf)
        kf = np.sqrt(w)
        ky = 0.5 * w1 / kf
        f = -0.5 * w2 / w + 0.25 * (w1 / w) ** 2
        V, dV = spline(y), d1(y)
        v, vy = kf * V, ky * V + kf * dV
        E += 0.5 * 2 * math.pi * (vy**2 + (mode.lam + f) * v**2 - l2 / w**2 * v**2)
        L += 2 * math.pi * v**2
        kk, ff = kf, f
    return RadialProfile(
        r_grid=r,
        E_values=E,
        L_values=L,
        delta=float(r[-1]),
        lam=mode.lam,
        k_factor=np.asarray(kk),
        f_potential=np.asarray(ff),
        psi_norm_sq=mode.psi_norm_sq,
        label=f"band-{spec.curvature}(l={spec.l}, index={mode.transverse_index})",
        meta={"family": mode.family},
    )


def energy_bound_audit(profiles) -> float:
    """Empirical C in |E(r)| <= C lam: max over profiles and r of |E(r)| / lam."""
    return max(float(np.max(np.abs(p.E_values)) / p.lam) for p in profiles)


def l_bound_audit(profiles) -> float:
    """Empirical C in L(r) <= C lam r^2 over r in (0, delta/3]."""
    best = 0.0
    for p in profiles:
        r = p.r_grid
        sel = (r > 0) & (r <= p.delta / 3)
        if not sel.any():
            raise ValueError("profile grid has no points in (0, delta/3]")
        best = max(best, float(np.max(p.L_values[sel] / (p.lam * r[sel] ** 2))))
    return best


def _derivatives(r, L):
    h1 = r[1:-1] - r[:-2]
    h2 = r[2:] - r[1:-1]
    d1 = (h1**2 * L[2:] + (h2**2 - h1**2) * L[1:-1] - h2**2 * L[:-2]) / (h1 * h2 * (h1 + h2))
    d2 = 2 * (h1 * L[2:] - (h1 + h2) * L[1:-1] + h2 * L[:-2]) / (h1 * h2 * (h1 + h2))
    return d1, d2


def diff_ineq_quantity(profile: RadialProfile, threshold: float = 1e-12):
    """(r, ((L')^2/L - L'')/lam) at interior grid points where L > threshold * max L."""
    r, L = np.asarray(profile.r_grid), np.asarray(profile.L_values)
    if len(r) < 64:
        raise ValueError("need at least 64 grid points for second differences")
    d1, d2 = _derivatives(r, L)
    Li = L[1:-1]
    keep = Li > threshold * L.max()
    q = (d1[keep] ** 2 / Li[keep] - d2[keep]) / profile.lam
    return r[1:-1][keep], q


def diff_ineq_audit(profile: RadialProfile, threshold: float = 1e-12) -> float:
    """Empirical C in L'' >= (L')^2 / L - C lam, by centered differences."""
    return float(np.max(diff_ineq_quantity(profile, threshold)[1]))
