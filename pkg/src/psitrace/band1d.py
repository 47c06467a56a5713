"""Separated Dirichlet problems on surfaces of revolution.

The band [-a, a]_y x S^1_phi with metric dy^2 + w(y)^2 dphi^2 and
u = e^{i l phi} v(y) reduces to

    -(w v')' + l^2 v / w = lam w v,   v(-a) = v(a) = 0,

with w = cos y (spherical zone around the equator), cosh y (hyperbolic
cylinder) or 1 (flat cylinder, used as a solver control).  The operator
is discretized in conservative form with w at cell midpoints, giving a
symmetric tridiagonal pencil (A, diag(w)).  Every mode is solved on N and
2N intervals and the eigenvalue and boundary norm are Richardson
extrapolated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

WEIGHTS = {
    "spherical": np.cos,
    "hyperbolic": np.cosh,
    "flat": np.ones_like,
}

# one-sided fourth-order first derivative
_D1 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


class GridTooCoarse(RuntimeError):
    pass


@dataclass(frozen=True)
class BandSpec:
    curvature: str
    a: float
    l: int
    grid_size: int = 4096

    def __post_init__(self):
        if self.curvature not in WEIGHTS:
            raise ValueError(f"curvature must be one of {sorted(WEIGHTS)}, got {self.curvature!r}")
        if not self.a > 0:
            raise ValueError("half width must be positive")
        if self.curvature == "spherical" and not self.a < math.pi / 2:
            raise ValueError("spherical half width must be below pi/2")
        if self.l < 0:
            raise ValueError("angular index must be non-negative")
        if self.grid_size < 256:
            raise ValueError("grid_size must be at least 256")

    def weight(self, y):
        return WEIGHTS[self.curvature](np.asarray(y, dtype=float))

    @property
    def barrier_top(self) -> float:
        """Peak of the effective potential l^2 / w^2 for the hyperbolic band."""
        return self.l**2 / float(self.weight(0.0)) ** 2


@dataclass(frozen=True, eq=False)
class BandMode:
    spec: BandSpec
    transverse_index: int
    lam: float
    psi_norm_sq: float
    y: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    lam_disagreement: float = 0.0
    psi_disagreement: float = 0.0
    family: str = "index"

    @property
    def l(self) -> int:
        return self.spec.l


def _pencil(spec: BandSpec, n: int):
    a = spec.a
    y = np.linspace(-a, a, n + 1)
    h = 2 * a / n
    ym = 0.5 * (y[:-1] + y[1:])
    wm = spec.weight(ym)
    wi = spec.weight(y[1:-1])
    diag = (wm[:-1] + wm[1:]) / h**2 + spec.l**2 / wi
    off = -wm[1:-1] / h**2
    # symmetric scaling by diag(w)^(-1/2) turns the pencil into a standard problem
    s = 1.0 / np.sqrt(wi)
    return y, h, wi, diag * s * s, off * s[:-1] * s[1:], s


def _solve_grid(spec: BandSpec, n: int, index: int):
    y, h, wi, d, e, s = _pencil(spec, n)
    lam, vec = eigh_tridiagonal(d, e, select="i", select_range=(index - 1, index - 1))
    v = np.zeros(n + 1)
    v[1:-1] = vec[:, 0] * s
    w = spec.weight(y)
    v /= math.sqrt(2 * math.pi * integrate.simpson(v**2 * w, x=y))
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    dl = _D1 @ v[:5] / h
    dr = -(_D1 @ v[::-1][:5]) / h
    psi = 2 * math.pi * (w[0] * dl**2 + w[-1] * dr**2)
    return float(lam[0]), float(psi), y, v


def band_mode(spec: BandSpec, transverse_index: int = 1, family: str = "index") -> BandMode:
    """Dirichlet mode number ``transverse_index`` (1 = lowest) in angular sector l.

    Eigenvalue and the boundary norm over both circles are Richardson
    extrapolated from grids of ``grid_size`` and twice as many intervals.
    """
    if transverse_index < 1:
        raise ValueError("transverse_index starts at 1")
    n = spec.grid_size
    lam_c, psi_c, _, _ = _solve_grid(spec, n, transverse_index)
    lam_f, psi_f, y, v = _solve_grid(spec, 2 * n, transverse_index)
    dis = abs(lam_f - lam_c) / lam_f
    if dis > 1e-4:
        raise GridTooCoarse(f"eigenvalue changes by {dis:.2e} under refinement; raise grid_size")
    return BandMode(
        spec=spec,
        transverse_index=transverse_index,
        lam=(4 * lam_f - lam_c) / 3,
        psi_norm_sq=(4 * psi_f - psi_c) / 3,
        y=y,
        v=v,
        lam_disagreement=dis,
        psi_disagreement=abs(psi_f - psi_c) / max(abs(psi_f), np.finfo(float).tiny),
        family=family,
    )


def eigenvalues(spec: BandSpec, count: int) -> np.ndarray:
    """Lowest ``count`` eigenvalues on the base grid (no extrapolation)."""
    _, _, _, d, e, _ = _pencil(spec, spec.grid_size)
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1))


def barrier_index(spec: BandSpec) -> int:
    """Transverse index of the mode whose eigenvalue is closest to the barrier top.

    These modes sit on the unstable closed geodesic y = 0 of the hyperbolic
    band; the transverse ground state there lives near the boundary instead.
    """
    top = spec.barrier_top
    _, _, _, d, e, _ = _pencil(spec, spec.grid_size)
    lam = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(0.0, 2 * top + 100.0))
    return int(np.argmin(np.abs(lam - top))) + 1


def family_mode(spec: BandSpec, family: str) -> BandMode:
    """``family`` is "ground" (transverse index 1) or "barrier"."""
    if family == "ground":
        return band_mode(spec, 1, family="ground")
    if family == "barrier":
        return band_mode(spec, barrier_index(spec), family="barrier")
    raise ValueError(f"unknown family {family!r}")


def default_family(curvature: str) -> str:
    return "barrier" if curvature == "hyperbolic" else "ground"


def band_sweep(curvature: str, a: float, ls, family: str | None = None, grid_size: int = 4096) -> list[BandMode]:
    family = family or default_family(curvature)
    return [family_mode(BandSpec(curvature, a, int(l), grid_size), family) for l in ls]


def trapping_scaling_audit(modes) -> dict:
    """Scaling report for a sweep in l.

    Reports ||psi||^2 log(lam) / lam per mode with its max/min over the top
    decade of lam, and the linear fit of log ||psi||^2 against l.
    """
    modes = list(modes)
    ls = np.array([m.l for m in modes], dtype=float)
    lam = np.array([m.lam for m in modes])
    psi = np.array([m.psi_norm_sq for m in modes])
    q = psi * np.log(lam) / lam
    top = lam >= lam.max() / 10
    logpsi = np.log(psi)
    slope, intercept = np.polyfit(ls, logpsi, 1)
    corr = float(np.corrcoef(ls, logpsi)[0, 1]) if len(ls) > 1 else float("nan")
    return {
        "rows": [
            {"l": int(l), "lambda": float(x), "psi_norm_sq": float(p), "audit": float(v)}
            for l, x, p, v in zip(ls, lam, psi, q)
        ],
        "top_decade_max_over_min": float(q[top].max() / q[top].min()),
        "log_psi_slope": float(slope),
        "log_psi_correlation": corr,
        "family": modes[0].family if modes else None,
    }
