"""Exact Dirichlet (and one Neumann) eigenmode catalogues for model domains.

Each constructor returns an :class:`EigenmodeRecord` whose ``psi_norm_sq``
is the analytic value of the squared L^2 norm of the outward normal
derivative over the boundary, measured with arclength.  Numerical
re-derivations live in :mod:`psitrace.verify`.

Mode conventions
----------------
disc          u = c J_n(j r/a) cos(n th) or sin(n th) (real pair for n >= 1)
rectangle     u = sqrt(4/ab) sin(m pi x/a) sin(n pi y/b) on [0,a] x [0,b]
flat_cylinder u = sqrt(2/ab) sin(m pi x/a) e^{2 pi i n s/b}, s the circle
              arclength, so the circle wavenumber is 2 pi n / b
hemisphere    u = c e^{i(l-1) phi} sin^(l-1)(th) cos(th), l odd, th <= pi/2
neumann_disc  u = c J_n(j' r) e^{i n th} on the unit disc; ``psi_norm_sq``
              holds the squared norm of the boundary values instead
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from . import specfun

DOMAIN_KINDS = ("disc", "rectangle", "flat_cylinder", "hemisphere", "neumann_disc", "band", "polygon")
PROVENANCES = ("closed-form", "band1d", "fem", "neumann")


@dataclass(frozen=True)
class DomainSpec:
    """A computable domain. Unused lengths are ``None``.

    ``a``/``b``: disc radius; rectangle sides (a <= b); cylinder length and
    circumference; band half-width. ``params`` carries extras (band
    curvature, polygon vertices) as plain JSON-compatible values.
    """

    kind: str
    a: float | None = None
    b: float | None = None
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        for name in ("a", "b"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{self.kind}: length {name} must be positive, got {v}")
        if self.kind == "rectangle":
            if self.a is None or self.b is None:
                raise ValueError("rectangle needs both side lengths")
            if self.a > self.b:
                a, b = self.b, self.a
                object.__setattr__(self, "a", a)
                object.__setattr__(self, "b", b)

    @property
    def area(self) -> float:
        if self.kind in ("disc",):
            return math.pi * self.a**2
        if self.kind == "neumann_disc":
            return math.pi
        if self.kind in ("rectangle", "flat_cylinder"):
            return self.a * self.b
        if self.kind == "hemisphere":
            return 2 * math.pi
        if self.kind == "polygon":
            from shapely.geometry import Polygon

            return Polygon(self.params["vertices"]).area
        raise ValueError(f"area not available for {self.kind}")

    @property
    def centroid(self) -> tuple[float, float]:
        """Origin used for the dilation (Rellich) identity on planar domains."""
        if self.kind == "disc":
            return (0.0, 0.0)
        if self.kind == "rectangle":
            return (self.a / 2, self.b / 2)
        if self.kind == "polygon":
            from shapely.geometry import Polygon

            c = Polygon(self.params["vertices"]).centroid
            return (c.x, c.y)
        raise ValueError(f"{self.kind} is not a planar Euclidean domain")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(kind=d["kind"], a=d.get("a"), b=d.get("b"), params=dict(d.get("params") or {}))


def disc(a: float = 1.0) -> DomainSpec:
    return DomainSpec("disc", a=a)


def rectangle(a: float, b: float) -> DomainSpec:
    return DomainSpec("rectangle", a=a, b=b)


def flat_cylinder(a: float, b: float) -> DomainSpec:
    return DomainSpec("flat_cylinder", a=a, b=b)


def hemisphere() -> DomainSpec:
    return DomainSpec("hemisphere", a=1.0)


def neumann_disc() -> DomainSpec:
    return DomainSpec("neumann_disc", a=1.0)


@dataclass(frozen=True)
class EigenmodeRecord:
    domain: DomainSpec
    indices: tuple
    lam: float
    psi_norm_sq: float
    provenance: str = "closed-form"
    ratio: float = field(init=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance != "neumann" and not self.lam > 0:
            raise ValueError("Dirichlet eigenvalues are positive")
        if self.psi_norm_sq < 0:
            raise ValueError("psi_norm_sq must be non-negative")
        object.__setattr__(self, "indices", tuple(self.indices))
        object.__setattr__(self, "ratio", self.psi_norm_sq / self.lam)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "indices": list(self.indices),
            "lambda": self.lam,
            "psi_norm_sq": self.psi_norm_sq,
            "ratio": self.ratio,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EigenmodeRecord":
        return cls(
            domain=DomainSpec.from_dict(d["domain"]),
            indices=tuple(d["indices"]),
            lam=d["lambda"],
            psi_norm_sq=d["psi_norm_sq"],
            provenance=d["provenance"],
        )


def disc_mode(a: float, n: int, k: int) -> EigenmodeRecord:
    if not a > 0:
        raise ValueError("radius must be positive")
    j = specfun.bessel_zero(n, k, "J")
    lam = (j / a) ** 2
    return EigenmodeRecord(disc(a), (n, k), lam, 2 * lam / a)


def rectangle_mode(a: float, b: float, m: int, n: int) -> EigenmodeRecord:
    if m < 1 or n < 1:
        raise ValueError("rectangle mode indices start at 1")
    dom = rectangle(a, b)
    a, b = dom.a, dom.b
    kx, ky = m * math.pi / a, n * math.pi / b
    lam = kx**2 + ky**2
    psi = 4 / (a * b) * (ky**2 * a + kx**2 * b)
    return EigenmodeRecord(dom, (m, n), lam, psi)


def cylinder_mode(a: float, b: float, m: int, n: int) -> EigenmodeRecord:
    if m < 1:
        raise ValueError("axial index m starts at 1")
    kx, ks = m * math.pi / a, 2 * math.pi * n / b
    return EigenmodeRecord(flat_cylinder(a, b), (m, n), kx**2 + ks**2, 4 / a * kx**2)


def hemisphere_mode(l: int) -> EigenmodeRecord:
    """The m = l - 1 spherical harmonic; psi = -c e^{i(l-1)phi} on the equator."""
    norm = specfun.hemisphere_c_sq(l)
    return EigenmodeRecord(hemisphere(), (l, l - 1), norm.lam, 2 * math.pi * norm.c_sq)


def neumann_eigenvalue(n: int, k: int) -> float:
    """k-th Neumann eigenvalue in angular sector n; (0, 1) is the constant mode."""
    if k < 1 or n < 0:
        raise ValueError("need n >= 0, k >= 1")
    if n == 0:
        if k == 1:
            return 0.0
        return specfun.bessel_zero(0, k - 1, "J'") ** 2
    return specfun.bessel_zero(n, k, "J'") ** 2


def neumann_disc_mode(n: int, k: int) -> EigenmodeRecord:
    """Boundary-value norm 2 lam / (lam - n^2) of the Neumann disc mode (n, k)."""
    if (n, k) == (0, 1):
        raise ValueError("(0, 1) is the constant Neumann mode with eigenvalue 0")
    lam = neumann_eigenvalue(n, k)
    return EigenmodeRecord(neumann_disc(), (n, k), lam, 2 * lam / (lam - n * n), provenance="neumann")


def mode_from_indices(domain: DomainSpec, indices) -> EigenmodeRecord:
    """Rebuild the analytic record for ``domain`` and ``indices``."""
    kind = domain.kind
    if kind == "disc":
        return disc_mode(domain.a, *indices)
    if kind == "rectangle":
        return rectangle_mode(domain.a, domain.b, *indices)
    if kind == "flat_cylinder":
        return cylinder_mode(domain.a, domain.b, *indices)
    if kind == "hemisphere":
        return hemisphere_mode(indices[0])
    if kind == "neumann_disc":
        return neumann_disc_mode(*indices)
    raise ValueError(f"no closed form for {kind}")


def disc_modes_below(a: float, lam_max: float) -> list[EigenmodeRecord]:
    """All (n, k) disc modes with eigenvalue < lam_max, one record per (n, k)."""
    jmax = math.sqrt(lam_max) * a
    out = []
    n = 0
    while n < jmax:
        k = 1
        while True:
            j = specfun.bessel_zero(n, k, "J")
            if j >= jmax:
                break
            out.append(disc_mode(a, n, k))
            k += 1
        if k == 1:
            break
        n += 1
    return sorted(out, key=lambda r: (r.lam, r.indices))


def rectangle_modes_below(a: float, b: float, lam_max: float) -> list[EigenmodeRecord]:
    dom = rectangle(a, b)
    a, b = dom.a, dom.b
    out = []
    m = 1
    while (m * math.pi / a) ** 2 < lam_max:
        n = 1
        while (m * math.pi / a) ** 2 + (n * math.pi / b) ** 2 < lam_max:
            out.append(rectangle_mode(a, b, m, n))
            n += 1
        m += 1
    return sorted(out, key=lambda r: (r.lam, r.indices))


def cylinder_modes_below(a: float, b: float, lam_max: float) -> list[EigenmodeRecord]:
    out = []
    m = 1
    while (m * math.pi / a) ** 2 < lam_max:
        nmax = int(math.sqrt(max(lam_max - (m * math.pi / a) ** 2, 0.0)) * b / (2 * math.pi)) + 1
        for n in range(-nmax, nmax + 1):
            r = cylinder_mode(a, b, m, n)
            if r.lam < lam_max:
                out.append(r)
        m += 1
    return sorted(out, key=lambda r: (r.lam, r.indices))
