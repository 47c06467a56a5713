"""Special functions: integer-order Bessel functions and their zeros,
associated Legendre functions, and the hemisphere normalization constant.

Legendre convention: unnormalized Ferrers functions without the
Condon-Shortley phase,

    P_l^m(t) = (1 - t^2)^(m/2) d^m/dt^m P_l(t),

so P_1^1(t) = +sqrt(1 - t^2) and P_l^l(t) = (2l - 1)!! (1 - t^2)^(l/2) >= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

KINDS = ("J", "J'")


class BesselZeroError(RuntimeError):
    """Raised when a zero of J_n or J_n' cannot be bracketed."""


@dataclass(frozen=True)
class BesselZeroTable:
    order: int
    kind: str
    zeros: tuple[float, ...]

    def __post_init__(self):
        z = np.asarray(self.zeros)
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise ValueError("zeros must be positive and strictly increasing")

    def __len__(self):
        return len(self.zeros)

    def __getitem__(self, k):
        """1-based access: ``table[1]`` is the first positive zero."""
        if k < 1:
            raise IndexError("zero index starts at 1")
        return self.zeros[k - 1]


@dataclass(frozen=True)
class HemisphereNormalization:
    degree: int
    c_sq: float
    lam: float


def _check_order(n):
    if int(n) != n or n < 0:
        raise ValueError(f"Bessel order must be a non-negative integer, got {n}")


def bessel_j(n: int, x):
    """J_n(x) for integer n >= 0 and x >= 0 (scalar or array)."""
    _check_order(n)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_j is defined here for x >= 0 only")
    out = special.jv(n, x)
    return float(out) if out.ndim == 0 else out


def bessel_jp(n: int, x):
    """Derivative J_n'(x)."""
    _check_order(n)
    x = np.asarray(x, dtype=float)
    out = special.jvp(n, x)
    return float(out) if out.ndim == 0 else out


def _kind_func(n, kind):
    if kind == "J":
        return lambda x: special.jv(n, x)
    if kind == "J'":
        return lambda x: special.jvp(n, x)
    raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")


@lru_cache(maxsize=4096)
def bessel_zeros(n: int, count: int, kind: str = "J") -> BesselZeroTable:
    """First ``count`` positive zeros of J_n or J_n'.

    Brackets come from a sign-change scan starting at x = n (all positive
    zeros of J_n and, for n >= 1, of J_n' exceed n); consecutive zeros are
    more than 1 apart, so a 0.25 step cannot skip a pair. Each bracket is
    then refined to machine precision.
    """
    _check_order(n)
    if count < 1:
        raise ValueError("count must be >= 1")
    f = _kind_func(n, kind)
    # J_0' = -J_1 vanishes at the origin; that root is not positive.
    start = float(n) if n > 0 else 1e-3
    step = 0.25
    zeros: list[float] = []
    lo = start
    # generous upper limit: McMahon spacing ~ pi plus the turning-point offset
    limit = start + (count + 2) * math.pi + 10.0 * (n + 1) ** (1 / 3) + 10.0
    while len(zeros) < count:
        if lo > 4 * limit:
            raise BesselZeroError(f"could not bracket {count} zeros of {kind}_{n}")
        grid = lo + step * np.arange(401)
        vals = f(grid)
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
        for i in idx:
            a, b = grid[i], grid[i + 1]
            if vals[i] == 0.0:
                root = a
            else:
                try:
                    root = optimize.brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                except ValueError as exc:
                    raise BesselZeroError(str(exc)) from exc
            if not zeros or root > zeros[-1] + 1e-9:
                zeros.append(float(root))
            if len(zeros) == count:
                break
        lo = grid[-1]
    return BesselZeroTable(order=n, kind=kind, zeros=tuple(zeros))


def bessel_zero(n: int, k: int, kind: str = "J") -> float:
    """k-th positive zero (k >= 1) of J_n (kind "J") or J_n' (kind "J'")."""
    if k < 1:
        raise ValueError("k must be >= 1")
    # round the table size up so neighbouring k share one cached scan
    count = max(8, 1 << (k - 1).bit_length())
    return bessel_zeros(n, count, kind)[k]


def legendre_plm(l: int, m: int, t):
    """Associated Legendre function P_l^m(t), convention in the module docstring.

    Upward recurrence in degree from P_m^m with running rescaling, so the
    only overflow is when the true value itself exceeds the float range.
    """
    if m < 0 or m > l:
        raise ValueError(f"need 0 <= m <= l, got l={l}, m={m}")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1):
        raise ValueError("legendre_plm requires |t| <= 1")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    with np.errstate(divide="ignore"):
        log_scale = special.gammaln(2 * m + 1) - special.gammaln(m + 1) - m * math.log(2.0)
        log_scale = log_scale + 0.5 * m * np.log1p(-t * t)
    log_scale = np.where(np.isfinite(log_scale), log_scale, -np.inf)
    p_prev = np.zeros_like(t)
    p = np.ones_like(t)
    for ll in range(m, l):
        p_next = ((2 * ll + 1) * t * p - (ll + m) * p_prev) / (ll - m + 1)
        p_prev, p = p, p_next
        big = np.abs(p) > 1e150
        if np.any(big):
            p[big] *= 1e-150
            p_prev[big] *= 1e-150
            log_scale[big] += 150 * math.log(10.0)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(np.isneginf(log_scale), 0.0, p * np.exp(log_scale))
    return float(out[0]) if scalar else out


def hemisphere_norm_integral(l: int) -> float:
    """Integral of |sin^(l-1) th cos th|^2 over the upper unit hemisphere.

    Equals 2 pi (2l-2)!! / ((2l-1)!! (2l+1)); evaluated in log space.
    """
    if l < 1:
        raise ValueError("degree must be >= 1")
    # (2l-2)!! = 2^(l-1) (l-1)!,  (2l-1)!! = (2l)! / (2^l l!)
    log_even = (l - 1) * math.log(2.0) + special.gammaln(l)
    log_odd = special.gammaln(2 * l + 1) - l * math.log(2.0) - special.gammaln(l + 1)
    return 2 * math.pi * math.exp(log_even - log_odd) / (2 * l + 1)


def hemisphere_c_sq(l: int) -> HemisphereNormalization:
    """Normalization c_l^2 of u = c e^{i(l-1)phi} sin^(l-1)(th) cos(th) on the hemisphere.

    Only odd degrees are supported; even l with m = l - 1 is not part of
    the model family.
    """
    if l < 1 or l % 2 == 0:
        raise ValueError(f"hemisphere degree must be odd and >= 1, got {l}")
    return HemisphereNormalization(degree=l, c_sq=1.0 / hemisphere_norm_integral(l), lam=float(l * (l + 1)))
