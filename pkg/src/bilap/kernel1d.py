"""Kernel detection for 1D piecewise-constant fourth-order configurations.

On an interval split by one or two material interfaces, a clamped field whose
weighted fourth-order operator vanishes is piecewise cubic.  Interface
matching reduces the kernel question to a small dense determinant in the
contrast; the critical contrasts have closed forms, and an independent
determinant scan recovers them without consulting those forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

__all__ = [
    "TwoSegmentDomain",
    "ThreeSegmentDomain",
    "PiecewiseCubic",
    "ContrastRoots",
    "RootSource",
    "quadratic_coefficients",
    "critical_contrasts_two_segment",
    "critical_contrasts_three_segment",
    "build_kernel_system",
    "kernel_determinant",
    "kernel_basis",
    "scan_critical_contrasts",
]


@dataclass(frozen=True)
class TwoSegmentDomain:
    """Interval (a, b) with the material interface fixed at 0."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < 0.0 < self.b:
            raise ValueError(f"need a < 0 < b, got a={self.a}, b={self.b}")

    @property
    def ratio(self) -> float:
        return self.b / self.a


@dataclass(frozen=True)
class ThreeSegmentDomain:
    """Interval (-1, 1) with inner segment (-delta, delta)."""

    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


class RootSource(Enum):
    CLOSED_FORM = "ClosedForm"
    DETERMINANT_SCAN = "DeterminantScan"


@dataclass(frozen=True)
class ContrastRoots:
    roots: tuple
    source: RootSource


def quadratic_coefficients(t: float) -> tuple:
    """(p, q) of the contrast quadratic kappa^2 + p*kappa + q for ratio t = b/a < 0.

    The discriminant p^2 - 4q factors as 16 t^2 (t-1)^2 (t^2 - t + 1), which is
    positive for every t < 0; a non-positive value signals a broken invariant.
    """
    if not t < 0.0:
        raise ValueError(f"segment ratio must be negative, got {t}")
    p = -4.0 * t + 6.0 * t * t - 4.0 * t ** 3
    q = t ** 4
    assert p * p - 4.0 * q > 0.0, "contrast quadratic lost its positive discriminant"
    return p, q


def critical_contrasts_two_segment(t: float) -> ContrastRoots:
    """Both closed-form critical contrasts for ratio t < 0, strictly negative."""
    if not t < 0.0:
        raise ValueError(f"segment ratio must be negative, got {t}")
    base = 2.0 - 3.0 * t + 2.0 * t * t
    root = 2.0 * abs(t - 1.0) * math.sqrt(t * t - t + 1.0)
    r1 = (base + root) * t
    r2 = (base - root) * t
    return ContrastRoots(roots=tuple(sorted((r1, r2))), source=RootSource.CLOSED_FORM)


def critical_contrasts_three_segment(delta: float) -> ContrastRoots:
    """Critical contrasts delta^3/(delta^3 - 1) and delta/(delta - 1) for 0 < delta < 1."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    r1 = delta ** 3 / (delta ** 3 - 1.0)
    r2 = delta / (delta - 1.0)
    return ContrastRoots(roots=tuple(sorted((r1, r2))), source=RootSource.CLOSED_FORM)


Domain = Union[TwoSegmentDomain, ThreeSegmentDomain]


def build_kernel_system(dom: Domain, kappa: float) -> np.ndarray:
    """Interface-condition matrix whose null vectors are kernel fields.

    Two segments: 4x4 in the clamped-basis coefficients (A1, B1, A2, B2),
    matching value, slope, weighted curvature and weighted third derivative
    at 0.  Three segments: 8x8 in (outer-left, middle monomial, outer-right)
    coefficients with the same four conditions at each of x = -delta, delta.
    Clamped end conditions are built into the outer bases.
    """
    if kappa == 0.0:
        raise ValueError("kappa must be nonzero")
    if isinstance(dom, TwoSegmentDomain):
        a, b = dom.a, dom.b
        return np.array(
            [
                [-a ** 3, a * a, b ** 3, -b * b],
                [3.0 * a * a, -2.0 * a, -3.0 * b * b, 2.0 * b],
                [-6.0 * a, 2.0, 6.0 * kappa * b, -2.0 * kappa],
                [6.0, 0.0, -6.0 * kappa, 0.0],
            ]
        )
    d = dom.delta
    xl = 1.0 - d   # (x + 1) at x = -delta
    xr = d - 1.0   # (x - 1) at x = +delta
    return np.array(
        [
            # x = -delta: value, slope, kappa-weighted curvature, weighted 3rd
            [xl ** 3, xl * xl, -1.0, d, -d * d, d ** 3, 0.0, 0.0],
            [3.0 * xl * xl, 2.0 * xl, 0.0, -1.0, 2.0 * d, -3.0 * d * d, 0.0, 0.0],
            [6.0 * xl, 2.0, 0.0, 0.0, -2.0 * kappa, 6.0 * kappa * d, 0.0, 0.0],
            [6.0, 0.0, 0.0, 0.0, 0.0, -6.0 * kappa, 0.0, 0.0],
            # x = +delta
            [0.0, 0.0, 1.0, d, d * d, d ** 3, -xr ** 3, -xr * xr],
            [0.0, 0.0, 0.0, 1.0, 2.0 * d, 3.0 * d * d, -3.0 * xr * xr, -2.0 * xr],
            [0.0, 0.0, 0.0, 0.0, 2.0 * kappa, 6.0 * kappa * d, -6.0 * xr, -2.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 6.0 * kappa, -6.0, 0.0],
        ]
    )


def kernel_determinant(dom: Domain, kappa: float) -> float:
    """Determinant of the interface system; zero exactly at critical contrasts."""
    return float(np.linalg.det(build_kernel_system(dom, kappa)))


@dataclass(frozen=True)
class PiecewiseCubic:
    """Per-segment cubics (coefficients in powers of x - ref), clamped ends exact."""

    breakpoints: tuple            # segment edges, length nseg + 1
    refs: tuple                   # expansion point of each segment
    coeffs: tuple                 # nseg tuples (c0, c1, c2, c3)

    def _segment(self, x: float) -> int:
        for s in range(len(self.coeffs) - 1):
            if x <= self.breakpoints[s + 1]:
                return s
        return len(self.coeffs) - 1

    def derivative(self, x: float, order: int = 0) -> float:
        s = self._segment(x)
        c = self.coeffs[s]
        u = x - self.refs[s]
        if order == 0:
            return c[0] + u * (c[1] + u * (c[2] + u * c[3]))
        if order == 1:
            return c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])
        if order == 2:
            return 2.0 * c[2] + 6.0 * u * c[3]
        if order == 3:
            return 6.0 * c[3]
        return 0.0

    def value(self, x: float) -> float:
        return self.derivative(x, 0)

    def sample(self, n: int = 1001) -> np.ndarray:
        """Columns x, v, v', v'' on a uniform n-point grid over the domain."""
        xs = np.linspace(self.breakpoints[0], self.breakpoints[-1], n)
        out = np.empty((n, 4))
        for i, x in enumerate(xs):
            out[i] = (x, self.value(x), self.derivative(x, 1), self.derivative(x, 2))
        return out


def _null_vector(M: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(M)
    v = vt[-1]
    pivot = int(np.argmax(np.abs(v)))
    return v / v[pivot]


def kernel_basis(dom: Domain, kappa: float, tol: float = 1e-8) -> Optional[PiecewiseCubic]:
    """Kernel field at a critical contrast, or None when the system is regular.

    Regularity is judged by |det| against tol times the Hadamard row-norm
    bound.  The returned cubic is normalized to unit largest coefficient.
    """
    M = build_kernel_system(dom, kappa)
    scale = float(np.prod(np.linalg.norm(M, axis=1)))
    if abs(np.linalg.det(M)) > tol * scale:
        return None
    v = _null_vector(M)
    if isinstance(dom, TwoSegmentDomain):
        a, b = dom.a, dom.b
        return PiecewiseCubic(
            breakpoints=(a, 0.0, b),
            refs=(a, b),
            coeffs=((0.0, 0.0, v[1], v[0]), (0.0, 0.0, v[3], v[2])),
        )
    d = dom.delta
    return PiecewiseCubic(
        breakpoints=(-1.0, -d, d, 1.0),
        refs=(-1.0, 0.0, 1.0),
        coeffs=(
            (0.0, 0.0, v[1], v[0]),
            (v[2], v[3], v[4], v[5]),
            (0.0, 0.0, v[7], v[6]),
        ),
    )


def scan_critical_contrasts(
    dom: Domain,
    kappa_lo: float = -1e4,
    kappa_hi: float = -1e-4,
    n: int = 10_000,
) -> ContrastRoots:
    """Brute-force oracle: determinant sign changes on a geometric contrast grid.

    The kernel reduction to the interface system is exact, so bisection on the
    determinant recovers each critical contrast to machine accuracy without
    touching the closed forms.
    """
    if not kappa_lo < kappa_hi < 0.0:
        raise ValueError("need kappa_lo < kappa_hi < 0")
    grid = -np.geomspace(-kappa_lo, -kappa_hi, n)
    vals = np.array([kernel_determinant(dom, k) for k in grid])
    signs = np.sign(vals)
    roots = []
    for i in np.where(signs[:-1] * signs[1:] < 0)[0]:
        a, b = grid[i], grid[i + 1]
        fa = kernel_determinant(dom, a)
        while (b - a) > 1e-12 * max(1.0, abs(a)):
            mid = 0.5 * (a + b)
            fm = kernel_determinant(dom, mid)
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
        roots.append(0.5 * (a + b))
    return ContrastRoots(roots=tuple(sorted(roots)), source=RootSource.DETERMINANT_SCAN)
