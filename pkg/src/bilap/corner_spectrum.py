"""Singular exponents at a sign-changing boundary corner.

A half-plane corner of opening ``alpha`` carries a coefficient contrast
``kappa < 0`` across the internal interface.  Exponents of the form
``lambda = 1 + i*eta`` exist exactly at the positive zeros of a real
transcendental dispersion function; this module evaluates that function,
classifies ``(alpha, kappa)`` pairs against the ill-posedness region where
such a zero exists, locates the zero by bracketing and bisection, and
assembles the 4x4 angular interface system whose determinant shares the
same zero set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import NotSingular, NumericalFailure

__all__ = [
    "CornerProblem",
    "Membership",
    "RegionReport",
    "SingularExponentResult",
    "AngularProfile",
    "RegionCell",
    "dispersion",
    "scaled_dispersion",
    "taylor_coefficient",
    "critical_interval",
    "classify_region",
    "find_singular_exponent",
    "even_derivative_at_zero",
    "transmission_matrix",
    "transmission_determinant",
    "normalized_determinant",
    "angular_profile",
    "region_map",
    "region_map_csv",
    "growth_factor",
    "singular_sequence_lower_bound",
]

REGION_MAP_CSV_HEADER = "alpha,kappa,g,ell_minus,ell_plus,membership,eta0,residual"


@dataclass(frozen=True)
class CornerProblem:
    """Corner of opening ``alpha`` in (0, pi) with negative contrast ``kappa``."""

    alpha: float
    kappa: float

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi:
            raise ValueError(f"alpha must lie in (0, pi), got {self.alpha}")
        if not self.kappa < 0.0:
            raise ValueError(f"kappa must be negative, got {self.kappa}")


class Membership(Enum):
    INSIDE = "Inside"
    OUTSIDE = "Outside"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class RegionReport:
    g_value: float
    ell_minus: float
    ell_plus: float
    membership: Membership


@dataclass(frozen=True)
class SingularExponentResult:
    """A located dispersion zero ``eta0 > 0``, housing the pair ``1 +- i*eta0``."""

    eta0: float
    residual: float
    bracket: tuple
    sign_changes_found: int


def dispersion(p: CornerProblem, eta):
    """Dispersion function of the corner problem, even in ``eta``.

    Grouped through cosh(x) - 1 = 2 sinh^2(x/2) so the value at eta = 0 is
    exactly zero and small-eta cancellation is avoided.  Total function:
    overflows to +-inf for very large eta instead of raising.
    """
    a, k = p.alpha, p.kappa
    scalar = np.isscalar(eta)
    e = np.asarray(eta, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = (
            2.0 * k * np.sinh(math.pi * e) ** 2
            + 2.0 * k * (k - 1.0) * np.sinh(a * e) ** 2
            - 2.0 * (k - 1.0) * np.sinh((math.pi - a) * e) ** 2
            + e * e * (1.0 - k) ** 2 * (math.cos(2.0 * a) - 1.0)
        )
    return float(out) if scalar else out


def _scaled_terms(p: CornerProblem, eta):
    """Terms of dispersion/cosh(2*pi*eta); bounded for every eta >= 0."""
    a, k = p.alpha, p.kappa
    e = abs(eta)
    b = 2.0 * math.pi * e
    exp = np.exp if isinstance(e, np.ndarray) else math.exp
    den = 1.0 + exp(-2.0 * b)
    sech = 2.0 * exp(-b) / den

    def ratio(arg):  # cosh(arg)/cosh(b) for 0 <= arg <= b
        return exp(arg - b) * (1.0 + exp(-2.0 * arg)) / den

    poly = (-1.0 + k - k * k) + e * e * (1.0 - k) ** 2 * (math.cos(2.0 * a) - 1.0)
    return (poly * sech, k, k * (k - 1.0) * ratio(2.0 * a * e),
            -(k - 1.0) * ratio(2.0 * (math.pi - a) * e))


def scaled_dispersion(p: CornerProblem, eta):
    """dispersion(p, eta) / cosh(2*pi*eta): same zero set on (0, inf), no overflow."""
    t0, t1, t2, t3 = _scaled_terms(p, eta)
    return t0 + t1 + t2 + t3


def _scaled_dispersion_vec(p: CornerProblem, etas: np.ndarray) -> np.ndarray:
    a, k = p.alpha, p.kappa
    e = np.abs(etas)
    b = 2.0 * math.pi * e
    den = 1.0 + np.exp(-2.0 * b)
    sech = 2.0 * np.exp(-b) / den
    r1 = np.exp(2.0 * a * e - b) * (1.0 + np.exp(-4.0 * a * e)) / den
    r2 = np.exp(-2.0 * a * e) * (1.0 + np.exp(-4.0 * (math.pi - a) * e)) / den
    poly = (-1.0 + k - k * k) + e * e * (1.0 - k) ** 2 * (math.cos(2.0 * a) - 1.0)
    return poly * sech + k + k * (k - 1.0) * r1 - (k - 1.0) * r2


def _scaled_scale(p: CornerProblem, eta: float) -> float:
    t0, t1, t2, t3 = _scaled_terms(p, eta)
    return abs(t0) + abs(t1) + abs(t2) + abs(t3)


def taylor_coefficient(p: CornerProblem) -> float:
    """Coefficient of eta^2 in the small-eta expansion of the dispersion function."""
    a, k = p.alpha, p.kappa
    s = math.sin(a)
    a2 = a * a - s * s
    a1 = a2 - a * math.pi
    a0 = a2 + (math.pi * math.pi - 2.0 * a * math.pi)
    return 2.0 * a2 * k * k - 4.0 * a1 * k + 2.0 * a0


def critical_interval(alpha: float) -> tuple:
    """Roots (ell_minus, ell_plus) of the eta^2 coefficient, both negative.

    The coefficient is positive exactly for kappa below ell_minus or between
    ell_plus and zero.
    """
    if not 0.0 < alpha < math.pi:
        raise ValueError(f"alpha must lie in (0, pi), got {alpha}")
    sa = math.sin(alpha)
    sb = math.sin(math.pi - alpha)
    ell_minus = -(math.pi - alpha + sb) / (alpha - sa)
    ell_plus = -(math.pi - alpha - sb) / (alpha + sa)
    return ell_minus, ell_plus


def classify_region(p: CornerProblem, eps_boundary: float = 1e-9) -> RegionReport:
    """Place (alpha, kappa) relative to the ill-posedness region by the sign of g."""
    if not eps_boundary > 0.0:
        raise ValueError("eps_boundary must be positive")
    g = taylor_coefficient(p)
    lm, lp = critical_interval(p.alpha)
    if g > eps_boundary:
        member = Membership.INSIDE
    elif g < -eps_boundary:
        member = Membership.OUTSIDE
    else:
        member = Membership.BOUNDARY
    return RegionReport(g_value=g, ell_minus=lm, ell_plus=lp, membership=member)


def _sign_floor(p: CornerProblem) -> float:
    # below this magnitude the scaled dispersion is roundoff noise near eta = 0
    return 4e-15 * (1.0 + p.kappa * p.kappa)


def find_singular_exponent(
    p: CornerProblem,
    eta_min: float = 1e-4,
    ratio: float = 1.1,
    eta_max: float = 10.0,
    max_doublings: int = 60,
) -> Optional[SingularExponentResult]:
    """Locate the positive dispersion zero by geometric scan plus bisection.

    The scan runs over a geometric grid eta_min * ratio**j up to an adaptive
    eta_max, doubled until the (cosh-dominated) tail is confirmed negative.
    Returns None when the scan shows no sign change; the scan works on the
    cosh-scaled dispersion, whose zeros on (0, inf) are the same.
    """
    lo = eta_max
    for _ in range(max_doublings):
        if _scaled_dispersion_vec(p, np.array([lo]))[0] < 0.0:
            break
        lo *= 2.0
    else:
        raise NumericalFailure(
            f"tail sign not confirmed after {max_doublings} doublings of eta_max"
        )
    n = int(math.ceil(math.log(lo / eta_min) / math.log(ratio))) + 1
    etas = eta_min * ratio ** np.arange(n + 1)
    etas = np.append(etas[etas < lo], lo)
    vals = _scaled_dispersion_vec(p, etas)

    keep = np.abs(vals) > _sign_floor(p)
    ke, kv = etas[keep], vals[keep]
    if len(ke) < 2:
        return None
    signs = np.sign(kv)
    flips = np.where(signs[:-1] * signs[1:] < 0)[0]
    if len(flips) == 0:
        return None

    a, b = ke[flips[0]], ke[flips[0] + 1]
    fa = scaled_dispersion(p, a)
    while (b - a) > 1e-14 * (1.0 + 0.5 * (a + b)):
        mid = 0.5 * (a + b)
        fm = scaled_dispersion(p, mid)
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
    eta0 = 0.5 * (a + b)
    residual = abs(scaled_dispersion(p, eta0)) / _scaled_scale(p, eta0)
    return SingularExponentResult(
        eta0=eta0,
        residual=residual,
        bracket=(ke[flips[0]], ke[flips[0] + 1]),
        sign_changes_found=int(len(flips)),
    )


def even_derivative_at_zero(p: CornerProblem, k: int) -> float:
    """Derivative of order 2k of the dispersion function at eta = 0 (closed form)."""
    if k < 0:
        raise ValueError("k must be a non-negative integer")
    if k == 0:
        return 0.0
    if k == 1:
        return 2.0 * taylor_coefficient(p)
    a, kp = p.alpha, p.kappa
    return (
        kp * (2.0 * math.pi) ** (2 * k)
        + kp * (kp - 1.0) * (2.0 * a) ** (2 * k)
        - (kp - 1.0) * (2.0 * (math.pi - a)) ** (2 * k)
    )


# ---------------------------------------------------------------------------
# angular interface system


def _basis(lam: complex, theta: float):
    """Derivative stack (value, d1, d2, d3, d4) of the two clamped basis
    functions at angle ``theta``.

    Basis one is cos(lam*t) - cos((lam-2)*t); basis two is
    (lam-2)*sin(lam*t) - lam*sin((lam-2)*t).  Both vanish together with their
    first derivative at t = 0.
    """
    l = lam
    m = lam - 2.0
    c1, c2 = np.cos(l * theta), np.cos(m * theta)
    s1, s2 = np.sin(l * theta), np.sin(m * theta)
    b1 = (c1 - c2, -l * s1 + m * s2, -l * l * c1 + m * m * c2,
          l ** 3 * s1 - m ** 3 * s2, l ** 4 * c1 - m ** 4 * c2)
    b2 = (m * s1 - l * s2, l * m * (c1 - c2),
          -l * l * m * s1 + l * m * m * s2,
          -l ** 3 * m * c1 + l * m ** 3 * c2,
          l ** 4 * m * s1 - l * m ** 4 * s2)
    return b1, b2


def _check_lambda(lam: complex) -> complex:
    lam = complex(lam)
    for excluded in (0.0, 1.0, 2.0):
        if lam == excluded:
            raise ValueError(f"lambda = {excluded} is excluded from the angular system")
    return lam


def transmission_matrix(p: CornerProblem, lam: complex) -> np.ndarray:
    """4x4 complex interface system at theta = alpha, rows scaled to unit max entry.

    Rows: continuity of the angular profile and its derivative, continuity of
    the weighted second Laplacian trace d2 + lam^2, and of its tangential
    derivative d3 + lam^2 d1.  Columns follow the four basis coefficients;
    the clamped conditions at theta = 0 and pi hold by construction.
    """
    lam = _check_lambda(lam)
    k = p.kappa
    B1, B2 = _basis(lam, p.alpha)
    C1, C2 = _basis(lam, p.alpha - math.pi)

    def lap(B):
        return B[2] + lam * lam * B[0]

    def dlap(B):
        return B[3] + lam * lam * B[1]

    M = np.array(
        [
            [B1[0], B2[0], -C1[0], -C2[0]],
            [B1[1], B2[1], -C1[1], -C2[1]],
            [lap(B1), lap(B2), -k * lap(C1), -k * lap(C2)],
            [dlap(B1), dlap(B2), -k * dlap(C1), -k * dlap(C2)],
        ],
        dtype=complex,
    )
    scale = np.abs(M).max(axis=1)
    scale[scale == 0.0] = 1.0
    return M / scale[:, None]


def transmission_determinant(p: CornerProblem, lam: complex) -> complex:
    """Determinant of the row-scaled interface system (pivoted elimination)."""
    return complex(np.linalg.det(transmission_matrix(p, lam)))


def normalized_determinant(p: CornerProblem, lam: complex) -> float:
    """|det| divided by the product of row norms; O(1) scale for conditioning tests."""
    M = transmission_matrix(p, lam)
    d = np.linalg.det(M)
    return float(abs(d) / np.prod(np.linalg.norm(M, axis=1)))


@dataclass(frozen=True)
class AngularProfile:
    """Normalized angular null profile at a singular exponent.

    ``coeffs`` are the four basis coefficients with the largest-magnitude one
    scaled to exactly 1.  The profile is the inner basis combination for
    theta <= alpha and the outer one beyond.
    """

    lam: complex
    alpha: float
    kappa: float
    coeffs: np.ndarray

    def derivatives(self, theta: float):
        """(value, d1, d2, d3, d4) of the profile at angle theta in [0, pi]."""
        if theta <= self.alpha:
            B1, B2 = _basis(self.lam, theta)
            a, b = self.coeffs[0], self.coeffs[1]
        else:
            B1, B2 = _basis(self.lam, theta - math.pi)
            a, b = self.coeffs[2], self.coeffs[3]
        return tuple(a * B1[i] + b * B2[i] for i in range(5))

    def value(self, theta: float) -> complex:
        return self.derivatives(theta)[0]

    def interface_residual(self) -> float:
        """Max-norm residual of the four row-scaled interface conditions."""
        M = transmission_matrix(CornerProblem(self.alpha, self.kappa), self.lam)
        return float(np.abs(M @ self.coeffs).max())

    def biharmonic_residual(self, nodes_per_segment: int = 64) -> float:
        """L2 norm of d2(psi) + (lam-2)^2 psi with psi = d2(phi) + lam^2 phi.

        Composite Gauss-Legendre on (0, alpha) and (alpha, pi); the closed
        forms satisfy the angular factorization exactly, so this measures
        assembly error only.
        """
        lam = self.lam
        x, w = np.polynomial.legendre.leggauss(nodes_per_segment)

        def seg(lo, hi):
            t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            total = 0.0
            for ti, wi in zip(t, w):
                d = self.derivatives(ti)
                res = d[4] + lam * lam * d[2] + (lam - 2.0) ** 2 * (d[2] + lam * lam * d[0])
                total += 0.5 * (hi - lo) * wi * abs(res) ** 2
            return total

        return math.sqrt(seg(0.0, self.alpha) + seg(self.alpha, math.pi))


def angular_profile(p: CornerProblem, lam: complex, singular_tol: float = 1e-6) -> AngularProfile:
    """Null coefficients of the interface system at a detected exponent.

    Inverse iteration on the 4x4 normal system with a fixed deterministic
    seed; raises NotSingular when the normalized determinant is not small.
    """
    lam = _check_lambda(lam)
    nd = normalized_determinant(p, lam)
    if nd > singular_tol:
        raise NotSingular(
            f"normalized determinant {nd:.3e} exceeds tolerance {singular_tol:.1e} at {lam}"
        )
    M = transmission_matrix(p, lam)
    H = M.conj().T @ M
    A = H + (np.trace(H).real * 1e-16) * np.eye(4)
    x = np.full(4, 0.5, dtype=complex)
    for _ in range(5):
        x = np.linalg.solve(A, x)
        x = x / np.linalg.norm(x)
    pivot = int(np.argmax(np.abs(x)))
    coeffs = x / x[pivot]
    return AngularProfile(lam=lam, alpha=p.alpha, kappa=p.kappa, coeffs=coeffs)


# ---------------------------------------------------------------------------
# region map


@dataclass(frozen=True)
class RegionCell:
    alpha: float
    kappa: float
    report: RegionReport
    result: Optional[SingularExponentResult]
    failed: bool = False


def region_map(
    alpha_range: tuple,
    kappa_range: tuple,
    n_alpha: int,
    n_kappa: int,
    eps_boundary: float = 1e-9,
) -> list:
    """Exponent search over a rectangular (alpha, kappa) grid.

    Cells are evaluated independently in a fixed order; a NumericalFailure in
    one cell flags that cell without aborting the sweep.
    """
    a_lo, a_hi = alpha_range
    k_lo, k_hi = kappa_range
    if not (0.0 < a_lo < a_hi < math.pi):
        raise ValueError("alpha_range must satisfy 0 < lo < hi < pi")
    if not (k_lo < k_hi < 0.0):
        raise ValueError("kappa_range must satisfy lo < hi < 0")
    if n_alpha < 2 or n_kappa < 2:
        raise ValueError("grid sizes must be at least 2")
    alphas = np.linspace(a_lo, a_hi, n_alpha)
    kappas = np.linspace(k_lo, k_hi, n_kappa)
    cells = []
    for a in alphas:
        for k in kappas:
            prob = CornerProblem(float(a), float(k))
            report = classify_region(prob, eps_boundary)
            try:
                result = find_singular_exponent(prob)
                failed = False
            except NumericalFailure:
                result, failed = None, True
            cells.append(RegionCell(float(a), float(k), report, result, failed))
    return cells


def _fmt(x: float) -> str:
    return format(x, ".17g")


def region_map_csv(cells: list) -> str:
    """CSV emission: one row per cell, floats at 17 significant digits.

    The eta0/residual fields are empty when no exponent exists and 'nan'
    for cells whose scan failed.
    """
    lines = [REGION_MAP_CSV_HEADER]
    for c in cells:
        r = c.report
        if c.failed:
            eta0, res = "nan", "nan"
        elif c.result is None:
            eta0, res = "", ""
        else:
            eta0, res = _fmt(c.result.eta0), _fmt(c.result.residual)
        lines.append(
            f"{_fmt(c.alpha)},{_fmt(c.kappa)},{_fmt(r.g_value)},{_fmt(r.ell_minus)},"
            f"{_fmt(r.ell_plus)},{r.membership.value},{eta0},{res}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# norm-growth lower bound


def growth_factor(m: int, delta: float) -> float:
    """The bare factor (m/2) * delta**(2/m) multiplying the profile norm."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    return 0.5 * m * delta ** (2.0 / m)


def singular_sequence_lower_bound(
    profile: AngularProfile, eta0: float, m: int, delta: float,
    nodes_per_segment: int = 64,
) -> float:
    """Lower bound on the energy of the m-th truncated singular field.

    Computes ||(1 + i*eta0 + 1/m)^2 phi + phi''||^2 over (0, pi) by composite
    Gauss-Legendre quadrature and multiplies by (m/2) * delta**(2/m).  The
    sequence grows without bound in m whenever the profile exists.
    """
    factor = growth_factor(m, delta)
    lam_m = 1.0 + 1j * eta0 + 1.0 / m
    x, w = np.polynomial.legendre.leggauss(nodes_per_segment)

    def seg(lo, hi):
        t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total = 0.0
        for ti, wi in zip(t, w):
            d = profile.derivatives(ti)
            total += 0.5 * (hi - lo) * wi * abs(d[2] + lam_m * lam_m * d[0]) ** 2
        return total

    norm2 = seg(0.0, profile.alpha) + seg(profile.alpha, math.pi)
    return norm2 * factor
