"""Scalar special functions and contour quadrature.

Everything here is elementary but tolerance-critical: the circle quadrature
drives every contour formula in the exact solvers, and the Airy evaluator is
the backbone of the continuum kernels.  All routines are deterministic and
carry explicit error reporting instead of silent best-effort values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

# Γ_0 is a circle around the origin only; Γ_{0,1} encloses 0 and 1.
GAMMA0_RADIUS = 0.5
GAMMA01_CENTER = 0.5
GAMMA01_RADIUS = 1.0

MIN_NODES = 64
MAX_NODES = 4096

AIRY_RANGE = 30.0
# Power series is used on (_AIRY_NEG_SWITCH, _AIRY_POS_SWITCH]; outside, the
# Poincare expansions.  The negative switch sits at -9, not -7: the oscillatory
# asymptotic series bottoms out near 2e-11 at z = -7, which would miss the
# 1e-12 absolute target, while the series keeps ~13 good digits there.
_AIRY_POS_SWITCH = 7.0
_AIRY_NEG_SWITCH = -9.0

AI0 = 0.3550280538878172  # Ai(0) = 3**(-2/3)/Gamma(2/3)
DAI0 = 0.2588194037928068  # -Ai'(0) = 3**(-1/3)/Gamma(1/3)
# Same constants beyond float64, parsed by strtold for the longdouble series.
_AI0_LD = np.longdouble("0.355028053887817239260063186004")
_DAI0_LD = np.longdouble("0.258819403792806798405183560189")


class QuadratureError(RuntimeError):
    """Raised when node doubling exhausts MAX_NODES without converging."""


@dataclass(frozen=True)
class ContourSpec:
    """Positively oriented circle |w - center| = radius."""

    center: complex
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError("contour radius must be positive")

    def encloses(self, point: complex) -> bool:
        return abs(point - self.center) < self.radius

    @classmethod
    def gamma0(cls, radius: float = GAMMA0_RADIUS) -> "ContourSpec":
        spec = cls(0.0 + 0.0j, radius)
        if spec.encloses(1.0):
            raise ValueError("gamma0 must not enclose w = 1")
        return spec

    @classmethod
    def gamma01(cls) -> "ContourSpec":
        return cls(complex(GAMMA01_CENTER), GAMMA01_RADIUS)


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    prev_value: complex  # value at half the node count, for error reporting
    nodes: int
    err_estimate: float
    converged: bool


def circle_quadrature(
    f: Callable[[np.ndarray], np.ndarray],
    contour: ContourSpec,
    tol: float = 1e-12,
    min_nodes: int = MIN_NODES,
    max_nodes: int = MAX_NODES,
) -> QuadratureResult:
    """Evaluate (1/2pi i) * contour integral of f by the trapezoid rule.

    `f` must accept a complex ndarray of contour points.  Nodes double from
    `min_nodes` until successive values differ by less than
    tol * max(1, |value|); exceeding `max_nodes` raises QuadratureError
    carrying the last two levels.  Trapezoid sums converge geometrically for
    integrands analytic in a neighborhood of the circle, so the doubling
    ladder is both the error estimate and the stopping rule.
    """
    c, r = contour.center, contour.radius
    older = None
    prev = None
    n = min_nodes
    while n <= max_nodes:
        theta = 2.0 * np.pi * np.arange(n) / n
        unit = np.exp(1j * theta)
        w = c + r * unit
        vals = np.asarray(f(w), dtype=np.complex128)
        # dw/(2pi i) = r e^{i theta} dtheta / (2pi)
        value = r * np.sum(vals * unit) / n
        if prev is not None:
            err = abs(value - prev)
            if err <= tol * max(1.0, abs(value)):
                return QuadratureResult(value, prev, n, err, True)
        older, prev = prev, value
        n *= 2
    err = abs(prev - older) if older is not None else math.inf
    raise QuadratureError(
        f"contour quadrature failed to converge at {max_nodes} nodes: "
        f"last={prev!r} prev={older!r} delta={err:.3e}"
    )


def gen_binomial(m, j: int):
    """Generalized binomial coefficient m(m-1)...(m-j+1)/j!.

    Exact Fraction for integral m, float otherwise.  j < 0 gives 0.
    """
    if j < 0:
        return Fraction(0) if isinstance(m, (int, np.integer)) else 0.0
    if isinstance(m, (int, np.integer)):
        num = Fraction(1)
        for i in range(j):
            num *= Fraction(int(m) - i)
        return num / math.factorial(j)
    out = 1.0
    for i in range(j):
        out *= (m - i) / (i + 1)
    return out


def _poisson_term(t: float, m: int) -> float:
    """e^{-t} t^m / m! computed without overflow; 0 for m < 0."""
    if m < 0:
        return 0.0
    if t == 0.0:
        return 1.0 if m == 0 else 0.0
    return math.exp(m * math.log(t) - t - math.lgamma(m + 1))


def _residue_sum(nu: int, M: int, t: float) -> float:
    """e^{-t} * sum_{j=0}^{min(nu,M)} C(nu,j) (-1)^j t^{M-j}/(M-j)!.

    This is the residue at w=0 of (1-w)^nu e^{t(w-1)} / w^{M+1} for nu >= 0.
    """
    if M < 0:
        return 0.0
    total = 0.0
    for j in range(min(nu, M) + 1):
        total += math.comb(nu, j) * (-1) ** j * _poisson_term(t, M - j)
    return total


def schuetz_F(n: int, x: int, t: float, tol: float = 1e-10) -> float:
    """One-parameter family F_n(x,t) of signed transition weights.

    F_n(x,t) = ((-1)^n / 2pi i) * integral over a contour enclosing 0 and 1
    of (1-w)^{-n} w^{-(x-n+1)} e^{t(w-1)} dw.  For n <= 0 the integrand is
    rational with its only pole at 0, and the exact residue sum is used; for
    n >= 1 the circle enclosing both 0 and 1 is integrated numerically.
    """
    n = int(n)
    x = int(x)
    if t < 0:
        raise ValueError("t must be >= 0")
    if n <= 0:
        return (-1) ** n * _residue_sum(-n, x - n, t)

    def f(w: np.ndarray) -> np.ndarray:
        return (1.0 - w) ** (-n) * w ** (-(x - n + 1)) * np.exp(t * (w - 1.0))

    res = circle_quadrature(f, ContourSpec.gamma01(), tol=tol)
    return ((-1) ** n * res.value).real


def _airy_series(z: float) -> float:
    """Maclaurin series for Ai, accumulated in extended precision.

    Near the switch points the alternating sums cancel ~11 digits, so the
    running terms are kept in longdouble; float64 accumulation would cap the
    absolute accuracy near 1e-10.
    """
    zl = np.longdouble(z)
    z3 = zl * zl * zl
    f_term = np.longdouble(1.0)
    g_term = zl
    f_sum = f_term
    g_sum = g_term
    for k in range(200):
        f_term = f_term * z3 / np.longdouble((3 * k + 2) * (3 * k + 3))
        g_term = g_term * z3 / np.longdouble((3 * k + 3) * (3 * k + 4))
        f_sum += f_term
        g_sum += g_term
        if abs(f_term) < 1e-30 and abs(g_term) < 1e-30:
            break
    ai = _AI0_LD * f_sum - _DAI0_LD * g_sum
    return float(ai)


def _airy_u_terms(zeta: float, kmax: int = 60) -> list[float]:
    """Coefficients u_k / zeta^k of the Poincare expansion, stopped at the
    smallest term."""
    terms = [1.0]
    u = 1.0
    for k in range(kmax):
        u *= (3 * k + 2.5) * (3 * k + 1.5) * (3 * k + 0.5) / (54.0 * (k + 1) * (k + 0.5))
        nxt = u / zeta ** (k + 1)
        if abs(nxt) >= abs(terms[-1]):
            break
        terms.append(nxt)
    return terms


def _airy_asym_pos(z: float) -> float:
    zeta = 2.0 / 3.0 * z ** 1.5
    terms = _airy_u_terms(zeta)
    s = 0.0
    for k, tk in enumerate(terms):
        s += (-1) ** k * tk
    return math.exp(-zeta) / (2.0 * math.sqrt(math.pi) * z ** 0.25) * s


def _airy_asym_neg(z: float) -> float:
    x = -z
    zeta = 2.0 / 3.0 * x ** 1.5
    terms = _airy_u_terms(zeta)
    p = 0.0
    q = 0.0
    for k, tk in enumerate(terms):
        if k % 2 == 0:
            p += (-1) ** (k // 2) * tk
        else:
            q += (-1) ** ((k - 1) // 2) * tk
    ang = zeta + math.pi / 4.0
    return (math.sin(ang) * p - math.cos(ang) * q) / (math.sqrt(math.pi) * x ** 0.25)


def airy_ai(z: float) -> float:
    """Airy function Ai(z) for |z| <= 30, absolute error below 1e-12."""
    z = float(z)
    if not math.isfinite(z) or abs(z) > AIRY_RANGE:
        raise ValueError(f"airy_ai supports |z| <= {AIRY_RANGE}, got {z}")
    return _airy_unchecked(z)


def _airy_unchecked(z: float) -> float:
    if z > _AIRY_POS_SWITCH:
        return _airy_asym_pos(z)
    if z <= _AIRY_NEG_SWITCH:
        return _airy_asym_neg(z)
    return _airy_series(z)


def airy_ai_kernel(z) -> np.ndarray:
    """Vectorized Ai for kernel builders: arguments beyond +30 return 0.0
    (|Ai| < 3e-48 there), arguments below -30 still raise."""
    arr = np.asarray(z, dtype=float)
    out = np.zeros(arr.shape, dtype=float)
    flat = arr.ravel()
    res = out.ravel()
    if flat.size and float(flat.min()) < -AIRY_RANGE:
        raise ValueError("airy_ai_kernel: argument below -30")
    for i, v in enumerate(flat):
        if v <= AIRY_RANGE:
            res[i] = _airy_unchecked(float(v))
    return out if arr.shape else float(res[0])
