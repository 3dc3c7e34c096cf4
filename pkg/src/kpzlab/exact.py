"""Exact finite-N TASEP distributions.

Transition probabilities as determinants, their rewriting as a sum over
interlacing triangular arrays, the biorthogonal kernel representation with
its backwards-heat construction, the first-passage (random-walk) form of the
one-index kernel, and the Fredholm determinants for joint one-sided
probabilities in both extended-kernel and path-product form.

Conventions used throughout: particles are labeled 1, 2, ... from right to
left with strictly decreasing positions, jumps go right, and the geometric
left-walk weight is w(x, y) = 2^(y-x) for y < x.  Kernels are stored in the
powers-of-2 conjugated normalization, which is the summable one on windows;
the unconjugated objects differ by a factor 2^(x2-x1) per entry and are used
only where a determinant needs them (the interlacing-array weights and the
block two-level cross check).

Exact rational arithmetic (dyadic Fractions) is used for the backwards-heat
polynomials and the walk matrices; everything crossing into kernel numerics
is converted to float at the boundary.
"""

from __future__ import annotations

import itertools
import math
from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .dpp import LEnsembleSpec, conditional_l_to_k
from .fredholm import det_window
from .simulate import InitialData, make_initial
from .special import (
    ContourSpec,
    circle_quadrature,
    gen_binomial,
    schuetz_F,
)

N_MAX_DET = 8  # largest determinant size for transition probabilities
N_MAX_ARRAY_SUM = 4  # interlacing-array sum grows too fast beyond this
N_MAX_JOINT = 4  # joint one-sided events per determinant
WINDOW_BELOW = 48  # kernel columns decay like 2^z to the left of the data
WINDOW_ABOVE = 16
CONV_TAIL = 60  # Poisson-type tails are dead after ~3t + CONV_TAIL terms
CONTOUR_RADIUS = 0.35  # two of these fit inside |v + w| < 1
_LN2 = math.log(2.0)


class TruncationError(RuntimeError):
    """Raised when window or cutoff enlargement fails to stabilize a value."""


class WindowError(ValueError):
    """Raised when a requested window cannot reach the target accuracy."""


def _entry_int(init: InitialData, label: int) -> int:
    e = init.entry(label)
    if math.isinf(e):
        raise ValueError(f"label {label} has no finite position")
    return int(e)


def _leading_inf(init: InitialData) -> int:
    if init.kind != "explicit":
        return 0
    return sum(1 for e in init.entries if math.isinf(e))


def _strip_leading_inf(init: InitialData) -> tuple[InitialData, int]:
    """Drop the infinite prefix, relabeling so label 1 is the first finite one."""
    shift = _leading_inf(init)
    if shift == 0:
        return init, 0
    return make_initial("explicit", entries=init.entries[shift:]), shift


def _pow2(e: int) -> Fraction:
    return Fraction(2) ** e


# ---------------------------------------------------------------------------
# Geometric walk matrices and the polynomial extension of their powers.


def q_weight(steps: int, x: int, y: int) -> Fraction:
    """Entry (x, y) of the geometric left-walk matrix to an integer power.

    One step moves strictly left with weight 2^(y-x).  Negative powers use
    the two-term left inverse, so q_weight(-1, x, y) is 2 at y = x+1 and -1
    at y = x.
    """
    if steps == 0:
        return Fraction(1 if x == y else 0)
    if steps > 0:
        if x - y < steps:
            return Fraction(0)
        return _pow2(y - x) * math.comb(x - y - 1, steps - 1)
    k = -steps
    j = y - x
    if j < 0 or j > k:
        return Fraction(0)
    return Fraction((-1) ** (k - j) * 2**j * math.comb(k, j))


def qbar(n: int, y1: int, y2: int) -> Fraction:
    """Polynomial extension of the n-step walk weight.

    2^(y1-y2) times the n-step weight is polynomial in y2 on y1 - y2 >= n;
    this evaluates that degree n-1 extension at any pair, exactly.
    """
    if n < 1:
        raise ValueError("the extension needs n >= 1")
    return _pow2(y2 - y1) * gen_binomial(y1 - y2 - 1, n - 1)


def stopping_curve(init: InitialData, n: int) -> tuple[float, ...]:
    """First-passage thresholds: step m of the walk is stopped above entry m+1."""
    return tuple(init.entry(m + 1) for m in range(n))


def hitting_profile(init: InitialData, n: int, y_lo: int, y_hi: int):
    """First-passage distributions of the geometric left walk over the data.

    For every start y in [y_lo, y_hi] the walk B_0 = y, B_1, ... steps
    strictly left; it is stopped the first time B_m > entry(m+1), m < n.
    Returns (ys, bs, hit) where hit[m, iy, ib] is the probability that the
    walk started at ys[iy] is stopped at step m in position bs[ib].

    The position window is exact, not a truncation: a walk at or below
    entry(n) can never rise above the remaining thresholds, so that mass
    is dropped with zero error.
    """
    if n < 1:
        raise ValueError("depth must be at least 1")
    b_lo = _entry_int(init, n) + 1
    b_hi = y_hi
    ys = np.arange(y_lo, y_hi + 1)
    if b_lo > b_hi:
        return ys, np.arange(0), np.zeros((n, len(ys), 0))
    bs = np.arange(b_lo, b_hi + 1)
    nb = len(bs)
    curve = stopping_curve(init, n)

    step = np.zeros((nb, nb))
    for i in range(nb):
        for j in range(i):
            step[i, j] = 2.0 ** (j - i)

    alive = np.zeros((len(ys), nb))
    for iy, y in enumerate(ys):
        if y >= b_lo:
            alive[iy, y - b_lo] = 1.0
    hit = np.zeros((n, len(ys), nb))
    for m in range(n):
        if m > 0:
            alive = alive @ step
        above = bs > curve[m]
        hit[m][:, above] = alive[:, above]
        alive[:, above] = 0.0
    return ys, bs, hit


@dataclass(frozen=True)
class WalkKernelBundle:
    """Walk ingredients tied to one initial configuration and depth n."""

    initial_data: InitialData
    n: int
    curve: tuple[float, ...]

    def q_power(self, steps: int, x: int, y: int) -> Fraction:
        return q_weight(steps, x, y)

    def qbar(self, y1: int, y2: int) -> Fraction:
        return qbar(self.n, y1, y2)

    def hitting(self, y_lo: int, y_hi: int):
        return hitting_profile(self.initial_data, self.n, y_lo, y_hi)


def walk_bundle(init: InitialData, n: int) -> WalkKernelBundle:
    if n < 1:
        raise ValueError("depth must be at least 1")
    return WalkKernelBundle(init, n, stopping_curve(init, n))


# ---------------------------------------------------------------------------
# Residue evaluations of the kernel building blocks.


def _poisson_term(q: int, t: float) -> float:
    """t^q / q!, overflow safe, zero for q < 0."""
    if q < 0:
        return 0.0
    if t == 0.0:
        return 1.0 if q == 0 else 0.0
    if q < 150:
        return t**q / math.factorial(q)
    return math.exp(q * math.log(t) - math.lgamma(q + 1))


def _alternating_poisson(coeffs, p: int, t: float) -> float:
    """sum_j coeffs[j] (-1)^j t^(p-j)/(p-j)!, skipping negative powers."""
    tot = 0.0
    for j, c in enumerate(coeffs):
        if c:
            tot += c * (-1.0) ** j * _poisson_term(p - j, t)
    return tot


def psi_residue(
    init: InitialData, t: float, n: int, k: int, x: int, conjugated: bool = True
) -> float:
    """Row function of the biorthogonal kernel, as an exact residue sum.

    With s = x - entry(n-k) the value is 2^(-s) e^(-t) sum_{j<=k} C(k,j)
    (-1)^j t^(s+k-j)/(s+k-j)!; dropping the 2^(-s) factor gives the
    unconjugated variant used by determinant weights.  Negative k (needed
    by the off-diagonal kernel blocks) keeps the same contour, which then
    excludes the pole at w = 1; the alternating sum becomes a positive
    series against the binomial tail of (1-w)^k.
    """
    if k >= n:
        raise ValueError("need k < n")
    if k < 0:
        m = -k
        s = x - _entry_int(init, n - k)
        r = s - m
        if r < 0:
            return 0.0
        val = math.exp(-t) * sum(
            math.comb(m - 1 + j, j) * _poisson_term(r - j, t) for j in range(r + 1)
        )
        if conjugated:
            val *= 2.0 ** (-s)
        return val
    s = x - _entry_int(init, n - k)
    if s + k < 0:
        return 0.0
    val = math.exp(-t) * _alternating_poisson(
        [math.comb(k, j) for j in range(k + 1)], s + k, t
    )
    if conjugated:
        val *= 2.0 ** (-s)
    return val


def transfer_inverse(t: float, n: int, z1: int, z2: int) -> float:
    """Adjoint of the backward half-heat flow composed with n inverse walk
    steps.  Vanishes for z1 - z2 > n and decays like 2^(z1-z2) leftwards."""
    if n < 0:
        raise ValueError("need n >= 0")
    p = n + z2 - z1
    if p < 0:
        return 0.0
    tot = _alternating_poisson([math.comb(n, j) for j in range(n + 1)], p, t)
    return 2.0 ** (z1 - z2) * math.exp(-t / 2.0) * tot


def transfer_extended(t: float, n: int, z1: int, z2: int) -> float:
    """Polynomial extension of n walk steps composed with the half-heat flow."""
    if n < 1:
        raise ValueError("need n >= 1")
    a = z2 - z1 + n - 1
    coeffs = [float(gen_binomial(a, j)) for j in range(n)]
    tot = _alternating_poisson(coeffs, n - 1, t)
    return 2.0 ** (z2 - z1) * math.exp(-t / 2.0) * tot


def _transfer_inverse_matrix(t: float, n: int, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Vectorized transfer_inverse on a (start, target) grid."""
    if len(ys) == 0 or len(xs) == 0:
        return np.zeros((len(ys), len(xs)))
    if t == 0.0:
        return np.array(
            [[transfer_inverse(t, n, int(y), int(x)) for x in xs] for y in ys]
        )
    p = n + xs[None, :].astype(float) - ys[:, None].astype(float)
    # fold the 2^(z1-z2) prefactor into each exponent; on the support
    # p >= j >= 0 it is bounded by 2^n, so nothing overflows
    base = (ys[:, None] - xs[None, :]) * _LN2 - t / 2.0
    log_t = math.log(t)
    tot = np.zeros_like(p)
    for j in range(n + 1):
        q = p - j
        ok = q >= 0
        qs = np.where(ok, q, 0.0)
        term = np.exp(qs * log_t - gammaln(qs + 1.0) + base)
        tot += np.where(ok, math.comb(n, j) * (-1.0) ** j * term, 0.0)
    return tot


def _transfer_extended_matrix(t: float, n: int, bs: np.ndarray, z2s: np.ndarray) -> np.ndarray:
    """Vectorized transfer_extended on a (start, target) grid."""
    a = z2s[None, :].astype(float) - bs[:, None].astype(float) + n - 1
    tot = np.zeros(a.shape)
    for j in range(n):
        coeff = np.ones(a.shape)
        for i in range(j):
            coeff *= (a - i) / (i + 1.0)
        tot += coeff * (-1.0) ** j * _poisson_term(n - 1 - j, t)
    return 2.0 ** (z2s[None, :] - bs[:, None]) * math.exp(-t / 2.0) * tot


def epi_transfer_matrix(
    init: InitialData, t: float, n: int, y_lo: int, y_hi: int, z2s
) -> np.ndarray:
    """First-passage average of the extended transfer kernel.

    Entry (iy, iz) is the expectation, over the left walk started at
    y_lo + iy and stopped on first passage above the data curve within n
    steps, of transfer_extended(t, n - m, stop position, z2s[iz]).  Starts
    at or below entry(n) give exactly zero.
    """
    z2s = np.asarray(z2s)
    ys, bs, hit = hitting_profile(init, n, y_lo, y_hi)
    out = np.zeros((len(ys), len(z2s)))
    if len(bs) == 0 or len(z2s) == 0:
        return out
    for m in range(n):
        block = hit[m]
        if not block.any():
            continue
        out += block @ _transfer_extended_matrix(t, n - m, bs, z2s)
    return out


def transfer_epi(init: InitialData, t: float, n: int, z1: int, z2: int) -> float:
    return float(epi_transfer_matrix(init, t, n, z1, z1, [z2])[0, 0])


TransferValues = namedtuple("TransferValues", ["inverse", "extended", "epi"])


def transfer_kernels(
    t: float, n: int, z1: int, z2: int, init: InitialData | None = None
) -> TransferValues:
    """All three transfer kernels at one entry; the first-passage variant
    needs initial data and is None without it."""
    inv = transfer_inverse(t, n, z1, z2)
    ext = transfer_extended(t, n, z1, z2) if n >= 1 else 0.0
    epi = None
    if init is not None:
        epi = transfer_epi(init, t, n, z1, z2)
    return TransferValues(inv, ext, epi)


# ---------------------------------------------------------------------------
# First-passage average of the extended walk power (no heat flow).


def g0n(n: int, z1: int, z2: int, init: InitialData) -> float:
    """Extended walk power averaged over first passage across the data.

    Above the first entry this is the plain extension; from z1 at or below
    it, the walk runs until it first exceeds the curve and the extension
    with the remaining number of steps is evaluated at the stop position.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if z1 > init.entry(1):
        return float(qbar(n, z1, z2))
    ys, bs, hit = hitting_profile(init, n, z1, z1)
    tot = 0.0
    for m in range(n):
        for ib, b in enumerate(bs):
            w = hit[m, 0, ib]
            if w:
                tot += w * float(qbar(n - m, int(b), z2))
    return tot


# ---------------------------------------------------------------------------
# Backwards-heat polynomials (exact dyadic rationals).


def _poly_eval_frac(coeffs, z) -> Fraction:
    acc = Fraction(0)
    zf = Fraction(z)
    for c in reversed(coeffs):
        acc = acc * zf + c
    return acc


def _poly_shift_diff(coeffs) -> tuple[Fraction, ...]:
    """Coefficients of q(z-1) - q(z)."""
    out = [Fraction(0)] * len(coeffs)
    for j, c in enumerate(coeffs):
        for r in range(j + 1):
            out[r] += c * math.comb(j, r) * (-1) ** (j - r)
        out[j] -= c
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return tuple(out)


def _discrete_antiderivative(p, z0: int) -> tuple[Fraction, ...]:
    """The unique polynomial A with A(z) - A(z-1) = p(z) and A(z0) = 0."""
    d = len(p) - 1
    resid = [Fraction(c) for c in p]
    a = [Fraction(0)] * (d + 2)
    for i in range(d + 1, 0, -1):
        a[i] = resid[i - 1] / i
        # subtract a_i * (z^i - (z-1)^i), a polynomial of degree i-1
        for r in range(i):
            delta_r = -Fraction(math.comb(i, r) * (-1) ** (i - r))
            resid[r] -= a[i] * delta_r
    if any(resid):
        raise AssertionError("antiderivative elimination left a nonzero residual")
    a[0] = -_poly_eval_frac(a, z0)
    return tuple(a)


def backward_heat_polys(init: InitialData, n: int, k: int) -> tuple[tuple[Fraction, ...], ...]:
    """Levels 0..k of the scaled backwards-heat solution, as coefficients.

    Level k is the constant 2^(-entry(n-k)); going down one level takes the
    discrete antiderivative of minus the current level, anchored to vanish
    at the matching data entry.  The returned level ell has exact degree
    k - ell in z, and the unscaled solution is 2^z times it.
    """
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    levels = [None] * (k + 1)
    levels[k] = (_pow2(-_entry_int(init, n - k)),)
    for ell in range(k, 0, -1):
        negated = tuple(-c for c in levels[ell])
        levels[ell - 1] = _discrete_antiderivative(negated, _entry_int(init, n - ell + 1))
    return tuple(levels)


def walk_adjoint_inverse(coeffs) -> tuple[Fraction, ...]:
    """Action of the adjoint inverse walk step on 2^z q(z), returned as the
    new q: 2 f(z-1) - f(z) applied to f = 2^z q gives 2^z (q(z-1) - q(z))."""
    return _poly_shift_diff(coeffs)


# ---------------------------------------------------------------------------
# The biorthogonal system.


@dataclass(frozen=True)
class BiorthoSystem:
    """Conjugated biorthogonal pair and its backwards-heat polynomials.

    psi[n] and phi[n] are (n, width) arrays over the window, rows indexed
    by k = 0..n-1.  h[(n, k)] holds the scaled heat levels as exact
    coefficient tuples; the unscaled solution at (ell, z) is 2^z times the
    level-ell polynomial at z.  Treated as immutable after construction.
    """

    initial_data: InitialData
    time: float
    n_max: int
    window: tuple[int, int]
    psi: dict
    phi: dict
    h: dict

    def _col(self, x: int) -> int:
        lo, hi = self.window
        if not lo <= x <= hi:
            raise ValueError(f"{x} outside window [{lo}, {hi}]")
        return x - lo

    def psi_val(self, n: int, k: int, x: int) -> float:
        return float(self.psi[n][k, self._col(x)])

    def phi_val(self, n: int, k: int, x: int) -> float:
        return float(self.phi[n][k, self._col(x)])

    def h_coeffs(self, n: int, k: int, ell: int) -> tuple[Fraction, ...]:
        return self.h[(n, k)][ell]

    def h_exact(self, n: int, k: int, ell: int, z: int) -> Fraction:
        return _pow2(z) * _poly_eval_frac(self.h[(n, k)][ell], z)

    def h_degree(self, n: int, k: int) -> int:
        """Exact degree of the scaled level-0 polynomial (certifies the
        polynomial growth of the matching column function)."""
        coeffs = self.h[(n, k)][0]
        deg = len(coeffs) - 1
        while deg > 0 and coeffs[deg] == 0:
            deg -= 1
        return deg

    def biortho_defect(self, n: int) -> float:
        gram = self.psi[n] @ self.phi[n].T
        return float(np.abs(gram - np.eye(n)).max())


def _phi_row(t: float, heat_level0, window: tuple[int, int]) -> np.ndarray:
    """Column function over the window: the level-0 solution pushed through
    the forward half-heat flow, truncated where the Poisson tail is dead."""
    lo, hi = window
    tail = CONV_TAIL + int(math.ceil(3.0 * t))
    ys = np.arange(lo, hi + tail + 1)
    vals = np.zeros(len(ys))
    for j, c in enumerate(heat_level0):
        vals += float(c) * ys.astype(float) ** j
    scaled = 2.0**ys * vals
    pref = np.array(
        [math.exp(t) * (-t / 2.0) ** j / math.factorial(j) for j in range(tail + 1)]
    )
    return np.correlate(scaled, pref, mode="valid")


def build_biortho(
    init: InitialData, t: float, n_max: int, window: tuple[int, int]
) -> BiorthoSystem:
    """Construct the conjugated biorthogonal system on a window.

    Row functions come from exact residue sums; column functions are built
    by convolving the level-0 backwards-heat solution with the forward
    half-heat flow.  Raises WindowError with a suggestion if the window is
    too small to certify biorthogonality at 1e-8.
    """
    if not 1 <= n_max <= N_MAX_DET:
        raise ValueError(f"need 1 <= n_max <= {N_MAX_DET}")
    lo, hi = int(window[0]), int(window[1])
    if lo >= hi:
        raise ValueError("window must be a nonempty interval")
    if _leading_inf(init):
        raise ValueError("data must start with a finite entry")
    xs = np.arange(lo, hi + 1)
    psi = {}
    phi = {}
    h = {}
    for n in range(1, n_max + 1):
        pn = np.zeros((n, len(xs)))
        fn = np.zeros((n, len(xs)))
        for k in range(n):
            for ix, x in enumerate(xs):
                pn[k, ix] = psi_residue(init, t, n, k, int(x))
            levels = backward_heat_polys(init, n, k)
            h[(n, k)] = levels
            fn[k] = _phi_row(t, levels[0], (lo, hi))
        psi[n] = pn
        phi[n] = fn
    system = BiorthoSystem(init, t, n_max, (lo, hi), psi, phi, h)
    worst = max(system.biortho_defect(n) for n in range(1, n_max + 1))
    if worst > 1e-8:
        top = max(_entry_int(init, 1), 0) + int(math.ceil(3.0 * t)) + 48
        bot = _entry_int(init, n_max) - n_max - 8
        raise WindowError(
            f"biorthogonality defect {worst:.2e} on window [{lo}, {hi}]; "
            f"try [{min(lo, bot)}, {max(hi, top)}]"
        )
    return system


# ---------------------------------------------------------------------------
# Closed-form column functions for the two classical data families.


def phi_closed_form(
    kind: str, n: int, k: int, x: int, t: float, d: int | None = None
) -> float:
    """Column function for step or periodic data, by contour quadrature.

    Step data puts particle i at -i; periodic data with gap d >= 2 puts
    particle i at -d*i.  Values come out in the conjugated normalization,
    so for step data with k = 0 the result is 2^(x+n).  The step residue is
    a bare polynomial and gets the full 2-power prefactor; the periodic
    integrand already carries its 2-powers through (2(1-v))^(x+dn-1),
    leaving a single factor of 2.
    """
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    if kind == "step":

        def f(v):
            return (1.0 - v) ** (x + n) / v ** (k + 1) * np.exp(t * v)

        scale = 2.0 ** (x + (n - k))
    elif kind == "periodic":
        if d is None or d < 2:
            raise ValueError("periodic data needs a gap d >= 2")

        def f(v):
            num = (1.0 - d * v) * (2.0 * (1.0 - v)) ** (x + d * n - 1)
            den = v * (2.0**d * (1.0 - v) ** (d - 1) * v) ** k
            return num / den * np.exp(t * v)

        scale = 2.0
    else:
        raise ValueError(f"unknown closed-form family: {kind!r}")
    res = circle_quadrature(f, ContourSpec.gamma0())
    return scale * res.value.real


# ---------------------------------------------------------------------------
# Transition probabilities: determinant and interlacing-array sum.


def _weyl_tuple(vec, name: str) -> tuple[int, ...]:
    out = tuple(int(v) for v in vec)
    if any(out[i] <= out[i + 1] for i in range(len(out) - 1)):
        raise ValueError(f"{name} must be strictly decreasing")
    return out


def schuetz_transition(x, y, t: float) -> float:
    """Transition probability from configuration y to x in time t >= 0, as
    an N x N determinant of index-shifted one-particle kernels."""
    xv = _weyl_tuple(x, "x")
    yv = _weyl_tuple(y, "y")
    n = len(xv)
    if len(yv) != n:
        raise ValueError("configurations must have equal size")
    if not 1 <= n <= N_MAX_DET:
        raise ValueError(f"need 1 <= N <= {N_MAX_DET}")
    if t < 0:
        raise ValueError("time must be nonnegative")
    mat = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            mat[i - 1, j - 1] = schuetz_F(i - j, xv[n - i] - yv[n - j], t)
    return float(np.linalg.det(mat))


def _det_weight_table(y, t: float, zs: np.ndarray) -> np.ndarray:
    """Rows of the top-level determinant: column j holds the unconjugated
    row function attached to data entry y_j, evaluated along zs."""
    n = len(y)
    out = np.empty((len(zs), n))
    for j in range(1, n + 1):
        sign = (-1.0) ** (n - j)
        for iz, z in enumerate(zs):
            out[iz, j - 1] = sign * schuetz_F(j - n, int(z) - y[j - 1], t)
    return out


def gt_pattern_sum(x, y, t: float, pad: int = 40, report: bool = False):
    """Transition probability as a sum over interlacing triangular arrays.

    The left edge of the array is pinned to x; free entries range over
    [min(x,y) - pad, max(x,y) + pad].  With report=True returns (value,
    delta) where delta compares against the half-pad window.
    """
    xv = _weyl_tuple(x, "x")
    yv = _weyl_tuple(y, "y")
    n = len(xv)
    if len(yv) != n:
        raise ValueError("configurations must have equal size")
    if not 1 <= n <= N_MAX_ARRAY_SUM:
        raise ValueError(f"array sum implemented for N <= {N_MAX_ARRAY_SUM}")
    if pad < 1:
        raise ValueError("pad must be positive")

    def evaluate(p):
        lo = min(min(xv), min(yv)) - p
        hi = max(max(xv), max(yv)) + p
        return _array_sum_value(xv, yv, t, lo, hi)

    value = evaluate(pad)
    if not report:
        return value
    delta = value - evaluate(max(pad // 2, 1))
    return value, delta


def _array_sum_value(xv, yv, t, lo, hi):
    n = len(xv)
    zs = np.arange(lo, hi + 1)
    table = _det_weight_table(yv, t, zs)

    if n == 1:
        return float(table[xv[0] - lo, 0])

    if n == 2:
        # one free entry v on the bottom level, v >= x_1
        vs = np.arange(xv[0], hi + 1)
        if len(vs) == 0:
            return 0.0
        mats = np.empty((len(vs), 2, 2))
        mats[:, 0, :] = table[xv[1] - lo]
        mats[:, 1, :] = table[vs - lo]
        return float(np.linalg.det(mats).sum())

    def pair_counts(w1g, w2g):
        # number of admissible middle entries for a bottom pair (w1, w2):
        # the middle entry ranges over [max(x_1, w1 + 1), w2]
        lowest = np.maximum(xv[0], w1g + 1)
        return np.maximum(w2g - lowest + 1, 0)

    if n == 3:
        w1s = np.arange(max(xv[1], lo), hi + 1)
        w2s = np.arange(lo, hi + 1)
        if len(w1s) == 0:
            return 0.0
        w1g, w2g = np.meshgrid(w1s, w2s, indexing="ij")
        counts = pair_counts(w1g, w2g)
        mask = counts > 0
        if not mask.any():
            return 0.0
        w1f = w1g[mask]
        w2f = w2g[mask]
        mats = np.empty((len(w1f), 3, 3))
        mats[:, 0, :] = table[xv[2] - lo]
        mats[:, 1, :] = table[w1f - lo]
        mats[:, 2, :] = table[w2f - lo]
        return float((counts[mask] * np.linalg.det(mats)).sum())

    # n == 4: aggregate the two inner levels into a rectangle-sum table over
    # the bottom pair, then sweep strictly increasing bottom-level triples.
    w1s = np.arange(lo, hi + 1)
    w1g, w2g = np.meshgrid(w1s, w1s, indexing="ij")
    inner = np.where(w1g >= xv[1], pair_counts(w1g, w2g), 0)
    pref = np.zeros((len(w1s) + 1, len(w1s) + 1))
    pref[1:, 1:] = inner.cumsum(axis=0).cumsum(axis=1)

    def rect(a_lo, a_hi, b_lo, b_hi):
        # sum of inner over w1 in (a_lo, a_hi], w2 in (b_lo, b_hi]
        ia0 = np.clip(a_lo - lo + 1, 0, len(w1s))
        ia1 = np.clip(a_hi - lo + 1, 0, len(w1s))
        ib0 = np.clip(b_lo - lo + 1, 0, len(w1s))
        ib1 = np.clip(b_hi - lo + 1, 0, len(w1s))
        return pref[ia1, ib1] - pref[ia0, ib1] - pref[ia1, ib0] + pref[ia0, ib0]

    base = np.arange(max(xv[2], lo), hi + 1)
    if len(base) < 3:
        return 0.0
    triples = np.array(list(itertools.combinations(base.tolist(), 3)))
    u1, u2, u3 = triples[:, 0], triples[:, 1], triples[:, 2]
    counts = rect(np.maximum(u1, xv[1] - 1), u2, u2, u3)
    keep = counts > 0
    if not keep.any():
        return 0.0
    u1, u2, u3, counts = u1[keep], u2[keep], u3[keep], counts[keep]
    total = 0.0
    chunk = 50000
    for s in range(0, len(u1), chunk):
        e = min(s + chunk, len(u1))
        mats = np.empty((e - s, 4, 4))
        mats[:, 0, :] = table[xv[3] - lo]
        mats[:, 1, :] = table[u1[s:e] - lo]
        mats[:, 2, :] = table[u2[s:e] - lo]
        mats[:, 3, :] = table[u3[s:e] - lo]
        total += float((counts[s:e] * np.linalg.det(mats)).sum())
    return total


def gt_indicator(levels) -> int:
    """Product of one-step indicator determinants over a triangular array.

    Equals 1 exactly when consecutive rows interlace (the previous row
    extended by a virtual +infinity entry), else 0.
    """
    prev: tuple = ()
    prod = 1
    for m, raw in enumerate(levels, start=1):
        rowv = tuple(float(v) for v in raw)
        if len(rowv) != m:
            raise ValueError(f"level {m} must have {m} entries")
        ext = prev + (math.inf,)
        mat = np.array([[1.0 if a > b else 0.0 for b in rowv] for a in ext])
        prod *= int(round(np.linalg.det(mat)))
        prev = rowv
    return prod


# ---------------------------------------------------------------------------
# The space-time correlation kernel.


def kt_kernel(
    t: float, init: InitialData, n_i: int, n_j: int, x1: int, x2: int
) -> float:
    """Conjugated space-time correlation kernel entry.

    An infinite prefix of the data is removed by relabeling; both particle
    labels must point past it.  The composite term is an exactly finite
    sum: the inverse-flow factor vanishes above x1 + n_i and the
    first-passage factor vanishes at or below entry(n_j).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    base, shift = _strip_leading_inf(init)
    ni, nj = n_i - shift, n_j - shift
    if min(ni, nj) < 1:
        raise ValueError("labels must point past the infinite prefix")
    term1 = -float(q_weight(n_j - n_i, x1, x2)) if n_i < n_j else 0.0
    y_hi = x1 + ni
    y_lo = _entry_int(base, nj) + 1
    if y_lo > y_hi:
        return term1
    ys = np.arange(y_lo, y_hi + 1)
    left = _transfer_inverse_matrix(t, ni, ys, np.array([x1]))[:, 0]
    right = epi_transfer_matrix(base, t, nj, y_lo, y_hi, [x2])[:, 0]
    return term1 + float(left @ right)


def _double_circle(f, r1: float, r2: float, tol: float = 1e-11, max_nodes: int = 1024):
    """(1/2 pi i)^2 double contour integral over circles about the origin."""
    prev = None
    n = 32
    while n <= max_nodes:
        u = np.exp(2j * np.pi * np.arange(n) / n)
        vals = f(r1 * u[:, None], r2 * u[None, :])
        value = r1 * r2 * np.einsum("ab,a,b->", vals, u, u) / n**2
        if prev is not None and abs(value - prev) <= tol * max(1.0, abs(value)):
            return value
        prev = value
        n *= 2
    raise TruncationError(f"double contour failed to settle at {max_nodes} nodes")


def kt_step_closed(t: float, n_i: int, n_j: int, z1: int, z2: int) -> float:
    """Closed double-contour form of the kernel for step data."""
    term1 = -float(q_weight(n_j - n_i, z1, z2)) if n_i < n_j else 0.0

    def f(w, v):
        num = (1.0 - w) ** n_i * (1.0 - v) ** (n_j + z2) * np.exp(t * (w + v - 1.0))
        den = w ** (n_i + z1 + 1) * v**n_j * (1.0 - v - w)
        return num / den

    val = _double_circle(f, CONTOUR_RADIUS, CONTOUR_RADIUS)
    return term1 + 2.0 ** (z2 - z1) * val.real


def kt_two_periodic_closed(t: float, n: int, z1: int, z2: int) -> float:
    """Closed single-contour one-index kernel for data on every even site.

    The contour circles v = 1 and excludes the origin; labels follow the
    convention that particle n sits at -2n at time zero.
    """

    def f(v):
        return (
            v ** (z2 + 2 * n)
            * np.exp(t * (1.0 - 2.0 * v))
            / (1.0 - v) ** (z1 + 2 * n + 1)
        )

    res = circle_quadrature(f, ContourSpec(1.0 + 0.0j, CONTOUR_RADIUS))
    return -(2.0 ** (z2 - z1)) * res.value.real


def kt_kernel_two_periodic(
    t: float, n: int, z1: int, z2: int, tol: float = 1e-8, max_doublings: int = 4
) -> float:
    """One-index kernel for every-other-site data via finite truncations.

    The doubly infinite configuration is cut to 2N particles on the even
    sites of [-2N, 2N - 2]; label n of the full data is label N + n of the
    truncation.  N doubles until the value settles to tol.
    """
    size = max(8, abs(n) + 2)
    prev = None
    for _ in range(max_doublings + 1):
        entries = tuple(2 * (size - i) for i in range(1, 2 * size + 1))
        data = make_initial("explicit", entries=entries)
        val = kt_kernel(t, data, size + n, size + n, z1, z2)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        size *= 2
    raise TruncationError(f"kernel did not settle below {tol} by truncation {size}")


# ---------------------------------------------------------------------------
# Fredholm determinants for joint one-sided probabilities.


@dataclass(frozen=True)
class DiscreteKernelWindow:
    """Projected extended kernel on truncated intervals, plus diagnostics."""

    indices: tuple[int, ...]
    intervals: tuple[tuple[int, int], ...]
    thresholds: tuple[float, ...]
    values: np.ndarray
    last_delta: float


def _clean_events(events):
    evs = [(int(nv), float(av)) for nv, av in events]
    if not evs:
        raise ValueError("need at least one (label, threshold) event")
    if len(evs) > N_MAX_JOINT:
        raise ValueError(f"at most {N_MAX_JOINT} joint events")
    ns = [nv for nv, _ in evs]
    if any(nv < 1 for nv in ns):
        raise ValueError("labels start at 1")
    if any(ns[i] >= ns[i + 1] for i in range(len(ns) - 1)):
        raise ValueError("labels must be strictly increasing")
    if any(av == math.inf for _, av in evs):
        raise ValueError("thresholds must be real or -inf")
    return [(nv, av) for nv, av in evs if av != -math.inf]


def _window_q_power(steps: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Float walk-power matrix on a grid, overflow safe for deep windows."""
    xg = xs[:, None].astype(float)
    yg = ys[None, :].astype(float)
    if steps == 0:
        return (xg == yg).astype(float)
    if steps > 0:
        d = xg - yg
        ok = d >= steps
        coeff = np.ones(d.shape)
        for i in range(steps - 1):
            coeff *= (d - 1 - i) / (i + 1.0)
        expo = np.where(ok, yg - xg, 0.0)
        return np.where(ok, 2.0**expo * coeff, 0.0)
    k = -steps
    diff = (yg - xg).astype(int)
    out = np.zeros(diff.shape)
    for j in range(k + 1):
        out[diff == j] = (-1.0) ** (k - j) * 2.0**j * math.comb(k, j)
    return out


def _kernel_block_matrix(t, base, ns, grids):
    """Stacked kernel blocks over per-index grids, sharing start-point sums."""
    sizes = [len(g) for g in grids]
    y_hi = max(int(g[-1]) + nv for nv, g in zip(ns, grids))
    y_lo = min(_entry_int(base, nv) for nv in ns) + 1
    if y_lo > y_hi:
        y_lo = y_hi + 1
    ys = np.arange(y_lo, y_hi + 1)
    lefts = [_transfer_inverse_matrix(t, nv, ys, g) for nv, g in zip(ns, grids)]
    rights = [epi_transfer_matrix(base, t, nv, y_lo, y_hi, g) for nv, g in zip(ns, grids)]
    total = sum(sizes)
    big = np.zeros((total, total))
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    for i in range(len(ns)):
        for j in range(len(ns)):
            blk = lefts[i].T @ rights[j]
            if ns[i] < ns[j]:
                blk = blk - _window_q_power(ns[j] - ns[i], grids[i], grids[j])
            big[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] = blk
    return big


def multipoint_probability(
    t: float, init: InitialData, events, tol: float = 1e-9, report: bool = False
):
    """P(particle n_j is strictly right of a_j for every j), as a Fredholm
    determinant of the projected extended kernel.

    Events are (label, threshold) pairs with strictly increasing labels.
    Thresholds of -inf impose nothing and are dropped; with none left the
    probability is exactly 1.  The window below the smallest threshold
    starts WINDOW_BELOW deep and doubles until the determinant moves by
    less than tol.
    """
    kept = _clean_events(events)
    if not kept:
        if report:
            win = DiscreteKernelWindow((), (), (), np.zeros((0, 0)), 0.0)
            return 1.0, win
        return 1.0
    base, shift = _strip_leading_inf(init)
    ns = [nv - shift for nv, _ in kept]
    if min(ns) < 1:
        raise ValueError("labels must point past the infinite prefix")
    a_vals = [av for _, av in kept]
    tops = [int(math.floor(av)) for av in a_vals]
    depth = WINDOW_BELOW
    prev = None
    while depth <= 16 * WINDOW_BELOW:
        lo = min(tops) - depth
        grids = [np.arange(lo, top + 1) for top in tops]
        big = _kernel_block_matrix(t, base, ns, grids)
        value = det_window(big)
        if prev is not None and abs(value - prev) < tol:
            if report:
                win = DiscreteKernelWindow(
                    tuple(nv for nv, _ in kept),
                    tuple((lo, top) for top in tops),
                    tuple(a_vals),
                    big,
                    abs(value - prev),
                )
                return float(value), win
            return float(value)
        prev = value
        depth *= 2
    raise TruncationError(f"determinant did not settle below {tol}")


def path_integral_probability(t: float, init: InitialData, events, tol: float = 1e-9):
    """Same probability as multipoint_probability, via the path-product
    identity: one determinant at the last label, with a product of walk
    powers and one-sided projections carrying the earlier constraints.

    The product is not evaluated literally: composing the kernel with the
    projector complements pairs its growing columns against the decaying
    side of the walk powers and the entrywise sums diverge.  Instead each
    complement is expanded, the kernel is pushed through the banded
    inverse powers onto the first retained cutoff, and the result is a
    signed sum over constraint subsets of absolutely convergent products
    of a relabeled kernel, cutoffs and forward walk powers.
    """
    kept = _clean_events(events)
    if not kept:
        return 1.0
    base, shift = _strip_leading_inf(init)
    ns = [nv - shift for nv, _ in kept]
    if min(ns) < 1:
        raise ValueError("labels must point past the infinite prefix")
    a_vals = [av for _, av in kept]
    tops = [int(math.floor(av)) for av in a_vals]
    m = len(ns)
    floor_site = min(tops + [_entry_int(base, ns[-1])])
    top_site = max(tops + [_entry_int(base, 1)])
    depth = WINDOW_BELOW
    prev = None
    while depth <= 16 * WINDOW_BELOW:
        lo = floor_site - depth
        hi = top_site + WINDOW_ABOVE + (ns[-1] - ns[0]) + int(math.ceil(t))
        grid = np.arange(lo, hi + 1)
        width = len(grid)
        kernels: dict[int, np.ndarray] = {}
        total = np.zeros((width, width))
        for bits in range(1, 1 << m):
            chosen = [j for j in range(m) if bits >> j & 1]
            lead = ns[chosen[0]]
            if lead not in kernels:
                kernels[lead] = _kernel_block_matrix(t, base, [lead], [grid])
            term = _window_q_power(lead - ns[-1], grid, grid) @ kernels[lead]
            for pos, j in enumerate(chosen):
                term = term * (grid <= a_vals[j])[None, :]
                nxt = ns[chosen[pos + 1]] if pos + 1 < len(chosen) else ns[-1]
                if nxt != ns[j]:
                    term = term @ _window_q_power(nxt - ns[j], grid, grid)
            total += (-1.0) ** (len(chosen) + 1) * term
        value = det_window(total)
        if prev is not None and abs(value - prev) < tol:
            return float(value)
        prev = value
        depth *= 2
    raise TruncationError(f"path-product determinant did not settle below {tol}")


# ---------------------------------------------------------------------------
# Two-level block cross check against the conditional ensemble machinery.


def bfps_l_verify(
    init: InitialData, t: float, window: tuple[int, int], trials: int = 100
) -> dict:
    """Cross-check the kernel against the block two-level ensemble.

    Builds the block interaction matrix on virtual labels {1, 2} plus two
    site levels over the window, converts it to a correlation kernel
    through the conditional-ensemble inversion, and compares the level-1
    diagonal block against the first-passage kernel (after unconjugating).
    Ensemble minors are compared with the two-level determinant weights up
    to one global sign, and the interlacing indicator identity is exercised
    on random arrays.  Returns a dict of deviation diagnostics.
    """
    if init.n_finite != 2 or _leading_inf(init):
        raise ValueError("this check is specific to two finite particles")
    lo, hi = int(window[0]), int(window[1])
    sites = list(range(lo, hi + 1))
    width = len(sites)
    space = [("label", 1), ("label", 2)]
    space += [(1, z) for z in sites] + [(2, z) for z in sites]
    L = np.zeros((len(space), len(space)))
    L[0, 2 : 2 + width] = 1.0  # virtual row j feeds level j with unit weight
    L[1, 2 + width :] = 1.0
    for a, x in enumerate(sites):
        for b, yv in enumerate(sites):
            if x > yv:
                L[2 + a, 2 + width + b] = -1.0
    for b, x in enumerate(sites):
        for j in (1, 2):
            L[2 + width + b, j - 1] = psi_residue(init, t, 2, 2 - j, x, conjugated=False)
    spec = LEnsembleSpec(space, L, conditioning_subset=space[2:])
    dpp = conditional_l_to_k(spec)

    e1 = _entry_int(init, 1)
    e2 = _entry_int(init, 2)
    x_lo = max(e2 - 12, lo + 8)
    x_hi = min(e1 + 12, hi - 8)
    max_dev = 0.0
    for x1 in range(x_lo, x_hi + 1):
        for x2 in range(x_lo, x_hi + 1):
            got = dpp.kernel[dpp.index[(1, x1)], dpp.index[(1, x2)]]
            want = 2.0 ** (x1 - x2) * kt_kernel(t, init, 1, 1, x1, x2)
            max_dev = max(max_dev, abs(got - want))

    rng = np.random.default_rng(7)
    sign = 0.0
    max_weight_dev = 0.0
    span_lo, span_hi = e2 - 6, e1 + 10
    for _ in range(200):
        z11, z21, z22 = rng.integers(span_lo, span_hi + 1, size=3).tolist()
        if z21 == z22:
            continue
        z21, z22 = sorted((z21, z22))
        idx = [0, 1] + sorted(spec.index_of(p) for p in [(1, z11), (2, z21), (2, z22)])
        minor = float(np.linalg.det(L[np.ix_(idx, idx)]))
        if gt_indicator([(z11,), (z21, z22)]):
            rows = np.array(
                [
                    [psi_residue(init, t, 2, 2 - j, zv, conjugated=False) for j in (1, 2)]
                    for zv in (z21, z22)
                ]
            )
            weight = float(np.linalg.det(rows))
        else:
            weight = 0.0
        if not sign and abs(weight) > 1e-12:
            sign = math.copysign(1.0, minor * weight)
        ref = sign if sign else 1.0
        max_weight_dev = max(max_weight_dev, abs(minor - ref * weight))

    mism = 0
    for _ in range(trials):
        size = int(rng.integers(2, 6))
        arr = [sorted(rng.integers(-6, 7, size=m).tolist()) for m in range(1, size + 1)]
        ok = 1
        for m in range(1, size):
            upper, lower = arr[m - 1], arr[m]
            for i in range(m):
                if not lower[i] < upper[i] <= lower[i + 1]:
                    ok = 0
        if gt_indicator(arr) != ok:
            mism += 1

    return {
        "max_kernel_dev": max_dev,
        "weight_sign": sign,
        "max_weight_dev": max_weight_dev,
        "indicator_mismatches": mism,
        "window": (lo, hi),
    }
