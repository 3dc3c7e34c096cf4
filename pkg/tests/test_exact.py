"""Walk kernels, biorthogonal systems, and joint laws vs independent oracles.

Oracles used here: exact-Fraction dynamic programs for the geometric walks,
scipy matrix exponentials for the half-heat flows, direct contour quadrature
for residue formulas, and brute-force sums of transition determinants for the
joint laws.  Nothing below reuses the code path it checks.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.stats import poisson

from kpzlab.exact import (
    BiorthoSystem,
    TruncationError,
    WindowError,
    backward_heat_polys,
    bfps_l_verify,
    build_biortho,
    g0n,
    gt_indicator,
    gt_pattern_sum,
    hitting_profile,
    kt_kernel,
    kt_kernel_two_periodic,
    kt_step_closed,
    kt_two_periodic_closed,
    multipoint_probability,
    path_integral_probability,
    phi_closed_form,
    psi_residue,
    q_weight,
    qbar,
    schuetz_transition,
    stopping_curve,
    transfer_epi,
    transfer_extended,
    transfer_inverse,
    transfer_kernels,
    walk_adjoint_inverse,
    walk_bundle,
)
from kpzlab.fredholm import det_window
from kpzlab.simulate import make_initial
from kpzlab.special import ContourSpec, circle_quadrature, schuetz_F

STEP = make_initial(kind="step")
EXPL = make_initial(kind="explicit", entries=(3, 1, -2, -3, -7))
HALF = Fraction(1, 2)


def _entry(init, k):
    return int(init.entry(k))


# ---- Fraction walk oracles -------------------------------------------------


def right_hit_law(init, n, ell, z):
    """Law of the first time a strictly-right geometric walk started at z at
    time ell-1 exceeds entry(n - m) at times m = ell..n-1, as Fractions."""
    masses = {z: Fraction(1)}
    law = {}
    for m in range(ell, n):
        c = _entry(init, n - m)
        nxt = {}
        hit = Fraction(0)
        for p, w in masses.items():
            hit += w * Fraction(2) ** (p - c)
            for q in range(p + 1, c + 1):
                nxt[q] = nxt.get(q, Fraction(0)) + w * HALF ** (q - p)
        law[m] = hit
        masses = nxt
    return law


def left_hit_law(init, n, z):
    """Joint law of (first-passage time, position) for the strictly-left
    geometric walk started at z, checked against entry(m + 1) at step m.
    Mass that falls to entry(n) or below can never cross and is dropped."""
    states = {z: Fraction(1)}
    out = {}
    floor = _entry(init, n)
    for m in range(0, n):
        c = _entry(init, m + 1)
        nxt = {}
        for p, w in states.items():
            if p > c:
                out[(m, p)] = out.get((m, p), Fraction(0)) + w
            else:
                for q in range(floor + 1, p):
                    nxt[q] = nxt.get(q, Fraction(0)) + w * HALF ** (p - q)
        states = nxt
    return out


def reversed_crossing_mass(init, n, z1, z2):
    """Mass of strictly-right walk paths from z2 (time -1) to z1 (time n-1)
    that exceed entry(n - m) at some time m < n.  Positions above z1 cannot
    come back and are pruned exactly."""
    states = {(z2, False): Fraction(1)}
    for m in range(0, n):
        c = _entry(init, n - m)
        nxt = {}
        for (p, hit), w in states.items():
            for q in range(p + 1, z1 + 1):
                key = (q, hit or q > c)
                nxt[key] = nxt.get(key, Fraction(0)) + w * HALF ** (q - p)
        states = nxt
    return states.get((z1, True), Fraction(0))


# ---- walk weights ----------------------------------------------------------


def test_walk_row_sum_is_geometric():
    for width in (1, 5, 30):
        total = sum(q_weight(1, 0, y) for y in range(-width, 0))
        assert total == 1 - HALF**width


def test_walk_powers_compose_exactly():
    for x in range(-2, 3):
        for y in range(x - 9, x):
            conv = sum(
                q_weight(1, x, w) * q_weight(2, w, y) for w in range(y + 1, x)
            )
            assert conv == q_weight(3, x, y)


def test_walk_inverse_is_two_sided():
    for x in range(-3, 4):
        for y in range(-3, 4):
            left = sum(q_weight(-1, x, w) * q_weight(1, w, y) for w in (x, x + 1))
            right = sum(q_weight(1, x, w) * q_weight(-1, w, y) for w in (y - 1, y))
            want = Fraction(int(x == y))
            assert left == want
            assert right == want


def test_walk_negative_powers_iterate():
    for x in range(-3, 3):
        for y in range(x - 1, x + 4):
            conv = sum(
                q_weight(-1, x, w) * q_weight(-1, w, y) for w in (x, x + 1)
            )
            assert conv == q_weight(-2, x, y)


def test_extended_power_agrees_on_long_jumps():
    for n in (1, 2, 4):
        for y1 in range(-2, 6):
            for y2 in range(y1 - 9, y1 - n + 1):
                assert qbar(n, y1, y2) == q_weight(n, y1, y2)


def test_extended_power_off_support_values():
    assert qbar(2, 0, 0) == -1
    # depth one is a pure two-sided geometric profile
    for y1 in range(-3, 4):
        for y2 in range(-3, 4):
            assert qbar(1, y1, y2) == Fraction(2) ** (y2 - y1)


def test_extended_power_contour_route():
    # same binomial coefficients from a residue integral at the origin
    for n in (1, 2, 3):
        for y1 in range(-2, 4):
            for y2 in range(y1 - 3, y1 + 3):
                m = y1 - y2

                def f(w):
                    return (1.0 + w) ** (m - 1) / (2.0**m * w**n)

                got = circle_quadrature(f, ContourSpec.gamma0()).value.real
                assert got == pytest.approx(float(qbar(n, y1, y2)), abs=1e-11)


def test_extended_power_inverse_recursion():
    for z1 in range(-4, 4):
        for z2 in range(-4, 4):
            for n in (3, 2):
                left = sum(
                    q_weight(-1, z1, w) * qbar(n, w, z2) for w in (z1, z1 + 1)
                )
                right = sum(
                    qbar(n, z1, w) * q_weight(-1, w, z2) for w in (z2 - 1, z2)
                )
                assert left == qbar(n - 1, z1, z2)
                assert right == qbar(n - 1, z1, z2)
            killed = sum(
                q_weight(-1, z1, w) * qbar(1, w, z2) for w in (z1, z1 + 1)
            )
            assert killed == 0


def test_walk_bundle_collects_pieces():
    bundle = walk_bundle(EXPL, 3)
    assert bundle.curve == stopping_curve(EXPL, 3)
    assert bundle.q_power(2, 0, -3) == q_weight(2, 0, -3)
    assert bundle.qbar(1, -4) == qbar(3, 1, -4)
    with pytest.raises(ValueError):
        walk_bundle(EXPL, 0)


@settings(max_examples=80, deadline=None)
@given(
    a=st.integers(min_value=1, max_value=3),
    b=st.integers(min_value=1, max_value=3),
    gap=st.integers(min_value=-2, max_value=12),
)
def test_walk_power_convolution_property(a, b, gap):
    x, y = 0, -gap
    conv = sum(
        q_weight(a, x, w) * q_weight(b, w, y) for w in range(y + 1, x)
    )
    assert conv == q_weight(a + b, x, y)


# ---- first passage ---------------------------------------------------------


def test_hitting_profile_matches_fraction_walk():
    n = 4
    ys, bs, hit = hitting_profile(EXPL, n, -14, 8)
    for iy, y in enumerate(ys):
        law = left_hit_law(EXPL, n, int(y))
        for m in range(n):
            for ib, b in enumerate(bs):
                want = float(law.get((m, int(b)), Fraction(0)))
                assert hit[m, iy, ib] == pytest.approx(want, abs=1e-15)


def test_hitting_profile_immediate_crossing():
    n = 3
    top = _entry(EXPL, 1)
    ys, bs, hit = hitting_profile(EXPL, n, top + 1, top + 4)
    for iy, y in enumerate(ys):
        for ib, b in enumerate(bs):
            assert hit[0, iy, ib] == (1.0 if b == y else 0.0)
        assert hit[1:, iy, :].sum() == 0.0


# ---- transfer flows --------------------------------------------------------


def test_inverse_flow_matches_matrix_exponential():
    t, n = 1.3, 3
    lo, hi = -50, 14
    zs = np.arange(lo, hi + 1)
    lower = np.eye(len(zs)) - np.diag(np.ones(len(zs) - 1), -1)
    flow = expm(-(t / 2.0) * lower)
    qinv = np.array(
        [[float(q_weight(-n, int(a), int(b))) for b in zs] for a in zs]
    )
    composite = flow @ qinv
    for z1 in range(-2, 11):
        for z2 in range(-2, 11):
            got = transfer_inverse(t, n, z1, z2)
            assert got == pytest.approx(composite[z2 - lo, z1 - lo], abs=1e-13)


def test_extended_flow_matches_matrix_exponential():
    t, n = 1.3, 3
    lo, hi = -20, 44
    zs = np.arange(lo, hi + 1)
    lower = np.eye(len(zs)) - np.diag(np.ones(len(zs) - 1), -1)
    flow = expm((t / 2.0) * lower)
    qb = np.array([[float(qbar(n, int(a), int(b))) for b in zs] for a in zs])
    composite = qb @ flow
    for z1 in range(-2, 11):
        for z2 in range(-2, 11):
            got = transfer_extended(t, n, z1, z2)
            want = composite[z1 - lo, z2 - lo]
            assert got == pytest.approx(want, rel=1e-12, abs=1e-13)


def test_transfer_pair_swap_identity():
    # the two flows are the same function read along swapped arguments
    t, n = 1.3, 3
    for z1 in range(-3, 6):
        for z2 in range(z1 - n + 1, z1 + 8):
            depth = n - 1 + z2 - z1
            if depth < 0:
                continue
            a = transfer_extended(t, n, z1, z2)
            b = transfer_inverse(t, depth, z2, z1)
            assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_transfer_time_zero_degenerates_to_walk():
    for z1 in range(-4, 5):
        for z2 in range(-4, 5):
            got = transfer_inverse(0.0, 2, z1, z2)
            assert got == float(q_weight(-2, z2, z1))
            got = transfer_extended(0.0, 2, z1, z2)
            assert got == float(qbar(2, z1, z2))


def test_transfer_kernels_bundle():
    vals = transfer_kernels(0.9, 2, 1, -1)
    assert vals.inverse == transfer_inverse(0.9, 2, 1, -1)
    assert vals.extended == transfer_extended(0.9, 2, 1, -1)
    assert vals.epi is None
    with_init = transfer_kernels(0.9, 2, 1, -1, init=EXPL)
    assert with_init.epi == transfer_epi(EXPL, 0.9, 2, 1, -1)


def test_first_passage_transfer_matches_walk_average():
    t, n = 0.9, 4
    for y in range(-12, 9):
        law = left_hit_law(EXPL, n, y)
        for z2 in range(-12, 5):
            want = sum(
                float(w) * transfer_extended(t, n - m, b, z2)
                for (m, b), w in law.items()
            )
            got = transfer_epi(EXPL, t, n, y, z2)
            assert got == pytest.approx(want, rel=1e-11, abs=1e-13)


def test_first_passage_transfer_vanishes_below_floor():
    t, n = 0.9, 4
    floor = _entry(EXPL, n)
    for y in range(floor - 3, floor + 1):
        for z2 in (-9, -4, 0):
            assert transfer_epi(EXPL, t, n, y, z2) == 0.0


def test_first_passage_depth_one_is_indicator():
    t = 0.9
    c = _entry(EXPL, 1)
    for y in range(c - 4, c + 5):
        for z2 in range(-8, 5):
            want = transfer_extended(t, 1, y, z2) if y > c else 0.0
            assert transfer_epi(EXPL, t, 1, y, z2) == pytest.approx(
                want, abs=1e-15
            )


# ---- crossing kernel -------------------------------------------------------


def test_crossing_kernel_matches_reversed_walk():
    n = 5
    for z1 in range(_entry(EXPL, 1) - 5, _entry(EXPL, 1) + 6):
        for z2 in range(_entry(EXPL, n) - 6, _entry(EXPL, n) + 1):
            want = float(reversed_crossing_mass(EXPL, n, z1, z2))
            assert g0n(n, z1, z2, EXPL) == pytest.approx(want, abs=1e-15)


def test_crossing_kernel_matches_heat_sum():
    n = 5
    system = build_biortho(EXPL, 0.9, n_max=n, window=(-40, 20))
    for z1 in range(_entry(EXPL, 1) - 4, _entry(EXPL, 1) + 5):
        for z2 in range(_entry(EXPL, n) - 5, _entry(EXPL, n) + 1):
            total = Fraction(0)
            for k in range(n):
                total += q_weight(n - k, z1, _entry(EXPL, n - k)) * system.h_exact(
                    n, k, 0, z2
                )
            assert g0n(n, z1, z2, EXPL) == pytest.approx(float(total), abs=1e-15)


def test_crossing_kernel_above_first_entry():
    n = 4
    for z1 in range(_entry(EXPL, 1) + 1, _entry(EXPL, 1) + 6):
        for z2 in range(_entry(EXPL, n) - 4, _entry(EXPL, n) + 1):
            assert g0n(n, z1, z2, EXPL) == float(qbar(n, z1, z2))


# ---- heat levels -----------------------------------------------------------


def test_heat_levels_boundary_data():
    n = 5
    for k in range(n):
        levels = backward_heat_polys(EXPL, n, k)
        assert levels[k] == (Fraction(2) ** (-_entry(EXPL, n - k)),)
        for ell in range(k):
            anchor = _entry(EXPL, n - ell)
            val = sum(
                c * Fraction(anchor) ** i for i, c in enumerate(levels[ell])
            )
            assert val == 0


def test_heat_levels_step_recursion():
    n, k = 5, 3
    levels = backward_heat_polys(EXPL, n, k)
    for ell in range(k):
        stepped = walk_adjoint_inverse(levels[ell])
        a = list(stepped) + [Fraction(0)] * (len(levels[ell + 1]) - len(stepped))
        b = list(levels[ell + 1]) + [Fraction(0)] * (len(stepped) - len(levels[ell + 1]))
        assert a == b
    # stepping the constant top level gives the zero polynomial
    assert all(c == 0 for c in walk_adjoint_inverse(levels[k]))


def test_heat_solution_matches_hit_law():
    n = 5
    system = build_biortho(EXPL, 0.9, n_max=n, window=(-40, 20))
    for ell in range(n):
        c = _entry(EXPL, n - ell)
        for z in range(c - 6, c + 1):
            law = right_hit_law(EXPL, n, ell, z)
            for k in range(ell, n):
                assert system.h_exact(n, k, ell, z) == law.get(k, Fraction(0))


def test_heat_solution_delta_property():
    n = 5
    system = build_biortho(EXPL, 0.9, n_max=n, window=(-40, 20))
    for k in range(n):
        for ell in range(k + 1):
            val = system.h_exact(n, k, ell, _entry(EXPL, n - ell))
            assert val == Fraction(int(ell == k))


def test_heat_degree_certificate():
    n = 5
    system = build_biortho(EXPL, 0.9, n_max=n, window=(-40, 20))
    for k in range(n):
        assert system.h_degree(n, k) == k


def test_column_from_heat_flow():
    t, n = 0.9, 4
    system = build_biortho(EXPL, t, n_max=n, window=(-40, 20))
    for k in range(n):
        for x in range(-8, 7):
            want = 0.0
            for y in range(x, x + 55):
                weight = (
                    math.exp(t) * (-t / 2.0) ** (y - x) / math.factorial(y - x)
                )
                want += float(system.h_exact(n, k, 0, y)) * weight
            got = system.phi_val(n, k, x)
            assert got == pytest.approx(want, rel=1e-9, abs=1e-11)


# ---- row functions ---------------------------------------------------------


def test_row_function_matches_alternating_series():
    t = 0.9
    for k in (0, 1, 2):
        for x in range(-6, 8):
            s = x - _entry(EXPL, 3 - k)
            got = psi_residue(EXPL, t, 3, k, x, conjugated=False)
            want = (-1.0) ** k * schuetz_F(-k, s, t)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_row_function_negative_index_contour():
    t = 0.9
    for k in (-1, -2, -3):
        ref = _entry(EXPL, 2 - k)
        for x in range(-9, 4):

            def f(w):
                return (
                    ((1 - w) / w) ** k
                    * np.exp(t * (w - 1))
                    / w ** (x - ref + 1)
                )

            want = circle_quadrature(f, ContourSpec.gamma0()).value.real
            got = psi_residue(EXPL, t, 2, k, x, conjugated=False)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_row_function_shift_recursion():
    t, big, k = 0.9, 3, 2
    for x in range(-6, 10):
        total = sum(
            psi_residue(EXPL, t, big + 1, big + 1 - k, y, conjugated=False)
            for y in range(-60, x)
        )
        got = psi_residue(EXPL, t, big, big - k, x, conjugated=False)
        assert total == pytest.approx(got, rel=1e-12, abs=1e-14)


def test_row_function_semigroup():
    t, nb, mb, k = 0.9, 4, 2, 1
    for x in range(-8, 6):
        total = sum(
            float(q_weight(nb - mb, x, w)) * psi_residue(EXPL, t, nb, nb - k, w)
            for w in range(-80, x)
        )
        got = psi_residue(EXPL, t, mb, mb - k, x)
        assert total == pytest.approx(got, rel=1e-12, abs=1e-14)


def test_row_function_conjugation():
    t = 0.9
    for k in (-2, 0, 2):
        for x in range(-5, 5):
            s = x - _entry(EXPL, 3 - k)
            bare = psi_residue(EXPL, t, 3, k, x, conjugated=False)
            scaled = psi_residue(EXPL, t, 3, k, x)
            assert scaled == pytest.approx(2.0 ** (-s) * bare, rel=1e-14)


# ---- biorthogonal systems --------------------------------------------------


def test_biortho_defect_is_tiny():
    system = build_biortho(EXPL, 0.9, n_max=5, window=(-40, 20))
    for n in range(1, 6):
        assert system.biortho_defect(n) < 1e-10


def test_biortho_window_too_small():
    with pytest.raises(WindowError, match=r"try \["):
        build_biortho(EXPL, 0.9, n_max=5, window=(-12, 6))


def test_biortho_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_biortho(EXPL, 0.9, n_max=0, window=(-30, 10))
    with pytest.raises(ValueError):
        build_biortho(EXPL, 0.9, n_max=2, window=(5, -5))
    fuzzy = make_initial(kind="explicit", entries=(math.inf, 1, -2))
    with pytest.raises(ValueError):
        build_biortho(fuzzy, 0.9, n_max=2, window=(-30, 10))


def test_closed_form_columns_step():
    t = 0.9
    system = build_biortho(STEP, t, n_max=4, window=(-40, 18))
    for n in (2, 4):
        for k in range(n):
            for x in range(-7, 7):
                got = phi_closed_form("step", n, k, x, t)
                want = system.phi_val(n, k, x)
                assert got == pytest.approx(want, rel=1e-10, abs=1e-12)
    # lowest column is a pure power
    for n in (1, 3):
        for x in range(-5, 5):
            assert phi_closed_form("step", n, 0, x, t) == pytest.approx(
                2.0 ** (x + n), rel=1e-12
            )


def test_closed_form_columns_periodic():
    t, d = 0.8, 2
    data = make_initial(kind="explicit", entries=(-2, -4, -6, -8))
    system = build_biortho(data, t, n_max=4, window=(-44, 16))
    for n in (2, 4):
        for k in range(n):
            for x in range(-7, 5):
                got = phi_closed_form("periodic", n, k, x, t, d=d)
                want = system.phi_val(n, k, x)
                assert got == pytest.approx(want, rel=1e-9, abs=1e-11)


def test_column_scaled_degree():
    t, n = 0.9, 4
    system = build_biortho(EXPL, t, n_max=n, window=(-40, 20))
    xs = np.arange(-6, 8)
    for k in range(n):
        vals = np.array(
            [system.phi_val(n, k, int(x)) * 2.0 ** (-float(x)) for x in xs]
        )
        diffs = vals.copy()
        for _ in range(k + 1):
            diffs = np.diff(diffs)
        scale = max(1.0, np.abs(vals).max())
        assert np.abs(diffs).max() < 1e-6 * scale
        if k > 0:
            lower = vals.copy()
            for _ in range(k):
                lower = np.diff(lower)
            assert np.abs(lower).max() > 1e-9 * scale


# ---- correlation kernel ----------------------------------------------------


def test_kernel_step_closed_contour():
    t = 0.9
    for ni, nj in ((2, 3), (3, 2), (3, 3)):
        for x1 in range(-5, 3):
            for x2 in range(-5, 3):
                got = kt_kernel(t, STEP, ni, nj, x1, x2)
                want = kt_step_closed(t, ni, nj, x1, x2)
                assert got == pytest.approx(want, rel=1e-10, abs=1e-11)


def test_kernel_biortho_series():
    t, n1, n2 = 0.9, 2, 4
    system = build_biortho(EXPL, t, n_max=n2, window=(-40, 20))
    for x1 in range(-7, 5):
        for x2 in range(-7, 5):
            total = -float(q_weight(n2 - n1, x1, x2))
            for k in range(1, n2 + 1):
                total += psi_residue(EXPL, t, n1, n1 - k, x1) * system.phi_val(
                    n2, n2 - k, x2
                )
            got = kt_kernel(t, EXPL, n1, n2, x1, x2)
            assert got == pytest.approx(total, rel=1e-9, abs=1e-10)


def test_kernel_cross_block_consistency():
    t = 0.9
    floor = _entry(STEP, 3)
    for x1 in range(-6, 4):
        for x2 in range(-6, 4):
            got = kt_kernel(t, STEP, 2, 3, x1, x2)
            want = -float(q_weight(1, x1, x2))
            for w in range(floor, x1):
                want += float(q_weight(1, x1, w)) * kt_kernel(t, STEP, 3, 3, w, x2)
            assert got == pytest.approx(want, rel=1e-11, abs=1e-12)
            got = kt_kernel(t, STEP, 3, 2, x1, x2)
            want = sum(
                float(q_weight(-1, x1, w)) * kt_kernel(t, STEP, 2, 2, w, x2)
                for w in (x1, x1 + 1)
            )
            assert got == pytest.approx(want, rel=1e-11, abs=1e-12)


def test_one_time_kernel_is_projection():
    from kpzlab.exact import _kernel_block_matrix

    t = 0.9
    grid = np.arange(-40, 21)
    kernel = _kernel_block_matrix(t, STEP, [3], [grid])
    prod = kernel @ kernel
    sel = np.s_[8:-10, 8:-10]
    dev = np.abs(prod - kernel)[sel] / np.maximum(1.0, np.abs(kernel))[sel]
    assert dev.max() < 1e-9
    # rank three, so the gap determinant degenerates
    assert abs(det_window(kernel)) < 1e-12


def test_kernel_label_reversal():
    from kpzlab.exact import _kernel_block_matrix, _window_q_power

    t = 0.9
    grid = np.arange(-40, 21)
    k3 = _kernel_block_matrix(t, STEP, [3], [grid])
    k2 = _kernel_block_matrix(t, STEP, [2], [grid])
    moved = _window_q_power(1, grid, grid) @ k3 @ _window_q_power(-1, grid, grid)
    sel = np.s_[8:-10, 8:-10]
    dev = np.abs(moved - k2)[sel] / np.maximum(1.0, np.abs(k2))[sel]
    assert dev.max() < 1e-11


def test_kernel_two_periodic_ladder_matches_contour():
    t = 0.8
    for n in (-1, 0, 2):
        for z1, z2 in ((-1, 0), (0, 0), (2, -1)):
            got = kt_kernel_two_periodic(t, n, z1, z2, tol=1e-8)
            want = kt_two_periodic_closed(t, n, z1, z2)
            assert got == pytest.approx(want, rel=1e-8, abs=1e-9)


def test_kernel_rejects_bad_labels():
    with pytest.raises(ValueError):
        kt_kernel(-0.5, STEP, 1, 1, 0, 0)
    fuzzy = make_initial(kind="explicit", entries=(math.inf, math.inf, 0, -2))
    with pytest.raises(ValueError):
        kt_kernel(0.5, fuzzy, 2, 3, 0, 0)


# ---- transition determinants -----------------------------------------------


def test_transition_time_zero_is_identity():
    assert schuetz_transition((2, -1), (2, -1), 0.0) == 1.0
    assert schuetz_transition((3, -1), (2, -1), 0.0) == 0.0


def test_transition_single_particle_is_poisson():
    for x in range(-1, 9):
        got = schuetz_transition((x,), (-1,), 1.7)
        assert got == pytest.approx(poisson.pmf(x + 1, 1.7), rel=1e-12, abs=1e-15)


def test_transition_never_moves_left():
    assert schuetz_transition((-1, -3), (0, -2), 0.5) == pytest.approx(
        0.0, abs=1e-15
    )


def test_transition_rejects_bad_configurations():
    with pytest.raises(ValueError):
        schuetz_transition((0, 1), (2, 0), 0.5)
    with pytest.raises(ValueError):
        schuetz_transition((1, 0), (2, 2), 0.5)
    with pytest.raises(ValueError):
        schuetz_transition((1, 0), (2, 0, -1), 0.5)
    with pytest.raises(ValueError):
        schuetz_transition((1, 0), (2, 0), -0.1)


def test_transition_normalisation():
    t = 0.7
    y = (0, -2)
    total = 0.0
    for x1 in range(0, 15):
        for x2 in range(-2, x1):
            total += schuetz_transition((x1, x2), y, t)
    assert total == pytest.approx(1.0, abs=2e-7)


def test_transition_semigroup():
    x, y = (2, -1), (0, -2)
    ts, ss = 0.6, 0.7
    total = 0.0
    for w1 in range(-14, 16):
        for w2 in range(-16, w1):
            p1 = schuetz_transition((w1, w2), y, ts)
            if p1 == 0.0:
                continue
            total += p1 * schuetz_transition(x, (w1, w2), ss)
    direct = schuetz_transition(x, y, ts + ss)
    assert total == pytest.approx(direct, rel=1e-10)


# ---- triangular array sums -------------------------------------------------


def test_array_sum_matches_determinant():
    cases = [
        ((1, -2), (0, -3), 1.0, 24),
        ((2, 0, -3), (1, -1, -4), 0.7, 20),
        ((1, -1, -2, -4), (0, -1, -3, -5), 0.5, 16),
    ]
    for x, y, t, pad in cases:
        got = gt_pattern_sum(x, y, t, pad=pad)
        want = schuetz_transition(x, y, t)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_array_sum_report_delta():
    value, delta = gt_pattern_sum((1, -2), (0, -3), 1.0, pad=24, report=True)
    assert value == pytest.approx(schuetz_transition((1, -2), (0, -3), 1.0))
    assert delta < 1e-10


def test_array_sum_rejects_bad_input():
    with pytest.raises(ValueError):
        gt_pattern_sum((0, 1), (0, -1), 0.5)
    with pytest.raises(ValueError):
        gt_pattern_sum((1, 0), (0, -1), 0.5, pad=0)
    with pytest.raises(ValueError):
        gt_pattern_sum((5, 4, 3, 2, 1), (4, 3, 2, 1, 0), 0.5)


def test_interlacing_indicator_examples():
    assert gt_indicator([(0,)]) == 1
    assert gt_indicator([(0,), (-2, 0)]) == 1
    assert gt_indicator([(0,), (-2, 1)]) == 1
    assert gt_indicator([(0,), (0, 1)]) == 0
    assert gt_indicator([(0,), (-2, -1)]) == 0
    with pytest.raises(ValueError):
        gt_indicator([(0, 1)])


@settings(max_examples=120, deadline=None)
@given(st.lists(st.integers(min_value=-5, max_value=5), min_size=6, max_size=6))
def test_interlacing_indicator_property(raw):
    top = (raw[0],)
    mid = tuple(sorted(raw[1:3]))
    bot = tuple(sorted(raw[3:6]))
    levels = (top, mid, bot)
    ok = 1
    prev = None
    for row in levels:
        if prev is not None:
            for i, p in enumerate(prev):
                if not (row[i] < p <= row[i + 1]):
                    ok = 0
        prev = row
    assert gt_indicator(levels) == ok


# ---- joint laws ------------------------------------------------------------


def test_joint_single_matches_free_particle():
    for t, a in ((1.0, -1), (1.0, 1), (2.3, 0)):
        got = multipoint_probability(t, STEP, [(1, a)])
        assert got == pytest.approx(poisson.sf(a + 1, t), rel=1e-9, abs=1e-12)
    got = multipoint_probability(0.8, EXPL, [(1, 4)])
    assert got == pytest.approx(poisson.sf(1, 0.8), rel=1e-9)


def test_joint_two_particles_brute():
    data = make_initial(kind="explicit", entries=(0, -3))
    t, a = 1.1, (-1, -3)
    want = 0.0
    for x1 in range(a[0] + 1, 15):
        for x2 in range(a[1] + 1, min(x1, 12)):
            want += schuetz_transition((x1, x2), (0, -3), t)
    got = multipoint_probability(t, data, [(1, a[0]), (2, a[1])])
    assert got == pytest.approx(want, rel=1e-9)


def test_joint_three_particles_brute():
    data = make_initial(kind="explicit", entries=(1, -2, -4))
    t = 0.8
    want = 0.0
    for x1 in range(2, 15):
        for x2 in range(-1, min(x1, 12)):
            for x3 in range(-3, min(x2, 10)):
                want += schuetz_transition((x1, x2, x3), (1, -2, -4), t)
    got = multipoint_probability(t, data, [(1, 1), (2, -2), (3, -4)])
    assert got == pytest.approx(want, rel=1e-9)


def test_joint_bounds_and_monotonicity():
    t = 1.0
    vals = [
        multipoint_probability(t, STEP, [(1, a), (2, -3)]) for a in (-2, -1, 0, 1)
    ]
    for v in vals:
        assert 0.0 <= v <= 1.0
    for lowa, higha in zip(vals, vals[1:]):
        assert higha <= lowa + 1e-12


def test_joint_trivial_and_invalid_events():
    assert multipoint_probability(1.0, STEP, [(1, -math.inf)]) == 1.0
    with pytest.raises(ValueError):
        multipoint_probability(1.0, STEP, [(1, math.inf)])
    with pytest.raises(ValueError):
        multipoint_probability(1.0, STEP, [])
    with pytest.raises(ValueError):
        multipoint_probability(1.0, STEP, [(2, 0), (1, 0)])
    with pytest.raises(ValueError):
        multipoint_probability(1.0, STEP, [(1, 0)] * 5)
    with pytest.raises(ValueError):
        multipoint_probability(1.0, STEP, [(0, 0)])


def test_joint_report_window():
    value, win = multipoint_probability(
        1.0, STEP, [(1, -1), (2, -3)], report=True
    )
    assert win.indices == (1, 2)
    assert win.thresholds == (-1.0, -3.0)
    assert win.last_delta < 1e-9
    lo1, hi1 = win.intervals[0]
    assert hi1 == -1 and lo1 < -20
    assert win.values.shape[0] == sum(b - a + 1 for a, b in win.intervals)
    assert 0.0 <= value <= 1.0


def test_joint_leading_infinite_prefix_relabels():
    padded = make_initial(
        kind="explicit", entries=(math.inf, math.inf, 2, 0, -1, -4)
    )
    bare = make_initial(kind="explicit", entries=(2, 0, -1, -4))
    t = 0.9
    got = multipoint_probability(t, padded, [(3, 1), (5, -2)])
    want = multipoint_probability(t, bare, [(1, 1), (3, -2)])
    assert got == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        multipoint_probability(t, padded, [(2, 0)])


def test_path_product_matches_extended():
    cases = [
        (1.0, STEP, [(1, -1), (3, -4)]),
        (1.0, STEP, [(1, -1), (2, -2), (3, -3)]),
        (0.9, EXPL, [(2, 2), (4, -2)]),
        (
            0.9,
            make_initial(kind="explicit", entries=(math.inf, math.inf, 2, 0, -1, -4)),
            [(3, 2), (5, 0)],
        ),
        (1.2, make_initial(kind="periodic", d=2), [(1, 0), (3, -3)]),
    ]
    for t, data, events in cases:
        got = path_integral_probability(t, data, events)
        want = multipoint_probability(t, data, events)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-10)


def test_path_product_trivial_events():
    assert path_integral_probability(1.0, STEP, [(2, -math.inf)]) == 1.0
    with pytest.raises(ValueError):
        path_integral_probability(1.0, STEP, [(1, math.inf)])


# ---- two-route weight bridge ----------------------------------------------


def test_weight_bridge_two_particles():
    data = make_initial(kind="explicit", entries=(1, -2))
    out = bfps_l_verify(data, 0.8, window=(-20, 12), trials=60)
    assert out["max_kernel_dev"] < 1e-6
    assert abs(out["weight_sign"]) == 1.0
    assert out["max_weight_dev"] < 1e-8
    assert out["indicator_mismatches"] == 0
    assert out["window"] == (-20, 12)
