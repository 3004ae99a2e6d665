import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import quad_first_order, quad_second_order, random_sequence
from combqns.errors import InvalidInput
from combqns.filters import (FrequencyGrid, comb_ratio, comb_weight, first_order_ff, first_order_matrix,
                             g_filters, g_tensor, generalized_filter, generalized_filters, generalized_filters_all,
                             imbalanced_bound, parity_components, second_order_ff, second_order_tensor)
from combqns.pulses import (Basis, PulseSequence, SymmetrySpec, builtin_sequence, check_symmetry,
                            sequence_from_axes, switching_matrix)

TC = 1e-6
W0 = 2 * math.pi / TC
seeds = st.integers(0, 2**31)


def free(m=1):
    return switching_matrix(PulseSequence((), TC, m), Basis.CARTESIAN)


def phi(x, T):
    """int_0^T e^{i x t} dt."""
    return T if x == 0 else (np.exp(1j * x * T) - 1) / (1j * x)


# first order ----------------------------------------------------------------

@pytest.mark.parametrize("omega", [0.0, 0.37 * W0, -2.3 * W0, 11.1 * W0])
def test_free_evolution_closed_form(omega):
    sm = free()
    assert first_order_ff(sm, ("x", "x"), omega) == pytest.approx(phi(omega, TC), abs=1e-20)
    assert first_order_ff(sm, ("x", "y"), omega) == 0


def test_zero_frequency_is_duration():
    assert first_order_ff(free(3), ("z", "z"), 0.0) == pytest.approx(3 * TC, rel=1e-14)


@pytest.mark.parametrize("k", [1, 2, 5, -3])
def test_harmonics_vanish_for_free_evolution(k):
    assert abs(first_order_ff(free(2), ("y", "y"), k * W0)) < 1e-20


@given(seeds, st.integers(1, 3), st.sampled_from(list(Basis)))
def test_first_order_matches_quadrature(seed, m, basis):
    rng = np.random.default_rng(seed)
    sm = switching_matrix(random_sequence(rng, repetitions=m), basis)
    omega = rng.uniform(-6, 6) * W0
    F = first_order_matrix(sm, omega)[0]
    for a, b in [(0, 0), (0, 2), (2, 1)]:
        entry = (basis.labels[a], basis.labels[b])
        assert F[a, b] == pytest.approx(quad_first_order(sm, entry, omega), abs=1e-12 * TC)


def test_partial_time_matches_quadrature():
    sm = switching_matrix(builtin_sequence(3, TC, 3), Basis.CARTESIAN)
    T = 1.7 * TC
    for w in (0.4 * W0, 3.1 * W0):
        assert first_order_ff(sm, ("x", "z"), w, T) == pytest.approx(
            quad_first_order(sm, ("x", "z"), w, T), abs=1e-12 * TC)


def test_time_outside_sequence_rejected():
    with pytest.raises(InvalidInput):
        first_order_ff(free(), ("x", "x"), 1.0, 2 * TC)


@given(seeds)
def test_cartesian_conjugation(seed):
    sm = switching_matrix(random_sequence(np.random.default_rng(seed), repetitions=2), Basis.CARTESIAN)
    w = np.linspace(-5, 5, 11) * W0
    assert np.allclose(first_order_matrix(sm, -w), np.conj(first_order_matrix(sm, w)), atol=1e-20)


@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_comb_identity(seed, ident, m):
    # the cycle propagator must be +-1 for the switching functions to repeat
    rng = np.random.default_rng(seed)
    one = switching_matrix(builtin_sequence(ident, TC), Basis.CARTESIAN)
    many = switching_matrix(builtin_sequence(ident, TC, m), Basis.CARTESIAN)
    w = rng.uniform(-4, 4, 7) * W0
    lhs = np.abs(first_order_matrix(many, w)) ** 2
    rhs = np.abs(first_order_matrix(one, w)) ** 2 * comb_ratio(w, TC, m)[:, None, None]
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-10 * (m * TC) ** 2)


# comb ratio -----------------------------------------------------------------

def test_comb_ratio_limits():
    assert comb_ratio(3 * W0, TC, 7) == pytest.approx(49)
    assert comb_ratio(0.0, TC, 7) == pytest.approx(49)
    assert comb_ratio(W0 * (3 + 1e-9), TC, 7) == pytest.approx(49, rel=1e-8)
    assert np.allclose(comb_ratio(np.linspace(-3, 3, 13) * W0 + 0.123, TC, 1), 1)
    assert comb_ratio(W0 / 4, TC, 4) == pytest.approx(0, abs=1e-24)
    assert comb_weight(TC, 20) == 20 / TC
    with pytest.raises(InvalidInput):
        comb_ratio(1.0, TC, 0)


@given(st.floats(-20, 20), st.integers(1, 40))
def test_comb_ratio_is_dirichlet_kernel(x, m):
    w = x * W0
    direct = abs(np.exp(1j * w * TC * np.arange(m)).sum()) ** 2
    assert comb_ratio(w, TC, m) == pytest.approx(direct, rel=1e-7, abs=1e-7)


def test_comb_sum_converges_with_repetitions():
    """(1/2pi) int |F_M|^2 S -> (M/T_c) sum_k |F_c(k w0)|^2 S(k w0) as M grows."""
    one = switching_matrix(builtin_sequence(1, TC), Basis.CARTESIAN)
    s = lambda w: np.exp(-0.5 * (w / (0.6 * W0)) ** 2) + 0.5 * np.exp(-0.5 * ((w - 2 * W0) / (0.8 * W0)) ** 2)
    w = np.linspace(-12 * W0, 12 * W0, 400_001)
    f1 = np.abs(first_order_matrix(one, w, entries=[("z", "z")])[:, 0]) ** 2
    k = np.arange(-12, 13) * W0
    fk = np.abs(first_order_matrix(one, k, entries=[("z", "z")])[:, 0]) ** 2
    errs = []
    for m in (5, 10, 20):
        exact = np.trapezoid(f1 * comb_ratio(w, TC, m) * s(w), w) / (2 * math.pi)
        comb = comb_weight(TC, m) * np.sum(fk * s(k))
        errs.append(abs(comb - exact) / abs(exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02


def test_frequency_grid():
    g = FrequencyGrid.for_cycle(TC, 2, center=5.0)
    assert np.allclose(g.harmonics, 5.0 + W0 * np.arange(-2, 3))
    with pytest.raises(InvalidInput):
        FrequencyGrid(0.0, 2)
    with pytest.raises(InvalidInput):
        FrequencyGrid(1.0, -1)


# second order ----------------------------------------------------------------

def test_free_second_order_at_zero():
    sm = free()
    assert second_order_ff(sm, ("x", "x"), sm, ("x", "x"), 0.0, 0.0) == pytest.approx(TC**2 / 2)
    assert second_order_ff(sm, ("x", "x"), sm, ("y", "y"), 0.3 * W0, -0.3 * W0) == pytest.approx(
        (TC - phi(0.3 * W0, TC)) / (1j * 0.3 * W0), rel=1e-12)


@pytest.mark.parametrize("m", [1, 3])
def test_second_order_matches_quadrature(m):
    rng = np.random.default_rng(7)
    seq = random_sequence(rng, n_pulses=2, repetitions=m)
    sm = switching_matrix(seq, Basis.CARTESIAN)
    for (w, wp) in [(0.7 * W0, -1.3 * W0), (2.2 * W0, 0.4 * W0)]:
        got = second_order_ff(sm, ("x", "z"), sm, ("y", "x"), w, wp)
        ref = quad_second_order(sm, ("x", "z"), sm, ("y", "x"), w, wp)
        assert got == pytest.approx(ref, abs=1e-11 * (m * TC) ** 2)


def test_g_minus_matches_quadrature():
    sm = switching_matrix(builtin_sequence(1, TC), Basis.CARTESIAN)
    w, wp = 1.1 * W0, -0.6 * W0
    _, gm = g_filters(sm, ("x", "x"), sm, ("y", "y"), w, wp)
    ref = quad_second_order(sm, ("x", "x"), sm, ("y", "y"), w, wp) \
        - quad_second_order(sm, ("y", "y"), sm, ("x", "x"), wp, w)
    assert gm == pytest.approx(ref, abs=1e-11 * TC**2)


@given(seeds, st.integers(1, 4))
def test_g_plus_factorizes(seed, m):
    rng = np.random.default_rng(seed)
    sm = switching_matrix(random_sequence(rng, repetitions=m), Basis.SPHERICAL)
    w, wp = rng.uniform(-5, 5, 2) * W0
    gp, _ = g_tensor(sm, w, wp)
    f1w = first_order_matrix(sm, w)[0]
    f1wp = first_order_matrix(sm, wp)[0]
    assert np.allclose(gp[0], np.einsum("ab,cd->abcd", f1w, f1wp), atol=1e-10 * (m * TC) ** 2)


@given(seeds)
def test_periodic_second_order_matches_direct(seed):
    rng = np.random.default_rng(seed)
    seq = random_sequence(rng, repetitions=3)
    sm = switching_matrix(seq, Basis.CARTESIAN)
    w, wp = rng.uniform(-3, 3, 2) * W0
    fast = second_order_tensor(sm, sm, w, wp)
    # T slightly below the full duration forces the interval-by-interval path
    eps = 1e-13 * TC
    slow = second_order_tensor(sm, sm, w, wp, 3 * TC - eps)
    assert np.allclose(fast, slow, atol=1e-9 * (3 * TC) ** 2)


def test_second_order_mixed_grids():
    a = switching_matrix(builtin_sequence(1, TC), Basis.CARTESIAN)
    b = switching_matrix(sequence_from_axes(TC, 1, [("1/3", "x")]), Basis.CARTESIAN)
    got = second_order_ff(a, ("z", "z"), b, ("y", "y"), 0.9 * W0, 0.2 * W0)
    ref = quad_second_order_mixed(a, ("z", "z"), b, ("y", "y"), 0.9 * W0, 0.2 * W0)
    assert got == pytest.approx(ref, abs=1e-11 * TC**2)


def quad_second_order_mixed(sm_a, ea, sm_b, eb, w, wp):
    from scipy import integrate

    def f(tp, t, part):
        v = sm_a.at(t)[sm_a.basis.index(ea[0]), sm_a.basis.index(ea[1])] \
            * sm_b.at(tp)[sm_b.basis.index(eb[0]), sm_b.basis.index(eb[1])] * np.exp(1j * (w * t + wp * tp))
        return v.real if part == 0 else v.imag

    bp = np.union1d(sm_a.breakpoints, sm_b.breakpoints)
    edges = np.append(bp[bp < TC], TC)
    total = 0j
    # split the triangle into rectangles and diagonal triangles so the integrand is smooth on each piece
    for i in range(len(edges) - 1):
        for j in range(i + 1):
            lo, hi = edges[j], edges[j + 1]
            upper = (lambda t, hi=hi: hi) if j < i else (lambda t: t)
            for part, scale in ((0, 1), (1, 1j)):
                total += scale * integrate.dblquad(f, edges[i], edges[i + 1], lambda t, lo=lo: lo, upper,
                                                   args=(part,), epsabs=0, epsrel=1e-11)[0]
    return total


# generalized filters ---------------------------------------------------------

def test_generalized_free_evolution():
    W = 5 * W0
    sm = switching_matrix(PulseSequence((), TC, 2), Basis.SPHERICAL)
    w = np.linspace(-3, 3, 9) * W0 + 0.1
    g = generalized_filters_all(sm, w, splitting=W)
    expected = -2 * np.abs(np.array([phi(x + W, 2 * TC) for x in w])) ** 2
    assert np.allclose(g[:, 0, 0, 2], expected, rtol=1e-12, atol=1e-26)
    mask = np.ones((3, 3), bool)
    mask[0, 2] = False
    assert np.allclose(g[:, 0][:, mask], 0)


def test_generalized_single_matches_bulk():
    sm = switching_matrix(builtin_sequence(4, TC, 2), Basis.SPHERICAL)
    w = np.array([0.3, -1.7]) * W0
    bulk = generalized_filters_all(sm, w, splitting=2 * W0)
    for p in (1, 2, 3, 4):
        assert np.allclose(generalized_filters(sm, p, w, splitting=2 * W0), bulk[:, p - 1])
        for j in (-1, 0, 1):
            for l in (-1, 0, 1):
                assert np.allclose(generalized_filter(sm, p, j, l, w, splitting=2 * W0), bulk[:, p - 1, j + 1, l + 1])


def test_balanced_fourth_kernel_vanishes_for_z_pulses():
    sm = switching_matrix(sequence_from_axes(TC, 3, [("1/4", "z"), ("3/4", "z")]), Basis.SPHERICAL)
    g = generalized_filters_all(sm, np.linspace(-4, 4, 17) * W0, balanced_only=True)
    assert np.allclose(g[:, 3], 0)
    assert np.abs(g[:, 0]).max() > 0


def test_generalized_input_validation():
    sph = switching_matrix(builtin_sequence(1, TC), Basis.SPHERICAL)
    cart = switching_matrix(builtin_sequence(1, TC), Basis.CARTESIAN)
    with pytest.raises(InvalidInput):
        generalized_filters(sph, 5, 0.0)
    with pytest.raises(InvalidInput):
        generalized_filter(sph, 1, 2, 0, 0.0)
    with pytest.raises(InvalidInput):
        generalized_filters_all(cart, 0.0)


# parity and imbalance ----------------------------------------------------------

@given(st.lists(st.complex_numbers(max_magnitude=1e3), min_size=2, max_size=2))
def test_parity_components_recombine(vals):
    even, odd = parity_components(vals[0], vals[1])
    assert even + odd == pytest.approx(vals[0])
    assert even - odd == pytest.approx(vals[1])


def test_imbalanced_bound_equal_offsets():
    T, o = 2e-6, 3e9
    est = imbalanced_bound(o, o, T)
    x = o * T
    assert est.alpha == 1
    assert est.bound == pytest.approx(T * T * (1 / x**2 + 1 / (2 * x)))


def test_imbalanced_bound_requires_nonzero_offset():
    with pytest.raises(InvalidInput):
        imbalanced_bound(0.0, 1.0, 1e-6)
    with pytest.raises(InvalidInput):
        imbalanced_bound(1.0, 1.0, 0.0)


@given(st.floats(1e8, 1e11), st.floats(-3, 3).filter(lambda a: min(abs(a - 1), abs(a + 1), abs(a)) > 0.05))
def test_imbalanced_bound_dominates_triangle_integral(o_plus, ratio):
    """Integral of e^{i(t+ o+ + t- o-)} over t- in [0, T/2], t+ in [t-, T - t-]."""
    T = 1e-6
    o_minus = o_plus / ratio
    est = imbalanced_bound(o_plus, o_minus, T)
    exact = (np.exp(1j * o_plus * T) * phi(o_minus - o_plus, T / 2) - phi(o_minus + o_plus, T / 2)) / (1j * o_plus)
    assert abs(exact) <= est.bound * (1 + 1e-9)


@pytest.mark.parametrize("ident", [1, 3, 4, 6])
def test_parity_selection(ident):
    """Mirror-symmetric pairs give even G+(w, -w); mirror pairs of opposite sign give odd ones."""
    sm = switching_matrix(builtin_sequence(ident, TC, 1), Basis.CARTESIAN)
    T = sm.duration
    parity = {}
    for a in "xyz":
        for sign in (1, -1):
            if check_symmetry(sm, (a, a), SymmetrySpec("mirror", T, sign)):
                parity[a] = sign
    assert parity
    w = np.linspace(0.1, 4, 15) * W0
    for a in parity:
        for b in parity:
            gp, _ = g_filters(sm, (a, a), sm, (b, b), w, -w)
            gm, _ = g_filters(sm, (a, a), sm, (b, b), -w, w)
            even, odd = parity_components(gp, gm)
            peak = np.abs(gp).max()
            if parity[a] == parity[b]:
                assert np.abs(odd).max() <= 1e-10 * peak
            else:
                assert np.abs(even).max() <= 1e-10 * peak


def test_imbalanced_terms_negligible_at_reference_parameters():
    W, tc, m = 2 * math.pi * 27e9, 2.4e-6, 20
    sm = switching_matrix(builtin_sequence(3, tc, m), Basis.SPHERICAL)
    w = np.linspace(-8, 8, 161) * 2 * math.pi / tc
    g = np.abs(generalized_filters_all(sm, w, splitting=W))
    balanced = max(g[:, :, j + 1, -j + 1].max() for j in (-1, 0, 1))
    imbalanced = max(g[:, :, j + 1, l + 1].max() for j in (-1, 0, 1) for l in (-1, 0, 1) if j + l != 0)
    assert imbalanced < 1e-3 * balanced
