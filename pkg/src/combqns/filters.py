"""Closed-form filter functions for piecewise-constant switching functions.

First order:  F_{a,a'}(w, T) = int_0^T dt y_{a,a'}(t) e^{i w t}
Second order: F_{a,a';b,b'}(w, w', T) = int_0^T dt int_0^t dt' y_{a,a'}(t) y_{b,b'}(t') e^{i(w t + w' t')}
G^{+-}_{a,a';b,b'}(w, w') = F_{a,a';b,b'}(w, w') +- F_{b,b';a,a'}(w', w)

All frequencies are angular (rad/s). Evaluation is analytic per interval; when
the switching matrix repeats every cycle the M-cycle filters are assembled
from single-cycle tables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import InvalidInput
from .pulses import TIME_RTOL, Basis, SwitchingMatrix


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _resolve_T(sm: SwitchingMatrix, T: float | None) -> float:
    if T is None:
        return sm.duration
    T = float(T)
    if not (T > 0 and T <= sm.duration * (1 + TIME_RTOL)):
        raise InvalidInput(f"T={T} must lie in (0, {sm.duration}]")
    return min(T, sm.duration)


def _whole_cycles(sm: SwitchingMatrix, T: float) -> int | None:
    """Number of complete cycles spanned by T when it is an exact multiple of T_c."""
    m = round(T / sm.cycle_time)
    if m >= 1 and abs(T - m * sm.cycle_time) <= TIME_RTOL * sm.cycle_time * max(m, 1):
        return m
    return None


def _flat_cols(sm: SwitchingMatrix, entries) -> np.ndarray:
    if entries is None:
        return np.arange(9)
    return np.array([3 * sm.basis.index(a) + sm.basis.index(b) for a, b in entries])


def _cycle_phases(omega: np.ndarray, tc: float, m: int) -> np.ndarray:
    """e^{i w k T_c} for k = 0..m-1, shape (len(omega), m)."""
    out = np.empty((len(omega), m), dtype=complex)
    out[:, 0] = 1.0
    if m > 1:
        # repeated multiplication is far cheaper than m complex exponentials; error grows only ~ m eps
        out[:, 1:] = np.exp(1j * np.asarray(omega) * tc)[:, None]
        np.cumprod(out[:, 1:], axis=1, out=out[:, 1:])
    return out


def _merged_intervals(sm_a: SwitchingMatrix, sm_b: SwitchingMatrix, T: float):
    bp = np.union1d(sm_a.breakpoints, sm_b.breakpoints)
    bp = bp[bp < T * (1 - TIME_RTOL)]
    bp = np.append(bp[np.concatenate([[True], np.diff(bp) > TIME_RTOL * T])], T)
    mids = 0.5 * (bp[:-1] + bp[1:])
    return bp[:-1], np.diff(bp), sm_a.at(mids), sm_b.at(mids)


# ---------------------------------------------------------------------------
# first order
# ---------------------------------------------------------------------------

def first_order_matrix(sm: SwitchingMatrix, omega, T: float | None = None, entries=None) -> np.ndarray:
    """First-order filters for every entry (shape ``(m, 3, 3)``) or for ``entries`` (shape ``(m, k)``)."""
    T = _resolve_T(sm, T)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    cols = _flat_cols(sm, entries)
    cycles = _whole_cycles(sm, T) if sm.periodic else None
    if cycles is not None and cycles > 1:
        c = sm.cycle()
        vals = c.values.reshape(len(c.values), 9)[:, cols]
        f1 = _accel.ff1(c.starts, c.widths, vals, omega)
        f1 = f1 * _cycle_phases(omega, sm.cycle_time, cycles).sum(axis=1)[:, None]
    else:
        starts, widths, vals = sm.intervals(T)
        f1 = _accel.ff1(starts, widths, vals.reshape(len(vals), 9)[:, cols], omega)
    return f1.reshape(-1, 3, 3) if entries is None else f1


def first_order_ff(sm: SwitchingMatrix, entry, omega, T: float | None = None):
    """F^{(1)}_{a,a'}(w, T) for one entry; scalar in, scalar out."""
    scalar = np.ndim(omega) == 0
    out = first_order_matrix(sm, omega, T, entries=[entry])[:, 0]
    return complex(out[0]) if scalar else out.reshape(np.shape(omega))


# ---------------------------------------------------------------------------
# second order
# ---------------------------------------------------------------------------

def _second_order_core(sm_a, cols_a, sm_b, cols_b, w, wp, T):
    same_grid = (sm_a.breakpoints.shape == sm_b.breakpoints.shape
                 and np.array_equal(sm_a.breakpoints, sm_b.breakpoints))
    cycles = None
    if same_grid and sm_a.periodic and sm_b.periodic:
        cycles = _whole_cycles(sm_a, T)
    if cycles is not None and cycles > 1:
        ca, cb = sm_a.cycle(), sm_b.cycle()
        va = ca.values.reshape(-1, 9)[:, cols_a]
        vb = cb.values.reshape(-1, 9)[:, cols_b]
        f2c = _accel.ff2(ca.starts, ca.widths, va, vb, w, wp)
        f1a = _accel.ff1(ca.starts, ca.widths, va, w)
        f1b = _accel.ff1(cb.starts, cb.widths, vb, wp)
        tc = sm_a.cycle_time
        pa = _cycle_phases(w, tc, cycles)
        pb = _cycle_phases(wp, tc, cycles)
        diag = (pa * pb).sum(axis=1)
        # sum over cycle pairs m' < m of e^{i w m T_c} e^{i w' m' T_c}
        cum = np.cumsum(pb, axis=1) - pb
        cross = (pa * cum).sum(axis=1)
        return f2c * diag[:, None, None] + cross[:, None, None] * f1a[:, :, None] * f1b[:, None, :]
    if same_grid:
        starts, widths, va = sm_a.intervals(T)
        vb = sm_b.intervals(T)[2]
    else:
        starts, widths, va, vb = _merged_intervals(sm_a, sm_b, T)
    return _accel.ff2(starts, widths, va.reshape(-1, 9)[:, cols_a], vb.reshape(-1, 9)[:, cols_b], w, wp)


def _pair_freqs(omega, omega_p):
    w, wp = np.broadcast_arrays(np.asarray(omega, dtype=float), np.asarray(omega_p, dtype=float))
    return w.shape, np.ascontiguousarray(w.ravel()), np.ascontiguousarray(wp.ravel())


def second_order_tensor(sm_a: SwitchingMatrix, sm_b: SwitchingMatrix, omega, omega_p,
                        T: float | None = None) -> np.ndarray:
    """All second-order filters, shape ``(m, 3, 3, 3, 3)`` indexed ``[.., a, a', b, b']``."""
    T = _resolve_T(sm_a, T)
    _resolve_T(sm_b, T)
    _, w, wp = _pair_freqs(omega, omega_p)
    out = _second_order_core(sm_a, np.arange(9), sm_b, np.arange(9), w, wp, T)
    return out.reshape(-1, 3, 3, 3, 3)


def second_order_ff(sm_a: SwitchingMatrix, entry_a, sm_b: SwitchingMatrix, entry_b,
                    omega, omega_p, T: float | None = None):
    """F^{(2)}_{a,a';b,b'}(w, w', T) for one entry pair (broadcast over frequencies)."""
    T = _resolve_T(sm_a, T)
    _resolve_T(sm_b, T)
    shape, w, wp = _pair_freqs(omega, omega_p)
    out = _second_order_core(sm_a, _flat_cols(sm_a, [entry_a]), sm_b, _flat_cols(sm_b, [entry_b]), w, wp, T)
    out = out[:, 0, 0]
    return complex(out[0]) if shape == () else out.reshape(shape)


def second_order_rows(sm_a: SwitchingMatrix, row_a, sm_b: SwitchingMatrix, row_b, omega, omega_p,
                      T: float | None = None) -> np.ndarray:
    """F^{(2)}_{a,a';b,b'} for fixed ``a = row_a`` and ``b = row_b``; shape ``(m, 3, 3)`` over (a', b')."""
    T = _resolve_T(sm_a, T)
    _resolve_T(sm_b, T)
    _, w, wp = _pair_freqs(omega, omega_p)
    ia, ib = sm_a.basis.index(row_a), sm_b.basis.index(row_b)
    return _second_order_core(sm_a, 3 * ia + np.arange(3), sm_b, 3 * ib + np.arange(3), w, wp, T)


def g_filters(sm_a: SwitchingMatrix, entry_a, sm_b: SwitchingMatrix, entry_b,
              omega, omega_p, T: float | None = None):
    """(G^+, G^-) for one entry pair, from the second-order filters."""
    f_ab = second_order_ff(sm_a, entry_a, sm_b, entry_b, omega, omega_p, T)
    f_ba = second_order_ff(sm_b, entry_b, sm_a, entry_a, omega_p, omega, T)
    return f_ab + f_ba, f_ab - f_ba


def g_tensor(sm: SwitchingMatrix, omega, omega_p, T: float | None = None):
    """(G^+, G^-) for every entry pair, each shaped ``(m, 3, 3, 3, 3)``."""
    f = second_order_tensor(sm, sm, omega, omega_p, T)
    fs = second_order_tensor(sm, sm, omega_p, omega, T).transpose(0, 3, 4, 1, 2)
    return f + fs, f - fs


# ---------------------------------------------------------------------------
# combs
# ---------------------------------------------------------------------------

def comb_ratio(omega, cycle_time: float, repetitions: int):
    """sin^2(M w T_c / 2) / sin^2(w T_c / 2), equal to M^2 on the harmonics."""
    if repetitions < 1:
        raise InvalidInput("repetitions must be positive")
    x = 0.5 * np.asarray(omega, dtype=float) * cycle_time
    # reduce modulo pi so harmonics land exactly on zero
    r = x - np.pi * np.round(x / np.pi)
    s = np.sin(r)
    near = np.abs(s) < 1e-6
    safe = np.where(near, 1.0, s)
    ratio = (np.sin(repetitions * r) / safe) ** 2
    # Taylor expansion of the Dirichlet kernel around the harmonic
    m = repetitions
    series = m * m * (1.0 - (m * m - 1) * r * r / 3.0)
    out = np.where(near, series, ratio)
    return float(out) if np.ndim(out) == 0 else out


def comb_weight(cycle_time: float, repetitions: int) -> float:
    """Weight A/(2 pi) in (1/2pi) int G S dw ~ A/(2 pi) sum_k G(k w0) S(k w0)."""
    return repetitions / cycle_time


@dataclass(frozen=True)
class FrequencyGrid:
    """Harmonics ``center + k * omega0`` for ``k = -K..K``."""

    omega0: float
    K: int
    center: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise InvalidInput("fundamental frequency must be positive")
        if self.K < 0:
            raise InvalidInput("K must be non-negative")

    @classmethod
    def for_cycle(cls, cycle_time: float, K: int, center: float = 0.0) -> "FrequencyGrid":
        return cls(2 * math.pi / cycle_time, K, center)

    @property
    def harmonics(self) -> np.ndarray:
        return self.center + self.omega0 * np.arange(-self.K, self.K + 1)


# ---------------------------------------------------------------------------
# generalized filters for the accessible quantities
# ---------------------------------------------------------------------------

_J = (-1, 0, 1)


def _generalized_from_f1(p: int, A: np.ndarray, B: np.ndarray, j: int, l: int) -> np.ndarray:
    """Kernel p for bath indices (j, l); A = F1(w + j W), B = F1(-w + l W) as (m, 3, 3)."""
    a = A[:, j + 1, :]
    b = B[:, l + 1, :]
    if p == 1:
        return -2.0 * a[:, 2] * b[:, 0]
    if p == 2:
        return -2.0 * a[:, 0] * b[:, 2]
    if p == 3:
        out = -2.0 * a[:, 1] * b[:, 1]
        for jp in (-1, 1):
            for lp in (-1, 1):
                out = out + jp * lp * a[:, jp + 1] * b[:, lp + 1]
        return out
    if p == 4:
        out = np.zeros(a.shape[0], dtype=complex)
        for jp in _J:
            for lp in _J:
                if abs(jp + lp) == 1:
                    out = out + (lp - jp) * a[:, jp + 1] * b[:, lp + 1]
        return -math.sqrt(2.0) * out
    raise InvalidInput(f"generalized filter index p must be 1..4, got {p!r}")


def _check_spherical(sm: SwitchingMatrix):
    if sm.basis is not Basis.SPHERICAL:
        raise InvalidInput("generalized filters need a spherical-basis switching matrix")


def generalized_filter(sm: SwitchingMatrix, p: int, j: int, l: int, omega, T: float | None = None,
                       splitting: float = 0.0):
    """Kernel multiplying S_{j,l}(w) in the accessible quantity Q_p.

    With ``G^+_{j,j';l,l'}`` evaluated at ``(w - j W, -w - l W)`` (W the qubit
    splitting), Q_p(T) = sum_{j,l} int dw/2pi  kernel_p[j,l](w) S_{j,l}(w).
    """
    if p not in (1, 2, 3, 4):
        raise InvalidInput(f"generalized filter index p must be 1..4, got {p!r}")
    if j not in _J or l not in _J:
        raise InvalidInput("spherical indices must be -1, 0 or 1")
    _check_spherical(sm)
    scalar = np.ndim(omega) == 0
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    A = first_order_matrix(sm, w - j * splitting, T)
    B = first_order_matrix(sm, -w - l * splitting, T)
    out = _generalized_from_f1(p, A, B, -j, -l)
    return complex(out[0]) if scalar else out.reshape(np.shape(omega))


def generalized_filters_all(sm: SwitchingMatrix, omega, T: float | None = None, splitting: float = 0.0,
                            balanced_only: bool = False) -> np.ndarray:
    """Kernels for every p at once, shape ``(m, 4, 3, 3)`` indexed ``[.., p - 1, j + 1, l + 1]``."""
    _check_spherical(sm)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    A = {j: first_order_matrix(sm, w - j * splitting, T) for j in _J}
    B = {l: first_order_matrix(sm, -w - l * splitting, T) for l in _J}
    out = np.zeros((w.size, 4, 3, 3), dtype=complex)
    for p in (1, 2, 3, 4):
        for j in _J:
            for l in _J:
                if balanced_only and j + l != 0:
                    continue
                out[:, p - 1, j + 1, l + 1] = _generalized_from_f1(p, A[j], B[l], -j, -l)
    return out


def generalized_filters(sm: SwitchingMatrix, p: int, omega, T: float | None = None, splitting: float = 0.0,
                        balanced_only: bool = False) -> np.ndarray:
    """All nine kernels for Q_p, shape ``(m, 3, 3)`` indexed ``[.., j + 1, l + 1]``."""
    if p not in (1, 2, 3, 4):
        raise InvalidInput(f"generalized filter index p must be 1..4, got {p!r}")
    return generalized_filters_all(sm, omega, T, splitting, balanced_only)[:, p - 1]


# ---------------------------------------------------------------------------
# parity and imbalanced terms
# ---------------------------------------------------------------------------

def parity_components(g_at_w, g_at_minus_w):
    """Even and odd parts (G(w) + G(-w))/2 and (G(w) - G(-w))/2."""
    g1 = np.asarray(g_at_w)
    g2 = np.asarray(g_at_minus_w)
    return (g1 + g2) / 2, (g1 - g2) / 2


@dataclass(frozen=True)
class ImbalancedEstimate:
    o_plus: float
    o_minus: float
    alpha: float
    bound: float


def imbalanced_bound(o_plus: float, o_minus: float, T: float, alpha_tol: float = 1e-12) -> ImbalancedEstimate:
    """Upper bound on the triangle integral of e^{i(t+ o+ + t- o-)} for imbalanced filters.

    Raises :class:`InvalidInput` when ``o_plus == 0``: the filter is balanced
    and the bound does not apply.
    """
    if o_plus == 0:
        raise InvalidInput("o_plus = 0: balanced filter, imbalance bound not applicable")
    if not T > 0:
        raise InvalidInput("T must be positive")
    alpha = o_plus / o_minus if o_minus != 0 else math.inf
    x = o_plus * T
    if abs(alpha - 1.0) <= alpha_tol:
        bound = T * T * (1.0 / x**2 + abs(1.0 / (2.0 * x)))
    elif math.isinf(alpha):
        # o_minus = 0: limit alpha -> infinity of the general branch
        bound = T * T / x**2 * 4.0
    else:
        terms = abs(alpha / (1 + alpha)) if alpha != -1 else math.inf
        terms += abs(2 * alpha**2 / (alpha**2 - 1)) if abs(alpha) != 1 else math.inf
        terms += abs(alpha / (alpha - 1))
        bound = T * T / x**2 * terms
    return ImbalancedEstimate(float(o_plus), float(o_minus), float(alpha), float(bound))
