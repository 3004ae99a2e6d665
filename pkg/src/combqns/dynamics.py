"""Second-order cumulant dynamics, accessible quantities and a Monte-Carlo oracle.

For an observable sigma_gamma the reduced dynamics is summarized by a 2x2
operator ``K_gamma`` with

    E(sigma_gamma(T)) = tr[exp(K_gamma) rho_S sigma_gamma],
    K_gamma = sum_beta C_{gamma,beta} sigma_beta   (beta = 0, x, y, z),

truncated at second order in the noise. With H(t) = sum g_{a,a'}(t) sigma_{a'} B_a(t),
sigma_bar = sigma_gamma sigma sigma_gamma and C_ab(t - t') = <B_a(t) B_b(t')>,

    K_gamma = sum int dw/2pi S_ab(w) { F_{a;b}(w, -w) [sigma_bar_{a'} sigma_{b'} - sigma_{a'} sigma_{b'}]
                                     + F_{b;a}(-w, w) [sigma_bar_{a'} sigma_{b'} - sigma_bar_{a'} sigma_bar_{b'}] }.

In the spherical basis g_{j,j'}(t) = e^{i j W t} y_{j,j'}(t) couples sigma_{j'} to
B_{-j}, so the frequency arguments shift by j W and l W.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ExtractionFailure, InvalidInput, NumericalFailure
from .filters import first_order_matrix, g_tensor, generalized_filters_all, second_order_rows
from .noise import SpectrumSet, sample_classical_array, to_basis
from .pulses import (I2, PAULI, SPHERICAL, TIME_RTOL, Basis, PulseSequence, is_diagonal,
                     switching_matrix)

AXES = ("x", "y", "z")
PAULI4 = np.array([I2, *PAULI])  # sigma_0 = identity, then x, y, z
_GL_CACHE: dict = {}


def _axis(label) -> int:
    if isinstance(label, str) and label in AXES:
        return AXES.index(label)
    if isinstance(label, (int, np.integer)) and 0 <= label <= 2:
        return int(label)
    raise InvalidInput(f"axis must be x, y or z, got {label!r}")


def pauli_sign(alpha, gamma) -> int:
    """f^gamma_alpha = tr[s_alpha s_gamma s_alpha s_gamma]/2; alpha may be 0 (identity)."""
    s_a = I2 if alpha == 0 else PAULI[_axis(alpha)]
    s_g = PAULI[_axis(gamma)]
    return int(round(np.trace(s_a @ s_g @ s_a @ s_g).real / 2))


@dataclass(frozen=True)
class SystemConfig:
    """Qubit splitting and frequency-integration controls (all rad/s)."""

    splitting: float = 0.0
    omega_cut: float = 2 * math.pi * 100e6
    rtol: float = 1e-8
    nodes_per_panel: int = 8
    max_refinements: int = 6
    drop_imbalanced: bool = False

    def __post_init__(self):
        if not (self.splitting >= 0 and math.isfinite(self.splitting)):
            raise InvalidInput("splitting must be finite and non-negative")
        if not self.omega_cut > 0:
            raise InvalidInput("omega_cut must be positive")
        if self.nodes_per_panel < 2 or self.max_refinements < 1:
            raise InvalidInput("need at least 2 nodes per panel and 1 refinement")


@dataclass(frozen=True)
class MeasurementSetting:
    """Prepare (I + sign sigma_prep)/2, measure sigma_observable."""

    sign: int
    prep: str
    observable: str

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidInput("preparation sign must be +1 or -1")
        _axis(self.prep)
        _axis(self.observable)

    @property
    def rho(self) -> np.ndarray:
        return 0.5 * (I2 + self.sign * PAULI[_axis(self.prep)])


@dataclass(frozen=True)
class CumulantCoefficients:
    """C_{gamma,beta} for beta = 0, x, y, z (``values``) and the operator sum_beta C sigma_beta."""

    gamma: str
    values: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.einsum("b,bij->ij", self.values, PAULI4)

    def __getitem__(self, beta) -> complex:
        return complex(self.values[0 if beta == 0 else 1 + _axis(beta)])

    @classmethod
    def from_matrix(cls, gamma: str, k: np.ndarray) -> "CumulantCoefficients":
        vals = np.array([np.trace(k @ p) / 2 for p in PAULI4])
        return cls(gamma, vals)


# ---------------------------------------------------------------------------
# frequency integration
# ---------------------------------------------------------------------------

def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _merge(intervals):
    ivs = sorted((float(lo), float(hi)) for lo, hi in intervals if hi > lo)
    out = []
    for lo, hi in ivs:
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def integration_intervals(spec: SpectrumSet, sys: SystemConfig, mirrored: bool = False):
    """Frequency intervals visited by spectral integrals."""
    ivs = spec.mirrored_support() if mirrored else spec.support
    if ivs is None:
        c = sys.omega_cut
        ivs = [(-c, c)]
        if sys.splitting > 0:
            ivs += [(-sys.splitting - c, -sys.splitting + c), (sys.splitting - c, sys.splitting + c)]
    return _merge(ivs)


def frequency_nodes(intervals, T: float, level: int, nodes_per_panel: int = 8):
    """Composite Gauss-Legendre nodes/weights, panel width (2 pi / T) / 2^level."""
    x, wts = _gauss_legendre(nodes_per_panel)
    base = 2 * math.pi / T
    nodes, weights = [], []
    for lo, hi in intervals:
        npan = max(1, int(math.ceil((hi - lo) / base - 1e-9))) * (1 << level)
        npan = max(npan, 4 * (1 << level))
        edges = np.linspace(lo, hi, npan + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * x[None, :]).ravel())
        weights.append((half[:, None] * wts[None, :]).ravel())
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


def integrate_spectral(fn, intervals, T: float, sys: SystemConfig, chunk: int = 4096):
    """(1/2pi) int dw fn(w) over ``intervals`` with panel refinement.

    ``fn`` maps a node array to an array whose first axis runs over nodes.
    Raises :class:`NumericalFailure` if successive refinements keep differing
    by more than ``sys.rtol`` relative.
    """
    if not intervals:
        return None

    def run(level):
        nodes, weights = frequency_nodes(intervals, T, level, sys.nodes_per_panel)
        acc = None
        for s in range(0, len(nodes), chunk):
            vals = np.asarray(fn(nodes[s:s + chunk]))
            part = np.tensordot(weights[s:s + chunk], vals, axes=(0, 0))
            acc = part if acc is None else acc + part
        return acc / (2 * math.pi)

    prev = run(0)
    for level in range(1, sys.max_refinements + 1):
        cur = run(level)
        scale = float(np.max(np.abs(cur), initial=0.0))
        diff = float(np.max(np.abs(cur - prev), initial=0.0))
        if diff <= sys.rtol * scale or scale == 0.0:
            return cur
        prev = cur
    raise NumericalFailure(f"frequency integral not converged: relative change {diff / scale:.2e}")


# ---------------------------------------------------------------------------
# second cumulant
# ---------------------------------------------------------------------------

def _bar_products(ops: np.ndarray, gamma: str):
    """X[a', b'] = s_bar_a' s_b' - s_a' s_b' and Y[a', b'] = s_bar_a' s_b' - s_bar_a' s_bar_b'."""
    g = PAULI[_axis(gamma)]
    bar = np.einsum("ij,ajk,kl->ail", g, ops, g)
    ss = np.einsum("aij,bjk->abik", ops, ops)
    bs = np.einsum("aij,bjk->abik", bar, ops)
    bb = np.einsum("aij,bjk->abik", bar, bar)
    return bs - ss, bs - bb


def spherical_kernel_integrals(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig,
                               T: float | None = None):
    """Integrals A[j, l, j', l'] and B[j, l, j', l'] shared by every observable.

    A = int dw/2pi S_{-j,-l}(w) F_{j j'; l l'}(w + jW, -w + lW)
    B = int dw/2pi S_{-j,-l}(w) F_{l l'; j j'}(-w + lW, w + jW)
    """
    sm = switching_matrix(seq, Basis.SPHERICAL)
    T = sm.duration if T is None else T
    sph = to_basis(noise, Basis.SPHERICAL)
    W = sys.splitting
    ivs = integration_intervals(sph, sys)
    pairs = [(j, l) for j in (-1, 0, 1) for l in (-1, 0, 1) if not (sys.drop_imbalanced and j + l != 0)]

    def fn(w):
        s = sph.matrix(w)
        out = np.zeros((len(w), 2, 3, 3, 3, 3), dtype=complex)
        for j, l in pairs:
            sjl = s[:, 1 - j, 1 - l][:, None, None]
            fa = second_order_rows(sm, j, sm, l, w + j * W, -w + l * W, T)
            fb = second_order_rows(sm, l, sm, j, -w + l * W, w + j * W, T)
            out[:, 0, j + 1, l + 1] = sjl * fa
            out[:, 1, j + 1, l + 1] = sjl * np.swapaxes(fb, 1, 2)
        return out

    res = integrate_spectral(fn, ivs, T, sys)
    if res is None:
        res = np.zeros((2, 3, 3, 3, 3), dtype=complex)
    return res[0], res[1]


def _assemble_spherical(A, B, gamma: str) -> np.ndarray:
    X, Y = _bar_products(SPHERICAL, gamma)
    return np.einsum("jlab,abik->ik", A, X) + np.einsum("jlab,abik->ik", B, Y)


def second_cumulant_spherical(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig, gamma: str,
                              T: float | None = None):
    """(K_gamma, coefficients) from the spherical-basis expression (any splitting)."""
    A, B = spherical_kernel_integrals(seq, noise, sys, T)
    k = _assemble_spherical(A, B, gamma)
    return k, CumulantCoefficients.from_matrix(gamma, k)


def cartesian_kernel_integrals(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig,
                               T: float | None = None):
    """P[a', b'] = int dw/4pi sum_ab S_ab G+_{a a'; b b'}(w, -w) and Q likewise with G-."""
    if sys.splitting != 0:
        raise InvalidInput("the Cartesian form requires zero qubit splitting")
    sm = switching_matrix(seq, Basis.CARTESIAN)
    T = sm.duration if T is None else T
    cart = to_basis(noise, Basis.CARTESIAN)
    ivs = integration_intervals(cart, sys)

    def fn(w):
        s = cart.matrix(w)
        gp, gm = g_tensor(sm, w, -w, T)
        p = np.einsum("mab,maxby->mxy", s, gp) / 2
        q = np.einsum("mab,maxby->mxy", s, gm) / 2
        return np.stack([p, q], axis=1)

    res = integrate_spectral(fn, ivs, T, sys)
    if res is None:
        res = np.zeros((2, 3, 3), dtype=complex)
    return res[0], res[1]


def _assemble_cartesian(P, Q, gamma: str) -> np.ndarray:
    f = np.array([pauli_sign(a, gamma) for a in AXES])
    ff = f[:, None] * f[None, :]
    coef_p = 2 * f[:, None] - 1 - ff
    coef_q = ff - 1
    ss = np.einsum("aij,bjk->abik", PAULI, PAULI)
    return np.einsum("ab,abik->ik", coef_p * P + coef_q * Q, ss)


def second_cumulant_cartesian(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig, gamma: str,
                              T: float | None = None):
    """(K_gamma, coefficients) from the Cartesian G+/G- expression with f-signs (zero splitting)."""
    P, Q = cartesian_kernel_integrals(seq, noise, sys, T)
    k = _assemble_cartesian(P, Q, gamma)
    return k, CumulantCoefficients.from_matrix(gamma, k)


def cumulant_coefficients(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig,
                          gammas=AXES, T: float | None = None) -> dict:
    """Coefficients for several observables from one set of kernel integrals."""
    A, B = spherical_kernel_integrals(seq, noise, sys, T)
    return {g: CumulantCoefficients.from_matrix(g, _assemble_spherical(A, B, g)) for g in gammas}


# ---------------------------------------------------------------------------
# expectation values and accessible quantities
# ---------------------------------------------------------------------------

def cumulant_exponential(coeffs: CumulantCoefficients) -> np.ndarray:
    """exp(c0 I + v.sigma) = e^{c0} (cosh h I + sinh(h)/h v.sigma), h = sqrt(v.v)."""
    c0 = coeffs.values[0]
    v = coeffs.values[1:]
    h = np.sqrt(np.sum(v * v) + 0j)
    if not (np.isfinite(c0) and np.all(np.isfinite(v))):
        raise NumericalFailure("non-finite cumulant coefficients")
    shc = np.sinh(h) / h if abs(h) > 1e-8 else 1.0 + h * h / 6.0
    out = np.exp(c0) * (np.cosh(h) * I2 + shc * np.einsum("b,bij->ij", v, PAULI))
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("cumulant exponential overflowed")
    return out


def expectation_value(rho: np.ndarray, gamma: str, coeffs: CumulantCoefficients, imag_tol: float = 1e-9) -> float:
    """tr[exp(K_gamma) rho sigma_gamma]; the imaginary residue must stay below ``imag_tol``."""
    val = np.trace(cumulant_exponential(coeffs) @ np.asarray(rho) @ PAULI[_axis(gamma)])
    if abs(val.imag) > imag_tol * max(1.0, abs(val.real)):
        raise NumericalFailure(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def setting_expectations(coeffs: CumulantCoefficients) -> dict:
    """E for every preparation (sign, axis) of the observable ``coeffs.gamma``."""
    return {(s, a): expectation_value(MeasurementSetting(s, a, coeffs.gamma).rho, coeffs.gamma, coeffs)
            for s in (1, -1) for a in AXES}


def accessible_M(coeffs: CumulantCoefficients) -> dict:
    """M_{r,alpha} = E(+, alpha) + r E(-, alpha), as complex values from the closed form."""
    e = cumulant_exponential(coeffs)
    g = PAULI[_axis(coeffs.gamma)]
    out = {}
    for a in AXES:
        out[(1, a)] = complex(np.trace(e @ g))
        out[(-1, a)] = complex(np.trace(e @ PAULI[_axis(a)] @ g))
    return out


def M_from_expectations(expect: dict) -> dict:
    return {(r, a): complex(expect[(1, a)] + r * expect[(-1, a)]) for r in (1, -1) for a in AXES}


def _levi(a: int, b: int, c: int) -> int:
    return int(np.sign((b - a) * (c - a) * (c - b)))


def extract_coefficients(gamma: str, M: dict, small: float = 1e-12) -> CumulantCoefficients:
    """Invert the M combinations for C_{gamma, beta}.

    Uses e^{2 C_0} = (M_{-,gamma}/2)^2 - sum_beta w_beta^2 with principal branches of
    the square root and logarithm; M_{+,alpha} is averaged over alpha.
    """
    gi = _axis(gamma)
    c = M[(-1, AXES[gi])] / 2
    w = np.zeros(3, dtype=complex)
    w[gi] = np.mean([M[(1, a)] for a in AXES]) / 2
    for ai in range(3):
        if ai == gi:
            continue
        bi = 3 - ai - gi
        w[bi] = M[(-1, AXES[ai])] / (2j * _levi(ai, gi, bi))
    e2 = c * c - np.sum(w * w)
    if not np.isfinite(e2) or abs(e2) < 1e-300 or (abs(e2.imag) < 1e-12 * abs(e2) and e2.real <= 0):
        raise ExtractionFailure("inconsistent M set: e^{2 C_0} is not positive")
    ec0 = np.sqrt(e2 + 0j)
    u = w / ec0
    sinh_h = np.sqrt(np.sum(u * u) + 0j)
    if abs(sinh_h) < small:
        # h -> 0 (including nilpotent v with v.v = 0): h / sinh h -> 1
        v = u
    else:
        h = np.log(c / ec0 + sinh_h)
        v = u * h / sinh_h
    return CumulantCoefficients(gamma, np.concatenate([[np.log(ec0)], v]))


@dataclass(frozen=True)
class AccessibleQuantities:
    Q: np.ndarray  # Q_1..Q_4
    coefficients: dict | None = None


def q_from_coefficients(cz: CumulantCoefficients, cx: CumulantCoefficients) -> np.ndarray:
    return np.array([(cz[0] + cz["z"]) / 2, (cz[0] - cz["z"]) / 2, cx[0], cx["x"]])


def q_quantities(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig, route: str = "filters",
                 T: float | None = None) -> AccessibleQuantities:
    """Q_1..Q_4 either from the cumulant coefficients or from generalized-filter integrals."""
    if route == "cumulant":
        co = cumulant_coefficients(seq, noise, sys, gammas=("x", "z"), T=T)
        return AccessibleQuantities(q_from_coefficients(co["z"], co["x"]), co)
    if route != "filters":
        raise InvalidInput("route must be 'filters' or 'cumulant'")
    sm = switching_matrix(seq, Basis.SPHERICAL)
    T = sm.duration if T is None else T
    sph = to_basis(noise, Basis.SPHERICAL)
    ivs = integration_intervals(sph, sys)

    def fn(w):
        s = sph.matrix(w)
        g = generalized_filters_all(sm, w, T, sys.splitting, sys.drop_imbalanced)
        return np.einsum("mpjl,mjl->mp", g, s)

    res = integrate_spectral(fn, ivs, T, sys)
    return AccessibleQuantities(np.zeros(4, dtype=complex) if res is None else res)


# ---------------------------------------------------------------------------
# closed forms for diagonal control at zero splitting
# ---------------------------------------------------------------------------

def diagonal_closed_forms(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig,
                         T: float | None = None) -> np.ndarray:
    """All C_{gamma,beta} (rows gamma = x, y, z; columns beta = 0, x, y, z) from
    one-sided integrals of S+-, G+- for diagonal control at zero splitting."""
    if sys.splitting != 0:
        raise InvalidInput("closed forms hold for zero qubit splitting only")
    sm = switching_matrix(seq, Basis.CARTESIAN)
    if not is_diagonal(sm):
        raise InvalidInput("closed forms assume diagonal switching functions")
    T = sm.duration if T is None else T
    cart = to_basis(noise, Basis.CARTESIAN)
    ivs = _merge([(max(lo, 0.0), hi) for lo, hi in integration_intervals(cart, sys, mirrored=True)])
    x, y, z = 0, 1, 2

    def fn(w):
        sp = cart.matrix(w, "plus")
        sm_ = cart.matrix(w, "minus")
        gp, gm = g_tensor(sm, w, -w, T)

        def G(t, a, b):
            return t[:, a, a, b, b]

        def rr(s, g):
            return s.real * g.real

        def ii(s, g):
            return s.imag * g.imag

        def ri(s, g):
            return s.real * g.imag + s.imag * g.real

        terms = [
            -2 * (rr(sp[:, y, y], G(gp, y, y)) + rr(sp[:, z, z], G(gp, z, z))),  # C_x0
            -2 * (rr(sp[:, x, x], G(gp, x, x)) + rr(sp[:, z, z], G(gp, z, z))),  # C_y0
            -2 * (rr(sp[:, x, x], G(gp, x, x)) + rr(sp[:, y, y], G(gp, y, y))),  # C_z0
            4j * (ii(sp[:, x, z], G(gp, x, z)) - rr(sp[:, x, z], G(gp, x, z))),  # C_xy - C_zy
            -4j * (ii(sp[:, x, y], G(gp, x, y)) - rr(sp[:, x, y], G(gp, x, y))),  # C_xz - C_yz
            4j * (ii(sp[:, y, z], G(gp, y, z)) - rr(sp[:, y, z], G(gp, y, z))),  # C_zx - C_yx
            -4j * (ii(sp[:, x, z], G(gm, x, z)) - rr(sp[:, x, z], G(gm, x, z))),  # C_xy + C_zy
            4j * (ii(sp[:, x, y], G(gm, x, y)) - rr(sp[:, x, y], G(gm, x, y))),  # C_xz + C_yz
            4j * (ii(sp[:, y, z], G(gm, y, z)) - rr(sp[:, y, z], G(gm, y, z))),  # C_zx + C_yx
            4 * ri(sm_[:, y, z], G(gp, y, z)),  # C_xx
            -4 * ri(sm_[:, x, z], G(gp, x, z)),  # C_yy (anti-cyclic pair order)
            4 * ri(sm_[:, x, y], G(gp, x, y)),  # C_zz
        ]
        return np.stack(terms, axis=1)

    r = integrate_spectral(fn, ivs, T, sys)
    if r is None:
        r = np.zeros(12, dtype=complex)
    C = np.zeros((3, 4), dtype=complex)
    C[:, 0] = r[0:3]
    C[x, 2], C[z, 2] = (r[6] + r[3]) / 2, (r[6] - r[3]) / 2
    C[x, 3], C[y, 3] = (r[7] + r[4]) / 2, (r[7] - r[4]) / 2
    C[z, 1], C[y, 1] = (r[8] + r[5]) / 2, (r[8] - r[5]) / 2
    C[x, 1], C[y, 2], C[z, 3] = r[9], r[10], r[11]
    return C


def dephasing_log_attenuation(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig,
                              T: float | None = None) -> float:
    """ln E for pure z noise under z-preserving control: -(1/2pi) int S+_zz G+_zzzz dw over w > 0."""
    sm = switching_matrix(seq, Basis.CARTESIAN)
    T = sm.duration if T is None else T
    cart = to_basis(noise, Basis.CARTESIAN)
    ivs = _merge([(max(lo, 0.0), hi) for lo, hi in integration_intervals(cart, sys, mirrored=True)])

    def fn(w):
        f = first_order_matrix(sm, w, T, entries=[("z", "z")])[:, 0]
        return cart.matrix(w, "plus")[:, 2, 2].real * np.abs(f) ** 2

    r = integrate_spectral(fn, ivs, T, sys)
    return 0.0 if r is None else -2.0 * float(np.real(r))


# ---------------------------------------------------------------------------
# Monte-Carlo oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloResult:
    mean: np.ndarray  # (3, 3): mean of R[gamma, alpha]
    stderr: np.ndarray
    trajectories: int

    def setting(self, s: MeasurementSetting):
        g, a = _axis(s.observable), _axis(s.prep)
        return s.sign * self.mean[g, a], self.stderr[g, a]


def _rotation_from_quaternion(q: np.ndarray) -> np.ndarray:
    """R with U sigma_v U^dag = (R v).sigma for U = q0 I - i q.sigma; shape (n, 3, 3)."""
    q0, v = q[:, 0], q[:, 1:]
    n2 = np.sum(v * v, axis=1)
    R = (q0 * q0 - n2)[:, None, None] * np.eye(3) + 2 * v[:, :, None] * v[:, None, :]
    cross = np.zeros((len(q), 3, 3))
    cross[:, 0, 1], cross[:, 0, 2], cross[:, 1, 2] = -v[:, 2], v[:, 1], -v[:, 0]
    cross[:, 1, 0], cross[:, 2, 0], cross[:, 2, 1] = v[:, 2], -v[:, 1], v[:, 0]
    return R + 2 * q0[:, None, None] * cross


def _toggling_matrix(seq: PulseSequence, splitting: float, dt: float, nsteps: int) -> np.ndarray:
    """R_W(t) Y(t) at step midpoints; field h_{a'} = sum_a zeta_a M[a, a']."""
    sm = switching_matrix(seq, Basis.CARTESIAN)
    tol = 1e-9 * dt
    for b in sm.breakpoints:
        k = b / dt
        if abs(k - round(k)) * dt > tol + TIME_RTOL * seq.cycle_time:
            raise InvalidInput("time step must divide every pulse interval")
    mids = (np.arange(nsteps) + 0.5) * dt
    y = sm.at(mids).real
    c, s = np.cos(splitting * mids), np.sin(splitting * mids)
    rot = np.zeros((nsteps, 3, 3))
    rot[:, 0, 0], rot[:, 0, 1], rot[:, 1, 0], rot[:, 1, 1], rot[:, 2, 2] = c, -s, s, c, 1.0
    return np.einsum("nab,nbc->nac", rot, y)


def monte_carlo_rotations(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig, trajectories: int,
                          dt: float, seed: int, batch: int = 500, check_halving: bool = True,
                          halving_tol: float = 5e-3) -> MonteCarloResult:
    """Average Bloch rotation of the toggling-frame propagator over classical noise.

    Noise is sampled on a grid of spacing dt/2. The reported estimate propagates
    with step dt/2; the step-halving check repeats the run with step dt using
    pair-averaged noise and flags discrepancies above ``halving_tol``.
    """
    T = seq.duration
    if dt <= 0 or trajectories < 1:
        raise InvalidInput("need dt > 0 and at least one trajectory")
    if sys.splitting > 0 and dt > 2 * math.pi / (20 * sys.splitting) * (1 + 1e-9):
        raise InvalidInput("dt must resolve the qubit splitting (dt <= 2 pi / (20 W))")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * T:
        raise InvalidInput("dt must divide the total duration")
    fine = dt / 2
    mfine = _toggling_matrix(seq, sys.splitting, fine, 2 * n)
    mcoarse = _toggling_matrix(seq, sys.splitting, dt, n)
    acc = np.zeros((3, 3))
    acc2 = np.zeros((3, 3))
    dacc = np.zeros((3, 3))
    for start in range(0, trajectories, batch):
        cnt = min(batch, trajectories - start)
        _, z = sample_classical_array(noise, T, fine, cnt, seed, start=start)
        z = z[:, : 2 * n, :]
        h = np.einsum("tna,nab->tnb", z, mfine)
        R = _rotation_from_quaternion(_accel.su2_propagate(h, fine))
        acc += R.sum(axis=0)
        acc2 += (R * R).sum(axis=0)
        if check_halving:
            zc = 0.5 * (z[:, 0::2, :] + z[:, 1::2, :])
            hc = np.einsum("tna,nab->tnb", zc, mcoarse)
            Rc = _rotation_from_quaternion(_accel.su2_propagate(hc, dt))
            dacc += (R - Rc).sum(axis=0)
    mean = acc / trajectories
    var = np.maximum(acc2 / trajectories - mean * mean, 0.0)
    se = np.sqrt(var / max(trajectories - 1, 1))
    if check_halving:
        disc = float(np.max(np.abs(dacc / trajectories)))
        if disc > halving_tol:
            raise NumericalFailure(f"step-halving discrepancy {disc:.2e} exceeds {halving_tol:.1e}; reduce dt")
    return MonteCarloResult(mean, se, trajectories)


def monte_carlo_oracle(seq: PulseSequence, noise: SpectrumSet, sys: SystemConfig, setting: MeasurementSetting,
                       trajectories: int, dt: float, seed: int, **kw):
    """(mean, standard error) of tr[U rho U^dag sigma_gamma] over classical noise realizations."""
    return monte_carlo_rotations(seq, noise, sys, trajectories, dt, seed, **kw).setting(setting)
