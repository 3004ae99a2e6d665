"""Multiaxis noise spectra and classical Gaussian noise synthesis.

Spectra follow S_{a,b}(w) = int dtau e^{-i w tau} <B_a(tau) B_b(0)>, so that
<B_a(tau) B_b(0)> = int dw/2pi e^{i w tau} S_{a,b}(w). The classical and quantum
parts are

    S+_{a,b}(w) = S_{a,b}(w) + S_{b,a}(-w)      (anticommutator)
    S-_{a,b}(w) = S_{a,b}(w) - S_{b,a}(-w)      (commutator)

in either basis. Spherical bath operators are B_{+-1} = (B_x +- i B_y)/sqrt(2),
B_0 = B_z, giving S_sph = C S_cart C^T with the rows of C listed in
:data:`SPHERICAL_ROWS`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInput
from .pulses import Basis

SQ2 = math.sqrt(2.0)
# rows ordered j = -1, 0, +1
SPHERICAL_ROWS = np.array([[1, -1j, 0], [0, 0, 1], [1, 1j, 0]], dtype=complex) / np.array([[SQ2], [1.0], [SQ2]])
_INV_ROWS = np.linalg.inv(SPHERICAL_ROWS)

PARTS = ("full", "plus", "minus")


@dataclass(frozen=True)
class SpectrumSet:
    """Nine cross-spectra as a function of angular frequency.

    ``model`` maps a 1-d frequency array to an ``(m, 3, 3)`` array of S_{a,b}.
    ``support`` lists ``(lo, hi)`` frequency intervals outside which every
    entry is negligible; frequency integrals only visit these intervals.
    ``None`` means unknown support (integrals fall back to a cutoff band).
    """

    basis: Basis
    model: Callable[[np.ndarray], np.ndarray]
    support: tuple | None = None
    label: str = field(default="spectrum", compare=False)

    def matrix(self, omega, part: str = "full") -> np.ndarray:
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        if not np.all(np.isfinite(w)):
            raise InvalidInput("frequencies must be finite")
        if part not in PARTS:
            raise InvalidInput(f"part must be one of {PARTS}")
        s = np.asarray(self.model(w), dtype=complex)
        if part == "full":
            return s
        s_neg = np.swapaxes(np.asarray(self.model(-w), dtype=complex), -1, -2)
        return s + s_neg if part == "plus" else s - s_neg

    def mirrored_support(self) -> tuple:
        """Support intervals together with their reflections about w = 0."""
        if self.support is None:
            return None
        out = list(self.support) + [(-hi, -lo) for lo, hi in self.support]
        return tuple(sorted(out))


def evaluate(spec: SpectrumSet, a, b, omega, part: str = "full"):
    """One entry S_{a,b}, S+_{a,b} or S-_{a,b} at ``omega`` (scalar or array)."""
    i, j = spec.basis.index(a), spec.basis.index(b)
    out = spec.matrix(omega, part)[:, i, j]
    return complex(out[0]) if np.ndim(omega) == 0 else out.reshape(np.shape(omega))


def _transform(spec: SpectrumSet, rows: np.ndarray, basis: Basis) -> SpectrumSet:
    def model(w, _m=spec.model):
        return np.einsum("ja,mab,lb->mjl", rows, _m(w), rows)
    return SpectrumSet(basis, model, spec.support, spec.label)


def cartesian_to_spherical(spec: SpectrumSet) -> SpectrumSet:
    if spec.basis is not Basis.CARTESIAN:
        raise InvalidInput("expected a Cartesian spectrum set")
    return _transform(spec, SPHERICAL_ROWS, Basis.SPHERICAL)


def spherical_to_cartesian(spec: SpectrumSet) -> SpectrumSet:
    if spec.basis is not Basis.SPHERICAL:
        raise InvalidInput("expected a spherical spectrum set")
    return _transform(spec, _INV_ROWS, Basis.CARTESIAN)


def to_basis(spec: SpectrumSet, basis: Basis) -> SpectrumSet:
    basis = Basis(basis)
    if spec.basis is basis:
        return spec
    return cartesian_to_spherical(spec) if basis is Basis.SPHERICAL else spherical_to_cartesian(spec)


def zero_spectrum(basis: Basis = Basis.CARTESIAN) -> SpectrumSet:
    return SpectrumSet(Basis(basis), lambda w: np.zeros((len(w), 3, 3), dtype=complex), (), "zero")


# ---------------------------------------------------------------------------
# model builders
# ---------------------------------------------------------------------------

MHZ = 2 * math.pi * 1e6
REFERENCE_SPLITTING = 2 * math.pi * 27e9
WINDOW_WIDTHS = 12.0


@dataclass(frozen=True)
class GaussianTripleParams:
    """Three Gaussians of common width; every Cartesian entry shares the same profile."""

    amplitude: float
    width: float
    centers: tuple
    weights: tuple = (1.0, 0.7, 0.5)

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidInput("Gaussian width must be positive")
        if len(self.centers) != 3 or len(self.weights) != 3:
            raise InvalidInput("need three centers and three weights")
        if not all(math.isfinite(x) for x in (self.amplitude, *self.centers, *self.weights)):
            raise InvalidInput("parameters must be finite")

    @classmethod
    def reference(cls, splitting: float = REFERENCE_SPLITTING, width_mhz: float = 0.80,
                  amplitude: float = 332.0, offset_mhz: float = 0.81, center_mhz: float = 0.80):
        """Defaults of the worked example; side peaks sit at -W + offset and W - offset."""
        return cls(amplitude, width_mhz * MHZ,
                   (-splitting + offset_mhz * MHZ, center_mhz * MHZ, splitting - offset_mhz * MHZ))


def _gauss(w, center, width):
    return np.exp(-0.5 * ((w - center) / width) ** 2)


def gaussian_triple(params: GaussianTripleParams) -> SpectrumSet:
    """Cartesian set with S_{a,b}(w) = A sum_i weight_i exp(-(w - c_i)^2 / 2 width^2) for all a, b."""
    p = params

    def model(w):
        prof = sum(wt * _gauss(w, c, p.width) for wt, c in zip(p.weights, p.centers))
        return np.broadcast_to((p.amplitude * prof)[:, None, None], (len(w), 3, 3)).astype(complex)

    half = WINDOW_WIDTHS * p.width
    support = tuple((c - half, c + half) for c in p.centers)
    return SpectrumSet(Basis.CARTESIAN, model, support, "gaussian_triple")


@dataclass(frozen=True)
class ClassicalComponent:
    """Gaussian line of weight ``amplitude`` at +-``center`` coupling along complex vector ``vector``."""

    amplitude: float
    center: float
    width: float
    vector: tuple


def classical_model(components: Sequence[ClassicalComponent], basis: Basis = Basis.CARTESIAN) -> SpectrumSet:
    """Positive semidefinite classical cross-spectrum.

    S(w) = sum_i A_i [g(w - c_i) v v^dag + g(w + c_i) v* v^T], so that S(-w) = S(w)^T
    and the quantum part vanishes identically.
    """
    comps = []
    for c in components:
        v = np.asarray(c.vector, dtype=complex)
        if v.shape != (3,) or c.amplitude < 0 or not c.width > 0:
            raise InvalidInput("component needs a 3-vector, amplitude >= 0 and width > 0")
        comps.append((c.amplitude, c.center, c.width, np.outer(v, v.conj())))

    def model(w):
        out = np.zeros((len(w), 3, 3), dtype=complex)
        for amp, ctr, wd, vv in comps:
            out += amp * (_gauss(w, ctr, wd)[:, None, None] * vv + _gauss(w, -ctr, wd)[:, None, None] * vv.conj())
        return out

    support = []
    for amp, ctr, wd, _ in comps:
        half = WINDOW_WIDTHS * wd
        support += [(ctr - half, ctr + half), (-ctr - half, -ctr + half)]
    return SpectrumSet(Basis(basis), model, tuple(support), "classical")


def table_spectrum(omega, values, basis: Basis = Basis.CARTESIAN, label: str = "table") -> SpectrumSet:
    """Linearly interpolated table; ``values`` has shape (n, 3, 3). Zero outside the table."""
    omega = np.asarray(omega, dtype=float)
    values = np.asarray(values, dtype=complex)
    if omega.ndim != 1 or len(omega) < 2 or values.shape != (len(omega), 3, 3):
        raise InvalidInput("table needs n >= 2 frequencies and values of shape (n, 3, 3)")
    if np.any(np.diff(omega) <= 0):
        raise InvalidInput("table frequencies must be strictly increasing")
    flat = values.reshape(len(omega), 9)

    def model(w):
        out = np.empty((len(w), 9), dtype=complex)
        for k in range(9):
            out[:, k] = (np.interp(w, omega, flat[:, k].real, left=0.0, right=0.0)
                         + 1j * np.interp(w, omega, flat[:, k].imag, left=0.0, right=0.0))
        return out.reshape(len(w), 3, 3)

    return SpectrumSet(Basis(basis), model, ((float(omega[0]), float(omega[-1])),), label)


def sum_spectra(*specs: SpectrumSet) -> SpectrumSet:
    basis = specs[0].basis
    if any(s.basis is not basis for s in specs):
        raise InvalidInput("cannot add spectra in different bases")

    def model(w):
        return sum(s.model(w) for s in specs)

    if any(s.support is None for s in specs):
        support = None
    else:
        support = tuple(iv for s in specs for iv in s.support)
    return SpectrumSet(basis, model, support, "sum")


# ---------------------------------------------------------------------------
# symmetry validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    checks: dict
    max_deviation: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def default_grid(spec: SpectrumSet, points: int = 201) -> np.ndarray:
    ivs = spec.mirrored_support()
    if not ivs or all(hi <= lo for lo, hi in ivs):
        return np.linspace(-1.0, 1.0, points)
    return np.unique(np.concatenate([np.linspace(lo, hi, points) for lo, hi in ivs]))


def validate_symmetries(spec: SpectrumSet, omega=None, rtol: float = 1e-9) -> SymmetryReport:
    """Check the conjugation and parity relations of S+ and S- on a frequency grid.

    Cartesian:  [S+-_{a,b}(w)]* = S+-_{b,a}(w) = +-S+-_{a,b}(-w)
    Spherical:  [S+-_{j,l}(w)]* = S+-_{-l,-j}(w) = +-S+-_{-j,-l}(-w)
    """
    w = default_grid(spec) if omega is None else np.atleast_1d(np.asarray(omega, dtype=float))
    checks, devs = {}, {}
    # a common scale keeps an identically vanishing part (S- of classical noise) from amplifying roundoff
    full = spec.matrix(np.concatenate([w, -w]))
    scale = max(float(np.abs(full).max(initial=0.0)), 1e-300)
    for sign, part in ((1, "plus"), (-1, "minus")):
        s = spec.matrix(w, part)
        s_neg = spec.matrix(-w, part)
        if spec.basis is Basis.CARTESIAN:
            adj = np.swapaxes(s, -1, -2)
            refl = s_neg
        else:
            # (j, l) -> (-l, -j) reverses both axes and transposes
            adj = np.swapaxes(s[:, ::-1, ::-1], -1, -2)
            refl = s_neg[:, ::-1, ::-1]
        d_conj = float(np.abs(np.conj(s) - adj).max(initial=0.0)) / scale
        d_par = float(np.abs(adj - sign * refl).max(initial=0.0)) / scale
        for name, d in ((f"{part}_conjugation", d_conj), (f"{part}_parity", d_par)):
            devs[name] = d
            checks[name] = d <= rtol
    return SymmetryReport(checks, devs)


# ---------------------------------------------------------------------------
# classical trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseTrajectory:
    times: np.ndarray
    values: np.ndarray  # shape (n, 3): zeta_x, zeta_y, zeta_z

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise InvalidInput("trajectory values must be finite")


def _bin_factors(spec: SpectrumSet, n_fft: int, dt: float) -> np.ndarray:
    """Per-bin matrices L with L L^dag = P(w_k) dw / 2pi, P = S+/2 in Cartesian form."""
    cart = to_basis(spec, Basis.CARTESIAN)
    w = 2 * np.pi * np.fft.fftfreq(n_fft, d=dt)
    dw = 2 * np.pi / (n_fft * dt)
    p = cart.matrix(w, "plus") / 2
    p = 0.5 * (p + np.conj(np.swapaxes(p, -1, -2)))
    # DC and Nyquist bins must be real symmetric for a real process
    real_bins = [0] + ([n_fft // 2] if n_fft % 2 == 0 else [])
    p[real_bins] = p[real_bins].real
    evals, evecs = np.linalg.eigh(p)
    scale = max(float(np.abs(evals).max(initial=0.0)), 1e-300)
    if evals.min(initial=0.0) < -1e-9 * scale:
        raise InvalidInput("classical spectral matrix is not positive semidefinite")
    evals = np.clip(evals, 0.0, None)
    return evecs * np.sqrt(evals * dw / (2 * np.pi))[:, None, :]


def sample_classical_array(spec: SpectrumSet, duration: float, dt: float, count: int, seed: int,
                           n_fft: int | None = None, start: int = 0):
    """Times (n,) and values (count, n, 3) of stationary real Gaussian noise.

    Trajectory ``i`` depends only on ``(seed, start + i)``.
    """
    if not (dt > 0 and duration > 0) or count < 0:
        raise InvalidInput("need dt > 0, duration > 0 and count >= 0")
    n = int(round(duration / dt)) + 1
    if n_fft is None:
        n_fft = 1 << int(math.ceil(math.log2(4 * n)))
    if n_fft < n:
        raise InvalidInput("n_fft must cover the trajectory length")
    L = _bin_factors(spec, n_fft, dt)
    half = n_fft // 2
    pos = np.arange(1, (n_fft + 1) // 2)  # strictly positive bins below Nyquist
    times = np.arange(n) * dt
    out = np.empty((count, n, 3))
    for i in range(count):
        rng = np.random.default_rng([int(seed), int(start + i)])
        z = np.zeros((n_fft, 3), dtype=complex)
        g = (rng.standard_normal((len(pos), 3)) + 1j * rng.standard_normal((len(pos), 3))) / SQ2
        z[pos] = np.einsum("kab,kb->ka", L[pos], g)
        z[n_fft - pos] = np.conj(z[pos])
        z[0] = L[0].real @ rng.standard_normal(3)
        if n_fft % 2 == 0:
            z[half] = L[half].real @ rng.standard_normal(3)
        x = np.fft.ifft(z, axis=0) * n_fft
        out[i] = x[:n].real
    return times, out


def sample_classical_trajectories(spec: SpectrumSet, duration: float, dt: float, count: int, seed: int,
                                  n_fft: int | None = None) -> list:
    """List of :class:`NoiseTrajectory`; see :func:`sample_classical_array`."""
    times, vals = sample_classical_array(spec, duration, dt, count, seed, n_fft)
    return [NoiseTrajectory(times, v) for v in vals]
