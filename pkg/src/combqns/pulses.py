"""Instantaneous pulse control, toggling-frame switching functions and symmetry checks.

Conventions
-----------
* Cartesian operator index order is ``x, y, z``; spherical index order is
  ``-1, 0, +1`` (array position ``j + 1``), with
  ``sigma_{+-1} = (sigma_x +- i sigma_y) / sqrt(2)`` and ``sigma_0 = sigma_z``.
* Switching functions follow ``y_{a,a'}(t) = tr[U^dag sigma_a U sigma_{a'}^dag] / 2``
  where ``U`` is the control propagator (later pulses multiply on the left).
* A pulse at ``t = T_c`` closes the cycle; a pulse at ``t = 0`` opens it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidInput

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.array([SX, SY, SZ])
SPHERICAL = np.array([(SX - 1j * SY) / math.sqrt(2), SZ, (SX + 1j * SY) / math.sqrt(2)])

TIME_RTOL = 1e-12


class Basis(enum.Enum):
    CARTESIAN = "cartesian"
    SPHERICAL = "spherical"

    @property
    def operators(self) -> np.ndarray:
        return PAULI if self is Basis.CARTESIAN else SPHERICAL

    @property
    def labels(self) -> tuple:
        return ("x", "y", "z") if self is Basis.CARTESIAN else (-1, 0, 1)

    def index(self, label) -> int:
        """Array position of an operator label (``'x'``/``0..2`` or ``-1, 0, 1``)."""
        if self is Basis.CARTESIAN:
            if isinstance(label, str) and label in ("x", "y", "z"):
                return "xyz".index(label)
            if isinstance(label, (int, np.integer)) and 0 <= label <= 2:
                return int(label)
        elif isinstance(label, (int, np.integer)) and -1 <= label <= 1:
            return int(label) + 1
        raise InvalidInput(f"unknown {self.value} index {label!r}")


@dataclass(frozen=True)
class Pulse:
    """Instantaneous rotation exp(-i sx tx/2) exp(-i sy ty/2) exp(-i sz tz/2) at ``time``."""

    theta_x: float = 0.0
    theta_y: float = 0.0
    theta_z: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        for name in ("theta_x", "theta_y", "theta_z", "time"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInput(f"pulse {name} must be finite")

    @property
    def angles(self) -> tuple:
        return (self.theta_x, self.theta_y, self.theta_z)

    def at(self, time: float) -> "Pulse":
        return Pulse(self.theta_x, self.theta_y, self.theta_z, float(time))


def _axis_rotation(sigma: np.ndarray, theta: float) -> np.ndarray:
    return math.cos(theta / 2) * I2 - 1j * math.sin(theta / 2) * sigma


def compose_pulse(p: Pulse) -> np.ndarray:
    """SU(2) matrix of a pulse."""
    if not all(math.isfinite(a) for a in p.angles):
        raise InvalidInput("pulse angles must be finite")
    return _axis_rotation(SX, p.theta_x) @ _axis_rotation(SY, p.theta_y) @ _axis_rotation(SZ, p.theta_z)


def rotation_matrix(u: np.ndarray) -> np.ndarray:
    """SO(3) matrix R with u sigma_v u^dag = (R v) . sigma."""
    return np.real(np.einsum("aij,jk,bkl,li->ab", PAULI, u, PAULI, u.conj().T)) / 2


def pulse_from_unitary(u: np.ndarray, time: float = 0.0) -> Pulse:
    """Euler angles (x-y-z order) reproducing ``u`` exactly, including its sign."""
    r = rotation_matrix(u)
    sb = float(np.clip(r[0, 2], -1.0, 1.0))
    cb = math.hypot(r[0, 0], r[0, 1])
    if cb > 1e-9:
        a = math.atan2(-r[1, 2], r[2, 2])
        b = math.atan2(sb, cb)
        c = math.atan2(-r[0, 1], r[0, 0])
    else:
        a = 0.0
        b = math.copysign(math.pi / 2, sb)
        c = math.atan2(r[1, 0], r[1, 1])
    p = Pulse(a, b, c, time)
    if np.allclose(compose_pulse(p), -u, atol=1e-9):
        p = Pulse(a + 2 * math.pi, b, c, time)
    if not np.allclose(compose_pulse(p), u, atol=1e-9):
        raise InvalidInput("matrix is not an SU(2) element")
    return p


@dataclass(frozen=True)
class PulseSequence:
    """Pulses over one cycle ``[0, cycle_time]``, repeated ``repetitions`` times."""

    pulses: tuple
    cycle_time: float
    repetitions: int = 1
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(sorted(self.pulses, key=lambda p: p.time)))
        if not (math.isfinite(self.cycle_time) and self.cycle_time > 0):
            raise InvalidInput("cycle_time must be positive")
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise InvalidInput("repetitions must be a positive integer")
        tol = TIME_RTOL * self.cycle_time
        last = None
        for p in self.pulses:
            if p.time < -tol or p.time > self.cycle_time + tol:
                raise InvalidInput(f"pulse time {p.time} outside [0, T_c]")
            if last is not None and p.time - last <= tol:
                raise InvalidInput("simultaneous pulses are not allowed; compose them first")
            last = p.time

    @classmethod
    def from_fractions(cls, cycle_time: float, repetitions: int, items, name: str = "custom"):
        """Build from ``(fraction_of_cycle, (tx, ty, tz))`` pairs."""
        pulses = [Pulse(*map(float, angles), time=float(Fraction(frac)) * cycle_time) for frac, angles in items]
        return cls(tuple(pulses), cycle_time, repetitions, name)

    @property
    def duration(self) -> float:
        return self.cycle_time * self.repetitions

    def with_timing(self, cycle_time: float | None = None, repetitions: int | None = None) -> "PulseSequence":
        """Same pulse pattern rescaled to a new cycle time and/or repetition count."""
        tc = self.cycle_time if cycle_time is None else cycle_time
        m = self.repetitions if repetitions is None else repetitions
        scale = tc / self.cycle_time
        return PulseSequence(tuple(p.at(p.time * scale) for p in self.pulses), tc, m, self.name)

    def cycle_propagator(self) -> np.ndarray:
        u = I2.copy()
        for p in self.pulses:
            u = compose_pulse(p) @ u
        return u


def _propagator_within_cycle(seq: PulseSequence, tau: float) -> np.ndarray:
    tol = TIME_RTOL * seq.cycle_time
    u = I2.copy()
    for p in seq.pulses:
        if p.time <= tau + tol:
            u = compose_pulse(p) @ u
    return u


def control_propagator_at(seq: PulseSequence, t: float) -> np.ndarray:
    """Control propagator after every pulse with time <= t, repeating cycles."""
    total = seq.duration
    tol = TIME_RTOL * seq.cycle_time
    if not math.isfinite(t) or t < -tol or t > total + tol:
        raise InvalidInput(f"time {t} outside [0, {total}]")
    w = seq.cycle_propagator()
    if t >= total - tol:
        return np.linalg.matrix_power(w, seq.repetitions)
    m = int(math.floor(t / seq.cycle_time + TIME_RTOL))
    tau = max(t - m * seq.cycle_time, 0.0)
    return _propagator_within_cycle(seq, tau) @ np.linalg.matrix_power(w, m)


def adjoint_matrix(u: np.ndarray, basis: Basis) -> np.ndarray:
    """3x3 matrix y_{a,a'} = tr[u^dag s_a u s_{a'}^dag] / 2 for one unitary (or a stack)."""
    ops = basis.operators
    u = np.asarray(u)
    ud = np.conj(np.swapaxes(u, -1, -2))
    conj_ops = np.conj(np.swapaxes(ops, -1, -2))
    return np.einsum("...ij,ajk,...kl,bli->...ab", ud, ops, u, conj_ops) / 2


@dataclass(frozen=True)
class SwitchingMatrix:
    """Piecewise-constant 3x3 switching functions over ``[0, repetitions * cycle_time]``.

    ``values[k]`` holds ``y_{a,a'}`` on ``[breakpoints[k], breakpoints[k+1])``.
    ``periodic`` is true when every cycle reproduces the first one exactly.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    basis: Basis
    cycle_time: float
    repetitions: int
    cycle_intervals: int
    periodic: bool

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def starts(self) -> np.ndarray:
        return self.breakpoints[:-1]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def entry(self, a, a2) -> np.ndarray:
        return self.values[:, self.basis.index(a), self.basis.index(a2)]

    def at(self, t) -> np.ndarray:
        """Values at time(s) t (right-continuous)."""
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        k = np.clip(k, 0, len(self.values) - 1)
        return self.values[k]

    def intervals(self, total_time: float | None = None):
        """(starts, widths, values) clipped to ``[0, total_time]``."""
        T = self.duration if total_time is None else float(total_time)
        if T > self.duration * (1 + TIME_RTOL) or T < 0:
            raise InvalidInput(f"T={T} exceeds switching-matrix duration {self.duration}")
        b = self.breakpoints
        keep = b[:-1] < T - TIME_RTOL * self.cycle_time
        starts = b[:-1][keep]
        ends = np.minimum(b[1:][keep], T)
        return starts, ends - starts, self.values[keep]

    def cycle(self) -> "SwitchingMatrix":
        """The first cycle alone, as a one-repetition switching matrix."""
        n = self.cycle_intervals
        return SwitchingMatrix(self.breakpoints[: n + 1].copy(), self.values[:n].copy(), self.basis,
                               self.cycle_time, 1, n, True)


def switching_matrix(seq: PulseSequence, basis: Basis | str = Basis.CARTESIAN) -> SwitchingMatrix:
    """Switching functions of a sequence over its full duration."""
    basis = Basis(basis)
    tc = seq.cycle_time
    tol = TIME_RTOL * tc
    inner = [p.time for p in seq.pulses if tol < p.time < tc - tol]
    local_breaks = np.array([0.0] + inner + [tc])
    mids = 0.5 * (local_breaks[:-1] + local_breaks[1:])
    cycle_u = np.array([_propagator_within_cycle(seq, m) for m in mids])
    w = seq.cycle_propagator()
    periodic = bool(np.allclose(adjoint_matrix(w, basis), np.eye(3), atol=1e-12))

    breaks = [local_breaks[:-1] + m * tc for m in range(seq.repetitions)]
    breaks.append(np.array([seq.duration]))
    values = []
    wm = I2.copy()
    for _ in range(seq.repetitions):
        values.append(adjoint_matrix(cycle_u @ wm, basis))
        wm = w @ wm
    values = np.concatenate(values)
    if basis is Basis.CARTESIAN:
        values = np.ascontiguousarray(values.real)
    return SwitchingMatrix(np.concatenate(breaks), values, basis, tc, seq.repetitions,
                           len(mids), periodic)


# ---------------------------------------------------------------------------
# symmetry checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetrySpec:
    """kind is 'periodic', 'displacement' or 'mirror'; sign is +1 or -1."""

    kind: str
    timescale: float
    sign: int = 1
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("periodic", "displacement", "mirror"):
            raise InvalidInput(f"unknown symmetry kind {self.kind!r}")
        if not self.timescale > 0:
            raise InvalidInput("symmetry timescale must be positive")
        if self.sign not in (1, -1):
            raise InvalidInput("sign must be +1 or -1")
        if self.tolerance < 0:
            raise InvalidInput("tolerance must be non-negative")


def _eval_piecewise(breaks, vals, t):
    k = np.clip(np.searchsorted(breaks, t, side="right") - 1, 0, len(vals) - 1)
    return vals[k]


def check_symmetry(sm: SwitchingMatrix, entry, spec: SymmetrySpec) -> bool:
    """Whether switching function ``entry = (a, a')`` obeys the requested symmetry."""
    breaks = sm.breakpoints
    y = sm.entry(*entry)
    tau = spec.timescale
    T = sm.duration
    if tau > T * (1 + TIME_RTOL):
        raise InvalidInput(f"timescale {tau} exceeds switching duration {T}")
    if spec.kind == "periodic":
        lo, hi = 0.0, T - tau
        if hi <= TIME_RTOL * T:
            return True
        cuts = np.concatenate([breaks, breaks - tau])

        def lhs(t):
            return _eval_piecewise(breaks, y, t)

        def rhs(t):
            return _eval_piecewise(breaks, y, t + tau)
    else:
        half = tau / 2
        lo, hi = 0.0, half
        if spec.kind == "displacement":
            cuts = np.concatenate([breaks, breaks - half])

            def lhs(t):
                return _eval_piecewise(breaks, y, t)
        else:
            cuts = np.concatenate([half - breaks, breaks - half])

            def lhs(t):
                return _eval_piecewise(breaks, y, half - t)

        def rhs(t):
            return _eval_piecewise(breaks, y, t + half)
    grid = np.unique(np.concatenate([[lo, hi], cuts[(cuts > lo) & (cuts < hi)]]))
    grid = grid[np.concatenate([[True], np.diff(grid) > TIME_RTOL * T])]
    mids = 0.5 * (grid[:-1] + grid[1:])
    diff = np.abs(lhs(mids) - spec.sign * rhs(mids))
    return bool(np.all(diff <= spec.tolerance))


# ---------------------------------------------------------------------------
# frame tilting and built-in sequences
# ---------------------------------------------------------------------------

def _is_identity(u: np.ndarray) -> bool:
    return bool(np.allclose(u, I2, atol=1e-12))


def apply_frame_tilt(seq: PulseSequence, tilt: Pulse) -> PulseSequence:
    """Tilt the toggling frame of every cycle by a static pulse.

    Inside each cycle the control propagator becomes ``P_tilt @ U(t)``; the tilt
    is applied at the start of the cycle and removed at its end, so the cycle
    propagator is unchanged.
    """
    a = compose_pulse(tilt)
    ad = a.conj().T
    tc = seq.cycle_time
    tol = TIME_RTOL * tc
    by_time = {}
    has_start = any(p.time <= tol for p in seq.pulses)
    has_end = any(p.time >= tc - tol for p in seq.pulses)
    for p in seq.pulses:
        u = compose_pulse(p)
        if p.time <= tol:
            by_time[0.0] = a @ u
        elif p.time >= tc - tol:
            by_time[tc] = u @ ad
        else:
            by_time[p.time] = a @ u @ ad
    if not has_start:
        by_time[0.0] = a
    if not has_end:
        by_time[tc] = ad
    pulses = [pulse_from_unitary(u, t) for t, u in sorted(by_time.items()) if not _is_identity(u)]
    return PulseSequence(tuple(pulses), tc, seq.repetitions, seq.name)


TILT = Pulse(math.pi / 4, 0.0, 0.0)
_PI = math.pi


def builtin_sequence(ident: int, cycle_time: float, repetitions: int = 1) -> PulseSequence:
    """The six reference sequences U1..U6 (U5 and U6 in the [pi/4]_x tilted frame)."""
    x, y, z = (_PI, 0, 0), (0, _PI, 0), (0, 0, _PI)
    half_z = (0, 0, _PI / 2)
    table = {
        1: [("1/4", z), ("3/4", z)],
        2: [("1/4", half_z), ("1/2", half_z), ("3/4", half_z), ("1", half_z)],
        3: [("1/2", half_z), ("1", (0, 0, 3 * _PI / 2))],
        4: [("1/4", y), ("1/2", z), ("3/4", y), ("1", z)],
        5: [("1/4", z), ("1/2", y), ("1", x)],
        6: [("1/4", z), ("1/2", z), ("3/4", z), ("1", z)],
    }
    if not isinstance(ident, (int, np.integer)) or ident not in table:
        raise InvalidInput(f"built-in sequence id must be 1..6, got {ident!r}")
    seq = PulseSequence.from_fractions(cycle_time, repetitions, table[ident], name=f"U{ident}")
    if ident in (5, 6):
        seq = apply_frame_tilt(seq, TILT)
    return seq


def builtin_by_name(name: str, cycle_time: float, repetitions: int = 1) -> PulseSequence:
    if isinstance(name, str) and len(name) == 2 and name[0] in "uU" and name[1].isdigit():
        return builtin_sequence(int(name[1]), cycle_time, repetitions)
    raise InvalidInput(f"unknown built-in sequence {name!r}")


def is_diagonal(sm: SwitchingMatrix, atol: float = 1e-12) -> bool:
    off = sm.values - np.einsum("nii->ni", sm.values)[:, :, None] * np.eye(3)
    return bool(np.all(np.abs(off) <= atol))


def pi_pulse(axis: str, time: float) -> Pulse:
    angles = [0.0, 0.0, 0.0]
    angles["xyz".index(axis)] = _PI
    return Pulse(*angles, time=time)


def sequence_from_axes(cycle_time: float, repetitions: int, items: Sequence, name: str = "custom") -> PulseSequence:
    """Sequence of pi pulses from ``(fraction, axis)`` pairs, e.g. ``[("1/2", "x")]``."""
    return PulseSequence(tuple(pi_pulse(ax, float(Fraction(f)) * cycle_time) for f, ax in items),
                         cycle_time, repetitions, name)
