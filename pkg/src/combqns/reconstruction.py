"""Measurement campaigns, comb-discretized linear systems and spectrum reconstruction.

A sequence repeated M times concentrates its balanced generalized filters on
the harmonics h w_b of the cycle, so each accessible quantity becomes

    Q_p ~ (M / T_c) sum_j sum_h G^(p)_{j,-j}(j W + h w_b; one cycle) S_{j,-j}(j W + h w_b).

Every cycle time is T_max / n, so all harmonics land on the common grid
k w_b with w_b = 2 pi / T_max. The unknowns are the even and odd parts of each
spectrum about its window center (large splitting), or the real and
imaginary parts of the Cartesian S+- on the non-negative grid (zero splitting).
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .dynamics import (AXES, SystemConfig, cumulant_coefficients, extract_coefficients, M_from_expectations,
                       q_from_coefficients, q_quantities, setting_expectations)
from .errors import InvalidInput, SolverFailure
from .filters import first_order_matrix, generalized_filters_all, imbalanced_bound
from .noise import MHZ, REFERENCE_SPLITTING, GaussianTripleParams, SpectrumSet, gaussian_triple, to_basis
from .pulses import Basis, PulseSequence, builtin_by_name, is_diagonal, sequence_from_axes, switching_matrix

REFERENCE_T_MAX = 2.4e-6
SUPPRESSION_THRESHOLD = 1e3
COND_LIMIT = 1e8
SPHERICAL_LABELS = {-1: "S_-1,1", 0: "S_0,0", 1: "S_1,-1"}
PAIRS = (("x", "y"), ("x", "z"), ("y", "z"))


class TruncationWarning(UserWarning):
    """Spectral support extends past the reconstruction window."""


# ---------------------------------------------------------------------------
# designs and measurement tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Experiment:
    """One sequence at one cycle time; ``sequence`` is a built-in name or a template."""

    sequence: str | PulseSequence
    cycle_time: float
    repetitions: int
    quantities: tuple = (1, 2, 3, 4)

    def __post_init__(self):
        if not (self.cycle_time > 0 and math.isfinite(self.cycle_time)):
            raise InvalidInput("cycle time must be positive and finite")
        if int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise InvalidInput("repetitions must be a positive integer")
        if not set(self.quantities) <= {1, 2, 3, 4} or not self.quantities:
            raise InvalidInput("quantities must be a non-empty subset of 1..4")

    @property
    def name(self) -> str:
        return self.sequence if isinstance(self.sequence, str) else self.sequence.name

    def build(self, repetitions: int | None = None) -> PulseSequence:
        m = self.repetitions if repetitions is None else repetitions
        if isinstance(self.sequence, PulseSequence):
            return self.sequence.with_timing(self.cycle_time, m)
        return builtin_by_name(self.sequence, self.cycle_time, m)


@dataclass(frozen=True)
class ExperimentDesign:
    """A campaign of experiments sharing the fundamental 2 pi / t_max."""

    experiments: tuple
    t_max: float
    system: SystemConfig = field(default_factory=SystemConfig)
    shots: float = math.inf

    def __post_init__(self):
        if not self.experiments:
            raise InvalidInput("design has no experiments")
        if not self.t_max > 0:
            raise InvalidInput("t_max must be positive")
        if not (math.isinf(self.shots) or (self.shots >= 1 and int(self.shots) == self.shots)):
            raise InvalidInput("shots must be a positive integer or inf")
        for e in self.experiments:
            harmonic_step(e.cycle_time, self.t_max)

    @property
    def omega_b(self) -> float:
        return 2 * math.pi / self.t_max

    @classmethod
    def reference(cls, splitting: float = REFERENCE_SPLITTING, t_max: float = REFERENCE_T_MAX, n_values=range(1, 9),
              repetitions: int = 20, shots: float = math.inf, system: SystemConfig | None = None):
        """Six reference sequences at T_c = t_max / n; U1-U3 feed Q1, Q2 and U4-U6 feed Q3, Q4."""
        exps = []
        for i in range(1, 7):
            qs = (1, 2) if i <= 3 else (3, 4)
            exps += [Experiment(f"U{i}", t_max / n, repetitions, qs) for n in n_values]
        system = SystemConfig(splitting=splitting) if system is None else system
        return cls(tuple(exps), t_max, system, shots)


def harmonic_step(cycle_time: float, t_max: float, rtol: float = 1e-9) -> int:
    """Integer n with cycle_time = t_max / n, else :class:`InvalidInput`."""
    n = t_max / cycle_time
    k = int(round(n))
    if k < 1 or abs(n - k) > rtol * n:
        raise InvalidInput(f"cycle time {cycle_time:g} is not t_max/n for t_max = {t_max:g}")
    return k


@dataclass(frozen=True)
class MeasurementRecord:
    experiment: Experiment
    q: np.ndarray  # Q_1..Q_4, complex
    coefficients: dict | None = None  # gamma -> CumulantCoefficients (measured)


def _sampled_coefficients(co: dict, shots: int, rng: np.random.Generator) -> dict:
    """Binomial readout of every (preparation, observable) setting, then inversion."""
    out = {}
    for g, c in co.items():
        exact = setting_expectations(c)
        noisy = {}
        for key in sorted(exact):
            p = min(max((1.0 + exact[key]) / 2.0, 0.0), 1.0)
            noisy[key] = 2.0 * rng.binomial(shots, p) / shots - 1.0
        out[g] = extract_coefficients(g, M_from_expectations(noisy))
    return out


def _run_parallel(fn, items, workers: int):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def resample_shots(table: list, shots: int, seed: int) -> list:
    """Finite-shot versions of records that carry exact cumulant coefficients.

    Record ``i`` draws from the stream keyed by ``(seed, i)``, so one exact
    campaign can be re-sampled at several shot counts.
    """
    if shots < 1 or int(shots) != shots:
        raise InvalidInput("shots must be a positive integer")
    out = []
    for i, rec in enumerate(table):
        if rec.coefficients is None:
            raise InvalidInput("resampling needs records with cumulant coefficients (route='cumulant')")
        co = _sampled_coefficients(rec.coefficients, int(shots), np.random.default_rng([seed, i]))
        out.append(MeasurementRecord(rec.experiment, q_from_coefficients(co["z"], co["x"]), co))
    return out


def simulate_measurements(design: ExperimentDesign, noise: SpectrumSet, seed: int | None = None,
                          route: str = "filters", workers: int = 1) -> list:
    """Q_1..Q_4 for every experiment of ``design``.

    With infinite shots the values are exact (``route`` chooses generalized
    filters or cumulant coefficients). Finite shots sample each expectation
    value binomially and push the counts through the M -> C -> Q chain.
    Per-experiment RNG streams are keyed by (seed, index), so results do not
    depend on execution order.
    """
    finite = not math.isinf(design.shots)
    if finite and seed is None:
        raise InvalidInput("finite shot counts need a seed")
    if route not in ("filters", "cumulant"):
        raise InvalidInput("route must be 'filters' or 'cumulant'")

    def one(i):
        e = design.experiments[i]
        seq = e.build()
        if route == "filters" and not finite:
            return MeasurementRecord(e, q_quantities(seq, noise, design.system, "filters").Q)
        co = cumulant_coefficients(seq, noise, design.system, gammas=("x", "z"))
        return MeasurementRecord(e, q_from_coefficients(co["z"], co["x"]), co)

    table = _run_parallel(one, range(len(design.experiments)), workers)
    return resample_shots(table, int(design.shots), seed) if finite else table


# ---------------------------------------------------------------------------
# windows and linear systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReconstructionWindow:
    """Grid ``center + k omega0`` for ``|k| <= K`` (``0 <= k <= K`` when one-sided).

    ``entry`` indexes the 3x3 spectrum matrix in ``basis``; ``part`` is
    ``full``, ``plus`` or ``minus``.
    """

    label: str
    center: float
    omega0: float
    K: int = 8
    basis: Basis = Basis.SPHERICAL
    entry: tuple = (0, 2)
    part: str = "full"
    one_sided: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise InvalidInput("window needs K >= 1")
        if not self.omega0 > 0:
            raise InvalidInput("window fundamental must be positive")

    @property
    def half_width(self) -> float:
        return self.K * self.omega0

    @property
    def k(self) -> np.ndarray:
        return np.arange(0 if self.one_sided else -self.K, self.K + 1)

    @property
    def grid(self) -> np.ndarray:
        return self.center + self.omega0 * self.k

    def truth(self, noise: SpectrumSet) -> np.ndarray:
        a, b = self.entry
        return to_basis(noise, self.basis).matrix(self.grid, self.part)[:, a, b]


def spherical_windows(splitting: float, omega0: float, K: int = 8) -> tuple:
    """Windows for S_{-1,1} (at -W), S_{0,0} (at 0) and S_{1,-1} (at +W)."""
    return tuple(ReconstructionWindow(SPHERICAL_LABELS[j], j * splitting, omega0, K, Basis.SPHERICAL,
                                      (j + 1, 1 - j)) for j in (-1, 0, 1))


@dataclass(frozen=True)
class Unknown:
    spectrum: str
    k: int
    part: str  # even/odd (about the center) or re/im


@dataclass
class LinearSystem:
    A: np.ndarray
    b: np.ndarray
    unknowns: list
    rows: list
    windows: tuple
    diagnostics: dict = field(default_factory=dict)

    @property
    def condition_number(self) -> float:
        s = np.linalg.svd(self.A, compute_uv=False)
        return math.inf if s[-1] == 0 else float(s[0] / s[-1])


def _cycle_kernels(exp: Experiment, omega_b: float, n: int, H: int) -> tuple:
    """Harmonic indices h (multiples of n, |h| <= H) and one-cycle balanced kernels (m, 4, 3, 3)."""
    hs = np.arange(-(H // n), H // n + 1) * n
    sm = switching_matrix(exp.build(1), Basis.SPHERICAL)
    g = generalized_filters_all(sm, hs * omega_b, exp.cycle_time, 0.0, balanced_only=True)
    return hs, g


def _check_suppression(design: ExperimentDesign, threshold: float):
    w = design.system.splitting
    for e in design.experiments:
        wt = w * e.cycle_time * e.repetitions
        if wt <= threshold:
            sync = w > 0 and abs(math.remainder(w * e.cycle_time, 2 * math.pi)) < 1e-9 * max(1.0, w * e.cycle_time)
            mode = "synchronized" if sync or w == 0 else "unsynchronized"
            raise InvalidInput(
                f"W T = {wt:.3g} <= {threshold:g} for {e.name} at T_c = {e.cycle_time:g} ({mode}): imbalanced "
                "filters are not negligible; use the zero-splitting protocol or longer sequences")


def assemble_system(design: ExperimentDesign, table: list, windows: tuple | None = None, K: int = 8,
                    threshold: float = SUPPRESSION_THRESHOLD) -> LinearSystem:
    """Comb-discretized equations for the balanced spherical spectra.

    Each (experiment, Q_p) contributes a real and an imaginary row with
    entries (M / T_c) G^(p)_{j,-j} on the grid, folded into even/odd parts
    about the window center.
    """
    if windows is None:
        windows = spherical_windows(design.system.splitting, design.omega_b, K)
    _check_suppression(design, threshold)
    unknowns = []
    col = {}
    for win in windows:
        if win.one_sided or win.basis is not Basis.SPHERICAL:
            raise InvalidInput("large-splitting assembly needs two-sided spherical windows")
        j = win.entry[0] - 1
        if win.entry[1] != 1 - j or abs(win.center - j * design.system.splitting) > 1e-9 * max(1.0, abs(win.center)):
            raise InvalidInput(f"window {win.label} is not a balanced spectrum at its center")
        for k in range(win.K + 1):
            for part in (("even",) if k == 0 else ("even", "odd")):
                col[(j, k, part)] = len(unknowns)
                unknowns.append(Unknown(win.label, k, part))
    ratio = {}
    for win in windows:
        r = win.omega0 / design.omega_b
        if abs(r - round(r)) > 1e-9 * r or round(r) != 1:
            raise InvalidInput("window fundamental must equal the design fundamental 2 pi / t_max")
    rows, rhs, labels = [], [], []
    for rec in table:
        e = rec.experiment
        n = harmonic_step(e.cycle_time, design.t_max)
        hs, g = _cycle_kernels(e, design.omega_b, n, max(w.K for w in windows))
        weight = e.repetitions / e.cycle_time
        for p in e.quantities:
            row = np.zeros(len(unknowns), dtype=complex)
            for win in windows:
                j = win.entry[0] - 1
                vals = dict(zip(hs.tolist(), g[:, p - 1, j + 1, 1 - j]))
                for h in hs[(hs >= 0) & (hs <= win.K)]:
                    h = int(h)
                    if h == 0:
                        row[col[(j, 0, "even")]] += weight * vals[0]
                    else:
                        row[col[(j, h, "even")]] += weight * (vals[h] + vals[-h])
                        row[col[(j, h, "odd")]] += weight * (vals[h] - vals[-h])
            for part, f in (("re", np.real), ("im", np.imag)):
                rows.append(f(row))
                rhs.append(float(f(rec.q[p - 1])))
                labels.append((e.name, e.cycle_time, p, part))
        ratio[(e.name, e.cycle_time)] = imbalanced_bound(design.system.splitting, design.system.splitting,
                                                         e.cycle_time * e.repetitions).bound / (
                                                             e.cycle_time * e.repetitions) ** 2
    A = np.array(rows)
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 1e-14 * norms.max() if norms.size and norms.max() > 0 else np.ones(len(rows), bool)
    system = LinearSystem(A[keep], np.array(rhs)[keep], unknowns, [l for l, k in zip(labels, keep) if k],
                          tuple(windows))
    system.diagnostics.update({
        "rows": int(keep.sum()), "dropped_zero_rows": int((~keep).sum()), "unknowns": len(unknowns),
        "imbalanced_bound_relative": float(max(ratio.values())) if ratio else 0.0,
    })
    return system


def truncation_tail(design: ExperimentDesign, table: list, noise: SpectrumSet, windows: tuple | None = None,
                    K: int = 8, extra: int = 8) -> dict:
    """Harmonic contributions beyond the window relative to the retained ones.

    Sums |(M/T_c) G S| over |h| <= K (retained) and K < |h| <= extra K (tail)
    for every row, using the true spectrum.
    """
    if windows is None:
        windows = spherical_windows(design.system.splitting, design.omega_b, K)
    sph = to_basis(noise, Basis.SPHERICAL)
    kept = tail = 0.0
    worst = 0.0
    for rec in table:
        e = rec.experiment
        n = harmonic_step(e.cycle_time, design.t_max)
        H = extra * max(w.K for w in windows)
        hs, g = _cycle_kernels(e, design.omega_b, n, H)
        weight = e.repetitions / e.cycle_time
        for p in e.quantities:
            r_kept = r_tail = 0.0
            for win in windows:
                j = win.entry[0] - 1
                s = sph.matrix(win.center + hs * design.omega_b)[:, j + 1, 1 - j]
                contrib = np.abs(weight * g[:, p - 1, j + 1, 1 - j] * s)
                inside = np.abs(hs) <= win.K
                r_kept += contrib[inside].sum()
                r_tail += contrib[~inside].sum()
            kept += r_kept
            tail += r_tail
            if r_kept > 0:
                worst = max(worst, r_tail / r_kept)
    return {"aggregate": tail / kept if kept > 0 else 0.0, "worst_row": worst}


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

@dataclass
class ReconstructionResult:
    windows: tuple
    estimates: dict  # label -> complex values on window.grid
    solution: np.ndarray
    residual_norm: float
    condition_number: float
    regularization: float
    truth: dict | None = None
    errors: dict | None = None
    diagnostics: dict = field(default_factory=dict)

    def compare(self, noise: SpectrumSet, threshold: float = 0.05) -> "ReconstructionResult":
        """Attach ground truth and relative RMS errors (points above ``threshold`` of the peak)."""
        self.truth = {w.label: w.truth(noise) for w in self.windows}
        self.errors = {w.label: relative_rms(self.estimates[w.label], self.truth[w.label], threshold)
                       for w in self.windows}
        return self

    @property
    def overall_error(self) -> float:
        if self.truth is None:
            raise InvalidInput("no ground truth attached; call compare() first")
        est = np.concatenate([self.estimates[w.label] for w in self.windows])
        tru = np.concatenate([self.truth[w.label] for w in self.windows])
        masks = [np.abs(self.truth[w.label]) > 0.05 * np.abs(self.truth[w.label]).max(initial=0.0)
                 for w in self.windows]
        m = np.concatenate(masks)
        return float(np.linalg.norm(est[m] - tru[m]) / np.linalg.norm(tru[m])) if m.any() else 0.0


def relative_rms(estimate, truth, threshold: float = 0.05) -> float:
    """||est - truth|| / ||truth|| over points where |truth| > threshold * max |truth|."""
    est, tru = np.asarray(estimate), np.asarray(truth)
    peak = np.abs(tru).max(initial=0.0)
    if peak == 0:
        return float(np.abs(est).max(initial=0.0))
    m = np.abs(tru) > threshold * peak
    return float(np.linalg.norm(est[m] - tru[m]) / np.linalg.norm(tru[m]))


def solve_qr(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares solution through a thin QR factorization (independent of the SVD route)."""
    q, r = scipy.linalg.qr(A, mode="economic")
    return scipy.linalg.solve_triangular(r, q.T @ b)


def _estimates(system: LinearSystem, x: np.ndarray) -> dict:
    out = {}
    for win in system.windows:
        parts = {}
        for u, v in zip(system.unknowns, x):
            if u.spectrum == win.label:
                parts[(u.k, u.part)] = v
        parity = any(p == "even" for _, p in parts)
        vals = []
        for k in win.k:
            a = abs(int(k))
            if parity:
                vals.append(parts.get((a, "even"), 0.0) + np.sign(k) * parts.get((a, "odd"), 0.0))
            else:
                vals.append(parts.get((a, "re"), 0.0) + 1j * parts.get((a, "im"), 0.0))
        out[win.label] = np.asarray(vals, dtype=complex)
    return out


def solve_spectra(system: LinearSystem, regularization: float = 0.0, auto_regularize: bool = True,
                  cond_limit: float = COND_LIMIT) -> ReconstructionResult:
    """Least squares (``regularization = 0``) or Tikhonov ``min ||Ax - b||^2 + lam ||x||^2``.

    A numerically singular matrix with ``regularization = 0`` raises
    :class:`SolverFailure`. An ill-conditioned one (cond > ``cond_limit``)
    falls back to ``lam = 1e-6 ||A||^2`` when ``auto_regularize`` is set.
    """
    A, b = system.A, system.b
    if regularization < 0 or not math.isfinite(regularization):
        raise InvalidInput("regularization must be finite and non-negative")
    if A.ndim != 2 or A.shape[0] == 0 or not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
        raise InvalidInput("linear system must be a finite non-empty matrix")
    s = np.linalg.svd(A, compute_uv=False)
    cond = math.inf if s[-1] == 0 else float(s[0] / s[-1])
    lam = float(regularization)
    if A.shape[0] < A.shape[1]:
        s = np.concatenate([s, np.zeros(A.shape[1] - A.shape[0])])
        cond = math.inf
    singular = s[-1] <= max(A.shape) * np.finfo(float).eps * s[0]
    if lam == 0 and cond > cond_limit:
        if singular or not auto_regularize:
            raise SolverFailure(f"system is numerically singular (condition number {cond:.3g}); use lambda > 0")
        lam = 1e-6 * s[0] ** 2
        warnings.warn(f"condition number {cond:.3g} > {cond_limit:g}; using lambda = {lam:.3g}", RuntimeWarning)
    if lam == 0:
        x = np.linalg.lstsq(A, b, rcond=None)[0]
    else:
        aug = np.vstack([A, math.sqrt(lam) * np.eye(A.shape[1])])
        x = np.linalg.lstsq(aug, np.concatenate([b, np.zeros(A.shape[1])]), rcond=None)[0]
    res = float(np.linalg.norm(A @ x - b))
    return ReconstructionResult(system.windows, _estimates(system, x), x, res, cond, lam,
                                diagnostics=dict(system.diagnostics))


# ---------------------------------------------------------------------------
# protocols
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolParams:
    t_max: float = REFERENCE_T_MAX
    n_values: tuple = tuple(range(1, 9))
    repetitions: int = 20
    K: int = 8
    shots: float = math.inf
    regularization: float = 0.0
    seed: int | None = None
    splitting: float = REFERENCE_SPLITTING
    threshold: float = SUPPRESSION_THRESHOLD
    drop_imbalanced: bool = False
    route: str = "filters"
    workers: int = 1


@dataclass
class ProtocolOutcome:
    result: ReconstructionResult
    system: LinearSystem
    table: list
    design: ExperimentDesign


def run_protocol_large_splitting(noise: SpectrumSet, params: ProtocolParams = ProtocolParams(),
                                 compare: bool = True) -> ProtocolOutcome:
    """Simulate the six-sequence campaign and invert for S_{-1,1}, S_{0,0}, S_{1,-1}."""
    sys = SystemConfig(splitting=params.splitting, drop_imbalanced=params.drop_imbalanced)
    design = ExperimentDesign.reference(params.splitting, params.t_max, params.n_values, params.repetitions,
                                    params.shots, sys)
    _check_suppression(design, params.threshold)
    table = simulate_measurements(design, noise, params.seed, params.route, params.workers)
    system = assemble_system(design, table, K=params.K, threshold=params.threshold)
    system.diagnostics["truncation_tail"] = truncation_tail(design, table, noise, system.windows)["aggregate"]
    result = solve_spectra(system, params.regularization)
    if compare:
        result.compare(noise)
    return ProtocolOutcome(result, system, table, design)


# zero splitting ------------------------------------------------------------

DIAGONAL_LIBRARY = (
    ("CPMG-z", [("1/4", "z"), ("3/4", "z")]),
    ("CPMG-x", [("1/4", "x"), ("3/4", "x")]),
    ("CPMG-y", [("1/4", "y"), ("3/4", "y")]),
    ("echo-z", [("1/2", "z"), ("1", "z")]),
    ("echo-x", [("1/2", "x"), ("1", "x")]),
    ("echo-y", [("1/2", "y"), ("1", "y")]),
    ("XY4", [("1/4", "x"), ("1/2", "y"), ("3/4", "x"), ("1", "y")]),
    ("XZY", [("1/3", "x"), ("2/3", "z"), ("1", "y")]),
    ("ZXY", [("1/4", "z"), ("1/2", "x"), ("1", "y")]),
    ("YXZ", [("1/6", "y"), ("1/2", "x"), ("5/6", "z")]),
)


def diagonal_library(t_max: float = REFERENCE_T_MAX, n_values=range(1, 9), repetitions: int = 20,
                     names=None) -> tuple:
    """Experiments built from the diagonal pi-pulse library at T_c = t_max / n."""
    chosen = [(nm, it) for nm, it in DIAGONAL_LIBRARY if names is None or nm in names]
    return tuple(Experiment(sequence_from_axes(1.0, 1, items, name), t_max / n, repetitions)
                 for name, items in chosen for n in n_values)


def zero_splitting_windows(omega0: float, K: int = 8) -> tuple:
    wins = [ReconstructionWindow(f"S+_{a}{a}", 0.0, omega0, K, Basis.CARTESIAN, (i, i), "plus", True)
            for i, a in enumerate(AXES)]
    for a, b in PAIRS:
        ij = (AXES.index(a), AXES.index(b))
        wins.append(ReconstructionWindow(f"S+_{a}{b}", 0.0, omega0, K, Basis.CARTESIAN, ij, "plus", True))
        wins.append(ReconstructionWindow(f"S-_{a}{b}", 0.0, omega0, K, Basis.CARTESIAN, ij, "minus", True))
    return tuple(wins)


def _zero_channels(C: np.ndarray) -> dict:
    """Real measured channels from C (rows x, y, z; columns 0, x, y, z)."""
    x, y, z = 0, 1, 2
    return {
        "self_x": C[x, 0].real, "self_y": C[y, 0].real, "self_z": C[z, 0].real,
        "diff_xz": ((C[x, 2] - C[z, 2]) / 4j).real,
        "diff_xy": ((C[x, 3] - C[y, 3]) / -4j).real,
        "diff_yz": ((C[z, 1] - C[y, 1]) / 4j).real,
        "quant_yz": (C[x, 1] / 4).real,
        "quant_xz": (C[y, 2] / -4).real,
        "quant_xy": (C[z, 3] / 4).real,
    }


def _c_matrix(co: dict) -> np.ndarray:
    return np.array([co[g].values for g in AXES])


def assemble_zero_splitting(design: ExperimentDesign, table: list, K: int = 8) -> LinearSystem:
    """Equations from the self, difference (G+ only) and diagonal-C channels."""
    if design.system.splitting != 0:
        raise InvalidInput("zero-splitting protocol needs W = 0")
    windows = zero_splitting_windows(design.omega_b, K)
    unknowns, col = [], {}

    def add(label, k, part):
        col[(label, k, part)] = len(unknowns)
        unknowns.append(Unknown(label, k, part))

    for a in AXES:
        for k in range(K + 1):
            add(f"S+_{a}{a}", k, "re")
    for a, b in PAIRS:
        for k in range(K + 1):
            add(f"S+_{a}{b}", k, "re")
            if k:
                add(f"S+_{a}{b}", k, "im")
                add(f"S-_{a}{b}", k, "re")
            add(f"S-_{a}{b}", k, "im")
    rows, rhs, labels = [], [], []
    for rec in table:
        e = rec.experiment
        n = harmonic_step(e.cycle_time, design.t_max)
        sm = switching_matrix(e.build(1), Basis.CARTESIAN)
        if not is_diagonal(sm):
            raise InvalidInput(f"sequence {e.name} is not diagonal")
        hs = np.arange(0, K // n + 1) * n
        xw = hs * design.omega_b
        f = first_order_matrix(sm, xw, e.cycle_time)
        fm = first_order_matrix(sm, -xw, e.cycle_time)
        wts = np.where(hs == 0, 0.5, 1.0) * e.repetitions / e.cycle_time
        G = {(a, b): f[:, i, i] * fm[:, jj, jj] for i, a in enumerate(AXES) for jj, b in enumerate(AXES)}
        meas = _zero_channels(_c_matrix(rec.coefficients))
        for name, value in meas.items():
            row = np.zeros(len(unknowns))
            kind, ax = name.split("_")
            if kind == "self":
                for b in AXES:
                    if b != ax:
                        g = G[(b, b)].real
                        for h, w_, gv in zip(hs, wts, g):
                            row[col[(f"S+_{b}{b}", int(h), "re")]] += -2 * w_ * gv
            else:
                a, b = ax
                g = G[(a, b)]
                sign = "+" if kind == "diff" else "-"
                for h, w_, gv in zip(hs, wts, g):
                    h = int(h)
                    lab = f"S{sign}_{a}{b}"
                    if kind == "diff":
                        row[col[(lab, h, "re")]] += -w_ * gv.real
                        if h:
                            row[col[(lab, h, "im")]] += w_ * gv.imag
                    else:
                        if h:
                            row[col[(lab, h, "re")]] += w_ * gv.imag
                        row[col[(lab, h, "im")]] += w_ * gv.real
            rows.append(row)
            rhs.append(float(value))
            labels.append((e.name, e.cycle_time, name, "re"))
    A = np.array(rows)
    system = LinearSystem(A, np.array(rhs), unknowns, labels, windows)
    system.diagnostics.update({"rows": len(rows), "unknowns": len(unknowns)})
    return system


def run_protocol_zero_splitting(noise: SpectrumSet, design: ExperimentDesign | None = None, K: int = 8,
                                regularization: float = 0.0, seed: int | None = None, workers: int = 1,
                                compare: bool = True) -> ProtocolOutcome:
    """Cartesian S+- from diagonal pi-pulse sequences at W = 0 (G+ filters only).

    Insufficient sequence diversity surfaces as :class:`SolverFailure`.
    """
    if design is None:
        design = ExperimentDesign(diagonal_library(), REFERENCE_T_MAX, SystemConfig(splitting=0.0))
    if design.system.splitting != 0:
        raise InvalidInput("zero-splitting protocol needs W = 0")
    finite = not math.isinf(design.shots)
    if finite and seed is None:
        raise InvalidInput("finite shot counts need a seed")

    def one(i):
        e = design.experiments[i]
        co = cumulant_coefficients(e.build(), noise, design.system, gammas=AXES)
        if finite:
            co = _sampled_coefficients(co, int(design.shots), np.random.default_rng([seed, i]))
        return MeasurementRecord(e, q_from_coefficients(co["z"], co["x"]), co)

    table = _run_parallel(one, range(len(design.experiments)), workers)
    system = assemble_zero_splitting(design, table, K)
    result = solve_spectra(system, regularization, auto_regularize=False)
    if compare:
        result.compare(noise)
    return ProtocolOutcome(result, system, table, design)


# bandwidth -------------------------------------------------------------------

@dataclass(frozen=True)
class BandwidthRow:
    width_mhz: float
    error: float
    errors: dict
    warned: bool


def support_exceeds_window(params: GaussianTripleParams, splitting: float, half_width: float,
                           widths: float = 3.0) -> bool:
    """True when any peak's ``widths``-sigma extent leaves its window around 0 or +-W."""
    for c in params.centers:
        anchor = min((-splitting, 0.0, splitting), key=lambda a: abs(c - a))
        if abs(c - anchor) + widths * params.width > half_width:
            return True
    return False


def bandwidth_study(widths_mhz=(2.4, 4.0, 8.0), params: ProtocolParams = ProtocolParams(),
                    base: GaussianTripleParams | None = None) -> list:
    """Reconstruction error of the large-splitting protocol against the noise width."""
    base = GaussianTripleParams.reference(params.splitting) if base is None else base
    half_width = params.K * 2 * math.pi / params.t_max
    out = []
    for wm in widths_mhz:
        p = replace(base, width=wm * MHZ)
        warned = support_exceeds_window(p, params.splitting, half_width)
        if warned:
            warnings.warn(f"noise width {wm} MHz extends beyond the window K w0 = "
                          f"{half_width / MHZ:.3g} MHz; comb truncation errors expected", TruncationWarning)
        res = run_protocol_large_splitting(gaussian_triple(p), params).result
        out.append(BandwidthRow(float(wm), res.overall_error, dict(res.errors), warned))
    return out
