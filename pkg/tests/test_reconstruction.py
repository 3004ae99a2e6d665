import math
import warnings

import numpy as np
import pytest

from combqns.dynamics import AXES, CumulantCoefficients, SystemConfig, cumulant_coefficients
from combqns.errors import InvalidInput, SolverFailure
from combqns.noise import (MHZ, REFERENCE_SPLITTING, ClassicalComponent, SpectrumSet, classical_model,
                           gaussian_triple, zero_spectrum)
from combqns.pulses import Basis
from combqns.reconstruction import (REFERENCE_T_MAX, Experiment, ExperimentDesign, LinearSystem, MeasurementRecord,
                                    ProtocolParams, ReconstructionWindow, TruncationWarning, _zero_channels,
                                    assemble_system, assemble_zero_splitting, diagonal_library, harmonic_step,
                                    relative_rms, resample_shots, run_protocol_large_splitting, run_protocol_zero_splitting,
                                    simulate_measurements, solve_qr, solve_spectra, spherical_windows,
                                    support_exceeds_window)

ZERO_SPLIT_NAMES = ("CPMG-x", "CPMG-y", "echo-z", "XY4", "XZY", "ZXY", "YXZ")


def blank_table(design):
    """Records with Q = 0 and vanishing coefficients: enough to assemble the design matrix."""
    zero = {g: CumulantCoefficients(g, np.zeros(4, dtype=complex)) for g in AXES}
    return [MeasurementRecord(e, np.zeros(4, dtype=complex), zero) for e in design.experiments]


def spread(est, ref):
    a = np.concatenate([est[k] for k in sorted(est)])
    b = np.concatenate([ref[k] for k in sorted(ref)])
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# designs ----------------------------------------------------------------------

def test_reference_design_layout():
    d = ExperimentDesign.reference()
    assert len(d.experiments) == 48
    assert {e.quantities for e in d.experiments if e.name in ("U1", "U2", "U3")} == {(1, 2)}
    assert {e.quantities for e in d.experiments if e.name in ("U4", "U5", "U6")} == {(3, 4)}
    assert d.omega_b == pytest.approx(2 * math.pi / 2.4e-6)


def test_noncommensurate_cycle_time_rejected():
    assert harmonic_step(0.6e-6, 2.4e-6) == 4
    with pytest.raises(InvalidInput):
        ExperimentDesign((Experiment("U1", 0.7e-6, 20),), 2.4e-6)
    with pytest.raises(InvalidInput):
        Experiment("U1", 1e-6, 0)
    with pytest.raises(InvalidInput):
        Experiment("U1", 1e-6, 2, quantities=(5,))
    with pytest.raises(InvalidInput):
        ExperimentDesign((Experiment("U1", 1.2e-6, 20),), 2.4e-6, shots=10.5)


def test_window_must_match_design_fundamental():
    d = ExperimentDesign.reference()
    wins = spherical_windows(REFERENCE_SPLITTING, d.omega_b / 2, 8)
    with pytest.raises(InvalidInput):
        assemble_system(d, blank_table(d), wins)


def test_small_splitting_rejected_with_guidance():
    params = ProtocolParams(splitting=2 * math.pi * 1e6)
    with pytest.raises(InvalidInput, match="zero-splitting"):
        run_protocol_large_splitting(zero_spectrum(), params)


# simulation -------------------------------------------------------------------

def test_zero_noise_gives_zero_quantities():
    d = ExperimentDesign.reference()
    table = simulate_measurements(d, zero_spectrum())
    assert len(table) == 48
    assert all(np.allclose(r.q, 0) for r in table)


def test_finite_shots_need_a_seed():
    d = ExperimentDesign.reference(n_values=(1,), shots=100)
    with pytest.raises(InvalidInput):
        simulate_measurements(d, zero_spectrum())


def test_shot_noise_scaling_and_order_independence(reference_noise):
    exps = (Experiment("U1", 2.4e-6, 20, (1, 2)), Experiment("U4", 2.4e-6, 20, (3, 4)))
    sys_cfg = SystemConfig(splitting=REFERENCE_SPLITTING)
    exact = simulate_measurements(ExperimentDesign(exps, 2.4e-6, sys_cfg), reference_noise, route="cumulant")
    dev = {}
    for shots in (10_000, 1_000_000):
        table = resample_shots(exact, shots, seed=5)
        dev[shots] = np.array([np.abs(t.q - e.q)[list(np.array(t.experiment.quantities) - 1)]
                               for t, e in zip(table, exact)])
    # standard errors of expectation values scale as 1/sqrt(shots); Q inherits that at O(1) gain
    assert dev[1_000_000].max() < 10 / math.sqrt(1e6)
    assert dev[10_000].mean() > 4 * dev[1_000_000].mean()
    d = ExperimentDesign(exps, 2.4e-6, sys_cfg, shots=10_000)
    serial = simulate_measurements(d, reference_noise, seed=5)
    threaded = simulate_measurements(d, reference_noise, seed=5, workers=2)
    assert all(np.array_equal(a.q, b.q) for a, b in zip(serial, threaded))
    assert all(np.array_equal(a.q, b.q) for a, b in zip(serial, resample_shots(exact, 10_000, seed=5)))


def test_resampling_needs_coefficients(reference_noise):
    d = ExperimentDesign((Experiment("U1", 2.4e-6, 20, (1, 2)),), 2.4e-6, SystemConfig(splitting=REFERENCE_SPLITTING))
    with pytest.raises(InvalidInput):
        resample_shots(blank_table(d)[:0] + [MeasurementRecord(d.experiments[0], np.zeros(4))], 100, seed=1)
    with pytest.raises(InvalidInput):
        simulate_measurements(d, reference_noise, route="guess")


# the reference campaign -------------------------------------------------------------

def test_reference_campaign_recovers_spectra(reference_outcome):
    res = reference_outcome.result
    assert set(res.errors) == {"S_-1,1", "S_0,0", "S_1,-1"}
    assert max(res.errors.values()) < 0.10
    assert res.condition_number < 1e3
    assert res.regularization == 0


def test_reference_system_shape_and_bounds(reference_outcome):
    sysm = reference_outcome.system
    assert sysm.diagnostics["unknowns"] == 51 == len(sysm.unknowns)
    assert sysm.A.shape[0] >= sysm.A.shape[1]
    assert sysm.diagnostics["truncation_tail"] < 1e-3
    assert sysm.diagnostics["imbalanced_bound_relative"] < 1e-3


def test_consistent_system_recovered_exactly(reference_outcome):
    sysm = reference_outcome.system
    rng = np.random.default_rng(0)
    x = rng.normal(size=sysm.A.shape[1])
    synthetic = LinearSystem(sysm.A, sysm.A @ x, sysm.unknowns, sysm.rows, sysm.windows)
    res = solve_spectra(synthetic)
    assert np.linalg.norm(res.solution - x) < 1e-9 * np.linalg.norm(x)
    assert np.linalg.norm(solve_qr(sysm.A, sysm.b) - reference_outcome.result.solution) < \
        1e-9 * np.linalg.norm(reference_outcome.result.solution)


def test_single_cycle_time_is_rank_deficient():
    d = ExperimentDesign.reference(n_values=(1,))
    sysm = assemble_system(d, blank_table(d))
    assert sysm.A.shape[0] < sysm.A.shape[1]
    with pytest.raises(SolverFailure):
        solve_spectra(sysm, auto_regularize=False)
    with pytest.raises(SolverFailure):
        solve_spectra(sysm)
    assert np.allclose(solve_spectra(sysm, regularization=1e-3).solution, 0)


def test_condition_number_independent_of_amplitude():
    d = ExperimentDesign.reference()
    a = assemble_system(d, blank_table(d))
    scaled = [MeasurementRecord(r.experiment, 1e3 * np.ones(4), None) for r in blank_table(d)]
    b = assemble_system(d, scaled)
    assert a.condition_number == pytest.approx(b.condition_number, rel=1e-12)
    assert np.array_equal(a.A, b.A)


def test_ill_conditioned_system_falls_back_to_regularization(reference_outcome):
    sysm = reference_outcome.system
    A = sysm.A.copy()
    rng = np.random.default_rng(1)
    A[:, 1] = A[:, 0] + 1e-10 * np.linalg.norm(A[:, 0]) * rng.normal(size=len(A)) / math.sqrt(len(A))
    bad = LinearSystem(A, sysm.b, sysm.unknowns, sysm.rows, sysm.windows)
    with pytest.warns(RuntimeWarning, match="condition number"):
        res = solve_spectra(bad)
    assert res.regularization > 0
    with pytest.raises(SolverFailure):
        solve_spectra(bad, auto_regularize=False)
    with pytest.raises(InvalidInput):
        solve_spectra(sysm, regularization=-1.0)


def test_regularization_shrinks_solution(reference_outcome):
    sysm = reference_outcome.system
    plain = np.linalg.norm(reference_outcome.result.solution)
    shrunk = np.linalg.norm(solve_spectra(sysm, regularization=1e12 * np.linalg.norm(sysm.A, 2) ** 2).solution)
    assert shrunk < 1e-6 * plain


def test_imbalanced_terms_do_not_matter(reference_noise, reference_outcome):
    dropped = run_protocol_large_splitting(reference_noise, ProtocolParams(drop_imbalanced=True))
    assert spread(dropped.result.estimates, reference_outcome.result.estimates) < 0.01


def test_more_repetitions_stay_accurate(reference_noise):
    out = run_protocol_large_splitting(reference_noise, ProtocolParams(repetitions=40))
    assert max(out.result.errors.values()) < 0.10


def test_classical_noise_gives_even_dephasing_spectrum():
    noise = classical_model([ClassicalComponent(300.0, 0.5 * MHZ, 0.6 * MHZ, (0.4, 0.3, 1.0))])
    out = run_protocol_large_splitting(noise)
    x = out.result.solution
    odd = [v for u, v in zip(out.system.unknowns, x) if u.spectrum == "S_0,0" and u.part == "odd"]
    even = [v for u, v in zip(out.system.unknowns, x) if u.spectrum == "S_0,0" and u.part == "even"]
    assert np.linalg.norm(odd) < 0.01 * np.linalg.norm(even)


def test_shot_noise_reduces_reconstruction_error(reference_noise):
    # imbalanced terms are dropped to make the exact cumulant campaign affordable (checked negligible above)
    sys_cfg = SystemConfig(splitting=REFERENCE_SPLITTING, drop_imbalanced=True)
    design = ExperimentDesign.reference(system=sys_cfg)
    exact = simulate_measurements(design, reference_noise, route="cumulant")
    errs = []
    for shots in (10_000, 1_000_000):
        res = solve_spectra(assemble_system(design, resample_shots(exact, shots, seed=2)))
        errs.append(res.compare(reference_noise).overall_error)
    assert errs[0] > errs[1]


def test_relative_rms_masks_small_points():
    tru = np.array([1.0, 0.01, 0.5])
    est = np.array([1.1, 5.0, 0.5])
    assert relative_rms(est, tru) == pytest.approx(0.1 / math.hypot(1.0, 0.5))
    assert relative_rms(np.ones(3), np.zeros(3)) == 1.0


def test_window_truth_and_grid(reference_noise):
    w = ReconstructionWindow("S_0,0", 0.0, 1.0, 2)
    assert np.allclose(w.grid, [-2, -1, 0, 1, 2])
    one = ReconstructionWindow("S+_zz", 0.0, 1.0, 2, Basis.CARTESIAN, (2, 2), "plus", True)
    assert np.allclose(one.grid, [0, 1, 2])


# bandwidth -------------------------------------------------------------------

def test_bandwidth_errors_increase_and_warn(bandwidth_rows):
    rows, caught = bandwidth_rows
    errs = [r.error for r in rows]
    assert [r.width_mhz for r in rows] == [2.4, 4.0, 8.0]
    assert errs[0] < errs[1] < errs[2]
    assert any(issubclass(w.category, TruncationWarning) for w in caught)
    assert rows[-1].warned


def test_window_support_check():
    from combqns.noise import GaussianTripleParams
    half = 8 * 2 * math.pi / 2.4e-6
    assert not support_exceeds_window(GaussianTripleParams.reference(), REFERENCE_SPLITTING, half)
    wide = GaussianTripleParams.reference(width_mhz=8.0)
    assert support_exceeds_window(wide, REFERENCE_SPLITTING, half)


# zero splitting ------------------------------------------------------------------

def quantum_cartesian_noise(extra=None):
    p1 = np.array([[1.0, 0.3, 0.5], [0.3, 0.8, 0.2], [0.5, 0.2, 1.2]])
    p2 = np.array([[0.6, -0.2, 0.3], [-0.2, 0.9, 0.1], [0.3, 0.1, 0.7]])
    d = 0.5 * MHZ

    def model(w):
        g1 = np.exp(-0.5 * ((w - 0.8 * MHZ) / d) ** 2)
        g2 = np.exp(-0.5 * ((w + 0.5 * MHZ) / d) ** 2)
        out = 300.0 * (g1[:, None, None] * p1 + g2[:, None, None] * p2)
        if extra is not None:
            out = out + extra * g1[:, None, None]
        return out.astype(complex)

    return SpectrumSet(Basis.CARTESIAN, model, ((-0.5 * MHZ - 12 * d, -0.5 * MHZ + 12 * d),
                                                (0.8 * MHZ - 12 * d, 0.8 * MHZ + 12 * d)))


def zero_design(names=ZERO_SPLIT_NAMES):
    return ExperimentDesign(diagonal_library(names=names), REFERENCE_T_MAX, SystemConfig(splitting=0.0))


def test_zero_splitting_unknown_layout():
    d = zero_design()
    sysm = assemble_zero_splitting(d, blank_table(d))
    assert len(sysm.unknowns) == 3 * 9 + 3 * (9 + 8 + 8 + 9)
    assert sysm.A.shape == (len(d.experiments) * 9, 129)
    assert len(sysm.windows) == 9


def test_zero_splitting_insufficient_diversity():
    d = zero_design(("XY4", "XZY", "ZXY", "YXZ"))
    with pytest.raises(SolverFailure):
        solve_spectra(assemble_zero_splitting(d, blank_table(d)), auto_regularize=False)


def test_zero_splitting_rejects_tilted_or_split():
    d = ExperimentDesign((Experiment("U5", REFERENCE_T_MAX, 2),), REFERENCE_T_MAX, SystemConfig())
    with pytest.raises(InvalidInput):
        assemble_zero_splitting(d, blank_table(d))
    with pytest.raises(InvalidInput):
        run_protocol_zero_splitting(zero_spectrum(), ExperimentDesign.reference())


def test_difference_channel_sees_only_its_cross_spectrum():
    """(C_xy - C_zy) for diagonal control depends on S+_xz alone."""
    seq = diagonal_library(names=("XZY",), n_values=(2,))[0].build()
    perturb = np.array([[5.0, 2.0 + 1j, 0.0], [2.0 - 1j, -3.0, 4.0j], [0.0, -4.0j, 7.0]])
    base = cumulant_coefficients(seq, quantum_cartesian_noise(), SystemConfig())
    other = cumulant_coefficients(seq, quantum_cartesian_noise(perturb), SystemConfig())
    a = _zero_channels(np.array([base[g].values for g in AXES]))
    b = _zero_channels(np.array([other[g].values for g in AXES]))
    assert b["diff_xz"] == pytest.approx(a["diff_xz"], rel=1e-9)
    assert b["diff_xy"] != pytest.approx(a["diff_xy"], rel=1e-3)


@pytest.mark.slow
def test_zero_splitting_dephasing_only():
    noise = classical_model([ClassicalComponent(400.0, 0.6 * MHZ, 0.5 * MHZ, (0, 0, 1))])
    res = run_protocol_zero_splitting(noise, zero_design()).result
    assert res.errors["S+_zz"] < 0.05
    peak = np.abs(res.truth["S+_zz"]).max()
    for label, est in res.estimates.items():
        if label != "S+_zz":
            assert np.abs(est).max() < 0.05 * peak


@pytest.mark.slow
def test_zero_splitting_quantum_cross_spectra():
    res = run_protocol_zero_splitting(quantum_cartesian_noise(), zero_design()).result
    assert res.errors["S-_xz"] < 0.10
    assert max(res.errors.values()) < 0.10
