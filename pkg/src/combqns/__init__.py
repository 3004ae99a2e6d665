"""Comb-based quantum noise spectroscopy for a qubit under multiaxis noise."""
from .dynamics import (AccessibleQuantities, CumulantCoefficients, MeasurementSetting, SystemConfig,
                       accessible_M, diagonal_closed_forms, cumulant_coefficients, expectation_value,
                       extract_coefficients, monte_carlo_oracle, q_quantities, second_cumulant_cartesian,
                       second_cumulant_spherical)
from .errors import ExtractionFailure, InvalidInput, NumericalFailure, QNSError, SolverFailure
from .filters import (FrequencyGrid, comb_ratio, first_order_ff, first_order_matrix, g_filters,
                      generalized_filter, generalized_filters, imbalanced_bound, parity_components,
                      second_order_ff)
from .noise import (ClassicalComponent, GaussianTripleParams, SpectrumSet, classical_model, gaussian_triple,
                    sample_classical_trajectories, table_spectrum, to_basis, validate_symmetries)
from .pulses import (Basis, Pulse, PulseSequence, SwitchingMatrix, SymmetrySpec, apply_frame_tilt,
                     builtin_sequence, check_symmetry, switching_matrix)
from .reconstruction import (ExperimentDesign, LinearSystem, ProtocolParams, ReconstructionResult,
                             ReconstructionWindow, assemble_system, bandwidth_study, run_protocol_large_splitting,
                             run_protocol_zero_splitting, resample_shots, simulate_measurements,
                             solve_spectra)

__version__ = "0.1.0"
