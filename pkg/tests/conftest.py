"""Shared fixtures and independent numerical oracles."""
import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import integrate

from combqns.noise import MHZ, ClassicalComponent, GaussianTripleParams, classical_model, gaussian_triple
from combqns.pulses import Pulse, PulseSequence

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_sequence(rng, n_pulses=3, cycle_time=1e-6, repetitions=1, name="random"):
    """Generic rotations at sorted, well-separated random times inside the cycle."""
    times = np.sort(rng.choice(np.arange(1, 40), size=n_pulses, replace=False)) / 40 * cycle_time
    pulses = [Pulse(*rng.uniform(-math.pi, math.pi, 3), time=float(t)) for t in times]
    return PulseSequence(tuple(pulses), cycle_time, repetitions, name)


def quad_first_order(sm, entry, omega, T=None):
    """int_0^T y(t) e^{i w t} dt by adaptive quadrature, interval by interval."""
    starts, widths, _ = sm.intervals(T)
    vals = sm.entry(*entry)[: len(starts)]
    total = 0j
    for s, h, y in zip(starts, widths, vals):
        re = integrate.quad(lambda t: math.cos(omega * t), s, s + h, epsabs=0, epsrel=1e-12, limit=400)[0]
        im = integrate.quad(lambda t: math.sin(omega * t), s, s + h, epsabs=0, epsrel=1e-12, limit=400)[0]
        total += y * (re + 1j * im)
    return total


def quad_second_order(sm_a, ea, sm_b, eb, omega, omega_p, T=None):
    """Nested integral int_0^T dt int_0^t dt' y_a(t) y_b(t') e^{i(w t + w' t')}.

    Interval pairs below the diagonal factorize into 1-d quadratures; the
    diagonal blocks are triangles integrated with ``dblquad``.
    """
    starts, widths, _ = sm_a.intervals(T)
    ya = sm_a.entry(*ea)[: len(starts)]
    yb = sm_b.entry(*eb)[: len(starts)]

    def one(f, s, h):
        re = integrate.quad(lambda t: f(t).real, s, s + h, epsabs=0, epsrel=1e-12, limit=400)[0]
        im = integrate.quad(lambda t: f(t).imag, s, s + h, epsabs=0, epsrel=1e-12, limit=400)[0]
        return re + 1j * im

    outer = [one(lambda t: np.exp(1j * omega * t), s, h) for s, h in zip(starts, widths)]
    inner = [one(lambda t: np.exp(1j * omega_p * t), s, h) for s, h in zip(starts, widths)]
    total = 0j
    for i, (s, h) in enumerate(zip(starts, widths)):
        for j in range(i):
            total += ya[i] * yb[j] * outer[i] * inner[j]

        def f(tp, t, part):
            v = np.exp(1j * (omega * t + omega_p * tp))
            return v.real if part == 0 else v.imag

        re = integrate.dblquad(f, s, s + h, lambda t: s, lambda t: t, args=(0,), epsabs=0, epsrel=1e-12)[0]
        im = integrate.dblquad(f, s, s + h, lambda t: s, lambda t: t, args=(1,), epsabs=0, epsrel=1e-12)[0]
        total += ya[i] * yb[i] * (re + 1j * im)
    return total


@pytest.fixture(scope="session")
def reference_noise():
    return gaussian_triple(GaussianTripleParams.reference())


@pytest.fixture(scope="session")
def weak_classical_noise():
    """Multiaxis classical noise in the weak-coupling regime for microsecond sequences."""
    return classical_model([
        ClassicalComponent(2.0e3, 0.3 * MHZ, 0.2 * MHZ, (0.6, 0.3, 0.75)),
        ClassicalComponent(1.5e3, 0.8 * MHZ, 0.3 * MHZ, (0.2 + 0.4j, 0.7, -0.3)),
    ])


@pytest.fixture(scope="session")
def reference_outcome(reference_noise):
    """The full six-sequence, eight-cycle-time campaign with exact Q values."""
    from combqns.reconstruction import run_protocol_large_splitting
    return run_protocol_large_splitting(reference_noise)


@pytest.fixture(scope="session")
def bandwidth_rows():
    import warnings

    from combqns.reconstruction import bandwidth_study
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = bandwidth_study()
    return rows, caught


# acceptance report: one line per criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def acceptance_line(number: int, title: str, measured: float, tolerance: float, ok: bool) -> bool:
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {title}: measured {measured:.3e}, tolerance {tolerance:.1e}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
