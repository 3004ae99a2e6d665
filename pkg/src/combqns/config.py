"""JSON experiment descriptors.

Frequencies in files are ordinary frequencies (``*_mhz``, ``*_ghz`` and the
first column of tables in Hz) and are converted to angular frequency
(rad/s, multiply by 2 pi) here. Times are in microseconds (``*_us``) or
nanoseconds (``*_ns``). The spectral amplitude is used as given, in the
internal units where (1/2 pi) int S dw is a variance in rad^2/s^2.

Example::

    {
      "system": {"splitting_ghz": 27.0},
      "noise": {"type": "gaussian_triple", "width_mhz": 0.8, "amplitude": 332},
      "design": {"t_max_us": 2.4, "n_values": [1, 2, 3, 4, 5, 6, 7, 8], "repetitions": 20, "K": 8},
      "sequence": {"cycle_time_us": 2.4, "repetitions": 20,
                   "pulses": [{"t_over_Tc": "1/4", "theta_xyz": [0, 0, 3.141592653589793]},
                              {"t_over_Tc": "3/4", "theta_xyz": [0, 0, 3.141592653589793]}]},
      "filters": {"kind": "first_order", "basis": "spherical", "start_mhz": -4, "stop_mhz": 4, "num": 201},
      "oracle": {"trajectories": 2000, "dt_ns": 5, "prep": "x", "sign": 1, "observable": "x"}
    }

``sequence`` may instead name a built-in (``{"builtin": "U3", ...}``).
``noise.type`` is ``gaussian_triple``, ``classical`` or ``table``; table
entries are keyed ``"x,z"`` (or ``"-1,1"`` for the spherical basis) and hold
``[freq_hz, re, im]`` rows.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dynamics import SystemConfig
from .errors import InvalidInput
from .noise import MHZ, ClassicalComponent, GaussianTripleParams, SpectrumSet, classical_model, gaussian_triple
from .pulses import Basis, Pulse, PulseSequence, apply_frame_tilt, builtin_by_name

TWO_PI = 2 * math.pi


def load_config(path) -> dict:
    try:
        with open(Path(path)) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InvalidInput("config root must be a JSON object")
    return cfg


def _num(d: dict, key: str, default=None) -> float:
    v = d.get(key, default)
    if v is None:
        raise InvalidInput(f"missing numeric field {key!r}")
    try:
        v = float(v)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"field {key!r} must be a number") from exc
    if not math.isfinite(v):
        raise InvalidInput(f"field {key!r} must be finite")
    return v


def parse_basis(name) -> Basis:
    if isinstance(name, Basis):
        return name
    try:
        return Basis(str(name).lower())
    except ValueError as exc:
        raise InvalidInput(f"unknown basis {name!r}") from exc


def system_from_config(cfg: dict, default_splitting_ghz: float = 0.0) -> SystemConfig:
    s = cfg.get("system", {})
    kw = {"splitting": TWO_PI * 1e9 * _num(s, "splitting_ghz", default_splitting_ghz)}
    if "omega_cut_mhz" in s:
        kw["omega_cut"] = _num(s, "omega_cut_mhz") * MHZ
    if "rtol" in s:
        kw["rtol"] = _num(s, "rtol")
    if "drop_imbalanced" in s:
        kw["drop_imbalanced"] = bool(s["drop_imbalanced"])
    return SystemConfig(**kw)


def _table_noise(n: dict) -> SpectrumSet:
    basis = parse_basis(n.get("basis", "cartesian"))
    entries = n.get("entries")
    if not isinstance(entries, dict) or not entries:
        raise InvalidInput("table noise needs an 'entries' object")
    parsed = {}
    for key, rows in entries.items():
        labels = [lbl.strip() for lbl in str(key).split(",")]
        if len(labels) != 2:
            raise InvalidInput(f"table entry key {key!r} must look like 'x,z' or '-1,1'")
        if basis is Basis.SPHERICAL:
            try:
                labels = [int(lbl) for lbl in labels]
            except ValueError as exc:
                raise InvalidInput(f"bad spherical labels in {key!r}") from exc
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3 or len(arr) < 2:
            raise InvalidInput(f"table entry {key!r} needs at least two [freq_hz, re, im] rows")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise InvalidInput(f"table entry {key!r} frequencies must increase")
        parsed[tuple(basis.index(lbl) for lbl in labels)] = arr
    # each entry interpolates on its own knots and vanishes outside them
    knots = {ab: (TWO_PI * arr[:, 0], arr[:, 1], arr[:, 2]) for ab, arr in parsed.items()}

    def model(w):
        out = np.zeros((len(w), 3, 3), dtype=complex)
        for (a, b), (f, re, im) in knots.items():
            out[:, a, b] = (np.interp(w, f, re, left=0.0, right=0.0)
                            + 1j * np.interp(w, f, im, left=0.0, right=0.0))
        return out

    lo = min(k[0][0] for k in knots.values())
    hi = max(k[0][-1] for k in knots.values())
    return SpectrumSet(basis, model, ((float(lo), float(hi)),), "table")


def noise_from_config(cfg: dict, splitting: float = 0.0) -> SpectrumSet:
    n = cfg.get("noise")
    if not isinstance(n, dict):
        raise InvalidInput("config needs a 'noise' object")
    kind = n.get("type", "gaussian_triple")
    if kind == "gaussian_triple":
        p = GaussianTripleParams.reference(
            splitting, width_mhz=_num(n, "width_mhz", 0.8), amplitude=_num(n, "amplitude", 332.0),
            offset_mhz=_num(n, "offset_mhz", 0.81), center_mhz=_num(n, "center_mhz", 0.8))
        return gaussian_triple(p)
    if kind == "classical":
        comps = []
        for c in n.get("components", []):
            vec = c.get("vector")
            if not isinstance(vec, list) or len(vec) != 3:
                raise InvalidInput("classical component needs a 3-element 'vector'")
            v = tuple(complex(x[0], x[1]) if isinstance(x, list) else complex(x) for x in vec)
            comps.append(ClassicalComponent(_num(c, "amplitude"), _num(c, "center_mhz") * MHZ,
                                            _num(c, "width_mhz") * MHZ, v))
        if not comps:
            raise InvalidInput("classical noise needs at least one component")
        return classical_model(comps, parse_basis(n.get("basis", "cartesian")))
    if kind == "table":
        return _table_noise(n)
    raise InvalidInput(f"unknown noise type {kind!r}")


def _pulse(d: dict, time: float) -> Pulse:
    ang = d.get("theta_xyz")
    if not isinstance(ang, list) or len(ang) != 3:
        raise InvalidInput("pulse needs a three-element 'theta_xyz'")
    return Pulse(*(float(a) for a in ang), time=time)


def sequence_from_config(cfg: dict) -> PulseSequence:
    s = cfg.get("sequence")
    if not isinstance(s, dict):
        raise InvalidInput("config needs a 'sequence' object")
    tc = _num(s, "cycle_time_us") * 1e-6
    m = s.get("repetitions", 1)
    if not isinstance(m, int) or m < 1:
        raise InvalidInput("repetitions must be a positive integer")
    if "builtin" in s:
        return builtin_by_name(s["builtin"], tc, m)
    pulses = []
    for p in s.get("pulses", []):
        try:
            frac = Fraction(str(p.get("t_over_Tc")))
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidInput(f"bad t_over_Tc {p.get('t_over_Tc')!r}") from exc
        pulses.append(_pulse(p, float(frac) * tc))
    seq = PulseSequence(tuple(pulses), tc, m, s.get("label", "custom"))
    if "tilt" in s:
        seq = apply_frame_tilt(seq, _pulse(s["tilt"], 0.0))
    return seq
