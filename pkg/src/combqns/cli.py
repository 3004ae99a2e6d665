"""Command-line interface: ``python -m combqns <command> [options]``.

Exit codes: 0 success, 2 solver failure, 3 invalid input, 1 other numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import (load_config, noise_from_config, parse_basis, sequence_from_config, system_from_config)
from .dynamics import MeasurementSetting, SystemConfig, expectation_value, cumulant_coefficients, monte_carlo_oracle
from .errors import InvalidInput, QNSError, SolverFailure
from .filters import first_order_matrix, generalized_filters_all
from .noise import MHZ
from .pulses import switching_matrix
from .reconstruction import (ExperimentDesign, ProtocolParams, bandwidth_study, diagonal_library,
                             run_protocol_large_splitting, run_protocol_zero_splitting, simulate_measurements)

EXIT_SOLVER = 2
EXIT_INVALID = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _shots(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        n = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError("shots must be a positive integer or 'inf'") from exc
    if n < 1:
        raise argparse.ArgumentTypeError("shots must be positive")
    return float(n)


def _seed(text: str) -> int:
    n = int(text)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="combqns", description="Comb-based multiaxis noise spectroscopy toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "filters": "tabulate first-order filter functions of a sequence",
        "simulate": "simulate the measurement campaign (Q_1..Q_4 per experiment)",
        "reconstruct": "simulate and invert the campaign for the noise spectra",
        "oracle": "compare Monte-Carlo and cumulant expectation values",
        "bandwidth-study": "reconstruction error against noise bandwidth",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, help="JSON experiment file")
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--seed", type=_seed, default=0)
        s.add_argument("--shots", type=_shots, default=math.inf, help="shots per setting, or 'inf'")
        s.add_argument("--lambda", dest="lam", type=float, default=0.0, help="Tikhonov regularization")
    return p


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _protocol_params(cfg: dict, args, sys_cfg: SystemConfig) -> ProtocolParams:
    d = cfg.get("design", {})
    return ProtocolParams(t_max=float(d.get("t_max_us", 2.4)) * 1e-6,
                          n_values=tuple(int(n) for n in d.get("n_values", range(1, 9))),
                          repetitions=int(d.get("repetitions", 20)), K=int(d.get("K", 8)),
                          shots=args.shots, regularization=args.lam, seed=args.seed,
                          splitting=sys_cfg.splitting, drop_imbalanced=sys_cfg.drop_imbalanced)


def _cmd_filters(cfg, args):
    seq = sequence_from_config(cfg)
    f = cfg.get("filters", {})
    kind = f.get("kind", "first_order")
    basis = parse_basis(f.get("basis", "spherical" if kind == "generalized" else "cartesian"))
    omega = np.linspace(float(f.get("start_mhz", -5)), float(f.get("stop_mhz", 5)), int(f.get("num", 201))) * MHZ
    sm = switching_matrix(seq, basis)
    labels = basis.labels
    if kind == "first_order":
        F = first_order_matrix(sm, omega)
        rows = [(seq.name, f"F1[{labels[a]},{labels[b]}]", w, F[i, a, b].real, F[i, a, b].imag)
                for a in range(3) for b in range(3) for i, w in enumerate(omega)]
    elif kind == "generalized":
        sys_cfg = system_from_config(cfg, 0.0)
        g = generalized_filters_all(sm, omega, None, sys_cfg.splitting)
        rows = [(seq.name, f"G{p + 1}[{j},{l}]", w, g[i, p, j + 1, l + 1].real, g[i, p, j + 1, l + 1].imag)
                for p in range(4) for j in (-1, 0, 1) for l in (-1, 0, 1) for i, w in enumerate(omega)]
    else:
        raise InvalidInput(f"unknown filter kind {kind!r}")
    _write_csv(args.out / "filters.csv", ("sequence_id", "filter", "omega_rad_s", "re", "im"), rows)


def _cmd_simulate(cfg, args):
    sys_cfg = system_from_config(cfg, 27.0)
    params = _protocol_params(cfg, args, sys_cfg)
    design = ExperimentDesign.reference(sys_cfg.splitting, params.t_max, params.n_values, params.repetitions,
                                    args.shots, sys_cfg)
    table = simulate_measurements(design, noise_from_config(cfg, sys_cfg.splitting), args.seed)
    rows = [(rec.experiment.name, rec.experiment.cycle_time, rec.experiment.repetitions, f"Q{p}",
             rec.q[p - 1].real, rec.q[p - 1].imag) for rec in table for p in rec.experiment.quantities]
    _write_csv(args.out / "measurements.csv", ("sequence_id", "cycle_time_s", "repetitions", "quantity", "re", "im"),
               rows)


def _spectra_rows(result):
    rows = []
    for w in result.windows:
        tru = result.truth[w.label] if result.truth else np.full(len(w.grid), np.nan)
        est = result.estimates[w.label]
        rows += [(w.label, om, t.real, t.imag, e.real, e.imag) for om, t, e in zip(w.grid, tru, est)]
    return rows


def _cmd_reconstruct(cfg, args):
    protocol = cfg.get("protocol", "large_splitting")
    if protocol == "zero_splitting":
        sys_cfg = system_from_config(cfg, 0.0)
        params = _protocol_params(cfg, args, sys_cfg)
        design = ExperimentDesign(diagonal_library(params.t_max, params.n_values, params.repetitions),
                                  params.t_max, sys_cfg, args.shots)
        out = run_protocol_zero_splitting(noise_from_config(cfg, 0.0), design, params.K, args.lam, args.seed)
    elif protocol == "large_splitting":
        sys_cfg = system_from_config(cfg, 27.0)
        params = _protocol_params(cfg, args, sys_cfg)
        out = run_protocol_large_splitting(noise_from_config(cfg, sys_cfg.splitting), params)
    else:
        raise InvalidInput(f"unknown protocol {protocol!r}")
    res = out.result
    _write_csv(args.out / "spectra.csv",
               ("spectrum_id", "omega_rad_s", "s_true_re", "s_true_im", "s_hat_re", "s_hat_im"), _spectra_rows(res))
    diag = {"protocol": protocol, "condition_number": res.condition_number, "residual": res.residual_norm,
            "lambda": res.regularization, "errors": res.errors,
            "dropped_term_bounds": {k: float(v) for k, v in res.diagnostics.items()
                                    if k in ("imbalanced_bound_relative", "truncation_tail")},
            "rows": res.diagnostics.get("rows"), "unknowns": res.diagnostics.get("unknowns")}
    with open(args.out / "diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=2)


def _cmd_oracle(cfg, args):
    seq = sequence_from_config(cfg)
    sys_cfg = system_from_config(cfg, 0.0)
    noise = noise_from_config(cfg, sys_cfg.splitting)
    o = cfg.get("oracle", {})
    setting = MeasurementSetting(int(o.get("sign", 1)), o.get("prep", "x"), o.get("observable", "x"))
    traj = int(o.get("trajectories", 2000))
    dt = float(o.get("dt_ns", 5.0)) * 1e-9
    mean, se = monte_carlo_oracle(seq, noise, sys_cfg, setting, traj, dt, args.seed)
    co = cumulant_coefficients(seq, noise, sys_cfg, gammas=(setting.observable,))[setting.observable]
    analytic = expectation_value(setting.rho, setting.observable, co)
    rep = {"monte_carlo": mean, "standard_error": se, "analytic": analytic, "trajectories": traj,
           "deviation_in_se": abs(mean - analytic) / se if se > 0 else None}
    with open(args.out / "oracle.json", "w") as fh:
        json.dump(rep, fh, indent=2)


def _cmd_bandwidth(cfg, args):
    sys_cfg = system_from_config(cfg, 27.0)
    params = _protocol_params(cfg, args, sys_cfg)
    widths = tuple(float(w) for w in cfg.get("widths_mhz", (2.4, 4.0, 8.0)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = bandwidth_study(widths, params)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_csv(args.out / "bandwidth.csv", ("width_mhz", "relative_rms_error", "truncation_warning"),
               [(r.width_mhz, r.error, int(r.warned)) for r in rows])


COMMANDS = {"filters": _cmd_filters, "simulate": _cmd_simulate, "reconstruct": _cmd_reconstruct,
            "oracle": _cmd_oracle, "bandwidth-study": _cmd_bandwidth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        if args.command in ("filters", "oracle") and "sequence" not in cfg:
            cfg.setdefault("sequence", {"builtin": "U1", "cycle_time_us": 2.4, "repetitions": 20})
        if args.command == "oracle":
            # the trajectory oracle needs commuting (classical) noise
            cfg.setdefault("noise", {"type": "classical", "components": [
                {"amplitude": 3e3, "center_mhz": 0.3, "width_mhz": 0.2, "vector": [0.6, 0.3, 0.75]}]})
        cfg.setdefault("noise", {"type": "gaussian_triple"})
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args)
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvalidInput as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except QNSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
