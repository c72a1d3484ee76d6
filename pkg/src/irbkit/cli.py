"""Command-line interface.

Exit codes: 0 success (or selective), 1 negative domain verdict, 2 input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import classicalization as cl
from .density import random_density, validate_density
from .diagnostics import diagnose
from .dynamics import (SELECTIVITY_TOL, check_selectivity, dephasing_rates, evolve_analytic,
                       evolve_numeric, minimal_dephasing)
from .errors import BadDim, IRBError, InvalidInput, NotSelective, NumericalFailure
from .irb import DELTA_DEGEN, DELTA_SUPPORT, construct_irb, to_irb
from .serialize import (csv_text, dumps, format_number, generator_from_json, matrix_from_json,
                        matrix_to_json, trajectory_csv, write_atomic)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

FIG2_GAMMA = 1.0
FIG2_EPS = 0.05
FIG2_PC0 = (0.9, 0.5, 0.2)


class _Negative(Exception):
    """Domain verdict is negative; message already printed."""


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: JSON parse error: {exc}") from exc
    except OSError as exc:
        raise InvalidInput(f"{path}: {exc.strerror}") from exc


def _load_state(path):
    return validate_density(matrix_from_json(_load_json(path)))


def _load_gen(path):
    return generator_from_json(_load_json(path))


def _emit(text, out):
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _time_grid(args, default_t1=None):
    t1 = args.t1 if args.t1 is not None else default_t1
    if t1 is None or not t1 > args.t0:
        raise InvalidInput(f"need t1 > t0, got t0={args.t0}, t1={t1}")
    if args.samples < 2:
        raise InvalidInput("samples must be >= 2")
    return np.linspace(args.t0, t1, args.samples)


def _analytic_setup(rho, gen, args):
    frame = construct_irb(rho, args.delta_support, args.delta_degen)
    gen_O = gen.in_frame(frame.Q)
    cert = check_selectivity(gen_O, None, args.sel_tol)
    if not cert.supports_analytic:
        sys.stderr.write("generator is not IRB-selective; analytic engine refused\n")
        sys.stderr.write(dumps(cert.to_json()))
        raise _Negative()
    return frame, dephasing_rates(gen_O, args.sel_tol)


def _trajectory(rho, gen, times, args):
    if args.engine == "analytic":
        frame, rates = _analytic_setup(rho, gen, args)
        traj = evolve_analytic(to_irb(rho, frame), rates, times, args.lam, args.delta_support)
        return traj, rates.gamma_min_active
    frame = construct_irb(rho, args.delta_support, args.delta_degen)
    traj = evolve_numeric(rho, gen, times, args.step, args.lam, frame, args.delta_support)
    gen_O = gen.in_frame(frame.Q)
    try:
        gmin = dephasing_rates(gen_O, args.sel_tol).gamma_min_active
    except NotSelective:
        gmin = None
    return traj, gmin


def _scale(x, bits):
    if x is None:
        return "n/a"
    return f"{x / math.log(2) if bits else x:.6g}"


def cmd_decompose(args):
    rho = _load_state(args.state)
    frame = construct_irb(rho, args.delta_support, args.delta_degen)
    report = diagnose(rho, args.lam, frame=frame)
    coherences = []
    for i, j in frame.active_pairs():
        n = float(frame.N[i, j])
        if abs(n) > 1e-12:
            bi, bj = frame.blocks.block_of(i), frame.blocks.block_of(j)
            coherences.append({"i": i, "j": j, "n": n, "intra_block": bi == bj})
    out = {"frame": frame.to_json(), "report": report.to_json(), "coherences": coherences}
    _emit(dumps(out), args.out)
    unit = "bits" if args.bits else "nats"
    log = sys.stderr if not args.out else sys.stdout
    log.write(f"populations: {', '.join(f'{a:.6g}' for a in frame.populations)}\n")
    log.write(f"blocks: {[list(b) for b in frame.blocks]}\n")
    log.write(f"P_c: {_scale(report.P_c, False)}  U: {report.U:.6g}  U_max: {report.U_max:.6g}\n")
    log.write(f"S_p: {_scale(report.S_p, args.bits)} {unit}  "
              f"C_rel: {_scale(report.C_rel, args.bits)} {unit}\n")
    if any(c["intra_block"] for c in coherences):
        log.write("warning: degenerate blocks present; intra-block entries of N are "
                  "gauge-dependent and not physical\n")
    return EXIT_OK


def cmd_evolve(args):
    rho = _load_state(args.state)
    gen = _load_gen(args.gen)
    traj, _ = _trajectory(rho, gen, _time_grid(args), args)
    _emit(trajectory_csv(traj, pairs=not args.no_pairs), args.out)
    return EXIT_OK


def cmd_certify(args):
    rho = _load_state(args.state)
    gen = _load_gen(args.gen)
    frame = construct_irb(rho, args.delta_support, args.delta_degen)
    cert = check_selectivity(gen, frame, args.sel_tol)
    _emit(dumps(cert.to_json()), args.out)
    return EXIT_OK if cert.is_selective else EXIT_NEGATIVE


def _parse_eps(text):
    try:
        eps = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidInput(f"bad epsilon list {text!r}") from exc
    for e in eps:
        if not 0 < e < 1:
            raise InvalidInput(f"epsilon {e} outside (0, 1)")
    return sorted(set(eps), reverse=True)


def cmd_tcl_scan(args):
    rho = _load_state(args.state)
    gen = _load_gen(args.gen)
    eps = _parse_eps(args.eps)
    default_t1 = None
    if args.t1 is None:
        frame = construct_irb(rho, args.delta_support, args.delta_degen)
        try:
            gmin = dephasing_rates(gen.in_frame(frame.Q), args.sel_tol).gamma_min_active
        except NotSelective:
            gmin = 0.0
        pc0 = diagnose(rho, frame=frame).P_c or 1.0
        if gmin > 0:
            default_t1 = args.t0 + 1.1 * math.log(max(pc0, eps[-1]) / eps[-1]) / gmin + 1.0 / gmin
        else:
            default_t1 = args.t0 + 10.0
    traj, gmin = _trajectory(rho, gen, _time_grid(args, default_t1), args)
    scan = cl.epsilon_scan(traj, eps, gmin if gmin else None)
    rows = []
    for r in scan.rows:
        t = r.t_cl_measured if r.reached else "not_reached"
        rows.append((r.epsilon, t, r.t_cl_bound, scan.slope))
    _emit(csv_text(cl.SCAN_HEADER, rows), args.out)
    return EXIT_OK


def _fig2_point(pc0):
    qubit = np.array([[0.5, 0.5j * pc0], [-0.5j * pc0, 0.5]])
    rates = dephasing_rates(minimal_dephasing([FIG2_GAMMA, FIG2_GAMMA]))
    horizon = 1.2 * math.log(pc0 / FIG2_EPS) / rates.gamma_min_active + 1.0
    traj = evolve_analytic(qubit, rates, np.linspace(0.0, horizon, 1001))
    t = cl.detect_threshold_crossing(traj, FIG2_EPS).t_cl_measured
    return rates.gamma_min_active * t


def cmd_fig2(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    rates = dephasing_rates(minimal_dephasing([FIG2_GAMMA, FIG2_GAMMA]))
    times = np.linspace(0.0, 6.0, 601)
    columns = []
    for pc0 in FIG2_PC0:
        qubit = np.array([[0.5, 0.5j * pc0], [-0.5j * pc0, 0.5]])
        columns.append(evolve_analytic(qubit, rates, times).column("P_c"))
    header_a = ["t"] + [f"Pc_{p:g}" for p in FIG2_PC0] + ["epsilon"]
    rows_a = [[t, *(c[k] for c in columns), FIG2_EPS] for k, t in enumerate(times)]
    write_atomic(os.path.join(out, "fig2a.csv"), csv_text(header_a, rows_a))

    grid = [(float(p), 0) for p in np.linspace(0.06, 1.0, 48)] + [(p, 1) for p in FIG2_PC0]
    grid.sort()
    measured = cl.parallel_map(_fig2_point, [p for p, _ in grid])
    rows_b = [(p, math.log(p / FIG2_EPS), m, mark) for (p, mark), m in zip(grid, measured)]
    write_atomic(os.path.join(out, "fig2b.csv"),
                 csv_text(("Pc0", "Gamma_tcl_closed_form", "Gamma_tcl_measured", "marker"),
                          rows_b))
    return EXIT_OK


def cmd_random(args):
    if not 1 <= args.dim <= 64:
        raise BadDim(f"dim must lie in [1, 64], got {args.dim}")
    rho = random_density(args.dim, args.seed)
    _emit(dumps(matrix_to_json(rho.entries)), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--delta-support", type=float, default=DELTA_SUPPORT)
    common.add_argument("--delta-degen", type=float, default=DELTA_DEGEN)
    common.add_argument("--sel-tol", type=float, default=SELECTIVITY_TOL)
    common.add_argument("--lambda", dest="lam", type=float, default=1.0)

    timing = argparse.ArgumentParser(add_help=False)
    timing.add_argument("--engine", choices=("analytic", "numeric"), default="analytic")
    timing.add_argument("--t0", type=float, default=0.0)
    timing.add_argument("--t1", type=float, default=None)
    timing.add_argument("--samples", type=int, default=101)
    timing.add_argument("--step", type=float, default=1e-2,
                        help="upper bound on the RK4 step (numeric engine)")

    p = argparse.ArgumentParser(prog="irbkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("decompose", parents=[common], help="IRB frame and diagnostics of a state")
    s.add_argument("--state", required=True)
    s.add_argument("--bits", action="store_true", help="show entropies in bits")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("evolve", parents=[common, timing], help="trajectory diagnostics as CSV")
    s.add_argument("--state", required=True)
    s.add_argument("--gen", required=True)
    s.add_argument("--no-pairs", action="store_true", help="omit per-pair |n_ij| columns")
    s.set_defaults(func=cmd_evolve, t1=5.0)

    s = sub.add_parser("certify", parents=[common], help="IRB-selectivity certificate")
    s.add_argument("--state", required=True)
    s.add_argument("--gen", required=True)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("tcl-scan", parents=[common, timing], help="classicalization times vs epsilon")
    s.add_argument("--state", required=True)
    s.add_argument("--gen", required=True)
    s.add_argument("--eps", required=True, help="comma-separated tolerances")
    s.set_defaults(func=cmd_tcl_scan, samples=2001)

    s = sub.add_parser("fig2", parents=[common], help="write qubit classicalization curves")
    s.set_defaults(func=cmd_fig2)

    s = sub.add_parser("random", parents=[common], help="write a seeded Ginibre state")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_random)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Negative:
        return EXIT_NEGATIVE
    except NotSelective as exc:
        sys.stderr.write(f"error: NotSelective: {exc}\n")
        if exc.certificate is not None:
            sys.stderr.write(dumps(exc.certificate.to_json()))
        return EXIT_NEGATIVE
    except NumericalFailure as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC
    except (InvalidInput, IRBError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
