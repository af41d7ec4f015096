"""Command-line front end: ``twistvol <command> --n N ...``.

Exit codes: 0 on success, 2 on usage errors, 1 on numerical failures.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Callable, Sequence

import numpy as np

from .angle_structures import random_shape_structure
from .geometric_solver import (
    SolverError,
    band_signs,
    grad_S,
    gluing_residual,
    hess_S,
    maximize_volume,
    potential_S,
    potential_S_rewritten,
    structure_to_json,
)
from .partition_function import (
    DEFAULT_POINTS,
    MonteCarloRequired,
    QuadratureDiverged,
    default_contour,
    evaluate_Jfrak,
    evaluate_Jfrak_qmc,
    integrand,
    volume_sweep,
)
from .quantum_dilog import QdilogParams, b_from_hbar, phi_b
from .twist_triangulations import (
    build_spec,
    combinatorics_checks,
    edge_class_names,
    holonomies,
    kernel_data,
    tau_weight_vector,
    weight_identity_residual,
)

CSV_HEADER = "n,hbar,b,points,halfwidth,abs_Jfrak,scaled_log,volume,volume_gap,quad_err"


class UsageError(Exception):
    """Invalid flag values detected after parsing."""


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError("must be a positive finite number")
    return value


def _hbar(text: str) -> float:
    value = _positive_float(text)
    if value > 0.25:
        raise argparse.ArgumentTypeError("hbar must lie in (0, 1/4]")
    return value


def _hbar_list(text: str) -> list[float]:
    return [_hbar(part) for part in text.split(",")]


def _halfwidth(text: str) -> float | None:
    return None if text == "auto" else _positive_float(text)


def _complex_pair(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated floats 're,im'")
    try:
        re, im = (float(v) for v in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"malformed complex value {text!r}") from exc
    if not (math.isfinite(re) and math.isfinite(im)):
        raise argparse.ArgumentTypeError("complex value must be finite")
    return complex(re, im)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twistvol",
                                     description="Twist knot geometry and state integrals.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--n", type=int, required=True, help="twist knot index (n >= 2)")
        return cmd

    info = add("info", "triangulation summary")
    info.add_argument("--format", choices=("json", "text"), default="json")

    solve = add("solve", "complete hyperbolic structure")
    solve.add_argument("--tol", type=_positive_float, default=1e-11)
    solve.add_argument("--max-iter", type=_positive_int, default=200)
    solve.add_argument("--format", choices=("json",), default="json")

    add("potential", "saddle point report")

    part = add("partition", "state integral at given hbar values")
    part.add_argument("--hbar", type=_hbar_list, required=True, help="comma-separated values")
    part.add_argument("--points", type=_positive_int, default=None,
                      help="fixed points per axis (default: adaptive from 300)")
    part.add_argument("--halfwidth", type=_halfwidth, default=None,
                      help="'auto' or a halfwidth in the y variables")
    part.add_argument("--x", type=_complex_pair, default=0j, help="'re,im'")
    part.add_argument("--mode", choices=("tensor", "qmc"), default="tensor")
    part.add_argument("--samples", type=_positive_int, default=10 ** 7)
    part.add_argument("--format", choices=("csv", "json"), default="csv")

    sweep = add("sweep", "volume-conjecture sweep, CSV")
    sweep.add_argument("--hbar-start", type=_hbar, required=True)
    sweep.add_argument("--hbar-end", type=_hbar, required=True)
    sweep.add_argument("--steps", type=_positive_int, required=True)
    sweep.add_argument("--points", type=_positive_int, default=None)
    sweep.add_argument("--halfwidth", type=_halfwidth, default=None)

    add("check", "property checks for one n")
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_info(args, out) -> None:
    spec = build_spec(args.n)
    kd = kernel_data(spec)
    doc = {
        "n": spec.n,
        "parity": spec.parity,
        "p": spec.p,
        "tetrahedra": spec.tet_count_ideal,
        "h_tetrahedra": spec.tet_count_h,
        "signs": dict(zip(spec.ideal_labels, spec.signs)),
        "edges": list(edge_class_names(spec)),
        "q_matrix": [[str(v) for v in row] for row in kd.q_matrix],
        "w_over_pi": [str(v) for v in kd.w_coeffs],
    }
    if args.format == "json":
        out.write(json.dumps(doc) + "\n")
        return
    out.write(f"twist knot K_{spec.n} ({spec.parity}, p = {spec.p})\n")
    out.write(f"tetrahedra: {spec.tet_count_ideal} ideal, {spec.tet_count_h} in Y_n\n")
    out.write("signs: " + " ".join(f"{k}{'+' if v > 0 else '-'}" for k, v in doc["signs"].items())
              + "\n")
    out.write("edges: " + " ".join(doc["edges"]) + "\n")
    out.write("Q_n:\n")
    for row in doc["q_matrix"]:
        out.write("  " + " ".join(f"{v:>6}" for v in row) + "\n")
    out.write("W_n / pi: " + " ".join(doc["w_over_pi"]) + "\n")


def _cmd_solve(args, out) -> None:
    cs = maximize_volume(build_spec(args.n), tol=args.tol, max_iter=args.max_iter)
    out.write(structure_to_json(cs) + "\n")


def _cmd_potential(args, out) -> None:
    spec = build_spec(args.n)
    cs = maximize_volume(spec)
    s0 = potential_S(spec, cs.y0)
    det = complex(np.linalg.det(hess_S(spec, cs.y0)))
    doc = {
        "n": spec.n,
        "grad_norm": float(np.linalg.norm(grad_S(spec, cs.y0))),
        "det_hess": [det.real, det.imag],
        "re_S": s0.real,
        "minus_volume": -cs.volume,
        "discrepancy": abs(s0.real + cs.volume),
    }
    out.write(json.dumps(doc) + "\n")


def _result_row(r) -> str:
    return ",".join([str(r.n), _fmt(r.hbar), _fmt(r.b), str(r.contour.points),
                     _fmt(r.contour.halfwidth), _fmt(r.abs_value), _fmt(r.scaled_log),
                     _fmt(r.volume), _fmt(r.volume_gap), _fmt(r.quadrature_error)])


def _cmd_partition(args, out) -> None:
    spec = build_spec(args.n)
    results = []
    for h in args.hbar:
        contour = default_contour(spec, h, args.points or DEFAULT_POINTS, args.halfwidth)
        if args.mode == "qmc":
            results.append(evaluate_Jfrak_qmc(spec, h, args.x, contour, samples=args.samples))
        else:
            results.append(evaluate_Jfrak(spec, h, args.x, contour, adaptive=args.points is None))
    if args.format == "csv":
        out.write(CSV_HEADER + "\n")
        for r in results:
            out.write(_result_row(r) + "\n")
        return
    docs = [{
        "n": r.n, "hbar": r.hbar, "b": r.b, "points": r.contour.points,
        "halfwidth": r.contour.halfwidth, "value": [r.value.real, r.value.imag],
        "abs_Jfrak": r.abs_value, "scaled_log": r.scaled_log, "volume": r.volume,
        "volume_gap": r.volume_gap, "quad_err": r.quadrature_error,
    } for r in results]
    out.write(json.dumps(docs) + "\n")


def sweep_hbars(start: float, end: float, steps: int) -> list[float]:
    """Geometrically spaced hbar values from start down to end."""
    if steps < 2:
        raise UsageError("--steps must be at least 2")
    if not end < start:
        raise UsageError("--hbar-end must be smaller than --hbar-start")
    return [float(h) for h in np.geomspace(start, end, steps)]


def _cmd_sweep(args, out) -> None:
    spec = build_spec(args.n)
    hbars = sweep_hbars(args.hbar_start, args.hbar_end, args.steps)
    summary = volume_sweep(spec, hbars, points=args.points, halfwidth=args.halfwidth)
    out.write(CSV_HEADER + "\n")
    for r in summary.results:
        out.write(_result_row(r) + "\n")
    out.write(f"# intercept={_fmt(summary.intercept)},slope={_fmt(summary.slope)}\n")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _band_point(spec, rng: np.random.Generator) -> np.ndarray:
    im = rng.uniform(0.2, math.pi - 0.2, spec.p + 2)
    return rng.uniform(-2.0, 2.0, spec.p + 2) - 1j * band_signs(spec) * im


def _finite_difference_ok(spec, rng: np.random.Generator, points: int = 10) -> bool:
    h = 1e-5
    for _ in range(points):
        y = _band_point(spec, rng)
        g = grad_S(spec, y)
        hs = hess_S(spec, y)
        for k in range(spec.p + 2):
            e = np.zeros(spec.p + 2)
            e[k] = h
            fd = (potential_S(spec, y + e) - potential_S(spec, y - e)) / (2 * h)
            if abs(fd - g[k]) > 1e-5 * max(1.0, abs(g[k])):
                return False
            fd_h = (grad_S(spec, y + e) - grad_S(spec, y - e)) / (2 * h)
            if np.max(np.abs(fd_h - hs[:, k])) > 1e-4 * max(1.0, np.max(np.abs(hs[:, k]))):
                return False
        if abs(potential_S(spec, y) - potential_S_rewritten(spec, y)) > 1e-10:
            return False
    return True


def _qdilog_ok(b: float, rng: np.random.Generator, points: int = 20) -> bool:
    params = QdilogParams(b)
    cb = params.strip_halfwidth
    z = rng.uniform(-3, 3, points) + 1j * rng.uniform(-0.9, 0.9, points) * cb
    inv = phi_b(z, params) * phi_b(-z, params) * np.exp(
        -1j * math.pi / 12 * (b * b + 1 / (b * b)) - 1j * math.pi * z * z)
    uni = np.conj(phi_b(z, params)) * phi_b(np.conj(z), params)
    # the equation holds for b and 1/b; the smaller shift keeps all arguments in the strip
    s = min(b, 1 / b)
    zf = rng.uniform(-3, 3, points) + 1j * rng.uniform(-0.9, 0.9, points) * (cb - s / 2)
    fe = phi_b(zf - 0.5j * s, params) - (1 + np.exp(2 * math.pi * s * zf)) * phi_b(zf + 0.5j * s, params)
    return bool(max(np.max(np.abs(inv - 1)), np.max(np.abs(uni - 1)), np.max(np.abs(fe))) < 1e-8)


def run_checks(n: int) -> list[tuple[str, bool]]:
    """Property checks for one twist knot, as (name, passed) pairs."""
    spec = build_spec(n)
    rng = np.random.default_rng(n)
    rows: list[tuple[str, bool]] = [(f"combinatorics: {k}", v)
                                    for k, v in combinatorics_checks(spec).items()]
    worst = max(float(np.max(np.abs(weight_identity_residual(spec, random_shape_structure(spec, rng)))))
                for _ in range(100))
    rows.append(("weight identity on 100 random shapes", worst < 1e-12))
    cs = maximize_volume(spec)
    res = float(np.max(np.abs(gluing_residual(spec, cs.shapes))))
    mu, lam = holonomies(spec, cs.angles)
    rows.append(("gluing equations at the complete structure", res < 1e-9))
    rows.append(("holonomies vanish", max(abs(mu), abs(lam)) < 1e-9))
    rows.append(("gradient of S vanishes at y0", float(np.linalg.norm(grad_S(spec, cs.y0))) < 1e-9))
    rows.append(("Re S(y0) = -volume", abs(potential_S(spec, cs.y0).real + cs.volume) < 1e-6))
    tau = tau_weight_vector(spec, cs.angles)
    rows.append(("tau identity W(tau) = W_n",
                 float(np.max(np.abs(tau - kernel_data(spec).w_vector))) < 1e-9))
    rows.append(("finite differences of S", _finite_difference_ok(spec, rng)))
    hbar = 0.1
    rows.append(("quantum dilogarithm identities", _qdilog_ok(b_from_hbar(hbar), rng)))
    if spec.p + 2 <= 4:
        rows.append(("integrand factorization", _factorization_ok(spec, hbar)))
    return rows


def _factorization_ok(spec, hbar: float) -> bool:
    from .partition_function import _axis_log_factors, _axis_points

    contour = default_contour(spec, hbar)
    unit = np.array([-0.3, 0.1, 0.4])
    ys = _axis_points(contour, unit)
    logs = _axis_log_factors(spec, hbar, ys, 0j)
    coupling = 1j / (math.pi * hbar) * kernel_data(spec).q
    for i in range(unit.size):
        y = np.array([v[i] for v in ys])
        total = sum(v[i] for v in logs) + y @ np.triu(coupling, 1) @ y
        direct = integrand(spec, y, 0.0, hbar)
        if abs(np.exp(total) / direct - 1) > 1e-12:
            return False
    return True


def _cmd_check(args, out) -> int:
    rows = run_checks(args.n)
    for name, ok in rows:
        out.write(f"{'PASS' if ok else 'FAIL'} {name}\n")
    failed = sum(not ok for _, ok in rows)
    out.write(f"{len(rows) - failed}/{len(rows)} checks passed\n")
    return 0 if failed == 0 else 1


_COMMANDS: dict[str, Callable] = {
    "info": _cmd_info,
    "solve": _cmd_solve,
    "potential": _cmd_potential,
    "partition": _cmd_partition,
    "sweep": _cmd_sweep,
    "check": _cmd_check,
}


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        if args.n < 2:
            raise UsageError("non-hyperbolic or undefined twist knot index")
        status = _COMMANDS[args.command](args, out)
    except (UsageError, MonteCarloRequired) as exc:
        err.write(f"twistvol {args.command}: error: {exc}\n")
        if isinstance(exc, MonteCarloRequired):
            err.write("rerun with --mode qmc\n")
        return 2
    except (SolverError, QuadratureDiverged, ValueError, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        err.write(f"twistvol {args.command}: numerical failure: {exc}\n")
        return 1
    return int(status or 0)


def main() -> None:
    sys.exit(run())
