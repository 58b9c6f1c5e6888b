"""Command-line frontend.

Every subcommand reads its inputs from ``--config`` (a junction or model
JSON file) and the shared numeric flags, then writes CSV or JSON to
``--out`` or stdout.  Exit codes: 0 success, 2 input error, 3 usage
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dnmap import split_dn, thinness_report
from .errors import InputError, JunctionLabError, NumericalError, PoleError, SchemaError, WindowError
from .geometry import Junction, k_plus, load_junction, parse_interval, thresholds, wave_number
from .golden import golden_report, report_json
from .graphvertex import condition_matrices, datta_projection, fit_symmetric_beta, lagrangian_rank, symmetric_gamma
from .intermediate import IntermediateDN, intermediate_eigenvalues
from .resonance import model_from_dict as scalar_model_from_dict
from .resonance import solve_resonances
from .smatrix import SMatrix, datta_limit, jump_start_from_eigen, jump_start_matrix, polar_part, smatrix_approx, smatrix_full
from .spectral import rectangle_eigendata
from .vertexmodel import fit_vertex_model, model_from_dict, model_smatrix, verify_fit

EXIT_OK, EXIT_INPUT, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3, 4

SWEEP_METHODS = ("exact", "approx", "jump", "datta", "model")
DEFAULT_STEPS = 201
THRESHOLD_GAP = 1e-6


class UsageError(Exception):
    """Bad flag combination; maps to exit code 3."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default, which we reserve for input errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """17 significant digits, scientific."""
    return f"{x:.16e}"


def _interval_arg(text: str) -> tuple[float, float]:
    try:
        return parse_interval(text)
    except SchemaError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="junction JSON (or scalar model JSON for resonances)")
    common.add_argument("--lmax", type=_positive_int, default=8, help="lead modes kept per lead")
    common.add_argument("--lcut", type=float, default=40.0, help="eigenvalue cutoff of the well")
    common.add_argument("--delta", type=_interval_arg, help="auxiliary interval LO:HI")
    common.add_argument("--method", help="sweep method: " + ", ".join(SWEEP_METHODS))
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--threads", type=_positive_int, help=f"worker threads (env JUNCTIONLAB_THREADS)")

    parser = _Parser(prog="junctionlab", description="Scattering on thin quantum-network junctions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("eig", parents=[common], help="well eigenvalues and boundary currents")
    sub.add_parser("dn", parents=[common], help="split DN map, thinness and intermediate eigenvalues")
    sw = sub.add_parser("sweep", parents=[common], help="scattering matrix over an energy range")
    sw.add_argument("--range", dest="lam_range", type=_interval_arg, help="energy range LO:HI (default: --delta)")
    sw.add_argument("--steps", type=int, help=f"grid points (default {DEFAULT_STEPS})")
    sw.add_argument("--model", help="fitted model JSON from 'fit' (method=model)")
    res = sub.add_parser("resonances", parents=[common], help="resonances of a scalar one-channel model")
    res.add_argument("--beta", type=float, help="override the coupling of the model")
    sub.add_parser("fit", parents=[common], help="fit a solvable vertex model on --delta")
    dt = sub.add_parser("datta", parents=[common], help="Datta-type vertex projection and conditions")
    dt.add_argument("--beta", type=float, help="middle weight (default: -2/gamma of the junction)")
    sub.add_parser("golden", parents=[common], help="reproduce the worked-example constants")
    return parser


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _read_json(path: str) -> dict:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path} must hold a JSON object")
    return data


def _junction(args) -> Junction:
    if not args.config:
        raise UsageError(f"'{args.command}' needs --config with a junction JSON file")
    return load_junction(_read_text(args.config))


def _delta(args, fallback: tuple[float, float] | None = None) -> tuple[float, float]:
    if args.delta is not None:
        return args.delta
    if fallback is not None:
        return fallback
    raise UsageError(f"'{args.command}' needs --delta LO:HI")


def resolve_threads(flag: int | None, env: dict | None = None) -> int:
    if flag is not None:
        return flag
    raw = (os.environ if env is None else env).get("JUNCTIONLAB_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise UsageError(f"JUNCTIONLAB_THREADS must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise UsageError(f"JUNCTIONLAB_THREADS must be a positive integer, got {raw!r}")
    return value


def _emit(args, text: str) -> None:
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _json_only(args) -> None:
    if args.format == "csv":
        raise UsageError(f"'{args.command}' writes a JSON report; --format csv is not available")


# ---------------------------------------------------------------------------
# eig / dn
# ---------------------------------------------------------------------------


def cmd_eig(args) -> int:
    junction = _junction(args)
    data = rectangle_eigendata(junction, args.lcut, args.lmax)
    if args.format == "json":
        records = data.to_records()
        for rec, (m, n) in zip(records, data.labels):
            rec["m"], rec["n"] = m, n
        _emit(args, _json_text({"lam_cut": args.lcut, "l_max": args.lmax, "eigenpairs": records}))
        return EXIT_OK
    header = ["lambda", "m", "n"] + [f"c_{lead + 1}_{l + 1}" for lead in range(data.n_leads) for l in range(data.l_max)]
    rows = [[float(v), m, n, *map(float, data.flat()[s])] for s, (v, (m, n)) in enumerate(zip(data.values, data.labels))]
    _emit(args, _csv_text(header, rows))
    return EXIT_OK


def _pipeline(args, delta):
    junction = _junction(args)
    channels = thresholds(junction, args.lmax)
    lo, hi = channels.first_band()
    if not (lo < delta[0] and delta[1] < hi):
        raise InputError(f"interval {delta} is not inside the first band ({lo}, {hi})")
    rdn = split_dn(rectangle_eigendata(junction, args.lcut, args.lmax), delta, args.lcut)
    idn = IntermediateDN(rdn)
    return junction, rdn, idn, intermediate_eigenvalues(idn)


def cmd_dn(args) -> int:
    delta = _delta(args)
    _, rdn, _, eigen = _pipeline(args, delta)
    if args.format == "csv":
        header = ["lambda", "multiplicity", "residue_norm", "wronskian"]
        rows = [[float(ev.value), ev.multiplicity, float(max(ev.to_dict()["residue_norms"])), float(ev.wronskian)]
                for ev in eigen]
        _emit(args, _csv_text(header, rows))
        return EXIT_OK
    payload = {
        "delta": list(delta),
        "lam_cut": args.lcut,
        "l_max": args.lmax,
        "pole_values": rdn.pole_values.tolist(),
        "n_tail_poles": int(len(rdn.tail_values)),
        "thinness": thinness_report(rdn).to_dict(),
        "intermediate_eigenvalues": [ev.to_dict() for ev in eigen],
    }
    _emit(args, _json_text(payload))
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    lam_min: float
    lam_max: float
    steps: int

    def __post_init__(self) -> None:
        if not self.lam_min < self.lam_max:
            raise UsageError(f"empty energy range [{self.lam_min}, {self.lam_max}]")
        if self.steps < 2:
            raise UsageError(f"--steps must be at least 2, got {self.steps}")

    def grid(self) -> np.ndarray:
        g = np.linspace(self.lam_min, self.lam_max, self.steps)
        g[0], g[-1] = self.lam_min, self.lam_max
        return g


@dataclass(frozen=True)
class SweepRow:
    lam: float
    p: float
    S: np.ndarray | None
    status: str

    def unitarity_defect(self) -> float:
        if self.S is None:
            return math.nan
        return float(np.linalg.norm(self.S.conj().T @ self.S - np.eye(self.S.shape[0]), 2))


def _skip_reason(lam: float, open_thr: np.ndarray, upper: float) -> str | None:
    every = np.append(open_thr, upper)
    if np.min(np.abs(every - lam)) < THRESHOLD_GAP * max(1.0, abs(lam)):
        return "skipped:threshold"
    if lam < np.max(open_thr) or lam > upper:
        return "skipped:outside_band"
    return None


def _sweep_solver(args, method: str) -> tuple[Callable[[float], SMatrix], np.ndarray, float, tuple | None]:
    """``(solver, open thresholds, upper band edge, delta)`` for the chosen method."""
    if method == "model":
        if not args.model:
            raise UsageError("method 'model' needs a fitted model: run 'fit' and pass its output with --model")
        model = model_from_dict(_read_json(args.model).get("model", {}))
        upper = math.inf
        if args.config:
            upper = thresholds(_junction(args), 2).first_band()[1]
        return (lambda lam: model_smatrix(model, lam)), model.open_thresholds, upper, None
    if args.model:
        raise UsageError(f"--model only applies to method 'model', not {method!r}")
    delta = _delta(args, args.lam_range)
    _, rdn, idn, eigen = _pipeline(args, delta)
    channels = rdn.channels
    op = channels.open_index()
    open_thr, upper = channels.flat_thresholds()[op], channels.first_band()[1]
    if method == "exact":
        solver = lambda lam: smatrix_full(rdn, lam, idn)
    elif method == "approx":
        solver = lambda lam: smatrix_approx(idn, lam, eigen).approx
    elif method == "jump":
        k_reg = _frozen_regular_part(idn, eigen, delta)
        solver = lambda lam: jump_start_matrix(lam, k_plus(channels, lam), k_reg, eigen)
    else:
        if not eigen:
            raise InputError(f"no intermediate eigenvalue in {delta}; the Datta limit needs one")
        starts = [(ev.value, jump_start_from_eigen(ev)) for ev in eigen]

        def solver(lam: float) -> SMatrix:
            _, js = min(starts, key=lambda item: abs(item[0] - lam))
            return datta_limit(js, lam, wave_number(channels, lam))
    return solver, open_thr, upper, delta


def _frozen_regular_part(idn: IntermediateDN, eigen, delta) -> np.ndarray:
    """Regular part ``M - polar`` at the interval midpoint, nudged off any pole."""
    Lambda = 0.5 * (delta[0] + delta[1])
    for shift in (0.0, 1e-3, -1e-3, 1e-2):
        lam = Lambda + shift * (delta[1] - delta[0])
        try:
            m = idn.compensated_M(lam)
        except PoleError:
            continue
        polar = polar_part(eigen, lam)
        if polar is None:
            return np.real(m)
        if min(abs(ev.value - lam) for ev in eigen) > 1e-6:
            return np.real(m - polar)
    raise NumericalError(f"could not evaluate the regular part near {Lambda}")


def run_sweep(solver, grid: np.ndarray, open_thr: np.ndarray, upper: float, threads: int) -> list[SweepRow]:
    p_ref = float(np.min(open_thr))

    def one(lam: float) -> SweepRow:
        lam = float(lam)
        p = math.sqrt(lam - p_ref) if lam > p_ref else math.nan
        reason = _skip_reason(lam, open_thr, upper)
        if reason:
            return SweepRow(lam, p, None, reason)
        try:
            return SweepRow(lam, p, np.asarray(solver(lam).S), "ok")
        except WindowError:
            return SweepRow(lam, p, None, "skipped:window")
        except PoleError:
            return SweepRow(lam, p, None, "skipped:pole")

    if threads == 1:
        return [one(x) for x in grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, grid))  # map keeps input order


def sweep_header(n: int) -> list[str]:
    cols = ["lambda", "p"]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            cols += [f"Re_S_{i}_{j}", f"Im_S_{i}_{j}"]
    cols += [f"T_{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
    return cols + ["unitarity_defect", "status"]


def sweep_values(row: SweepRow, n: int) -> list:
    S = np.full((n, n), complex(math.nan, math.nan)) if row.S is None else row.S
    out: list = [row.lam, row.p]
    for i in range(n):
        for j in range(n):
            out += [float(S[i, j].real), float(S[i, j].imag)]
    out += [float(abs(S[i, j]) ** 2) for i in range(n) for j in range(n)]
    return out + [row.unitarity_defect(), row.status]


def _json_number(x):
    # JSON has no NaN; skipped rows carry null, like the empty cells they stand for.
    return None if isinstance(x, float) and not math.isfinite(x) else x


def cmd_sweep(args) -> int:
    method = args.method or "exact"
    if method not in SWEEP_METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {', '.join(SWEEP_METHODS)}")
    lam_range = args.lam_range or args.delta
    if lam_range is None:
        raise UsageError("'sweep' needs --range LO:HI or --delta LO:HI")
    config = SweepConfig(lam_range[0], lam_range[1], DEFAULT_STEPS if args.steps is None else args.steps)
    threads = resolve_threads(args.threads)
    solver, open_thr, upper, _ = _sweep_solver(args, method)
    rows = run_sweep(solver, config.grid(), open_thr, upper, threads)
    n = len(open_thr)
    header = sweep_header(n)
    table = [sweep_values(r, n) for r in rows]
    if args.format == "json":
        records = [dict(zip(header, map(_json_number, vals))) for vals in table]
        _emit(args, _json_text({"method": method, "columns": header, "rows": records}))
    else:
        _emit(args, _csv_text(header, table))
    return EXIT_OK


# ---------------------------------------------------------------------------
# resonances / fit / datta / golden
# ---------------------------------------------------------------------------


def cmd_resonances(args) -> int:
    if not args.config:
        raise UsageError("'resonances' needs --config with a scalar model JSON file")
    model = scalar_model_from_dict(_read_json(args.config))
    if args.beta is not None:
        model = model.with_beta(args.beta)
    found = solve_resonances(model)
    if args.format == "csv":
        rows = [[r.label, float(r.value.real), float(r.value.imag), float(r.residual), r.method] for r in found.items]
        _emit(args, _csv_text(["label", "re", "im", "residual", "method"], rows))
        return EXIT_OK
    payload = found.to_dict()
    payload["max_residual"] = found.max_residual()
    _emit(args, _json_text(payload))
    return EXIT_OK


def cmd_fit(args) -> int:
    _json_only(args)
    delta = _delta(args)
    _, _, idn, eigen = _pipeline(args, delta)
    model = fit_vertex_model(idn, eigen)
    report = verify_fit(model, delta, idn=idn)
    _emit(args, _json_text({"delta": list(delta), "model": model.to_dict(), "certification": report}))
    return EXIT_OK


def _matrix(mat: np.ndarray) -> list:
    return np.real_if_close(mat).real.tolist()


def cmd_datta(args) -> int:
    _json_only(args)
    payload: dict = {}
    if args.beta is not None:
        beta = args.beta
    elif args.config:
        gamma = symmetric_gamma(_junction(args))
        beta = fit_symmetric_beta(gamma)
        payload["gamma"] = gamma
    else:
        raise UsageError("'datta' needs --beta or --config with a symmetric junction")
    vertex = datta_projection(beta)
    A, B = condition_matrices(vertex.weight, kind="resonance")
    A_p, B_p = vertex.conditions()
    payload.update({
        "beta": beta,
        "weight": vertex.weight.tolist(),
        "P": _matrix(vertex.P),
        "S": _matrix(vertex.S),
        "conditions": {"form": "A psi(0) + B psi'(0) = 0", "A": _matrix(A), "B": _matrix(B),
                       "lagrangian_rank": lagrangian_rank(A, B), "reproduces": "S"},
        "printed_conditions": {"form": "A psi(0) + B psi'(0) = 0", "A": _matrix(A_p), "B": _matrix(B_p),
                               "lagrangian_rank": lagrangian_rank(A_p, B_p), "reproduces": "-S"},
    })
    _emit(args, _json_text(payload))
    return EXIT_OK


def cmd_golden(args) -> int:
    _json_only(args)
    checks = golden_report()
    _emit(args, report_json(checks) + "\n")
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print(f"junctionlab: golden checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {
    "eig": cmd_eig,
    "dn": cmd_dn,
    "sweep": cmd_sweep,
    "resonances": cmd_resonances,
    "fit": cmd_fit,
    "datta": cmd_datta,
    "golden": cmd_golden,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"junctionlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"junctionlab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"junctionlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except JunctionLabError as exc:
        print(f"junctionlab: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
