"""``gibbs-certify`` command line: bound, sweep, exact and sample.

Exit codes: 0 success, 1 input error, 2 guard or contract violation,
3 solver failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import math
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import exact_oracle, glauber_sampler, model_io
from .dlr_hierarchy import CertifiedInterval, solve_dlr
from .errors import ContractError, GibbsCertifyError, InputError, SolverError
from .lp_solver import SolverConfig
from .mc_hierarchy import DualConfig, solve_mc
from .observable import Observable, is_spin_product
from .spin_model import SpinSystem, ball_region, distance_to_complement

CSV_COLUMNS = ("r", "dist", "lambda_size", "boundary_size", "hierarchy", "p_min", "p_max", "width",
               "residual", "wall_ms")


@dataclass
class Row:
    r: int
    dist: float
    lambda_size: int
    boundary_size: int
    hierarchy: str
    p_min: float
    p_max: float
    width: float
    residual: float
    wall_ms: float
    method: str = ""
    error: str = ""


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return 1
    if isinstance(exc, ContractError):
        return 2
    if isinstance(exc, SolverError):
        return 3
    return 3


def hierarchies(choice: str) -> tuple:
    return ("dlr", "mc") if choice == "both" else (choice,)


def bound_rows(sys: SpinSystem, f: Observable, radius: int, hierarchy: str = "both",
               strict: bool = False, dlr_method: str = "auto", mc_method: str = "auto") -> list[Row]:
    """One row per hierarchy for the ball of the given radius around supp(f).

    Errors propagate; see :func:`sweep_rows` for the forgiving variant.
    """
    if not f.support:
        raise ContractError("the observable is constant; nothing to bound")
    region = ball_region(sys, f.support, radius)
    rows = []
    for h in hierarchies(hierarchy):
        t0 = time.perf_counter()
        if h == "dlr":
            iv = solve_dlr(sys, region, f, method=dlr_method, strict=strict)
        else:
            iv = solve_mc(sys, region, f, method=mc_method, strict=strict)
        rows.append(_row(radius, iv, h, 1000 * (time.perf_counter() - t0)))
    return rows


def _row(radius: int, iv: CertifiedInterval, h: str, wall_ms: float) -> Row:
    return Row(radius, iv.dist, iv.lambda_size, iv.boundary_size, h, iv.lower, iv.upper, iv.width,
               iv.residual, wall_ms, iv.method)


def _failed_row(sys: SpinSystem, f: Observable, radius: int, h: str, exc: Exception) -> Row:
    try:
        region = ball_region(sys, f.support, radius)
        dist = distance_to_complement(sys, region, f.support)
        lam, bnd = len(region.lam), len(region.boundary)
    except GibbsCertifyError:
        dist, lam, bnd = math.nan, 0, 0
    nan = math.nan
    return Row(radius, dist, lam, bnd, h, nan, nan, nan, nan, nan, "", f"{type(exc).__name__}: {exc}")


def _one_radius(args) -> list[Row]:
    sys_, f, r, hierarchy, strict, dlr_method, mc_method = args
    out = []
    for h in hierarchies(hierarchy):
        try:
            out += bound_rows(sys_, f, r, h, strict, dlr_method, mc_method)
        except GibbsCertifyError as exc:
            out.append(_failed_row(sys_, f, r, h, exc))
    return out


def sweep_rows(sys: SpinSystem, f: Observable, rmin: int, rmax: int, hierarchy: str = "both",
               strict: bool = False, parallel: bool = False, dlr_method: str = "auto",
               mc_method: str = "auto") -> list[Row]:
    """Rows for every radius in [rmin, rmax]; a failing radius yields NaN rows."""
    jobs = [(sys, f, r, hierarchy, strict, dlr_method, mc_method) for r in range(rmin, rmax + 1)]
    if parallel and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor() as pool:
            chunks = list(pool.map(_one_radius, jobs))
    else:
        chunks = [_one_radius(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


def fit_log_slope(rows: list[Row], hierarchy: str, floor: float = 1e-13) -> float:
    """Least-squares slope of log(width) against dist; NaN with fewer than two usable points.

    Widths at or below ``floor`` are solver noise and are left out.
    """
    pts = [(r.dist, math.log(r.width)) for r in rows
           if r.hierarchy == hierarchy and math.isfinite(r.dist) and math.isfinite(r.width)
           and r.width > floor]
    if len({d for d, _ in pts}) < 2:
        return math.nan
    d, w = np.array(pts).T
    return float(np.polyfit(d, w, 1)[0])


def write_csv(rows: list[Row], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        d = asdict(row)
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _header(sys: SpinSystem, f: Observable, strict: bool) -> list[str]:
    flag = sys.fast_mixing_flag()
    lp = SolverConfig()
    dual = DualConfig()
    return [
        f"lattice: {sys.lattice}" + (f" (n={sys.n})" if sys.is_finite else " (implicit)"),
        f"beta: {sys.beta:g}",
        f"observable: {f.label or 'f'} on {list(f.support)}",
        f"fast mixing (Delta*tanh(beta*J) < 1): {'yes' if flag else 'no'} "
        f"(Delta={sys.max_degree}, J={sys.effective_coupling():g})",
        f"tolerances: lp feas_tol={lp.feas_tol:g}, highs_tol={lp.highs_tol:g}, "
        f"mc dual gap tol={dual.tol:g}",
        f"strict: {'on (intervals widened by residual bounds)' if strict else 'off'}",
    ]


def _parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            self.print_usage(sys.stderr)
            print(f"{self.prog}: error: {message}", file=sys.stderr)
            raise SystemExit(1)

    p = Parser(prog="gibbs-certify", description="Certified bounds on local Gibbs expectations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def common(sp):
        sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--observable", required=True, help="observable JSON file")
        sp.add_argument("--out", help="write the CSV (bound, sweep) or the report (exact, sample) here")
        sp.add_argument("--seed", type=int, default=0, help="random seed (used by sample)")

    b = sub.add_parser("bound", help="certified interval at one radius")
    common(b)
    b.add_argument("--hierarchy", choices=("dlr", "mc", "both"), default="both")
    b.add_argument("--radius", type=int, default=1)
    b.add_argument("--strict", action="store_true", help="widen intervals by residual bounds")
    b.add_argument("--dlr-method", choices=("auto", "raw", "reduced"), default="auto")
    b.add_argument("--mc-method", choices=("auto", "dual", "raw"), default="auto")

    s = sub.add_parser("sweep", help="intervals over a range of radii, CSV output")
    common(s)
    s.add_argument("--hierarchy", choices=("dlr", "mc", "both"), default="both")
    s.add_argument("--rmin", type=int, default=0)
    s.add_argument("--rmax", type=int, default=4)
    s.add_argument("--strict", action="store_true")
    s.add_argument("--parallel", action="store_true", help="solve radii concurrently")
    s.add_argument("--dlr-method", choices=("auto", "raw", "reduced"), default="auto")
    s.add_argument("--mc-method", choices=("auto", "dual", "raw"), default="auto")

    e = sub.add_parser("exact", help="brute-force expectation (finite systems only)")
    common(e)

    m = sub.add_parser("sample", help="Glauber-dynamics estimate")
    common(m)
    m.add_argument("--samples", type=int, default=100_000)
    m.add_argument("--burn-in", type=int, default=None, help="steps before sampling (default 100 sweeps)")
    m.add_argument("--thin", type=int, default=None, help="steps between samples (default one sweep)")
    return p


def _emit(lines: list[str], rows: list[Row] | None, out: str | None, stdout) -> None:
    for line in lines:
        print(f"# {line}", file=stdout)
    if rows is None:
        return
    if out:
        with open(out, "w", newline="") as fh:
            write_csv(rows, fh)
        print(f"# csv written to {out}", file=stdout)
    else:
        buf = io.StringIO()
        write_csv(rows, buf)
        stdout.write(buf.getvalue())


def _cmd_bound(a, sys_, f, stdout) -> int:
    rows = bound_rows(sys_, f, a.radius, a.hierarchy, a.strict, a.dlr_method, a.mc_method)
    lines = _header(sys_, f, a.strict)
    first = rows[0]
    lines.append(f"region: radius {a.radius}, |Lambda|={first.lambda_size}, "
                 f"|boundary|={first.boundary_size}, dist(B, Lambda^c)={first.dist:g}")
    for row in rows:
        lines.append(f"{row.hierarchy} ({row.method}): [{row.p_min:.12g}, {row.p_max:.12g}] "
                     f"width {row.width:.6g} residual {row.residual:.3g} ({row.wall_ms:.1f} ms)")
    _emit(lines, rows, a.out, stdout)
    return 0


def _cmd_sweep(a, sys_, f, stdout) -> int:
    if a.rmin < 0 or a.rmax < a.rmin:
        raise InputError(f"need 0 <= rmin <= rmax, got {a.rmin}..{a.rmax}")
    rows = sweep_rows(sys_, f, a.rmin, a.rmax, a.hierarchy, a.strict, a.parallel,
                      a.dlr_method, a.mc_method)
    lines = _header(sys_, f, a.strict)
    for h in hierarchies(a.hierarchy):
        slope = fit_log_slope(rows, h)
        lines.append(f"{h}: fitted slope of log(width) vs dist = {slope:.6g}"
                     + (f" (decay rate {-slope:.6g})" if math.isfinite(slope) else ""))
    for row in rows:
        if row.error:
            lines.append(f"r={row.r} {row.hierarchy} failed: {row.error}")
    _emit(lines, rows, a.out, stdout)
    return 0


def _cmd_exact(a, sys_, f, stdout) -> int:
    sys_.require_finite("exact enumeration")
    value = exact_oracle.expectation(sys_, f)
    lines = _header(sys_, f, False)
    lines.append(f"exact mu(f) = {value:.15g}")
    if sys_.lattice in ("chain", "cycle") and is_spin_product(f):
        lines.append(f"transfer matrix = {exact_oracle.transfer_matrix_expectation(sys_, f):.15g}")
    _emit(lines, None, None, stdout)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_sample(a, sys_, f, stdout) -> int:
    sys_.require_finite("Glauber sampling")
    n = sys_.n
    burn = 100 * n if a.burn_in is None else a.burn_in
    thin = n if a.thin is None else a.thin
    if a.samples < 20 or burn < 0 or thin < 1:
        raise InputError("need samples >= 20, burn-in >= 0 and thin >= 1")
    est = glauber_sampler.estimate(sys_, f, burn, a.samples, thin, seed=a.seed)
    lines = _header(sys_, f, False)
    lines.append(f"seed {a.seed}, burn-in {burn} steps, {a.samples} samples every {thin} steps")
    lines.append(f"estimate = {est.mean:.10g} +/- {est.stderr:.3g} (batch means)")
    _emit(lines, None, None, stdout)
    if a.out:
        with open(a.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


_COMMANDS = {"bound": _cmd_bound, "sweep": _cmd_sweep, "exact": _cmd_exact, "sample": _cmd_sample}


def main(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        a = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        sys_ = model_io.load_model(a.model)
        f = model_io.load_observable(a.observable, sys_)
        return _COMMANDS[a.command](a, sys_, f, stdout)
    except GibbsCertifyError as exc:
        print(f"gibbs-certify: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"gibbs-certify: cannot write output: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
