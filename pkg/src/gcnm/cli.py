"""Command-line entry point: ``gcnm {gen,solve,bench,deblur}``.

Exit codes: 0 on success, 1 on solver or I/O failure, 2 on usage errors
(bad arguments, malformed specs).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .core import CompositeProblem, ConfigError, make_config
from .instances import (ContainerError, GrayImage, PGMError, SpecError,
                        gen_deblur, generate, load_instance, problem_from_file, read_pgm,
                        parse_spec, read_spec, save_instance, write_pgm)
from .regularizers import L0Norm
from .smooth_models import StudentT
from .solvers import ERROR, SOLVERS, SolveTrace

log = logging.getLogger("gcnm")

REPORT_FIELDS = ("TN", "solver", "time", "iter", "delta", "eta", "nnz", "status")
TRACE_FIELDS = ("k", "fbe", "eta", "v_norm", "tau", "backtracks", "elapsed_s")


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    TN: str
    solver: str
    time: float
    iter: int
    delta: float
    eta: float
    nnz: int
    status: str

    @classmethod
    def from_trace(cls, name: str, problem: CompositeProblem, trace: SolveTrace) -> "RunReport":
        x = trace.final_x
        delta = float(np.linalg.norm(problem.f.residual(x))) if np.all(np.isfinite(x)) else math.nan
        return cls(name, trace.solver, trace.time, trace.iterations, delta,
                   float(trace.final.eta), int(np.count_nonzero(x)), trace.termination)

    @classmethod
    def failed(cls, name: str, solver: str) -> "RunReport":
        return cls(name, solver, math.nan, 0, math.nan, math.nan, 0, ERROR)

    def row(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("time", "delta", "eta"):
            d[k] = repr(float(d[k]))
        return d

    @classmethod
    def parse(cls, row: dict) -> "RunReport":
        return cls(row["TN"], row["solver"], float(row["time"]), int(row["iter"]),
                   float(row["delta"]), float(row["eta"]), int(row["nnz"]), row["status"])


def write_reports(fh, reports: Sequence[RunReport]) -> None:
    w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())


def read_reports(fh) -> List[RunReport]:
    return [RunReport.parse(row) for row in csv.DictReader(fh)]


def write_trace(path, trace: SolveTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in trace.records:
            w.writerow([r.k, repr(r.fbe), repr(r.eta), repr(r.v_norm),
                        "" if r.tau is None else repr(r.tau), r.backtracks, repr(r.elapsed)])


def student2d() -> CompositeProblem:
    """``log(1 + (x1 + x2 - 1)^2) + 0.1 ||x||_0``."""
    return CompositeProblem(StudentT(np.array([[1.0, 1.0]]), np.array([1.0]), 1.0),
                            L0Norm(0.1), "student2d")


def _config_overrides(args) -> dict:
    return dict(lam=args.lam, sigma=args.sigma, beta=args.beta, tol=args.tol,
                max_iter=args.max_iter)


def run_solver(problem, x0, solver: str, overrides: dict) -> SolveTrace:
    if solver not in SOLVERS:
        raise UsageError(f"unknown solver {solver!r}; expected one of {sorted(SOLVERS)}")
    cfg = make_config(problem, **overrides)
    return SOLVERS[solver](problem, cfg, x0, keep_iterates=False)


# --------------------------------------------------------------- subcommands

def cmd_gen(args) -> int:
    spec = read_spec(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    inst = save_instance(args.out, spec)
    log.info("wrote %s instance %s to %s", spec.family, inst.dims, args.out)
    return 0


def cmd_solve(args) -> int:
    if args.builtin:
        problem, name = student2d(), "student2d"
        x0 = np.zeros(2)
    else:
        problem, x0 = problem_from_file(load_instance(args.instance))
        name = args.name or args.instance
    if args.x0 is not None:
        x0 = np.array([float(t) for t in args.x0.split(",")])
        if x0.shape != (problem.n,):
            raise UsageError(f"--x0 needs {problem.n} comma-separated values")
    trace = run_solver(problem, x0, args.solver, _config_overrides(args))
    if args.trace:
        write_trace(args.trace, trace)
    report = RunReport.from_trace(name, problem, trace)
    write_reports(sys.stdout, [report])
    if args.print_x:
        print(" ".join(repr(float(v)) for v in trace.final_x))
    if trace.termination == ERROR:
        print(f"error: {trace.message}", file=sys.stderr)
        return 1
    return 0


def load_suite(path):
    """Sections of an INI file are instances; ``solvers`` lists what to run on each."""
    cp = configparser.ConfigParser(interpolation=None)
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    jobs = []
    for section in cp.sections():
        sec = dict(cp[section])
        solvers = [s.strip() for s in sec.pop("solvers", "pgm,gcnm").split(",") if s.strip()]
        extra = {k: sec.pop(k) for k in ("tol", "max_iter") if k in sec}
        text = "\n".join(f"{k} = {v}" for k, v in sec.items())
        jobs.append((section, text, solvers, extra))
    return jobs


def _bench_instance(job, overrides):
    name, text, solvers, extra = job
    try:
        spec = parse_spec(text)
        problem, x0, _ = generate(spec)
    except Exception as exc:  # noqa: BLE001 - reported per row
        log.warning("%s: %s", name, exc)
        return [RunReport.failed(name, s) for s in solvers]
    ov = dict(overrides)
    if "tol" in extra:
        ov["tol"] = float(extra["tol"])
    if "max_iter" in extra:
        ov["max_iter"] = int(extra["max_iter"])
    rows = []
    for s in solvers:
        try:
            rows.append(RunReport.from_trace(name, problem, run_solver(problem, x0, s, ov)))
        except Exception as exc:  # noqa: BLE001
            log.warning("%s/%s: %s", name, s, exc)
            rows.append(RunReport.failed(name, s))
    return rows


def cmd_bench(args) -> int:
    jobs = load_suite(args.suite)
    overrides = _config_overrides(args)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(lambda j: _bench_instance(j, overrides), jobs))
    reports = [r for rows in results for r in rows]
    with open(args.out, "w", newline="") as fh:
        write_reports(fh, reports)
    return 0


def cmd_deblur(args) -> int:
    image = read_pgm(args.input)
    problem, x0 = gen_deblur(image, args.kernel_size, args.kernel_std, args.noise_std,
                             args.mu0, args.mu2, args.seed if args.seed is not None else 0)
    trace = run_solver(problem, x0, args.solver, _config_overrides(args))
    restored = GrayImage.from_vector(trace.final_x, image.width, image.height, clamp=True)
    write_pgm(args.out, restored, maxval=args.maxval)
    report = RunReport.from_trace(args.input, problem, trace)
    if args.report:
        with open(args.report, "w", newline="") as fh:
            write_reports(fh, [report])
    else:
        write_reports(sys.stdout, [report])
    return 1 if trace.termination == ERROR else 0


# -------------------------------------------------------------------- parser

def _solver_flags(p, tol):
    p.add_argument("--tol", type=float, default=tol, help="stop when ||x - x_hat|| <= tol")
    p.add_argument("--lambda", dest="lam", type=float, help="step size (default 0.99 / L_f)")
    p.add_argument("--sigma", type=float, help="line-search constant")
    p.add_argument("--beta", type=float, help="backtracking factor in (0, 1)")
    p.add_argument("--max-iter", type=int, default=10000)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gcnm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file from a key=value spec")
    p.add_argument("spec")
    p.add_argument("out")
    p.add_argument("--seed", type=int, help="override the seed given in the spec file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run one solver on an instance file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("instance", nargs="?")
    src.add_argument("--builtin", choices=["student2d"],
                     help="built-in problem instead of an instance file")
    p.add_argument("--solver", choices=sorted(SOLVERS), default="gcnm")
    p.add_argument("--x0", help="comma-separated starting point; write --x0=-5,5 for negative values")
    p.add_argument("--name", help="label for the TN column")
    p.add_argument("--trace", help="per-iteration CSV output path")
    p.add_argument("--print-x", action="store_true", help="print the final iterate")
    _solver_flags(p, 1e-6)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run an INI suite of instances x solvers")
    p.add_argument("suite")
    p.add_argument("out")
    p.add_argument("--threads", type=int, default=1, help="instances run in parallel")
    _solver_flags(p, 1e-6)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("deblur", help="blur, add noise and restore a PGM image")
    p.add_argument("input")
    p.add_argument("out")
    p.add_argument("--report", help="CSV report path (default stdout)")
    p.add_argument("--solver", choices=sorted(SOLVERS), default="gcnm")
    p.add_argument("--kernel-size", type=int, default=9)
    p.add_argument("--kernel-std", type=float, default=4.0)
    p.add_argument("--noise-std", type=float, default=1e-3)
    p.add_argument("--mu0", type=float, default=1e-4)
    p.add_argument("--mu2", type=float, default=5e-3)
    p.add_argument("--seed", type=int)
    p.add_argument("--maxval", type=int, default=255)
    _solver_flags(p, 1e-2)
    p.set_defaults(func=cmd_deblur)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, SpecError, ConfigError) as exc:
        print(f"gcnm {args.command}: {exc}", file=sys.stderr)
        return 2
    except (OSError, PGMError, ContainerError) as exc:
        print(f"gcnm {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
