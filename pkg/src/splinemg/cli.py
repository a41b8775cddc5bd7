"""Command-line surface: generate, fit, predict, analyze, bench.

File formats
------------
Datasets are delimited text (whitespace or comma), one observation per row,
coordinate columns followed by one response column; ``#`` comments and an
optional header line are skipped.  A fit writes into its output directory:

* ``report.json``     -- config echo, per-axis scaling maps, spline-space
  layout, solver statistics and memory estimates (key/value JSON),
* ``coefficients.txt``-- one coefficient per line, ``%.17e`` (byte-stable),
* ``residuals.txt``   -- training coordinates and response residuals,
* ``grid.txt``        -- optional prediction grid (``--grid N`` points/axis).

``predict`` consumes a fit directory and raw-coordinate points; coordinates
are mapped through the stored per-axis affine scaling before evaluation.

Environment variables ``SPLINEMG_<FLAG>`` (e.g. ``SPLINEMG_LAMBDA``,
``SPLINEMG_LEVELS``, ``SPLINEMG_TOL``, ``SPLINEMG_DENSE_CAP``) provide
defaults; explicit flags win.  ``SPLINEMG_KERNELS`` selects the kernel
backend at import time.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import analysis, kernels
from .bsplines import build_space
from .datasets import generate_dataset, read_dataset, read_table, write_dataset
from .errors import (
    CapacityError,
    DomainError,
    NumericError,
    ParameterError,
    ShapeError,
)
from .multigrid import build_hierarchy
from .solvers import SolverConfig, cg_solve, mgcg_solve
from .system import DENSE_CAP, ScatteredDataset, design_factors
from .tensorops import khatri_rao_tmatvec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CAPACITY = 4
EXIT_NO_CONVERGENCE = 5
EXIT_NUMERIC = 6

PRECONDITIONERS = ("none", "mg-jacobi", "mg-ssor")


def _env(name, cast, fallback):
    raw = os.environ.get(f"SPLINEMG_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError as exc:
        raise ParameterError(f"bad value for SPLINEMG_{name}: {raw!r}") from exc


@dataclass
class RunConfig:
    """Validated inputs of one fitting run."""

    dim: int = 2
    levels: int = 5
    lam: float = 1.0
    degree: int = 3
    tol: float = 1e-8
    max_iter: int | None = None
    nu1: int = 2
    nu2: int = 2
    omega: float = 0.8
    precond: str = "mg-jacobi"
    seed: int = 0
    n: int = 100_000
    noise: float = 0.1
    input: str | None = None
    output: str | None = None
    grid: int = 0
    deterministic: bool = False
    dense_cap: int = DENSE_CAP

    def validate(self) -> "RunConfig":
        if self.dim < 1:
            raise ParameterError(f"--dim must be >= 1, got {self.dim}")
        if self.levels < 1:
            raise ParameterError(f"--levels must be >= 1, got {self.levels}")
        if self.lam <= 0:
            raise ParameterError(f"--lambda must be positive, got {self.lam}")
        if not 1 <= self.degree <= 5:
            raise ParameterError(f"--degree must be in 1..5, got {self.degree}")
        if not 0 < self.tol < 1:
            raise ParameterError(f"--tol must be in (0, 1), got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ParameterError("--max-iter must be >= 1")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ParameterError("--nu1/--nu2 must be non-negative")
        if not 0 < self.omega < 2:
            raise ParameterError(f"--omega must be in (0, 2), got {self.omega}")
        if self.precond not in PRECONDITIONERS:
            raise ParameterError(f"--precond must be one of {PRECONDITIONERS}")
        if self.input is None and (self.n < 1 or self.noise < 0):
            raise ParameterError("generator needs --n >= 1 and --noise >= 0")
        if self.grid < 0:
            raise ParameterError("--grid must be non-negative")
        if self.dense_cap < 1:
            raise ParameterError("--dense-cap must be >= 1")
        return self


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dim", type=int, default=_env("DIM", int, 2), help="covariate dimension P")
    parser.add_argument("--levels", type=int, default=_env("LEVELS", int, 5), help="finest grid level G")
    parser.add_argument("--lambda", dest="lam", type=float, default=_env("LAMBDA", float, 1.0),
                        help="smoothing parameter")
    parser.add_argument("--degree", type=int, default=_env("DEGREE", int, 3), help="spline degree (1..5)")
    parser.add_argument("--tol", type=float, default=_env("TOL", float, 1e-8),
                        help="relative residual tolerance")
    parser.add_argument("--max-iter", type=int, default=None, help="iteration cap (default 10*sqrt(K))")
    parser.add_argument("--nu1", type=int, default=_env("NU1", int, 2), help="pre-smoothing sweeps")
    parser.add_argument("--nu2", type=int, default=_env("NU2", int, 2), help="post-smoothing sweeps")
    parser.add_argument("--omega", type=float, default=_env("OMEGA", float, 0.8), help="Jacobi damping")
    parser.add_argument("--precond", choices=PRECONDITIONERS,
                        default=_env("PRECOND", str, "mg-jacobi"), help="solver preconditioner")
    parser.add_argument("--seed", type=int, default=_env("SEED", int, 0), help="generator seed")
    parser.add_argument("--n", type=int, default=_env("N", int, 100_000), help="generated sample count")
    parser.add_argument("--noise", type=float, default=_env("NOISE", float, 0.1),
                        help="generated noise std deviation")
    parser.add_argument("--deterministic", action="store_true",
                        help="require bit-reproducible sequential kernels (always satisfied)")
    parser.add_argument("--dense-cap", type=int, default=_env("DENSE_CAP", int, DENSE_CAP),
                        help="largest dimension assembled densely")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splinemg",
        description="Penalized tensor-product spline smoothing with a matrix-free "
        "multigrid-preconditioned CG solver.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic sigmoid dataset")
    _add_common(p)
    p.add_argument("--output", required=True, help="dataset file to write")

    p = sub.add_parser("fit", help="fit a smoothing spline and write run artifacts")
    _add_common(p)
    p.add_argument("--input", default=None, help="dataset file (default: generate)")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--grid", type=int, default=0, help="prediction-grid points per axis (0 = off)")

    p = sub.add_parser("predict", help="evaluate a fitted spline at new points")
    p.add_argument("--model", required=True, help="fit output directory")
    p.add_argument("--input", required=True, help="points file (raw coordinates)")
    p.add_argument("--output", required=True, help="predictions file to write")

    p = sub.add_parser("analyze", help="desk-scale spectra and condition numbers")
    _add_common(p)
    p.add_argument("--input", default=None, help="dataset file (default: generate)")
    p.add_argument("--output", default=None, help="JSON report file")
    p.add_argument("--skip-ssor", action="store_true", help="skip the dense-smoother reference")

    p = sub.add_parser("bench", help="iterations vs refinement level, CG against MGCG")
    _add_common(p)
    p.add_argument("--input", default=None, help="dataset file (default: generate)")
    p.add_argument("--g-min", type=int, default=4, help="coarsest benchmarked level")
    p.add_argument("--g-max", type=int, default=7, help="finest benchmarked level")
    p.add_argument("--output", default=None, help="TSV table file")
    return parser


def _load_points(cfg: RunConfig):
    """Dataset plus the per-axis affine maps onto the unit cube."""
    if cfg.input is None:
        data = generate_dataset(cfg.dim, cfg.n, cfg.noise, cfg.seed)
        scale = [{"lo": 0.0, "hi": 1.0} for _ in range(cfg.dim)]
        return data, scale
    points, responses = read_dataset(cfg.input)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (points - lo) / span
    scale = [{"lo": float(l), "hi": float(l + s)} for l, s in zip(lo, span)]
    return ScatteredDataset(scaled, responses), scale


def _apply_scale(points: np.ndarray, scale) -> np.ndarray:
    lo = np.array([s["lo"] for s in scale])
    hi = np.array([s["hi"] for s in scale])
    return (points - lo) / (hi - lo)


def _solve(hier, cfg: RunConfig):
    solver_cfg = SolverConfig(
        tolerance=cfg.tol, max_iterations=cfg.max_iter, preconditioner=cfg.precond
    )
    if cfg.precond == "none":
        return cg_solve(hier.finest, hier.finest.rhs(), solver_cfg)
    if cfg.precond == "mg-ssor":
        precond = analysis.ssor_vcycle_reference(hier, cap=cfg.dense_cap)
        return mgcg_solve(hier, cfg=solver_cfg, preconditioner=precond)
    return mgcg_solve(hier, cfg=solver_cfg)


def _grid_points(num_axes: int, per_axis: int) -> np.ndarray:
    axes = [np.linspace(0.0, 1.0, per_axis) for _ in range(num_axes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def run_pipeline(cfg: RunConfig) -> dict:
    """Build the hierarchy, solve, and write all fit artifacts.

    Returns the report dict; raises on error (the CLI maps exception types
    to exit codes).
    """
    cfg.validate()
    if cfg.output is None:
        raise ParameterError("fit requires --output")
    t0 = time.perf_counter()
    data, scale = _load_points(cfg)
    if data.num_axes != cfg.dim and cfg.input is not None:
        cfg.dim = data.num_axes
    hier = build_hierarchy(
        data,
        cfg.levels,
        cfg.lam,
        degrees=cfg.degree,
        nu1=cfg.nu1,
        nu2=cfg.nu2,
        omega=cfg.omega,
        dense_cap=cfg.dense_cap,
    )
    report_solve = _solve(hier, cfg)
    alpha = report_solve.coefficients
    op = hier.finest
    fitted = op.fitted_values(alpha)
    residuals = data.responses - fitted
    ls, rough = op.objective(alpha)

    os.makedirs(cfg.output, exist_ok=True)
    np.savetxt(os.path.join(cfg.output, "coefficients.txt"), alpha, fmt="%.17e")
    np.savetxt(
        os.path.join(cfg.output, "residuals.txt"),
        np.column_stack([data.points, residuals]),
        fmt="%.17g",
        header=" ".join([f"x{p + 1}" for p in range(data.num_axes)] + ["residual"]),
    )
    if cfg.grid > 0:
        pts = _grid_points(data.num_axes, cfg.grid)
        np.savetxt(
            os.path.join(cfg.output, "grid.txt"),
            np.column_stack([pts, op.predict(alpha, pts)]),
            fmt="%.17g",
            header=" ".join([f"x{p + 1}" for p in range(data.num_axes)] + ["value"]),
        )

    report = {
        "config": {k: v for k, v in asdict(cfg).items() if k != "output"},
        "scaling": scale,
        "spaces": [
            {"lower": s.lower, "upper": s.upper, "level": s.level, "degree": s.degree, "dim": s.dim}
            for s in op.spaces
        ],
        "data": {"n": data.n, "dim": data.num_axes},
        "solver": {
            "method": report_solve.label,
            "iterations": report_solve.iterations,
            "converged": bool(report_solve.converged),
            "final_relative_residual": report_solve.final_relative_residual,
            "residual_history": report_solve.residual_history.tolist(),
            "wall_time_seconds": report_solve.wall_time,
        },
        "objective": {"least_squares": ls, "roughness": rough, "total": ls + cfg.lam * rough},
        "memory": {
            "hierarchy_bytes": hier.memory_reals() * 8,
            "solver_auxiliary_bytes": report_solve.peak_auxiliary_memory_estimate,
        },
        "kernel_backend": kernels.ACTIVE_BACKEND,
        "total_wall_time_seconds": time.perf_counter() - t0,
    }
    with open(os.path.join(cfg.output, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def _cmd_generate(args) -> int:
    cfg = RunConfig(dim=args.dim, n=args.n, noise=args.noise, seed=args.seed).validate()
    data = generate_dataset(cfg.dim, cfg.n, cfg.noise, cfg.seed)
    write_dataset(args.output, data.points, data.responses)
    print(f"wrote {cfg.n} observations in {cfg.dim} dimension(s) to {args.output}")
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        dim=args.dim,
        levels=args.levels,
        lam=args.lam,
        degree=args.degree,
        tol=args.tol,
        max_iter=args.max_iter,
        nu1=args.nu1,
        nu2=args.nu2,
        omega=args.omega,
        precond=args.precond,
        seed=args.seed,
        n=args.n,
        noise=args.noise,
        input=getattr(args, "input", None),
        output=getattr(args, "output", None),
        grid=getattr(args, "grid", 0),
        deterministic=args.deterministic,
        dense_cap=args.dense_cap,
    )


def _cmd_fit(args) -> int:
    report = run_pipeline(_config_from_args(args))
    solver = report["solver"]
    print(
        f"{solver['method']}: {solver['iterations']} iteration(s), "
        f"relative residual {solver['final_relative_residual']:.3e}, "
        f"{solver['wall_time_seconds']:.2f}s"
    )
    print(f"artifacts in {args.output}")
    if not solver["converged"]:
        print("solver did not reach the tolerance", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _cmd_predict(args) -> int:
    report_path = os.path.join(args.model, "report.json")
    with open(report_path, encoding="utf-8") as fh:
        report = json.load(fh)
    alpha = np.loadtxt(os.path.join(args.model, "coefficients.txt"), ndmin=1)
    table = read_table(args.input)
    dim = len(report["spaces"])
    if table.shape[1] not in (dim, dim + 1):
        raise ShapeError(
            f"{args.input}: expected {dim} coordinate columns (optionally one "
            f"response column), got {table.shape[1]}"
        )
    points = _apply_scale(table[:, :dim], report["scaling"])
    spaces = tuple(
        build_space(s["lower"], s["upper"], s["level"], s["degree"]) for s in report["spaces"]
    )
    size = int(np.prod([s.dim for s in spaces]))
    if alpha.shape != (size,):
        raise ShapeError(
            f"{args.model}: coefficient file has {alpha.shape[0]} entries, expected {size}"
        )
    factors = design_factors(spaces, points)
    values = khatri_rao_tmatvec(factors, alpha)
    np.savetxt(
        args.output,
        np.column_stack([table[:, :dim], values]),
        fmt="%.17g",
        header=" ".join([f"x{p + 1}" for p in range(dim)] + ["value"]),
    )
    print(f"wrote {values.shape[0]} prediction(s) to {args.output}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    cfg = _config_from_args(args).validate()
    data, _ = _load_points(cfg)
    hier = build_hierarchy(
        data, cfg.levels, cfg.lam, degrees=cfg.degree,
        nu1=cfg.nu1, nu2=cfg.nu2, omega=cfg.omega, dense_cap=cfg.dense_cap,
    )
    reports = analysis.condition_summary(
        hier, include_ssor=not args.skip_ssor, cap=cfg.dense_cap
    )
    rho = analysis.spectral_radius(analysis.iteration_matrix(hier, cap=cfg.dense_cap))
    print(f"{'operator':<12} {'condition':>12} {'eig min':>12} {'eig max':>12}")
    for key, rep in reports.items():
        print(
            f"{key:<12} {rep.condition_number:>12.4g} "
            f"{rep.eigenvalues[0]:>12.4g} {rep.eigenvalues[-1]:>12.4g}"
        )
    print(f"v-cycle spectral radius: {rho:.4f}")
    if args.output:
        payload = {
            "config": {k: v for k, v in asdict(cfg).items() if k not in ("input", "output")},
            "spectral_radius": rho,
            "operators": {
                key: {
                    "condition_number": rep.condition_number,
                    "eig_min": float(rep.eigenvalues[0]),
                    "eig_max": float(rep.eigenvalues[-1]),
                    "eigenvalues": rep.eigenvalues.tolist(),
                }
                for key, rep in reports.items()
            },
        }
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"report written to {args.output}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _config_from_args(args).validate()
    if args.g_min < 2 or args.g_max < args.g_min:
        raise ParameterError("need 2 <= --g-min <= --g-max")
    data, _ = _load_points(cfg)
    rows = []
    header = ("G", "K", "cg_iters", "cg_seconds", "mgcg_iters", "mgcg_seconds")
    print("\t".join(header))
    for g in range(args.g_min, args.g_max + 1):
        hier = build_hierarchy(
            data, g, cfg.lam, degrees=cfg.degree,
            nu1=cfg.nu1, nu2=cfg.nu2, omega=cfg.omega, dense_cap=cfg.dense_cap,
        )
        solver_cfg = SolverConfig(tolerance=cfg.tol, max_iterations=cfg.max_iter)
        plain = cg_solve(hier.finest, hier.finest.rhs(), solver_cfg)
        mg = mgcg_solve(hier, cfg=solver_cfg)
        row = (g, hier.finest.size, plain.iterations, round(plain.wall_time, 3),
               mg.iterations, round(mg.wall_time, 3))
        rows.append(row)
        print("\t".join(str(v) for v in row))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("\t".join(header) + "\n")
            for row in rows:
                fh.write("\t".join(str(v) for v in row) + "\n")
        print(f"table written to {args.output}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "analyze": _cmd_analyze,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ParameterError, ShapeError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
