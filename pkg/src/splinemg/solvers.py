"""Conjugate gradients, plain and with a multigrid V-cycle preconditioner.

Both solvers share one update loop; plain CG is the preconditioner-free
case.  The loop keeps only scalar history of the previous preconditioned
residual product, so a solve holds four (plain) or five (preconditioned)
level-sized vectors besides the right-hand side.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from .errors import NumericError, ParameterError
from .multigrid import Hierarchy, v_cycle
from .system import LevelOperator

MAX_ITERATIONS_CAP = 50_000


@dataclass(frozen=True)
class SolverConfig:
    """Stopping control and preconditioner selection.

    ``max_iterations=None`` resolves to ``10 * sqrt(K)`` capped at 50000.
    ``preconditioner`` is ``'none'``, ``'mg-jacobi'`` or ``'mg-ssor'``.
    """

    tolerance: float = 1e-8
    max_iterations: int | None = None
    preconditioner: str = "mg-jacobi"

    def __post_init__(self):
        if not 0.0 < self.tolerance < 1.0:
            raise ParameterError(f"tolerance must be in (0, 1), got {self.tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if self.preconditioner not in ("none", "mg-jacobi", "mg-ssor"):
            raise ParameterError(f"unknown preconditioner {self.preconditioner!r}")

    def resolved_max_iterations(self, size: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return min(MAX_ITERATIONS_CAP, max(1, ceil(10 * sqrt(size))))


@dataclass
class SolveReport:
    """Outcome of one solve: iterate count, recorded two-norm residuals,
    timing, an analytic estimate of auxiliary solver memory, and the
    coefficient vector."""

    iterations: int
    residual_history: np.ndarray
    wall_time: float
    peak_auxiliary_memory_estimate: int
    converged: bool
    coefficients: np.ndarray
    label: str = field(default="cg")

    @property
    def final_relative_residual(self) -> float:
        if self.residual_history[0] == 0.0:
            return 0.0
        return float(self.residual_history[-1] / self.residual_history[0])


def _pcg(apply_fn, b, precond, tol, maxiter, aux_reals, label):
    """Preconditioned CG with step length ``r'z / p'Ap`` and direction
    update ``p = z + (r'z / r~'z~) p``; ``precond=None`` runs plain CG
    (then ``z`` aliases ``r`` and no copy is made)."""
    t0 = time.perf_counter()
    b = np.ascontiguousarray(b, dtype=np.float64)
    norm_b = float(np.linalg.norm(b))
    history = [norm_b]
    x = np.zeros_like(b)
    if norm_b == 0.0:
        return SolveReport(
            iterations=0,
            residual_history=np.array(history),
            wall_time=time.perf_counter() - t0,
            peak_auxiliary_memory_estimate=(aux_reals + 4 * b.size) * 8,
            converged=True,
            coefficients=x,
            label=label,
        )
    r = b.copy()
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    converged = False
    k = 0
    while k < maxiter:
        v = apply_fn(p)
        pv = float(p @ v)
        if not np.isfinite(pv) or pv <= 0.0:
            raise NumericError(
                f"curvature p'Ap = {pv} at iteration {k}; operator not SPD or diverged",
                iteration=k,
            )
        w = rz / pv
        x += w * p
        r -= w * v
        k += 1
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            raise NumericError(f"non-finite residual at iteration {k}", iteration=k)
        history.append(res)
        if res <= tol * norm_b:
            converged = True
            break
        z = precond(r) if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    n_vec = 4 if precond is None else 5
    return SolveReport(
        iterations=k,
        residual_history=np.array(history),
        wall_time=time.perf_counter() - t0,
        peak_auxiliary_memory_estimate=(aux_reals + n_vec * b.size) * 8,
        converged=converged,
        coefficients=x,
        label=label,
    )


def cg_solve(op: LevelOperator, b, cfg: SolverConfig | None = None) -> SolveReport:
    """Plain CG on one level operator."""
    cfg = cfg or SolverConfig(preconditioner="none")
    window = op.design.rel.shape[0] if hasattr(op, "design") else 0
    return _pcg(
        op.apply,
        b,
        None,
        cfg.tolerance,
        cfg.resolved_max_iterations(op.size),
        aux_reals=window,
        label="cg",
    )


def mgcg_solve(
    hier: Hierarchy, y=None, cfg: SolverConfig | None = None, preconditioner=None
) -> SolveReport:
    """Multigrid-preconditioned CG on the finest level.

    The right-hand side is the finest-level ``B'y`` (training responses by
    default); each preconditioner application is one V-cycle from a zero
    initial guess.  ``preconditioner`` may override the default Jacobi
    V-cycle with any callable ``r -> z`` (used for the dense-smoother
    reference and for tests).
    """
    cfg = cfg or SolverConfig()
    op = hier.finest
    b = op.rhs(y)
    if preconditioner is None:
        def preconditioner(r):
            return v_cycle(hier, None, r, hier.num_levels)
    return _pcg(
        op.apply,
        b,
        preconditioner,
        cfg.tolerance,
        cfg.resolved_max_iterations(op.size),
        aux_reals=hier.workspace_reals() + b.size,
        label="mgcg",
    )
