"""Grid hierarchy, damped Jacobi smoothing and the memory-lean V-cycle.

Levels ``g = 1..G`` share the dataset, smoothing parameter and degrees; the
prolongation between consecutive levels is the Kronecker product of the
per-axis refinement matrices and restriction is its transpose, so the coarse
operators satisfy the Galerkin relation with the fine ones.  Only the
coarsest operator is ever factorized.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .bsplines import subdivision_matrix
from .errors import CapacityError, NumericError, ParameterError, ShapeError
from .system import DENSE_CAP, LevelOperator, ScatteredDataset, build_level
from .tensorops import kron_matvec, kron_matvec_transposed


class Hierarchy:
    """Level operators ``1..G`` plus transfer factors and a coarse solver.

    Attributes
    ----------
    levels : list of LevelOperator
        ``levels[g - 1]`` is the operator on level ``g``.
    transfers : list of tuple of ndarray
        ``transfers[g - 1]`` holds the per-axis refinement factors from level
        ``g`` to ``g + 1`` (fine-dim x coarse-dim each).
    nu1, nu2 : int
        Pre-/post-smoothing sweeps of the V-cycle.
    omega : float
        Jacobi damping factor.
    """

    def __init__(self, levels, transfers, nu1, nu2, omega, coarse_mode, coarse_tol):
        self.levels = levels
        self.transfers = transfers
        self.nu1 = int(nu1)
        self.nu2 = int(nu2)
        self.omega = float(omega)
        self.coarse_mode = coarse_mode
        self.coarse_tol = float(coarse_tol)
        self._coarse_factor = None
        if coarse_mode == "direct":
            a1 = levels[0].assemble_dense()
            try:
                self._coarse_factor = scipy.linalg.cho_factor(a1)
            except scipy.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
                raise NumericError(f"coarse factorization failed on level 1: {exc}") from exc

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> LevelOperator:
        return self.levels[-1]

    def level(self, g: int) -> LevelOperator:
        if not 1 <= g <= self.num_levels:
            raise ParameterError(f"level must be in 1..{self.num_levels}, got {g}")
        return self.levels[g - 1]

    def memory_reals(self) -> int:
        """Float64 count of all stored hierarchy data."""
        count = sum(op.memory_reals() for op in self.levels)
        count += sum(f.size for axis_factors in self.transfers for f in axis_factors)
        if self._coarse_factor is not None:
            count += self._coarse_factor[0].size
        return int(count)

    def workspace_reals(self) -> int:
        """Float64 count of the V-cycle working vectors (residual, coarse
        correction and one smoother scratch per level)."""
        sizes = [op.size for op in self.levels]
        count = sum(2 * sizes[g] + sizes[g - 1] for g in range(1, len(sizes)))
        count += max(op.design.rel.shape[0] for op in self.levels)
        return int(count)


def build_hierarchy(
    dataset: ScatteredDataset,
    num_levels: int,
    lam: float,
    degrees=3,
    nu1: int = 2,
    nu2: int = 2,
    omega: float = 0.8,
    dense_cap: int = DENSE_CAP,
    coarse_mode: str = "auto",
    coarse_tol: float = 1e-10,
) -> Hierarchy:
    """Build level operators, transfer factors and the coarse factorization.

    ``coarse_mode`` is ``direct`` (Cholesky of the assembled coarsest
    operator), ``cg`` (nested matrix-free CG) or ``auto`` (direct when the
    coarsest dimension fits under ``dense_cap``).
    """
    if num_levels < 1:
        raise ParameterError(f"need at least one level, got {num_levels}")
    if nu1 < 0 or nu2 < 0:
        raise ParameterError("smoothing step counts must be non-negative")
    if not 0 < omega < 2:
        raise ParameterError(f"damping factor must be in (0, 2), got {omega}")
    levels = [build_level(dataset, g, lam, degrees) for g in range(1, num_levels + 1)]
    transfers = [
        tuple(
            np.ascontiguousarray(subdivision_matrix(cs, fs).array)
            for cs, fs in zip(levels[i].spaces, levels[i + 1].spaces)
        )
        for i in range(num_levels - 1)
    ]
    if coarse_mode == "auto":
        coarse_mode = "direct" if levels[0].size <= dense_cap else "cg"
    elif coarse_mode == "direct" and levels[0].size > dense_cap:
        raise CapacityError(
            f"coarse dimension {levels[0].size} exceeds dense cap {dense_cap}; "
            "use coarse_mode='cg'"
        )
    elif coarse_mode not in ("direct", "cg"):
        raise ParameterError(f"unknown coarse_mode {coarse_mode!r}")
    return Hierarchy(levels, transfers, nu1, nu2, omega, coarse_mode, coarse_tol)


def jacobi_spectral_bound(level) -> float:
    """Estimate of the largest eigenvalue of the diagonally scaled operator.

    Runs a short power iteration on the symmetrized form
    ``D^{-1/2} A D^{-1/2}`` from a seeded start vector (deterministic per
    operator size) and caches the slightly inflated result on the operator.
    The scaled spectrum bounds the stable Jacobi step: sweeps amplify the
    top modes once the step exceeds ``2 / lambda_max``.
    """
    cached = getattr(level, "_jacobi_spectral_bound", None)
    if cached is not None:
        return cached
    scale = 1.0 / np.sqrt(level.diagonal())
    gen = np.random.default_rng(level.size)
    z = gen.standard_normal(level.size)
    z /= np.linalg.norm(z)
    mu = 1.0
    for _ in range(20):
        y = scale * level.apply(scale * z)
        mu = float(z @ y)
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            mu = 0.0
            break
        z = y / norm_y
    bound = 1.05 * max(mu, 1e-12)
    try:
        level._jacobi_spectral_bound = bound
    except AttributeError:  # frozen operator-likes just recompute
        pass
    return bound


def effective_jacobi_step(level, omega: float) -> float:
    """Damping actually applied per sweep: ``omega`` itself while the scaled
    spectrum sits inside the stability window, otherwise ``omega`` as a
    fraction of the window ``2 / lambda_max`` (higher-dimensional penalties
    push ``lambda_max(D^{-1}A)`` well above 2, where a fixed step diverges
    on the finest modes)."""
    bound = jacobi_spectral_bound(level)
    return omega if bound <= 2.0 else 2.0 * omega / bound


def jacobi_smooth(level: LevelOperator, alpha, b, steps: int, omega: float) -> np.ndarray:
    """Damped Jacobi sweeps ``alpha += step * r / diag`` on one level.

    ``omega`` is the damping fraction of the level's stable step range (see
    `effective_jacobi_step`).  ``alpha=None`` starts from the zero vector
    (the first residual is then ``b`` and costs no operator application).
    """
    if steps < 0:
        raise ParameterError("step count must be non-negative")
    if not 0 < omega < 2:
        raise ParameterError(f"damping factor must be in (0, 2), got {omega}")
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (level.size,):
        raise ShapeError(f"expected vector of length {level.size}, got {b.shape}")
    dinv = (effective_jacobi_step(level, omega) if steps else omega) / level.diagonal()
    if alpha is None:
        alpha = np.zeros(level.size)
        if steps >= 1:
            alpha += dinv * b
            steps -= 1
    else:
        alpha = np.array(alpha, dtype=np.float64, copy=True)
        if alpha.shape != (level.size,):
            raise ShapeError(f"expected vector of length {level.size}, got {alpha.shape}")
    for _ in range(steps):
        r = b - level.apply(alpha)
        alpha += dinv * r
    return alpha


def transfer(hier: Hierarchy, g: int, v, direction: str) -> np.ndarray:
    """Move a coefficient vector between adjacent levels.

    ``direction='prolong'`` maps level ``g`` to ``g + 1`` via the refinement
    factors; ``'restrict'`` maps level ``g`` to ``g - 1`` via their
    transposes.
    """
    if direction == "prolong":
        if g >= hier.num_levels:
            raise ParameterError(f"cannot prolong from the finest level {g}")
        return kron_matvec(hier.transfers[g - 1], v)
    if direction == "restrict":
        if g <= 1:
            raise ParameterError("cannot restrict from the coarsest level")
        return kron_matvec_transposed(hier.transfers[g - 2], v)
    raise ParameterError(f"direction must be 'prolong' or 'restrict', got {direction!r}")


def _plain_cg(apply_fn, b, tol, maxiter):
    """Minimal CG used as the nested coarse solver."""
    x = np.zeros_like(b)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for k in range(maxiter):
        v = apply_fn(p)
        w = rr / (p @ v)
        x += w * p
        r -= w * v
        rr_new = r @ r
        if not np.isfinite(rr_new):
            raise NumericError("nested coarse CG diverged", iteration=k)
        if np.sqrt(rr_new) <= tol * nb:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def coarse_solve(hier: Hierarchy, b) -> np.ndarray:
    """Solve the coarsest-level system (direct factorization or nested CG)."""
    b = np.ascontiguousarray(b, dtype=np.float64)
    coarse = hier.levels[0]
    if b.shape != (coarse.size,):
        raise ShapeError(f"expected vector of length {coarse.size}, got {b.shape}")
    if hier._coarse_factor is not None:
        return scipy.linalg.cho_solve(hier._coarse_factor, b)
    return _plain_cg(coarse.apply, b, hier.coarse_tol, 20 * coarse.size)


def v_cycle(hier: Hierarchy, alpha, b, g: int | None = None, smoother=None) -> np.ndarray:
    """One V-cycle for the level-``g`` system starting from ``alpha``.

    Pre-smooth, restrict the residual ``A alpha - b``, recurse from a zero
    initial guess, subtract the prolonged coarse correction, post-smooth;
    level 1 is solved by `coarse_solve`.  ``alpha=None`` means a zero start.
    ``smoother(g, alpha, b, steps)`` may replace the damped Jacobi default.
    """
    g = hier.num_levels if g is None else int(g)
    if g == 1:
        return coarse_solve(hier, b)
    level = hier.level(g)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (level.size,):
        raise ShapeError(f"expected vector of length {level.size}, got {b.shape}")

    if smoother is None:
        def smoother(gg, a, rhs, steps):
            return jacobi_smooth(hier.level(gg), a, rhs, steps, hier.omega)

    alpha = smoother(g, alpha, b, hier.nu1)
    r = level.apply(alpha) - b
    r_coarse = kron_matvec_transposed(hier.transfers[g - 2], r)
    e = v_cycle(hier, None, r_coarse, g - 1, smoother)
    alpha -= kron_matvec(hier.transfers[g - 2], e)
    return smoother(g, alpha, b, hier.nu2)
