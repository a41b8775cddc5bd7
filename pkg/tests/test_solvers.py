import numpy as np
import numpy.testing as npt
import pytest

from splinemg import (
    NumericError,
    ParameterError,
    SolverConfig,
    build_hierarchy,
    build_level,
    cg_solve,
    mgcg_solve,
)
from oracles import DenseOperator


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.tolerance == 1e-8
        assert cfg.resolved_max_iterations(400) == 200
        assert cfg.resolved_max_iterations(10**9) == 50_000

    @pytest.mark.parametrize("kwargs", [
        {"tolerance": 0.0},
        {"tolerance": 1.5},
        {"max_iterations": 0},
        {"preconditioner": "ilu"},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ParameterError):
            SolverConfig(**kwargs)


class TestPlainCg:
    def test_clustered_spectrum_converges_immediately(self, rng):
        op = DenseOperator(5.0 * np.eye(30))
        rep = cg_solve(op, rng.standard_normal(30), SolverConfig(preconditioner="none"))
        assert rep.converged and rep.iterations <= 2

    def test_matches_dense_direct_solve(self, small_dataset_1d):
        op = build_level(small_dataset_1d, 3, 1.0)
        b = op.rhs()
        rep = cg_solve(op, b, SolverConfig(tolerance=1e-12, preconditioner="none"))
        ref = np.linalg.solve(op.assemble_dense(), b)
        assert np.linalg.norm(rep.coefficients - ref) <= 1e-7 * np.linalg.norm(ref)
        assert rep.converged

    def test_zero_rhs(self, small_dataset_1d):
        op = build_level(small_dataset_1d, 2, 1.0)
        rep = cg_solve(op, np.zeros(op.size))
        assert rep.iterations == 0 and rep.converged
        npt.assert_array_equal(rep.coefficients, np.zeros(op.size))

    def test_monotone_energy_norm_error(self, small_dataset_1d):
        op = build_level(small_dataset_1d, 3, 1.0)
        a = op.assemble_dense()
        b = op.rhs()
        x_star = np.linalg.solve(a, b)
        energies = []
        for k in range(1, 9):
            rep = cg_solve(op, b, SolverConfig(max_iterations=k, preconditioner="none"))
            e = rep.coefficients - x_star
            energies.append(e @ a @ e)
        assert all(e2 <= e1 * (1 + 1e-12) for e1, e2 in zip(energies, energies[1:]))

    def test_residual_recurrence_consistency(self, small_dataset_2d):
        op = build_level(small_dataset_2d, 3, 1.0)
        b = op.rhs()
        rep = cg_solve(op, b, SolverConfig(tolerance=1e-9, preconditioner="none", max_iterations=5000))
        true_res = np.linalg.norm(b - op.apply(rep.coefficients))
        assert abs(true_res - rep.residual_history[-1]) <= 1e-6 * np.linalg.norm(b)

    def test_divergence_raises_with_iteration_index(self, rng):
        class BadOperator:
            size = 8

            def apply(self, x, out=None):
                return np.full(8, np.nan)

        with pytest.raises(NumericError) as err:
            cg_solve(BadOperator(), rng.standard_normal(8))
        assert err.value.iteration == 0


class TestMgcg:
    def test_agrees_with_plain_cg(self, small_dataset_2d):
        hier = build_hierarchy(small_dataset_2d, 4, 1.0)
        cfg = SolverConfig(tolerance=1e-10, max_iterations=10_000)
        mg = mgcg_solve(hier, cfg=cfg)
        plain = cg_solve(hier.finest, hier.finest.rhs(), cfg)
        assert mg.converged and plain.converged
        diff = np.linalg.norm(mg.coefficients - plain.coefficients)
        assert diff <= 1e-6 * np.linalg.norm(plain.coefficients)
        assert mg.iterations <= plain.iterations

    def test_identity_preconditioner_reproduces_plain_cg(self, small_dataset_2d):
        hier = build_hierarchy(small_dataset_2d, 3, 1.0)
        cfg = SolverConfig(tolerance=1e-10, max_iterations=2000)
        plain = cg_solve(hier.finest, hier.finest.rhs(), cfg)
        ident = mgcg_solve(hier, cfg=cfg, preconditioner=lambda r: r.copy())
        assert ident.iterations == plain.iterations
        npt.assert_allclose(ident.coefficients, plain.coefficients, atol=1e-12)
        npt.assert_allclose(ident.residual_history, plain.residual_history, rtol=1e-12)

    def test_explicit_responses_override(self, small_dataset_2d):
        hier = build_hierarchy(small_dataset_2d, 3, 1.0)
        rep_default = mgcg_solve(hier)
        rep_explicit = mgcg_solve(hier, small_dataset_2d.responses)
        npt.assert_array_equal(rep_default.coefficients, rep_explicit.coefficients)

    def test_iteration_counts_roughly_level_independent(self, small_dataset_2d):
        counts = []
        for levels in (3, 4, 5):
            hier = build_hierarchy(small_dataset_2d, levels, 1.0)
            counts.append(mgcg_solve(hier, cfg=SolverConfig(tolerance=1e-8)).iterations)
        assert max(counts) - min(counts) <= 3

    def test_report_fields(self, small_dataset_2d):
        hier = build_hierarchy(small_dataset_2d, 3, 1.0)
        rep = mgcg_solve(hier)
        assert rep.label == "mgcg"
        assert rep.wall_time >= 0.0
        assert rep.peak_auxiliary_memory_estimate > 0
        assert len(rep.residual_history) == rep.iterations + 1
        assert rep.final_relative_residual <= 1e-8
