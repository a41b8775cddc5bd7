import numpy as np
import numpy.testing as npt
import pytest

from splinemg import CapacityError, NumericError, SolverConfig, build_hierarchy, mgcg_solve, v_cycle
from splinemg.analysis import (
    SsorVcycleReference,
    condition_summary,
    iteration_matrix,
    probe_inverse_preconditioner,
    probe_preconditioned,
    spectral_radius,
    spectrum,
    ssor_vcycle_reference,
)


@pytest.fixture(scope="module")
def hier(small_dataset_2d):
    return build_hierarchy(small_dataset_2d, 3, 1.0)


class TestSpectrum:
    def test_identity(self):
        rep = spectrum(np.eye(6))
        npt.assert_allclose(rep.eigenvalues, 1.0)
        assert rep.condition_number == 1.0

    def test_diagonal(self):
        assert spectrum(np.diag([1.0, 4.0])).condition_number == pytest.approx(4.0)

    def test_similarity_route_matches_general_eigensolver(self, rng):
        k = 25
        q = np.linalg.qr(rng.standard_normal((k, k)))[0]
        a = q @ np.diag(rng.uniform(0.5, 3.0, k)) @ q.T
        m = q @ np.diag(rng.uniform(0.5, 3.0, k)) @ q.T
        target = np.linalg.inv(m) @ a
        rep = spectrum(target, similarity=a)
        ref = np.sort(np.linalg.eigvals(target).real)
        npt.assert_allclose(rep.eigenvalues, ref, rtol=1e-9)

    def test_rejects_non_finite(self):
        with pytest.raises(NumericError):
            spectrum(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestProbe:
    def test_identity_preconditioner_probe_is_dense_operator(self, hier):
        probe = probe_preconditioned(hier, smoother="identity")
        npt.assert_array_equal(probe, hier.finest.assemble_dense())

    def test_probe_self_consistency(self, hier, rng):
        probe = probe_preconditioned(hier, smoother="jacobi")
        k = hier.finest.size
        j = int(rng.integers(0, k))
        e = np.zeros(k)
        e[j] = 1.0
        direct = v_cycle(hier, None, hier.finest.apply(e))
        npt.assert_allclose(probe[:, j], direct, atol=1e-12 * max(1.0, np.abs(direct).max()))

    def test_jacobi_probe_eigenvalues_clustered(self, hier):
        probe = probe_preconditioned(hier, smoother="jacobi")
        rep = spectrum(probe, similarity=hier.finest.assemble_dense())
        assert rep.eigenvalues.min() > 0.0
        assert rep.eigenvalues.max() < 2.0
        assert np.median(np.abs(rep.eigenvalues - 1.0)) < 0.5

    def test_capacity_guard(self, small_dataset_2d):
        big = build_hierarchy(small_dataset_2d, 4, 1.0)
        with pytest.raises(CapacityError):
            probe_preconditioned(big, cap=100)


class TestConditionImprovement:
    def test_summary_and_ratios(self, small_dataset_2d):
        hier4 = build_hierarchy(small_dataset_2d, 4, 1.0)
        reports = condition_summary(hier4)
        plain = reports["plain"].condition_number
        jac = reports["mg-jacobi"].condition_number
        ssor = reports["mg-ssor"].condition_number
        assert plain / jac >= 20.0
        assert ssor <= jac
        for key in ("mg-jacobi", "mg-ssor"):
            eigs = reports[key].eigenvalues
            assert eigs.min() > 0.0 and eigs.max() < 2.0
        assert reports["plain"].eigenvalues.min() > 0.0

    def test_identity_probe_spectrum_equals_dense_spectrum(self, hier):
        probe = probe_preconditioned(hier, smoother="identity")
        a = hier.finest.assemble_dense()
        npt.assert_allclose(
            spectrum(probe).eigenvalues,
            spectrum(a).eigenvalues,
            rtol=1e-8,
            atol=1e-8 * np.abs(a).max(),
        )


class TestIterationMatrix:
    @pytest.mark.parametrize("smoother", ["jacobi", "ssor"])
    def test_matches_preconditioner_probe(self, hier, smoother):
        c = iteration_matrix(hier, smoother=smoother)
        minv = probe_inverse_preconditioner(hier, smoother=smoother)
        a = hier.finest.assemble_dense()
        ref = np.eye(hier.finest.size) - minv @ a
        assert np.abs(c - ref).max() <= 1e-8

    def test_contraction_at_default_parameters(self, small_dataset_1d, small_dataset_2d):
        for data in (small_dataset_1d, small_dataset_2d):
            for lam in (0.1, 1.0, 10.0):
                h = build_hierarchy(data, 3, lam)
                assert spectral_radius(iteration_matrix(h)) < 1.0

    def test_single_level_propagator_is_zero(self, small_dataset_2d):
        h = build_hierarchy(small_dataset_2d, 1, 1.0)
        npt.assert_array_equal(iteration_matrix(h), np.zeros((25, 25)))


class TestSsorReference:
    def test_mgcg_ssor_needs_no_more_iterations_than_jacobi(self, small_dataset_2d):
        hier4 = build_hierarchy(small_dataset_2d, 4, 1.0)
        cfg = SolverConfig(tolerance=1e-8)
        jac = mgcg_solve(hier4, cfg=cfg)
        ssor = mgcg_solve(hier4, cfg=cfg, preconditioner=ssor_vcycle_reference(hier4))
        assert ssor.converged and jac.converged
        assert ssor.iterations <= jac.iterations

    def test_zero_sweeps_collapse_to_smootherless_cycle(self, small_dataset_2d, rng):
        hier0 = build_hierarchy(small_dataset_2d, 3, 1.0, nu1=0, nu2=0)
        b = rng.standard_normal(hier0.finest.size)
        jacobi_result = v_cycle(hier0, None, b)
        ssor_result = ssor_vcycle_reference(hier0)(b)
        npt.assert_allclose(jacobi_result, ssor_result, atol=1e-12 * max(1.0, np.abs(b).max()))

    def test_sweep_exact_on_diagonal_matrix(self, hier, rng):
        ref = SsorVcycleReference(hier)
        d = np.diag(rng.uniform(1.0, 3.0, 12))
        b = rng.standard_normal(12)
        alpha = np.zeros(12)
        ref._sweep(d, alpha, b)
        npt.assert_allclose(alpha, b / np.diag(d), atol=1e-14)

    def test_relaxation_validation(self, hier):
        with pytest.raises(Exception):
            SsorVcycleReference(hier, relaxation=2.5)
