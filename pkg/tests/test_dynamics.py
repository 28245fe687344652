import warnings

import numpy as np
import pytest

from catsim.dynamics import (
    ClusterMismatchWarning,
    CrossKerrParams,
    JCModel,
    JCParams,
    analytic_cluster2,
    analytic_cluster3,
    cross_kerr_hamiltonian,
    effective_kerr,
    find_first_revival,
    ideal_cluster2,
    ideal_cluster3,
    jc_hamiltonian,
    jc_projected_states,
    jc_space,
    jc_trajectory,
)
from catsim.errors import InvalidArgumentError, SignatureError, TruncationError
from catsim.hilbert import CompositeSpace, Ket, basis, evolve, fidelity_pure, partial_trace, tensor
from catsim.states import CatQuditParams, coherent, complementary_qudit, cv_qudit

SMALL = JCParams(omega_A=1.1, omega_B=1.7, omega_M=0.8, lambda_AM=0.12, lambda_BM=0.15, K_M=-0.6)


def class_norms(alpha, dim):
    p = np.abs(coherent(alpha, dim, tail_tol=None).amp) ** 2
    n = np.arange(dim)
    return np.array([p[n % 4 == k].sum() for k in range(4)])


class TestCrossKerr:
    def test_two_mode_eigenvalue(self):
        sp = CompositeSpace.of(5, 5)
        H = cross_kerr_hamiltonian(CrossKerrParams(0.7), sp)
        psi = tensor(basis(5, 2), basis(5, 3))
        assert np.allclose(H @ psi, 6 * 0.7 * psi.amp)

    def test_three_mode_eigenvalue(self):
        sp = CompositeSpace.of(3, 3, 3)
        H = cross_kerr_hamiltonian(CrossKerrParams(0.5, 0.5), sp)
        psi = tensor(basis(3, 1), basis(3, 1), basis(3, 1))
        assert np.allclose(H @ psi, 2 * 0.5 * psi.amp)

    def test_diagonal_commutes_with_numbers(self):
        H = cross_kerr_hamiltonian(CrossKerrParams(), CompositeSpace.of(4, 4, 4)).mat
        assert np.max(np.abs(H - np.diag(np.diag(H)))) < 1e-12

    def test_mode_count(self):
        with pytest.raises(SignatureError):
            cross_kerr_hamiltonian(CrossKerrParams(), CompositeSpace.of(4))

    def test_zero_coupling_rejected(self):
        with pytest.raises(InvalidArgumentError):
            CrossKerrParams(0.0)


class TestIdealClusters:
    def test_entangled_coherent_state(self):
        assert fidelity_pure(analytic_cluster2(2.0, 2, 24), ideal_cluster2(2.0, 2)) >= 1 - 1e-9

    def test_two_qudit_cluster(self):
        assert fidelity_pure(analytic_cluster2(2.0, 4, 24), ideal_cluster2(2.0, 4)) >= 1 - 1e-9

    def test_equal_weight_forms(self):
        # equal 1/sqrt(2), 1/2 weights over normalized components are close but not exact
        f2 = fidelity_pure(analytic_cluster2(2.0, 2, 24, "equal"), ideal_cluster2(2.0, 2))
        f4 = fidelity_pure(analytic_cluster2(2.0, 4, 24, "equal"), ideal_cluster2(2.0, 4))
        w = class_norms(2.0, 24)
        assert f4 == pytest.approx(np.sum(np.sqrt(w)) ** 2 / 4, abs=1e-12)
        assert 1 - 1e-7 < f2 < 1
        assert 1 - 1e-3 < f4 < 1 - 1e-5

    def test_full_period(self):
        a = coherent(2.0, 24)
        assert fidelity_pure(tensor(a, a), ideal_cluster2(2.0, 1)) >= 1 - 1e-9

    def test_periodicity(self):
        sp = CompositeSpace.of(20, 20)
        H = cross_kerr_hamiltonian(CrossKerrParams(1.3), sp)
        a = coherent(1.5, 20)
        psi = tensor(a, a)
        t = 0.37
        one = evolve(H, t, psi)
        two = evolve(H, t + CrossKerrParams(1.3).revival_time, psi)
        assert fidelity_pure(one, two) >= 1 - 1e-8

    def test_three_qudit_cluster(self):
        out = ideal_cluster3(2.0, dim=16, tail_tol=1e-5)
        assert fidelity_pure(analytic_cluster3(2.0, 16), out) >= 1 - 1e-9

    def test_reduced_b_purity(self):
        rho_b = partial_trace(ideal_cluster3(2.0, dim=16, tail_tol=1e-5), [1])
        assert abs(rho_b.purity() - 0.25) < 2e-2

    def test_decoupled_c(self):
        dim = 14
        with pytest.warns(ClusterMismatchWarning):
            out = ideal_cluster3(1.5, CrossKerrParams(1.0, 0.0), dim=dim, tail_tol=1e-5)
        expect = tensor(ideal_cluster2(1.5, 4, dim=dim, tail_tol=1e-5), coherent(1.5, dim, tail_tol=1e-5))
        assert fidelity_pure(expect, out) >= 1 - 1e-9

    def test_mismatch_warns(self):
        with pytest.warns(ClusterMismatchWarning):
            ideal_cluster3(1.0, CrossKerrParams(1.0, 1.1), dim=12)

    def test_equal_couplings_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ideal_cluster3(1.0, dim=12)

    def test_tail_error(self):
        with pytest.raises(TruncationError):
            ideal_cluster2(2.0, 4, dim=12)


class TestJCHamiltonian:
    def test_hermitian_and_conserving(self):
        H = jc_hamiltonian(SMALL, jc_space((5, 5)))
        n = H.conserved
        assert np.max(np.abs(H.mat - H.mat.conj().T)) < 1e-12
        assert np.max(np.abs(H.mat * (n[:, None] - n[None, :]))) < 1e-12

    def test_no_coupling_is_diagonal(self):
        p = JCParams(lambda_AM=0.0, lambda_BM=0.0)
        H = jc_hamiltonian(p, jc_space((4, 4)))
        assert np.max(np.abs(H.mat - np.diag(np.diag(H.mat)))) == 0.0
        psi = Ket(H.space, np.random.default_rng(0).normal(size=H.space.total))
        out = evolve(H, 17.0, psi, tail_tol=None)
        assert np.allclose(np.abs(out.amp), np.abs(psi.amp))

    def test_anharmonic_term(self):
        p = JCParams(omega_A=0, omega_B=0, omega_M=0, lambda_AM=0, lambda_BM=0, unit_convention="plain")
        H = jc_hamiltonian(p, jc_space((3, 3)))
        idx = np.ravel_multi_index((0, 0, 2), (3, 3, 3))
        assert H.mat[idx, idx].real == pytest.approx(4 * p.K_M)
        q = JCParams(omega_A=0, omega_B=0, omega_M=0, lambda_AM=0, lambda_BM=0, unit_convention="plain", anharmonic_form="n(n-1)")
        assert jc_hamiltonian(q, jc_space((3, 3))).mat[idx, idx].real == pytest.approx(2 * p.K_M)

    def test_angular_scale(self):
        plain = jc_hamiltonian(JCParams(unit_convention="plain"), jc_space((3, 3))).mat
        ang = jc_hamiltonian(JCParams(unit_convention="angular"), jc_space((3, 3))).mat
        assert np.allclose(ang, 2 * np.pi * plain)

    def test_params_validation(self):
        with pytest.raises(InvalidArgumentError):
            JCParams(transmon_levels=1)
        with pytest.raises(InvalidArgumentError):
            JCParams(unit_convention="radians")

    def test_wrong_space(self):
        with pytest.raises(SignatureError):
            jc_hamiltonian(JCParams(), CompositeSpace.of(3, 3))

    def test_blocked_matches_unblocked(self):
        times = np.linspace(0, 0.05, 7)
        a = JCModel(SMALL, 0.6, dims=(8, 8), use_blocks=True, tail_tol=None).amplitudes(times)
        b = JCModel(SMALL, 0.6, dims=(8, 8), use_blocks=False, tail_tol=None).amplitudes(times)
        assert np.max(np.abs(a - b)) < 1e-9

    def test_induced_kerr_is_negative(self):
        K_AB, _, _ = effective_kerr(JCParams(), dims=(4, 4))
        assert K_AB < 0


class TestJCTrajectory:
    @pytest.fixture(scope="class")
    @classmethod
    def traj(cls):
        return jc_trajectory(JCParams(), 2.0, np.linspace(0, 2.0, 41), snapshot_times=(0.0, 1.0), dims=(24, 24))

    def test_initial_values(self, traj):
        assert abs(traj.series["aA"][0] - 2.0) < 1e-6
        assert abs(traj.series["aB"][0] - 2.0) < 1e-6
        assert abs(traj.series["nM"][0]) < 1e-12

    def test_excitations_conserved(self, traj):
        assert np.max(np.abs(traj.series["Ntot"] - 8.0)) < 1e-8

    def test_lengths(self, traj):
        assert all(len(v) == len(traj.times) for v in traj.series.values())

    def test_snapshots_valid(self, traj):
        for rho in traj.snapshots.values():
            assert abs(np.trace(rho.mat).real - 1) < 1e-10
            assert np.max(np.abs(rho.mat - rho.mat.conj().T)) < 1e-10
            assert np.linalg.eigvalsh(rho.mat).min() > -1e-8

    def test_deterministic(self, traj):
        again = jc_trajectory(JCParams(), 2.0, np.linspace(0, 2.0, 41), dims=(24, 24))
        assert np.array_equal(again.series["aB"], traj.series["aB"])

    def test_frames_agree_on_magnitudes(self):
        times = [0.0, 0.3, 1.7]
        bare = jc_trajectory(SMALL, 1.0, times, dims=(14, 14), frame="bare")
        lab = jc_trajectory(SMALL, 1.0, times, dims=(14, 14), frame="lab")
        assert np.allclose(np.abs(bare.series["aB"]), np.abs(lab.series["aB"]))

    def test_tail_check(self):
        with pytest.raises(TruncationError):
            JCModel(JCParams(), 2.0, dims=(12, 12))


class TestProjections:
    @pytest.fixture(scope="class")
    @classmethod
    def projected(cls):
        return jc_projected_states(partial_trace(ideal_cluster2(2.0, 4), [0, 1]), 2.0)

    def test_a_given_b_alpha(self, projected):
        # closed form: |<alpha|i^k alpha>|^2 = exp(-|alpha|^2 |1 - i^k|^2) couples the neighbours in
        w = class_norms(2.0, 24)
        leak = np.exp(-4.0 * np.abs(1 - 1j ** np.arange(4)) ** 2)
        exact = w[0] / np.sum(w * leak)
        f = fidelity_pure(cv_qudit(0, CatQuditParams(2.0)), projected.rho_A)
        assert f == pytest.approx(exact, abs=1e-10)
        assert f > 0.999

    @pytest.mark.parametrize("k", range(4))
    def test_b_given_fock(self, projected, k):
        assert fidelity_pure(complementary_qudit(k, CatQuditParams(2.0)), projected.rho_B[k]) >= 1 - 1e-6

    def test_product_state(self):
        a = coherent(2.0, 24)
        ps = jc_projected_states(tensor(a, a).to_dm(), 2.0)
        assert fidelity_pure(a, ps.rho_A) == pytest.approx(1.0, abs=1e-12)

    def test_omits_empty(self):
        rho = tensor(basis(6, 0), basis(6, 0)).to_dm()
        ps = jc_projected_states(rho, 1.0)
        assert set(ps.rho_B) == {0}


class TestRevivalFinder:
    def test_synthetic(self):
        t = np.linspace(0, 10, 1001)
        amp = 2.0 * np.abs(np.cos(np.pi * t / 8.0)) ** 40
        when, height = find_first_revival(t, amp, 2.0)
        assert when == pytest.approx(8.0, abs=0.02)
        assert height == pytest.approx(2.0)

    def test_none_without_collapse(self):
        t = np.linspace(0, 1, 11)
        assert find_first_revival(t, np.full(11, 2.0), 2.0) is None
