import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catsim.errors import InvalidArgumentError, TruncationError, ZeroVectorError
from catsim.gates import qudit_z4
from catsim.hilbert import Ket, basis, fidelity_pure, photon_distribution, single_mode
from catsim.states import (
    CatQuditParams,
    LogicalQubit,
    apply_photon_loss,
    cat,
    cat_unnormalized,
    coherent,
    complementary_qudit,
    cv_qudit,
    embed_logical,
    encode_logical,
    logical_basis,
    logical_plus_minus,
    qudit_normalization,
)


class TestCoherent:
    def test_zero_is_vacuum(self):
        assert np.allclose(coherent(0, 10).amp, basis(10, 0).amp)

    def test_overlap_closed_form(self):
        assert abs(coherent(2, 24).overlap(coherent(-2, 24)) - np.exp(-8)) < 1e-8

    def test_poisson(self):
        p = photon_distribution(coherent(2.0, 24), 0)
        assert abs(p[4] - np.exp(-4) * 4**4 / 24) < 1e-6

    def test_truncation_error(self):
        with pytest.raises(TruncationError):
            coherent(2.0, 10)

    @given(re=st.floats(-2.5, 2.5), im=st.floats(-2.5, 2.5))
    def test_general_overlap(self, re, im):
        a, b = complex(re, im), complex(im, -re) * 0.7
        exact = np.exp(-(abs(a) ** 2 + abs(b) ** 2) / 2 + np.conj(a) * b)
        assert abs(coherent(a, 40).overlap(coherent(b, 40)) - exact) < 1e-8


class TestCat:
    def test_parity_support(self):
        assert np.max(np.abs(cat(2, +1).amp[1::2])) < 1e-12
        assert np.max(np.abs(cat(2, -1).amp[0::2])) < 1e-12

    def test_norm_of_sum(self):
        assert abs(np.linalg.norm(cat_unnormalized(2.0, +1, 24)) - np.sqrt(2 * (1 + np.exp(-8)))) < 1e-9

    def test_sign_spellings(self):
        assert np.allclose(cat(2, "+").amp, cat(2, "even").amp)
        assert np.allclose(cat(2, "-").amp, cat(2, -1).amp)

    def test_degenerate_odd_cat(self):
        with pytest.raises(ZeroVectorError):
            cat(0.0, -1, 8)


class TestQudits:
    def test_support_class(self, params2):
        amp = cv_qudit(1, params2).amp
        off = np.arange(params2.dim) % 4 != 1
        assert np.max(np.abs(amp[off])) < 1e-10

    def test_disjoint_orthogonality(self, params2):
        assert cv_qudit(0, params2).overlap(cv_qudit(2, params2)) == 0

    def test_normalization_closed_form(self, params2):
        # ||sum_j |i^j a>|| = 4 ||P_0 a||, ||P_0 a||^2 = e^{-|a|^2} (cosh|a|^2 + cos|a|^2) / 2
        exact = 1.0 / (4.0 * np.sqrt(np.exp(-4) * (np.cosh(4) + np.cos(4)) / 2))
        m0 = qudit_normalization(0, params2)
        assert abs(m0 - exact) < 1e-10
        assert abs(m0 - 0.5) < 1e-2

    def test_complementary_identities(self, params2):
        assert np.allclose(complementary_qudit(0, params2).amp, coherent(2.0, 24).amp)
        assert np.allclose(complementary_qudit(2, params2).amp, coherent(-2.0, 24).amp)

    def test_complementary_from_qudits(self, params2):
        # |i^j alpha> = sum_k i^(jk) ||P_k alpha|| |k_4>
        alpha = coherent(2.0, 24).amp
        n = np.arange(24)
        weights = [np.linalg.norm(alpha[n % 4 == k]) for k in range(4)]
        for j in range(4):
            rebuilt = sum((1j ** (j * k)) * weights[k] * cv_qudit(k, params2).amp for k in range(4))
            assert fidelity_pure(complementary_qudit(j, params2), Ket(single_mode(24), rebuilt)) > 1 - 1e-8

    def test_gram_qudits(self, params2):
        g = np.array([[cv_qudit(j, params2).overlap(cv_qudit(k, params2)) for k in range(4)] for j in range(4)])
        assert np.max(np.abs(g - np.eye(4))) < 1e-10

    def test_gram_complementary(self, params2):
        g = np.array([[complementary_qudit(j, params2).overlap(complementary_qudit(k, params2)) for k in range(4)] for j in range(4)])
        assert np.max(np.abs(g - np.eye(4))) <= np.exp(-4) + 1e-10

    @pytest.mark.parametrize("k", range(4))
    def test_z4_steps_complementary(self, params2, k):
        out = qudit_z4(24) @ complementary_qudit(k, params2)
        assert np.max(np.abs(out - complementary_qudit((k + 1) % 4, params2).amp)) < 1e-12

    def test_params_validation(self):
        with pytest.raises(InvalidArgumentError):
            CatQuditParams(0.0)
        with pytest.raises(InvalidArgumentError):
            CatQuditParams(2.0, d=3)
        assert CatQuditParams(2.0).dim == 24


class TestLogical:
    def test_zero_even_is_cat(self, params2):
        assert np.allclose(logical_basis(0, "even", params2).amp, cat(2.0, +1).amp)

    def test_plus_is_qudit0(self, params2):
        plus = embed_logical([1, 1], "even", params2)
        assert fidelity_pure(cv_qudit(0, params2), plus) > 1 - 1e-9
        assert fidelity_pure(logical_plus_minus(+1, "even", params2), plus) > 1 - 1e-9

    def test_minus_is_qudit2(self, params2):
        assert fidelity_pure(cv_qudit(2, params2), embed_logical([1, -1], "even", params2)) > 1 - 1e-9

    def test_odd_sector_plus_minus(self, params2):
        assert fidelity_pure(cv_qudit(1, params2), embed_logical([1, 1], "odd", params2)) > 1 - 1e-9
        assert fidelity_pure(cv_qudit(3, params2), embed_logical([1, -1], "odd", params2)) > 1 - 1e-9

    def test_basis_overlap_small(self):
        for alpha, bound in ((2.0, 0.07), (3.0, 1e-3)):
            p = CatQuditParams(alpha)
            ov = logical_basis(0, "even", p).overlap(logical_basis(1, "even", p))
            assert abs(ov.imag) < 1e-12
            assert abs(ov) < bound

    def test_logical_qubit_norm(self, params2):
        with pytest.raises(InvalidArgumentError):
            LogicalQubit(1.0, 1.0, "even", params2)
        with pytest.raises(InvalidArgumentError):
            LogicalQubit(1.0, 0.0, "middle", params2)


class TestPhotonLoss:
    def test_cat_flips(self):
        assert fidelity_pure(cat(2, -1), apply_photon_loss(cat(2, +1))) > 1 - 1e-9

    def test_zero_logical(self, params2):
        img = apply_photon_loss(encode_logical(1, 0, "even", params2))
        assert fidelity_pure(logical_basis(0, "odd", params2), img) > 1 - 1e-9

    def test_general(self, params2):
        img = apply_photon_loss(encode_logical(0.6, 0.8, "even", params2))
        assert fidelity_pure(embed_logical([0.6, -0.8], "odd", params2), img) >= 0.999

    def test_vacuum(self):
        with pytest.raises(ZeroVectorError):
            apply_photon_loss(basis(5, 0))

    @given(theta=st.floats(0, np.pi), phi=st.floats(0, 2 * np.pi))
    def test_random_logical(self, theta, phi):
        params = CatQuditParams(2.0)
        a0, a1 = np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)
        img = apply_photon_loss(encode_logical(a0, a1, "even", params))
        assert fidelity_pure(embed_logical([a0, -a1], "odd", params), img) >= 0.999
