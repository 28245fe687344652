import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catsim.errors import InvalidArgumentError
from catsim.hilbert import fidelity_pure
from catsim.mbqc import (
    H,
    PLUS,
    X,
    Z,
    LogicalGate,
    ProtocolAngles,
    cluster_source,
    expected_b_state,
    gate_grid,
    qubit_cluster3,
    qubit_measure_theta,
    rz,
    run_logical_protocol,
    run_qubit_mbqc,
    sample_protocol,
    table1_gate,
    table2_gate,
    verify_protocol,
)
from catsim.states import CatQuditParams, logical_basis

ANGLES = ProtocolAngles(0.7, 1.3)
# A parity / C label rows that carry the same byproducts as the qubit-level signs
MATCHED = {("even", "alpha"): ("+", "+"), ("even", "-alpha"): ("-", "+"), ("odd", "alpha"): ("+", "-"), ("odd", "-alpha"): ("-", "-")}


def phase_free_distance(u, v):
    """``1 - |<u, v>|/2`` for 2x2 unitaries; zero iff equal up to global phase."""
    return 1 - abs(np.trace(u.conj().T @ v)) / 2


@pytest.fixture(scope="module")
def records():
    return run_logical_protocol(2.0, ANGLES, convention="derived")


class TestQubitCluster:
    def test_amplitudes(self):
        amp = qubit_cluster3().amp
        assert np.linalg.norm(amp) == pytest.approx(1.0)
        # Hadamards on all three qubits give the CZ-chain form with eight equal magnitudes
        amp = np.kron(np.kron(H, H), H) @ amp
        assert np.allclose(np.abs(amp), 1 / (2 * np.sqrt(2)))
        signs = np.sign(amp.real).reshape(2, 2, 2)
        # CZ pattern: minus sign exactly when the middle qubit is 1 and an outer one is 1
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    assert signs[a, b, c] == (-1) ** (a * b + b * c)

    def test_symmetric_a_c(self):
        t = qubit_cluster3().tensor()
        assert np.allclose(t, np.transpose(t, (2, 1, 0)))

    @pytest.mark.parametrize("sign", ["+", "-"])
    def test_measure_a(self, sign):
        theta = 0.81
        br = qubit_measure_theta(qubit_cluster3(), 0, theta, sign)
        s = 1 if sign == "+" else -1
        plus, minus = PLUS, np.array([1, -1]) / np.sqrt(2)
        expect = (np.kron(plus, [1, 0]) + s * np.exp(1j * theta) * np.kron(minus, [0, 1])) / np.sqrt(2)
        assert abs(np.vdot(expect, br.post.amp)) == pytest.approx(1.0, abs=1e-12)
        assert br.prob == pytest.approx(0.5)

    def test_theta_zero_on_plus(self):
        from catsim.hilbert import CompositeSpace, Ket

        plus = Ket(CompositeSpace.of(2, 2, kinds=("qubit", "qubit")), np.kron(PLUS, [1, 0]))
        assert qubit_measure_theta(plus, 0, 0.0, "+").prob == pytest.approx(1.0)
        assert qubit_measure_theta(plus, 0, 0.0, "-") is None

    @given(t1=st.floats(-np.pi, np.pi), t2=st.floats(-np.pi, np.pi), signs=st.sampled_from([("+", "+"), ("+", "-"), ("-", "+"), ("-", "-")]))
    def test_table1_rows(self, t1, t2, signs):
        angles = ProtocolAngles(t1, t2)
        state, prob = run_qubit_mbqc(angles, signs)
        expect = table1_gate(signs, angles).on_plus()
        assert abs(np.vdot(expect, state.amp)) ** 2 == pytest.approx(1.0, abs=1e-10)
        assert prob == pytest.approx(0.25)


class TestGateTables:
    def test_table1_identity_angles(self):
        assert np.allclose(table1_gate(("+", "+"), ProtocolAngles()).mat, H)

    def test_table1_row2(self):
        f = np.exp(0.5j * (ANGLES.theta1 + ANGLES.theta2))
        expect = f * Z @ rz(ANGLES.theta1) @ H @ rz(ANGLES.theta2)
        assert np.allclose(table1_gate(("-", "+"), ANGLES).mat, expect)

    def test_table2_rows(self):
        f = np.exp(0.5j * (ANGLES.theta1 + ANGLES.theta2))
        assert np.allclose(table2_gate("even", "alpha", ANGLES).mat, f * rz(0.7) @ H @ rz(1.3))
        assert np.allclose(table2_gate("odd", "alpha", ANGLES).mat, f * X @ rz(-0.7) @ H @ rz(1.3))

    def test_row8_name(self):
        assert table2_gate("odd", "-i_alpha", ANGLES).name == "f''12 e^{i pi} Z Rz(t1) H Rz(t2)"

    @pytest.mark.parametrize("conv", ["tabulated", "derived"])
    def test_all_rows_unitary(self, conv):
        for pa in ("even", "odd"):
            for pb in ("even", "odd"):
                for c in ("alpha", "i_alpha", "-alpha", "-i_alpha"):
                    u = table2_gate(pa, c, ANGLES, conv, pb).mat
                    assert np.max(np.abs(u.conj().T @ u - np.eye(2))) < 1e-12

    def test_classification_matches_qubit_table(self):
        for angles in gate_grid():
            for (pa, c), signs in MATCHED.items():
                d = phase_free_distance(table2_gate(pa, c, angles).mat, table1_gate(signs, angles).mat)
                assert d < 1e-12

    def test_derived_differs_on_odd_a(self):
        d = phase_free_distance(table2_gate("odd", "alpha", ANGLES, "derived").mat, table2_gate("odd", "alpha", ANGLES).mat)
        assert d > 1e-3

    def test_bad_labels(self):
        with pytest.raises(InvalidArgumentError):
            table2_gate("maybe", "alpha", ANGLES)
        with pytest.raises(InvalidArgumentError):
            table2_gate("even", "alpha", ANGLES, convention="other")

    def test_logical_gate_checks_unitarity(self):
        with pytest.raises(InvalidArgumentError):
            LogicalGate(np.array([[1, 1], [0, 1]]))


class TestLogicalProtocol:
    def test_sixteen_branches(self, records):
        assert len(records) == 16
        assert abs(sum(r.prob for r in records) - 1) < 1e-8

    def test_records_in_range(self, records):
        for r in records:
            assert 0 <= r.prob <= 1 and 0 <= r.overlap <= 1

    def test_derived_alpha2(self, records):
        rep = verify_protocol(records, 2.0, "derived")
        assert rep["min"] >= 0.995
        assert not rep["failing"]

    def test_first_branch_tabulated(self):
        recs = run_logical_protocol(2.0, ANGLES)
        first = next(r for r in recs if (r.parity_B, r.parity_A, r.coherent_C) == ("even", "even", "alpha"))
        assert first.overlap >= 0.995

    def test_tabulated_even_b_even_a_rows_hold(self):
        rep = verify_protocol(run_logical_protocol(2.0, ANGLES), 2.0)
        for key, ov in rep["overlaps"].items():
            if key[:2] == ("even", "even"):
                assert ov >= 0.995
        assert len(rep["failing"]) == 12

    def test_zero_angles(self):
        recs = run_logical_protocol(2.0, ProtocolAngles())
        first = next(r for r in recs if (r.parity_B, r.parity_A, r.coherent_C) == ("even", "even", "alpha"))
        assert fidelity_pure(logical_basis(0, "even", CatQuditParams(2.0)), first.b_rho) >= 0.995

    def test_odd_b_sector(self, records):
        params = CatQuditParams(2.0)
        for r in records:
            if r.parity_B == "odd":
                e = expected_b_state(r.expected_gate, "odd", params)
                assert fidelity_pure(e, r.b_rho) >= 0.995

    def test_orderings_agree(self, records):
        alt = run_logical_protocol(2.0, ANGLES, convention="derived", ordering="alternative")
        for a, b in zip(records, alt):
            assert a.prob == pytest.approx(b.prob, abs=1e-12)
            assert np.max(np.abs(a.b_rho.mat - b.b_rho.mat)) < 1e-10

    def test_sources_agree(self):
        cl_a = cluster_source(2.0, "analytic", 24)
        cl_i = cluster_source(2.0, "ideal", 24)
        assert fidelity_pure(cl_a, cl_i) >= 1 - 1e-9

    def test_deterministic(self, records):
        again = run_logical_protocol(2.0, ANGLES, convention="derived")
        assert [r.prob for r in again] == [r.prob for r in records]

    def test_sampling_seeded(self, records):
        a = sample_protocol(records, 500, 11)
        assert np.array_equal(a, sample_protocol(records, 500, 11))
        counts = np.bincount(sample_protocol(records, 20000, 3), minlength=16) / 20000
        assert np.max(np.abs(counts - [r.prob for r in records])) < 0.01
