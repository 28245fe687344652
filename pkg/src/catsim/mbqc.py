"""Measurement-based single-qubit gates on qubit and cat-qudit cluster states.

The qubit part is the textbook three-qubit linear cluster with ``|+/-theta>``
measurements. The cavity part runs the logical protocol on the three-mode
cat cluster: parity on B, SNAP phases on A and C, parity on A and a
four-outcome coherent measurement on C, leaving a logical qubit in B.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .dynamics import CrossKerrParams, analytic_cluster3, ideal_cluster3
from .errors import InvalidArgumentError, SignatureError
from .gates import (
    COHERENT_LABELS,
    MeasurementBranch,
    measure_coherent_four,
    measure_parity,
    snap_p1,
    snap_p2,
    with_ancilla,
)
from .hilbert import CompositeSpace, Ket, apply_local, fidelity_pure, partial_trace
from .states import CatQuditParams, embed_logical

PARITIES = ("even", "odd")
SIGNS = ("+", "-")

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


def rz(theta):
    """``diag(e^{-i theta/2}, e^{i theta/2})``."""
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


@dataclass(frozen=True)
class ProtocolAngles:
    theta1: float = 0.0
    theta2: float = 0.0

    def __post_init__(self):
        for v in (self.theta1, self.theta2):
            if not np.isfinite(v):
                raise InvalidArgumentError("angles must be finite reals")


@dataclass(frozen=True, eq=False)
class LogicalGate:
    """2x2 matrix in the ordered logical basis ``{|0^L>, |1^L>}``."""

    mat: np.ndarray
    name: str = ""

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (2, 2):
            raise SignatureError("logical gates are 2x2")
        if np.max(np.abs(mat.conj().T @ mat - I2)) > 1e-10:
            raise InvalidArgumentError(f"logical gate {self.name!r} is not unitary")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    def on_plus(self):
        return self.mat @ PLUS


def _f12(angles):
    return np.exp(0.5j * (angles.theta1 + angles.theta2))


def _core(angles, sign):
    """``R^z(sign * theta1) H R^z(theta2)``."""
    return rz(sign * angles.theta1) @ H @ rz(angles.theta2)


# -- qubit cluster -------------------------------------------------------------


def qubit_cluster3():
    """``(|0>|+>|0> + |1>|->|1>) / sqrt(2)`` on three qubits."""
    zero, one = np.array([1, 0], complex), np.array([0, 1], complex)
    plus, minus = PLUS, np.array([1, -1], complex) / np.sqrt(2)
    amp = np.kron(np.kron(zero, plus), zero) + np.kron(np.kron(one, minus), one)
    return Ket(CompositeSpace.of(2, 2, 2, kinds=("qubit",) * 3), amp)


def theta_basis(theta, sign):
    """``|+/-theta> = (|0> +/- e^{-i theta}|1>) / sqrt(2)``."""
    s = 1 if sign in ("+", 1) else -1
    return np.array([1, s * np.exp(-1j * theta)], dtype=complex) / np.sqrt(2)


def qubit_measure_theta(state, qubit_index, theta, sign):
    """Project one qubit onto ``|sign theta>`` and remove it.

    Returns the branch, or ``None`` when it has zero probability.
    """
    qubit_index = state.space.check_mode(qubit_index)
    if state.dims[qubit_index] != 2:
        raise SignatureError("theta measurements act on two-level modes")
    bra = theta_basis(theta, sign).conj()
    t = np.tensordot(bra, state.tensor(), axes=([0], [qubit_index]))
    p = float(np.sum(np.abs(t) ** 2))
    if p < 1e-14:
        return None
    return MeasurementBranch(sign, p, Ket(state.space.without([qubit_index]), t.reshape(-1)))


def table1_gate(signs, angles):
    """Gate left on C after measuring A (``theta1``, ``signs[0]``) then B (``theta2``, ``signs[1]``)."""
    s1, s2 = signs
    if s1 not in SIGNS or s2 not in SIGNS:
        raise InvalidArgumentError("signs must be '+' or '-'")
    f = _f12(angles)
    if s2 == "+":
        pre, name = (I2, "") if s1 == "+" else (Z, "Z ")
        return LogicalGate(f * pre @ _core(angles, 1), f"f12 {name}Rz(t1) H Rz(t2)")
    pre, name = (X, "X ") if s1 == "+" else (Z @ X, "ZX ")
    return LogicalGate(f * pre @ _core(angles, -1), f"f12 {name}Rz(-t1) H Rz(t2)")


def run_qubit_mbqc(angles, signs):
    """Measure A then B of :func:`qubit_cluster3`; returns ``(state_C, probability)``."""
    s = qubit_cluster3()
    b1 = qubit_measure_theta(s, 0, angles.theta1, signs[0])
    b2 = qubit_measure_theta(b1.post, 0, angles.theta2, signs[1])
    return b2.post, b1.prob * b2.prob


# -- logical gate table --------------------------------------------------------


def _row(parity_a, k, angles):
    """Gate left on B for an even B parity, keyed by A parity and C label index."""
    f = _f12(angles)
    fp = f * np.exp(0.25j * np.pi) * rz(np.pi / 2)
    fpp = f * np.exp(-0.25j * np.pi) * rz(np.pi / 2)
    rows = {
        ("even", 0): (f * _core(angles, 1), "f12 Rz(t1) H Rz(t2)"),
        ("even", 2): (f * Z @ _core(angles, 1), "f12 Z Rz(t1) H Rz(t2)"),
        ("even", 1): (fp @ Z @ X @ _core(angles, -1), "f'12 Z X Rz(-t1) H Rz(t2)"),
        ("even", 3): (fp @ X @ _core(angles, -1), "f'12 X Rz(-t1) H Rz(t2)"),
        ("odd", 0): (f * X @ _core(angles, -1), "f12 X Rz(-t1) H Rz(t2)"),
        ("odd", 2): (f * X @ Z @ _core(angles, -1), "f12 X Z Rz(-t1) H Rz(t2)"),
        ("odd", 1): (fpp @ _core(angles, 1), "f''12 Rz(t1) H Rz(t2)"),
        ("odd", 3): (-fpp @ Z @ _core(angles, 1), "f''12 e^{i pi} Z Rz(t1) H Rz(t2)"),
    }
    return rows[(parity_a, k)]


def _label_index(coherent_c):
    if coherent_c in COHERENT_LABELS:
        return COHERENT_LABELS.index(coherent_c)
    if coherent_c in range(4):
        return int(coherent_c)
    raise InvalidArgumentError(f"unknown coherent label {coherent_c!r}")


def table2_gate(parity_a, coherent_c, angles, convention="tabulated", parity_b="even"):
    """Logical gate on B for outcomes ``(parity_a, coherent_c)``.

    ``convention="tabulated"`` returns the tabulated row for any ``parity_b``.
    ``convention="derived"`` returns what the cavity protocol actually
    produces: an odd A parity gives ``X`` times the even-A row of the same C
    label, and an odd B parity shifts the C label back by one quarter turn.
    """
    if parity_a not in PARITIES or parity_b not in PARITIES:
        raise InvalidArgumentError("parities must be 'even' or 'odd'")
    k = _label_index(coherent_c)
    if convention == "tabulated":
        mat, name = _row(parity_a, k, angles)
        return LogicalGate(mat, name)
    if convention != "derived":
        raise InvalidArgumentError(f"unknown convention {convention!r}")
    if parity_b == "odd":
        k = (k - 1) % 4
    mat, name = _row("even", k, angles)
    if parity_a == "odd":
        mat, name = X @ mat, "X " + name
    return LogicalGate(mat, name)


# -- cavity protocol -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProtocolRecord:
    angles: ProtocolAngles
    parity_B: str
    parity_A: str
    coherent_C: str
    prob: float
    b_state: Ket
    b_rho: object
    expected_gate: LogicalGate
    overlap: float
    purity: float


def expected_b_state(gate, sector, params):
    """Fock-space embedding of ``gate |+^L>`` in the given parity sector of B."""
    return embed_logical(gate.on_plus(), sector, params)


def _apply_snaps(state, angles, dim, ordering):
    dims = state.dims
    p1a = np.diag(snap_p1(angles.theta1 / 2, dim).mat)
    p1c = np.diag(snap_p1(-angles.theta1 / 2, dim).mat)
    p2c = np.diag(snap_p2(angles.theta2, dim).mat)
    if ordering == "preferred":
        steps = ((p1a, 0), (p1c, 2), (p2c, 2))
    elif ordering == "alternative":
        steps = ((p1a, 0), (p2c * p1c, 2))
    else:
        raise InvalidArgumentError("ordering must be 'preferred' or 'alternative'")
    amp = state.amp
    for diag, mode in steps:
        amp = apply_local(np.diag(diag), amp, dims, mode)
    return Ket(state.space, amp)


def cluster_source(alpha, source="analytic", dim=None):
    params = CatQuditParams(alpha, dim=dim)
    if source == "analytic":
        return analytic_cluster3(alpha, params.dim)
    if source == "ideal":
        return ideal_cluster3(alpha, CrossKerrParams(), params.dim)
    raise InvalidArgumentError("source must be 'analytic' or 'ideal'")


def run_logical_protocol(alpha, angles, source="analytic", dim=None, convention="tabulated", ordering="preferred", cluster=None):
    """Enumerate every ``(parity_B, parity_A, coherent_C)`` branch of the protocol.

    Modes are A, B, C with a shared ancilla appended as mode 3. Each record
    holds the branch probability, the reduced state of B (its dominant
    eigenvector as ``b_state``) and the overlap ``<e|rho_B|e>`` with the
    expected logical state ``e``.
    """
    params = CatQuditParams(alpha, dim=dim)
    cluster = cluster if cluster is not None else cluster_source(alpha, source, params.dim)
    state = with_ancilla(cluster)
    records = []
    for bb in measure_parity(state, 1, 3):
        phased = _apply_snaps(bb.post, angles, params.dim, ordering)
        for ba in measure_parity(phased, 0, 3):
            for bc in measure_coherent_four(alpha, ba.post, 2, 3):
                rho_b = partial_trace(bc.post, [1])
                w, v = np.linalg.eigh(rho_b.mat)
                b_state = Ket(rho_b.space, v[:, -1])
                gate = table2_gate(ba.label, bc.label, angles, convention, bb.label)
                target = expected_b_state(gate, bb.label, params)
                records.append(
                    ProtocolRecord(
                        angles=angles,
                        parity_B=bb.label,
                        parity_A=ba.label,
                        coherent_C=bc.label,
                        prob=bb.prob * ba.prob * bc.prob,
                        b_state=b_state,
                        b_rho=rho_b,
                        expected_gate=gate,
                        overlap=fidelity_pure(target, rho_b),
                        purity=rho_b.purity(),
                    )
                )
    return records


def verify_protocol(records, alpha, convention="tabulated", tol=None, dim=None):
    """Recompute every record's overlap against ``table2_gate`` and summarize.

    The comparison is ``<e|rho_B|e>``, insensitive to global phase. Returns a
    dict with per-branch overlaps, ``min``, ``mean`` and the branches below
    ``tol`` (default 0.995, or 0.9999 for ``alpha >= 3``).
    """
    if not records:
        raise InvalidArgumentError("no records to verify")
    tol = tol if tol is not None else (0.9999 if alpha >= 3 else 0.995)
    dim = dim or records[0].b_rho.dims[0]
    params = CatQuditParams(alpha, dim=dim)
    rows = []
    for r in records:
        gate = table2_gate(r.parity_A, r.coherent_C, r.angles, convention, r.parity_B)
        ov = fidelity_pure(expected_b_state(gate, r.parity_B, params), r.b_rho)
        rows.append(((r.parity_B, r.parity_A, r.coherent_C), ov, r.prob))
    ovs = np.array([ov for _, ov, _ in rows])
    return {
        "convention": convention,
        "tolerance": tol,
        "overlaps": {key: ov for key, ov, _ in rows},
        "min": float(ovs.min()),
        "mean": float(ovs.mean()),
        "failing": [key for key, ov, _ in rows if ov < tol],
        "total_probability": float(sum(p for _, _, p in rows)),
    }


def sample_protocol(records, shots, seed):
    """Monte-Carlo outcomes drawn from the enumerated branch probabilities.

    Inverse CDF over ``records`` in their fixed order with a seeded PCG64
    generator; returns the sampled record indices.
    """
    rng = np.random.default_rng(seed)
    cdf = np.cumsum([r.prob for r in records])
    u = rng.random(int(shots)) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(records) - 1)


def gate_grid(values=(0.0, np.pi / 4, -np.pi / 4, np.pi / 2, -np.pi / 2, np.pi)):
    """All ``(theta1, theta2)`` pairs over ``values``."""
    return [ProtocolAngles(a, b) for a, b in product(values, values)]
