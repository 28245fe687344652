"""Cavity gates and ancilla-assisted measurements.

Measurements take a composite state that already contains a two-level
ancilla in ``|g>`` and return every outcome branch. Each branch's post-state
has the ancilla reset to ``|g>``, so branches can be fed straight into the
next measurement. Everything acts on tensor axes; the composite operator is
only built by the functions that return a :class:`LinearOperator`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import InvalidArgumentError, NoOutcomeError, NumericalError, SignatureError, TruncationError
from .hilbert import (
    CompositeSpace,
    Ket,
    LinearOperator,
    ModeSpace,
    annihilation,
    apply_diagonal,
    apply_local,
    basis,
    single_mode,
    tensor,
)
from .states import _coherent_amp

TWO_PI = 2.0 * np.pi
BRANCH_EPS = 1e-12
ANCILLA_TOL = 1e-10
DISPLACEMENT_TOL = 1e-6

COHERENT_LABELS = ("alpha", "i_alpha", "-alpha", "-i_alpha")


@dataclass(frozen=True)
class SnapPhases:
    """Phases for the Fock classes ``4m, 4m+1, 4m+2, 4m+3`` (stored mod 2 pi)."""

    phi: tuple

    def __post_init__(self):
        phi = tuple(float(p) % TWO_PI for p in self.phi)
        if len(phi) != 4:
            raise InvalidArgumentError("SNAP needs exactly four class phases")
        object.__setattr__(self, "phi", phi)


@dataclass(frozen=True, eq=False)
class MeasurementBranch:
    label: object
    prob: float
    post: Ket


# -- single-mode unitaries ----------------------------------------------------


@lru_cache(maxsize=64)
def _displacement_cached(beta, dim):
    a = annihilation(dim).mat
    d = expm(beta * a.conj().T - np.conj(beta) * a)
    defect = float(np.max(np.abs(d.conj().T @ d - np.eye(dim))))
    if defect > DISPLACEMENT_TOL:
        raise NumericalError(f"displacement lost unitarity ({defect:.2g})")
    # the truncated generator is only faithful if D|0> is still the coherent state
    miss = float(np.max(np.abs(d[:, 0] - _coherent_amp(beta, dim))))
    if miss > DISPLACEMENT_TOL:
        raise TruncationError(f"dimension {dim} too small to displace by {beta}: error {miss:.2g}")
    d.setflags(write=False)
    return d


def displacement(beta, dim):
    """``D(beta) = exp(beta a^dag - beta^* a)`` exponentiated in the truncated space."""
    return LinearOperator(single_mode(dim), _displacement_cached(complex(beta), int(dim)), {"unitary"})


def snap(phases, dim):
    """Diagonal gate giving ``|n>`` the phase ``phi[n mod 4]``."""
    if not isinstance(phases, SnapPhases):
        phases = SnapPhases(tuple(phases))
    phi = np.asarray(phases.phi)[np.arange(dim) % 4]
    return LinearOperator(single_mode(dim), np.diag(np.exp(1j * phi)), {"unitary", "diagonal"})


def snap_p1(phi, dim):
    """Parity-conditional phase: ``e^{i phi}`` on even, ``e^{-i phi}`` on odd photon numbers."""
    return snap(SnapPhases((phi, -phi, phi, -phi)), dim)


def snap_p2(phi, dim):
    """Phase ``phi`` on class 4m+2 and ``pi + phi`` on class 4m+3."""
    return snap(SnapPhases((0.0, 0.0, phi, np.pi + phi)), dim)


def qudit_z4(dim):
    """``exp(i pi n / 2)``: rotates ``|i^k alpha>`` to ``|i^(k+1) alpha>``."""
    return LinearOperator(single_mode(dim), np.diag(1j ** np.arange(dim)), {"unitary", "diagonal"})


def qudit_x4_apply(state, mode=0, tail_tol=1e-6):
    """Normalized ``a^dag |psi>`` on one mode (maps Fock class k to k+1).

    Truncated ``a^dag`` discards the top level; if that level carried more
    than ``tail_tol`` of the image's weight a :class:`TruncationError` is raised.
    """
    mode = state.space.check_mode(mode)
    dim = state.dims[mode]
    adag = annihilation(dim).mat.conj().T
    amp = apply_local(adag, state.amp, state.dims, mode)
    top = np.zeros(dim)
    top[-1] = dim  # |<dim|a^dag|dim-1>|^2 of the untruncated operator
    lost = float(np.sum(np.abs(apply_diagonal(np.sqrt(top), state.amp, state.dims, mode)) ** 2))
    kept = float(np.vdot(amp, amp).real)
    if lost > tail_tol * (lost + kept):
        raise TruncationError(f"photon addition pushes {lost / (lost + kept):.2g} past the cutoff")
    return Ket(state.space, amp)


def ry(phi):
    """Ancilla rotation ``[[cos, -sin], [sin, cos]]`` of ``phi/2`` in the ``(g, e)`` basis."""
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def apply_gate(op, state, mode=0):
    """Apply a single-mode operator (or matrix) to ``mode`` of ``state``; renormalizes."""
    mode = state.space.check_mode(mode)
    mat = op.mat if isinstance(op, LinearOperator) else np.asarray(op)
    if mat.shape != (state.dims[mode],) * 2:
        raise SignatureError("gate dimension does not match the mode")
    return Ket(state.space, apply_local(mat, state.amp, state.dims, mode))


# -- ancilla handling ---------------------------------------------------------


def with_ancilla(state):
    """Append a two-level ancilla in ``|g>`` as the last mode."""
    return tensor(state, basis(2, 0, kind="qubit"))


def drop_ancilla(state, ancilla_index):
    """Remove an ancilla that is in ``|g>``."""
    t = _ancilla_last(state, ancilla_index)
    if np.sum(np.abs(t[..., 1]) ** 2) > ANCILLA_TOL:
        raise InvalidArgumentError("ancilla is not in |g>")
    return Ket(state.space.without([ancilla_index]), t[..., 0].reshape(-1))


def _ancilla_last(state, ancilla_index):
    ancilla_index = state.space.check_mode(ancilla_index)
    if state.dims[ancilla_index] != 2:
        raise SignatureError("ancilla must be a two-level mode")
    return np.moveaxis(state.tensor(), ancilla_index, -1)


def _check_pair(state, cavity_index, ancilla_index):
    cavity_index = state.space.check_mode(cavity_index)
    ancilla_index = state.space.check_mode(ancilla_index)
    if cavity_index == ancilla_index:
        raise SignatureError("cavity and ancilla must be different modes")
    if state.dims[ancilla_index] != 2:
        raise SignatureError("ancilla must be a two-level mode")
    return cavity_index, ancilla_index


def _require_ground(state, ancilla_index):
    t = _ancilla_last(state, ancilla_index)
    if np.sum(np.abs(t[..., 1]) ** 2) > ANCILLA_TOL:
        raise InvalidArgumentError("measurement needs the ancilla in |g>")


def _conditional_stack(dim, m, phi, eta):
    """Per-Fock ancilla unitaries: ``R^y(phi)`` for ``n = m``, ``e^{i eta_n}`` otherwise."""
    eta = np.zeros(dim) if eta is None else np.asarray(eta, dtype=float)
    if eta.shape != (dim,):
        raise SignatureError("eta must hold one phase per Fock level")
    stack = np.exp(1j * eta)[:, None, None] * np.eye(2)[None, :, :]
    stack[m] = ry(phi)
    return stack


def _apply_conditional(amp, dims, cavity_index, ancilla_index, stack):
    """Apply ``sum_n |n><n| (x) U_n`` with ``stack[n] = U_n``."""
    t = np.moveaxis(np.asarray(amp).reshape(dims), (cavity_index, ancilla_index), (-2, -1))
    t = np.einsum("nab,...nb->...na", stack, t)
    return np.moveaxis(t, (-2, -1), (cavity_index, ancilla_index)).reshape(-1)


def conditional_qubit_rotation(m, phi, space, cavity_index, ancilla_index, eta=None):
    """``R^y(phi)`` on the ancilla when the cavity holds exactly ``m`` photons.

    ``eta`` optionally gives the spurious phases picked up by the other Fock
    levels; the default is none.
    """
    space = space if isinstance(space, CompositeSpace) else CompositeSpace(tuple(space))
    dims = space.dims
    if space.dims[ancilla_index] != 2:
        raise SignatureError("ancilla must be a two-level mode")
    if not 0 <= m < dims[cavity_index]:
        raise InvalidArgumentError(f"Fock index {m} outside the cavity")
    stack = _conditional_stack(dims[cavity_index], m, phi, eta)
    cols = np.eye(space.total, dtype=complex)
    mat = np.stack([_apply_conditional(c, dims, cavity_index, ancilla_index, stack) for c in cols], axis=1)
    return LinearOperator(space, mat, {"unitary"})


def _parity_stack(dim, phi):
    """Cavity rotation ``e^{i phi n}`` conditioned on the ancilla being in ``|e>``."""
    stack = np.zeros((dim, 2, 2), dtype=complex)
    stack[:, 0, 0] = 1.0
    stack[:, 1, 1] = np.exp(1j * phi * np.arange(dim))
    return stack


def conditional_cavity_rotation(phi, space, cavity_index, ancilla_index):
    """``|g><g| (x) 1 + |e><e| (x) exp(i phi n)``; ``phi = pi`` gives the parity gate."""
    space = space if isinstance(space, CompositeSpace) else CompositeSpace(tuple(space))
    dims = space.dims
    stack = _parity_stack(dims[cavity_index], phi)
    diag = _apply_conditional(np.ones(space.total, dtype=complex), dims, cavity_index, ancilla_index, stack)
    return LinearOperator(space, np.diag(diag), {"unitary", "diagonal"})


# -- measurements -------------------------------------------------------------


def _read_ancilla(amp, state, ancilla_index, labels):
    """Split on the ancilla (g, e) and reset it; ``labels = (label_g, label_e)``."""
    dims = state.dims
    t = np.moveaxis(np.asarray(amp).reshape(dims), ancilla_index, -1)
    branches = []
    for level, label in ((1, labels[1]), (0, labels[0])):
        part = np.zeros_like(t)
        part[..., 0] = t[..., level]
        p = float(np.sum(np.abs(part) ** 2))
        if p < BRANCH_EPS:
            continue
        post = Ket(state.space, np.moveaxis(part, -1, ancilla_index).reshape(-1))
        branches.append(MeasurementBranch(label, p, post))
    return branches


def measure_fock(m, state, cavity_index, ancilla_index, eta=None):
    """Herald ``m`` photons: a conditional ``pi`` rotation flips the ancilla to ``e``.

    Returns the branches ``"e"`` (cavity projected on ``|m>``) and ``"g"``
    (the complement). Zero-probability branches are omitted.
    """
    cavity_index, ancilla_index = _check_pair(state, cavity_index, ancilla_index)
    _require_ground(state, ancilla_index)
    dim = state.dims[cavity_index]
    if not 0 <= m < dim:
        raise InvalidArgumentError(f"Fock index {m} outside the cavity")
    stack = _conditional_stack(dim, m, np.pi, eta)
    amp = _apply_conditional(state.amp, state.dims, cavity_index, ancilla_index, stack)
    return _read_ancilla(amp, state, ancilla_index, ("g", "e"))


def _padding(beta):
    r = abs(beta)
    return int(np.ceil(r * r + 8 * r + 16))


def _coherent_branches(beta, state, cavity_index, ancilla_index, eta, tail_tol=1e-6):
    """Success (``"e"``) and failure (``"g"``) branches for one coherent target.

    The displacements run in a cavity zero-padded by a few ``|beta|`` worth of
    levels so ``D(-beta) ... D(beta)`` is exact on the state's support; the
    result is truncated back and the discarded weight checked.
    """
    beta = complex(beta)
    dims = state.dims
    dim = dims[cavity_index]
    big = dim + _padding(beta)
    pdims = list(dims)
    pdims[cavity_index] = big
    widths = [(0, 0)] * len(dims)
    widths[cavity_index] = (0, big - dim)
    padded = np.pad(state.tensor(), widths).reshape(-1)
    shifted = apply_local(_displacement_cached(-beta, big), padded, pdims, cavity_index)
    stack = _conditional_stack(big, 0, np.pi, None if eta is None else np.pad(np.asarray(eta, float), (0, big - dim)))
    amp = np.moveaxis(_apply_conditional(shifted, pdims, cavity_index, ancilla_index, stack).reshape(pdims), ancilla_index, -1)
    back = _displacement_cached(beta, big)
    keep = [slice(None)] * len(dims)
    keep[cavity_index] = slice(0, dim)
    out = []
    for level, label in ((1, "e"), (0, "g")):
        part = np.zeros_like(amp)
        part[..., 0] = amp[..., level]
        p = float(np.sum(np.abs(part) ** 2))
        if p < BRANCH_EPS:
            continue
        part = np.moveaxis(part, -1, ancilla_index).reshape(-1)
        restored = apply_local(back, part, pdims, cavity_index).reshape(pdims)
        kept = restored[tuple(keep)]
        # absolute, so near-empty branches do not amplify rounding noise
        leak = p - float(np.sum(np.abs(kept) ** 2))
        if leak > tail_tol:
            raise TruncationError(f"coherent projection on {beta} leaks {leak:.2g} past the cutoff")
        out.append(MeasurementBranch(label, p, Ket(state.space, kept.reshape(-1))))
    return out


def measure_coherent(target, state, cavity_index, ancilla_index, eta=None):
    """Coherent-state projection by displacing, heralding vacuum and displacing back.

    ``target`` is either one complex amplitude, giving the ``"e"`` (success)
    and ``"g"`` branches, or a real ``alpha`` passed as ``("four", alpha)``,
    giving one branch per label in :data:`COHERENT_LABELS`. The four-outcome
    form keeps each target's success branch and renormalizes their
    probabilities, which is what repeating the attempt until one target
    fires amounts to when the targets are nearly orthogonal.
    """
    cavity_index, ancilla_index = _check_pair(state, cavity_index, ancilla_index)
    _require_ground(state, ancilla_index)
    if isinstance(target, tuple) and target and target[0] == "four":
        return measure_coherent_four(target[1], state, cavity_index, ancilla_index, eta)
    return _coherent_branches(target, state, cavity_index, ancilla_index, eta)


def measure_coherent_four(alpha, state, cavity_index, ancilla_index, eta=None):
    """Four-outcome measurement over ``{alpha, i alpha, -alpha, -i alpha}``."""
    cavity_index, ancilla_index = _check_pair(state, cavity_index, ancilla_index)
    _require_ground(state, ancilla_index)
    hits = []
    for k, label in enumerate(COHERENT_LABELS):
        for br in _coherent_branches(1j**k * alpha, state, cavity_index, ancilla_index, eta):
            if br.label == "e":
                hits.append((label, br))
    total = sum(br.prob for _, br in hits)
    if total < BRANCH_EPS:
        raise NoOutcomeError("no coherent-state target has non-negligible probability")
    return [MeasurementBranch(label, br.prob / total, br.post) for label, br in hits]


def measure_parity(state, cavity_index, ancilla_index, method="ramsey"):
    """Photon-number parity of one cavity, labels ``"even"`` and ``"odd"``.

    ``method="ramsey"`` runs ``R^y(pi/2)``, the ``pi`` conditional cavity
    rotation and ``R^y(pi/2)`` and reads the ancilla (``e`` means even).
    ``method="projector"`` applies the even/odd projectors directly.
    """
    cavity_index, ancilla_index = _check_pair(state, cavity_index, ancilla_index)
    _require_ground(state, ancilla_index)
    dims = state.dims
    if method == "projector":
        even = (np.arange(dims[cavity_index]) % 2 == 0).astype(float)
        out = []
        for label, mask in (("even", even), ("odd", 1.0 - even)):
            amp = apply_diagonal(mask, state.amp, dims, cavity_index)
            p = float(np.vdot(amp, amp).real)
            if p >= BRANCH_EPS:
                out.append(MeasurementBranch(label, p, Ket(state.space, amp)))
        return out
    if method != "ramsey":
        raise InvalidArgumentError(f"unknown parity method {method!r}")
    half = ry(np.pi / 2)
    amp = apply_local(half, state.amp, dims, ancilla_index)
    amp = _apply_conditional(amp, dims, cavity_index, ancilla_index, _parity_stack(dims[cavity_index], np.pi))
    amp = apply_local(half, amp, dims, ancilla_index)
    return _read_ancilla(amp, state, ancilla_index, ("odd", "even"))


def sample_branch(branches, rng):
    """Draw one branch by inverse CDF in list order.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed.
    """
    if not branches:
        raise NoOutcomeError("no branches to sample from")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    cdf = np.cumsum([b.prob for b in branches])
    u = rng.random() * cdf[-1]
    return branches[min(int(np.searchsorted(cdf, u, side="right")), len(branches) - 1)]


def ancilla_mode():
    return ModeSpace(2, "qubit")
