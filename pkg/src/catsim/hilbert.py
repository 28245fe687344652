"""Linear algebra on truncated single-mode and composite Fock spaces.

A composite space is an ordered tuple of modes; mode ``i`` of a composite ket
is axis ``i`` of ``amp.reshape(space.dims)``. Time evolution follows the
``psi(t) = exp(+iHt) psi(0)`` sign convention throughout the package.
"""

from __future__ import annotations

import logging
import threading
import weakref
from dataclasses import dataclass, field
from math import prod

import numpy as np
from scipy.stats import poisson

from .errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    NumericalError,
    PropertyError,
    SignatureError,
    TruncationError,
    ZeroVectorError,
)

log = logging.getLogger(__name__)

MODE_KINDS = ("cavity", "transmon", "qubit")

NORM_TOL = 1e-10
PROPERTY_TOL = 1e-9
DEFAULT_TAIL_TOL = 1e-6


@dataclass(frozen=True)
class ModeSpace:
    """One truncated mode holding Fock states ``|0> ... |dim-1>``.

    ``kind`` only matters for diagnostics: truncation checks run on cavities,
    never on transmons or two-level qubits.
    """

    dim: int
    kind: str = "cavity"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InvalidDimensionError(f"mode dimension must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.kind not in MODE_KINDS:
            raise InvalidArgumentError(f"unknown mode kind {self.kind!r}")


@dataclass(frozen=True)
class CompositeSpace:
    modes: tuple

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise InvalidArgumentError("a composite space needs at least one mode")
        for m in modes:
            if not isinstance(m, ModeSpace):
                raise InvalidArgumentError(f"expected ModeSpace, got {type(m).__name__}")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def of(cls, *dims, kinds=None):
        """``CompositeSpace.of(24, 24, 3, kinds=("cavity", "cavity", "transmon"))``."""
        kinds = kinds or ("cavity",) * len(dims)
        if len(kinds) != len(dims):
            raise InvalidArgumentError("kinds and dims differ in length")
        return cls(tuple(ModeSpace(d, k) for d, k in zip(dims, kinds)))

    @property
    def dims(self):
        return tuple(m.dim for m in self.modes)

    @property
    def total(self):
        return prod(self.dims)

    def __len__(self):
        return len(self.modes)

    def check_mode(self, index):
        if not isinstance(index, (int, np.integer)) or not 0 <= index < len(self.modes):
            raise SignatureError(f"mode index {index!r} out of range for {len(self.modes)} modes")
        return int(index)

    def select(self, indices):
        return CompositeSpace(tuple(self.modes[i] for i in indices))

    def without(self, indices):
        drop = set(indices)
        return CompositeSpace(tuple(m for i, m in enumerate(self.modes) if i not in drop))

    def compatible(self, other):
        return self.dims == other.dims


def single_mode(dim, kind="cavity"):
    return CompositeSpace((ModeSpace(dim, kind),))


def _as_space(space):
    if isinstance(space, CompositeSpace):
        return space
    if isinstance(space, ModeSpace):
        return CompositeSpace((space,))
    if isinstance(space, (int, np.integer)):
        return single_mode(int(space))
    raise InvalidArgumentError(f"cannot interpret {space!r} as a space")


def _readonly(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state. The constructor normalizes ``amp``."""

    space: CompositeSpace
    amp: np.ndarray

    def __post_init__(self):
        space = _as_space(self.space)
        amp = np.asarray(self.amp, dtype=complex).reshape(-1)
        if amp.size != space.total:
            raise SignatureError(f"amplitude length {amp.size} does not match space dimension {space.total}")
        norm = np.linalg.norm(amp)
        if not np.isfinite(norm):
            raise NumericalError("non-finite amplitudes")
        if norm < 1e-300:
            raise ZeroVectorError("cannot normalize a zero vector")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "amp", _readonly(amp / norm))

    @property
    def dims(self):
        return self.space.dims

    def tensor(self):
        """Amplitudes reshaped to one axis per mode (read-only view)."""
        return self.amp.reshape(self.dims)

    def overlap(self, other):
        """``<self|other>``."""
        _require_compatible(self.space, other.space)
        return complex(np.vdot(self.amp, other.amp))

    def to_dm(self):
        return DensityMatrix(self.space, np.outer(self.amp, self.amp.conj()), check=False)

    def __repr__(self):
        return f"Ket(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator.

    ``check=False`` skips the eigenvalue test for matrices built by trusted
    code paths (outer products, partial traces of valid states).
    """

    space: CompositeSpace
    mat: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        space = _as_space(self.space)
        mat = np.asarray(self.mat, dtype=complex)
        n = space.total
        if mat.shape != (n, n):
            raise SignatureError(f"matrix shape {mat.shape} does not match space dimension {n}")
        if self.check:
            if np.max(np.abs(mat - mat.conj().T)) > NORM_TOL:
                raise PropertyError("density matrix is not Hermitian")
            tr = np.trace(mat).real
            if abs(tr - 1.0) > 1e-9:
                raise PropertyError(f"density matrix trace {tr!r} != 1")
            if np.linalg.eigvalsh(mat).min() < -1e-8:
                raise PropertyError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "mat", _readonly(mat))

    @classmethod
    def from_unnormalized(cls, space, mat):
        """Hermitize and rescale to unit trace."""
        mat = np.asarray(mat, dtype=complex)
        mat = 0.5 * (mat + mat.conj().T)
        tr = np.trace(mat).real
        if tr <= 1e-300:
            raise ZeroVectorError("density matrix has zero trace")
        return cls(space, mat / tr, check=False)

    @property
    def dims(self):
        return self.space.dims

    def purity(self):
        return float(np.real(np.vdot(self.mat, self.mat)))

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"


TAGS = frozenset({"hermitian", "unitary", "diagonal"})


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Square matrix on a composite space.

    ``tags`` are verified at construction. ``conserved`` optionally holds the
    diagonal of a conserved charge commuting with the operator; the
    propagator uses it to eigendecompose block by block.
    """

    space: CompositeSpace
    mat: np.ndarray
    tags: frozenset = frozenset()
    conserved: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        space = _as_space(self.space)
        mat = np.asarray(self.mat, dtype=complex)
        n = space.total
        if mat.shape != (n, n):
            raise SignatureError(f"matrix shape {mat.shape} does not match space dimension {n}")
        tags = frozenset(self.tags)
        if not tags <= TAGS:
            raise InvalidArgumentError(f"unknown tags {sorted(tags - TAGS)}")
        if "diagonal" in tags and np.max(np.abs(mat - np.diag(np.diag(mat))), initial=0.0) > PROPERTY_TOL:
            raise PropertyError("operator flagged diagonal has off-diagonal entries")
        if "hermitian" in tags and not is_hermitian(mat):
            raise PropertyError("operator flagged hermitian is not Hermitian")
        if "unitary" in tags and not is_unitary(mat):
            raise PropertyError("operator flagged unitary is not unitary")
        conserved = self.conserved
        if conserved is not None:
            conserved = np.asarray(conserved, dtype=float).reshape(-1)
            if conserved.size != n:
                raise SignatureError("conserved charge has the wrong length")
            conserved.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "mat", _readonly(mat))
        object.__setattr__(self, "tags", tags)
        object.__setattr__(self, "conserved", conserved)

    @property
    def dims(self):
        return self.space.dims

    def dag(self):
        tags = self.tags & {"hermitian", "unitary", "diagonal"}
        return LinearOperator(self.space, self.mat.conj().T, tags)

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            _require_compatible(self.space, other.space)
            keep = self.tags & other.tags & {"diagonal", "unitary"}
            return LinearOperator(self.space, self.mat @ other.mat, keep)
        if isinstance(other, Ket):
            _require_compatible(self.space, other.space)
            return self.mat @ other.amp
        return NotImplemented

    def __add__(self, other):
        _require_compatible(self.space, other.space)
        keep = self.tags & other.tags & {"diagonal", "hermitian"}
        return LinearOperator(self.space, self.mat + other.mat, keep)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        keep = self.tags & {"diagonal"}
        if np.isreal(scalar):
            keep |= self.tags & {"hermitian"}
        return LinearOperator(self.space, scalar * self.mat, keep)

    __rmul__ = __mul__

    def __repr__(self):
        return f"LinearOperator(dims={self.dims}, tags={sorted(self.tags)})"


def is_hermitian(mat, tol=PROPERTY_TOL):
    mat = np.asarray(mat)
    scale = max(1.0, float(np.max(np.abs(mat), initial=0.0)))
    return float(np.max(np.abs(mat - mat.conj().T), initial=0.0)) <= tol * scale


def is_unitary(mat, tol=PROPERTY_TOL):
    mat = np.asarray(mat)
    return float(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])), initial=0.0)) <= tol


def _require_compatible(a, b):
    if not a.compatible(b):
        raise SignatureError(f"space mismatch: {a.dims} vs {b.dims}")


# -- ladder operators ---------------------------------------------------------


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def annihilation(dim, kind="cavity"):
    """Truncated lowering operator with ``<n-1|a|n> = sqrt(n)``."""
    dim = _check_dim(dim)
    return LinearOperator(single_mode(dim, kind), np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex))


def creation(dim, kind="cavity"):
    return annihilation(dim, kind).dag()


def number(dim, kind="cavity"):
    dim = _check_dim(dim)
    return LinearOperator(single_mode(dim, kind), np.diag(np.arange(dim)).astype(complex), {"hermitian", "diagonal"})


def identity(space):
    space = _as_space(space)
    return LinearOperator(space, np.eye(space.total, dtype=complex), {"hermitian", "unitary", "diagonal"})


def embed(op, mode_index, space):
    """Lift a single-mode operator to ``space`` by Kronecker products with identities."""
    space = _as_space(space)
    mode_index = space.check_mode(mode_index)
    mat = op.mat if isinstance(op, LinearOperator) else np.asarray(op, dtype=complex)
    if mat.shape != (space.dims[mode_index],) * 2:
        raise SignatureError(
            f"operator of size {mat.shape[0]} cannot act on mode {mode_index} of dimension {space.dims[mode_index]}"
        )
    left = prod(space.dims[:mode_index])
    right = prod(space.dims[mode_index + 1:])
    full = np.kron(np.kron(np.eye(left), mat), np.eye(right))
    tags = op.tags if isinstance(op, LinearOperator) else frozenset()
    return LinearOperator(space, full, tags)


def apply_local(mat, amp, dims, mode):
    """Apply a ``dims[mode]``-square matrix to axis ``mode`` of a flat vector.

    Returns a new flat (unnormalized) vector; the full operator is never built.
    """
    mat = mat.mat if isinstance(mat, LinearOperator) else np.asarray(mat)
    t = np.asarray(amp).reshape(dims)
    t = np.moveaxis(np.tensordot(mat, t, axes=([1], [mode])), 0, mode)
    return t.reshape(-1)


def apply_diagonal(diag, amp, dims, mode):
    """Multiply axis ``mode`` of a flat vector by a diagonal."""
    shape = [1] * len(dims)
    shape[mode] = dims[mode]
    return (np.asarray(amp).reshape(dims) * np.asarray(diag).reshape(shape)).reshape(-1)


# -- states --------------------------------------------------------------------


def basis(dim, n, kind="cavity"):
    """Fock state ``|n>`` of a single mode."""
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidArgumentError(f"Fock index {n} outside 0..{dim - 1}")
    v = np.zeros(dim, dtype=complex)
    v[n] = 1.0
    return Ket(single_mode(dim, kind), v)


def tensor(*kets):
    """Product state in mode order."""
    if not kets:
        raise InvalidArgumentError("tensor() needs at least one ket")
    amp = kets[0].amp
    modes = list(kets[0].space.modes)
    for k in kets[1:]:
        amp = np.kron(amp, k.amp)
        modes.extend(k.space.modes)
    return Ket(CompositeSpace(tuple(modes)), amp)


# -- truncation diagnostics ----------------------------------------------------


def poisson_tail(alpha, dim):
    """Coherent-state population at Fock levels ``>= dim``."""
    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def default_cutoff(alpha, eps=1e-10, guard=1):
    """Smallest cavity dimension whose coherent tail mass is below ``eps``.

    ``guard`` extra levels keep the boundary level itself nearly empty, which
    is what :func:`tail_mass` reads.
    """
    n = 2
    while poisson_tail(alpha, n) >= eps:
        n += 1
    return n + guard


def photon_distribution(state, mode):
    """Marginal photon-number distribution of one mode."""
    mode = state.space.check_mode(mode)
    dims = state.dims
    if isinstance(state, Ket):
        pops = np.abs(state.tensor()) ** 2
    else:
        pops = np.real(np.diag(state.mat)).reshape(dims)
    axes = tuple(i for i in range(len(dims)) if i != mode)
    return pops.sum(axis=axes) if axes else pops


def tail_mass(state, mode):
    """Estimated population beyond the truncation of ``mode``.

    The distribution's last two levels give a geometric ratio ``r``; the
    leaked mass is extrapolated as ``p[-1] * r / (1 - r)``. For a coherent
    state this reproduces the Poisson tail to leading order.
    """
    p = photon_distribution(state, mode)
    last, prev = float(p[-1]), float(p[-2])
    if last <= 0.0:
        return 0.0
    if prev <= 0.0:
        return float("inf")
    r = last / prev
    return float("inf") if r >= 1.0 else last * r / (1.0 - r)


def check_tail(state, tol=DEFAULT_TAIL_TOL):
    """Tail mass per cavity mode; raises :class:`TruncationError` above ``tol``."""
    masses = {}
    for i, m in enumerate(state.space.modes):
        if m.kind != "cavity":
            continue
        masses[i] = tail_mass(state, i)
    log.debug("tail masses %s", masses)
    bad = {i: v for i, v in masses.items() if v > tol}
    if bad:
        raise TruncationError(f"tail mass above {tol:g} on modes {bad}")
    return masses


# -- propagation ---------------------------------------------------------------


class Propagator:
    """Spectral propagator ``exp(+iHt)`` from a one-time eigendecomposition.

    Diagonal operators skip the decomposition; operators carrying a conserved
    charge are decomposed one charge sector at a time.
    """

    def __init__(self, op, use_blocks=True):
        if not ("hermitian" in op.tags or is_hermitian(op.mat)):
            raise PropertyError("time evolution requires a Hermitian generator")
        self.space = op.space
        self.dim = op.space.total
        mat = op.mat
        try:
            if "diagonal" in op.tags:
                self.blocks = [(None, np.real(np.diag(mat)).copy(), None)]
            elif use_blocks and op.conserved is not None:
                self.blocks = []
                charges = np.round(op.conserved, 9)
                for q in np.unique(charges):
                    idx = np.flatnonzero(charges == q)
                    e, v = np.linalg.eigh(mat[np.ix_(idx, idx)])
                    self.blocks.append((idx, e, v))
            else:
                e, v = np.linalg.eigh(mat)
                self.blocks = [(slice(None), e, v)]
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed: {exc}") from exc
        for _, e, _ in self.blocks:
            if not np.all(np.isfinite(e)):
                raise NumericalError("non-finite eigenvalues")

    @property
    def energies(self):
        return np.concatenate([e for _, e, _ in self.blocks])

    def apply(self, t, amp):
        """``exp(+iHt) amp`` as a flat array."""
        amp = np.asarray(amp, dtype=complex)
        idx, e, v = self.blocks[0]
        if v is None:
            return np.exp(1j * e * t) * amp
        out = np.empty_like(amp)
        for idx, e, v in self.blocks:
            c = v.conj().T @ amp[idx]
            out[idx] = v @ (np.exp(1j * e * t) * c)
        return out

    def apply_many(self, times, amp):
        """Evolved vectors for every time in ``times``; shape ``(len(times), dim)``."""
        times = np.asarray(times, dtype=float).reshape(-1)
        amp = np.asarray(amp, dtype=complex)
        idx, e, v = self.blocks[0]
        if v is None:
            return np.exp(1j * np.outer(times, e)) * amp[None, :]
        out = np.empty((times.size, self.dim), dtype=complex)
        for idx, e, v in self.blocks:
            c = v.conj().T @ amp[idx]
            out[:, idx] = (v @ (np.exp(1j * np.outer(e, times)) * c[:, None])).T
        return out


_CACHE = weakref.WeakKeyDictionary()
_CACHE_LOCK = threading.Lock()


def propagator(op, use_blocks=True):
    """Cached :class:`Propagator` for ``op`` (keyed on the operator object)."""
    key = (bool(use_blocks),)
    with _CACHE_LOCK:
        entry = _CACHE.get(op)
        if entry is not None and key in entry:
            return entry[key]
    prop = Propagator(op, use_blocks=use_blocks)
    with _CACHE_LOCK:
        _CACHE.setdefault(op, {})[key] = prop
    return prop


def evolve(H, t, psi, tail_tol=DEFAULT_TAIL_TOL):
    """Return ``exp(+iHt) psi``.

    The tail mass of every cavity mode is checked after the step; pass
    ``tail_tol=None`` to skip the check.
    """
    _require_compatible(H.space, psi.space)
    out = propagator(H).apply(t, psi.amp)
    norm = np.linalg.norm(out)
    if abs(norm - 1.0) > PROPERTY_TOL:
        raise NumericalError(f"propagation changed the norm to {norm!r}")
    ket = Ket(psi.space, out)
    if tail_tol is not None:
        check_tail(ket, tail_tol)
    return ket


def evolve_diagonal(energies, t, psi, tail_tol=DEFAULT_TAIL_TOL):
    """:func:`evolve` for a Hamiltonian given only by its diagonal.

    Avoids materializing the dense matrix, which matters for three cavities.
    """
    energies = np.asarray(energies, dtype=float).reshape(-1)
    if energies.size != psi.space.total:
        raise SignatureError("energy vector does not match the state space")
    ket = Ket(psi.space, np.exp(1j * energies * t) * psi.amp)
    if tail_tol is not None:
        check_tail(ket, tail_tol)
    return ket


# -- reductions ----------------------------------------------------------------


def _check_keep(space, keep):
    keep = list(keep)
    if not keep:
        raise InvalidArgumentError("keep must name at least one mode")
    for i in keep:
        space.check_mode(i)
    if any(b <= a for a, b in zip(keep, keep[1:])):
        raise InvalidArgumentError("keep indices must be strictly increasing")
    return keep


def partial_trace(state, keep):
    """Reduced density matrix on the modes listed in ``keep``."""
    space = state.space
    keep = _check_keep(space, keep)
    dims = space.dims
    rest = [i for i in range(len(dims)) if i not in keep]
    kdim = prod(dims[i] for i in keep)
    rdim = prod(dims[i] for i in rest)
    if isinstance(state, Ket):
        m = np.transpose(state.tensor(), keep + rest).reshape(kdim, rdim)
        mat = m @ m.conj().T
    else:
        t = state.mat.reshape(dims + dims)
        n = len(dims)
        perm = keep + rest + [n + i for i in keep] + [n + i for i in rest]
        t = np.transpose(t, perm).reshape(kdim, rdim, kdim, rdim)
        mat = np.einsum("arbr->ab", t)
    return DensityMatrix(space.select(keep), 0.5 * (mat + mat.conj().T), check=False)


def expectation(op, state, mode=None):
    """``<psi|O|psi>`` or ``Tr(O rho)``.

    With ``mode`` given, ``op`` is a single-mode operator applied to that mode
    of a composite state without building the full matrix.
    """
    if mode is not None:
        mode = state.space.check_mode(mode)
        if op.space.total != state.dims[mode]:
            raise SignatureError("operator dimension does not match the selected mode")
        if isinstance(state, Ket):
            return complex(np.vdot(state.amp, apply_local(op.mat, state.amp, state.dims, mode)))
        rho_mode = partial_trace(state, [mode])
        return complex(np.trace(op.mat @ rho_mode.mat))
    _require_compatible(op.space, state.space)
    if isinstance(state, Ket):
        return complex(np.vdot(state.amp, op.mat @ state.amp))
    return complex(np.trace(op.mat @ state.mat))


def fidelity_pure(target, state):
    """Overlap fidelity against a pure target.

    ``|<t|psi>|^2`` for a ket and ``|<t|rho|t>|`` for a density matrix. This is
    the overlap with the target, not the Uhlmann fidelity between two mixed
    states.
    """
    _require_compatible(target.space, state.space)
    if isinstance(state, Ket):
        f = abs(np.vdot(target.amp, state.amp)) ** 2
    else:
        f = abs(np.vdot(target.amp, state.mat @ target.amp))
    return float(min(max(f, 0.0), 1.0))
