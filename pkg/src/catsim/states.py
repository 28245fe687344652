"""Coherent states, cat states, four-component cat qudits and logical qubits.

All normalization constants are computed from the truncated vectors rather
than taken from closed forms, so states stay exactly normalized at any cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InvalidArgumentError, TruncationError, ZeroVectorError
from .hilbert import Ket, apply_local, annihilation, default_cutoff, poisson_tail, single_mode

QUDIT_D = 4
SECTORS = ("even", "odd")
COHERENT_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class CatQuditParams:
    """Amplitude and Fock cutoff of a ``d = 4`` cat qudit.

    ``dim=None`` picks :func:`catsim.hilbert.default_cutoff` for ``alpha``.
    """

    alpha: float
    d: int = QUDIT_D
    dim: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise InvalidArgumentError(f"alpha must be a positive real, got {self.alpha!r}")
        if self.d != QUDIT_D:
            raise InvalidArgumentError("only d = 4 qudits are supported")
        if self.dim is None:
            object.__setattr__(self, "dim", default_cutoff(self.alpha))


def _coherent_amp(alpha, dim):
    n = np.arange(dim)
    r = abs(alpha)
    if r == 0:
        amp = np.zeros(dim, dtype=complex)
        amp[0] = 1.0
        return amp
    logmag = -0.5 * r * r + n * np.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * np.angle(alpha) * n)


def coherent(alpha, dim, tail_tol=COHERENT_TAIL_TOL):
    """Truncated coherent state ``|alpha>``, renormalized after truncation.

    Raises :class:`TruncationError` if the population cut off exceeds
    ``tail_tol`` (pass ``None`` to skip the check).
    """
    alpha = complex(alpha)
    lost = poisson_tail(alpha, dim)
    if tail_tol is not None and lost > tail_tol:
        raise TruncationError(f"coherent({alpha}) loses {lost:.3g} of its population at dim {dim}")
    return Ket(single_mode(dim), _coherent_amp(alpha, dim))


def cat_unnormalized(alpha, sign, dim, tail_tol=COHERENT_TAIL_TOL):
    """``|alpha> + sign |-alpha>`` from normalized coherent vectors, not renormalized."""
    if sign not in (+1, -1):
        raise InvalidArgumentError("sign must be +1 or -1")
    a = coherent(alpha, dim, tail_tol).amp
    b = coherent(-alpha, dim, tail_tol).amp
    return a + sign * b


def cat(alpha, sign, dim=None, tail_tol=COHERENT_TAIL_TOL):
    """Even (``sign=+1``) or odd (``sign=-1``) cat state ``N(|alpha> +/- |-alpha>)``."""
    if isinstance(sign, str):
        sign = {"+": 1, "-": -1, "even": 1, "odd": -1}.get(sign)
    dim = dim or default_cutoff(abs(alpha))
    amp = cat_unnormalized(alpha, sign, dim, tail_tol)
    if np.linalg.norm(amp) < 1e-14:
        raise ZeroVectorError("odd cat state with alpha = 0 vanishes")
    return Ket(single_mode(dim), amp)


def _check_k(k):
    if k not in range(QUDIT_D):
        raise InvalidArgumentError(f"qudit label must be 0..3, got {k!r}")


def qudit_unnormalized(k, params, tail_tol=COHERENT_TAIL_TOL):
    """``sum_j (-i)^(k j) |i^j alpha>`` as a raw vector."""
    _check_k(k)
    out = np.zeros(params.dim, dtype=complex)
    for j in range(QUDIT_D):
        out += (-1j) ** (k * j) * coherent(1j**j * params.alpha, params.dim, tail_tol).amp
    return out


def qudit_normalization(k, params, tail_tol=COHERENT_TAIL_TOL):
    """``M^k_alpha``: inverse norm of the unnormalized four-component sum."""
    return 1.0 / np.linalg.norm(qudit_unnormalized(k, params, tail_tol))


def cv_qudit(k, params, tail_tol=COHERENT_TAIL_TOL):
    """Cat qudit ``|k_4>``, supported on Fock states ``4m + k`` only.

    The phase pattern makes every other Fock class cancel exactly, so the
    state is the coherent amplitudes of ``|alpha>`` restricted to ``n = k mod 4``.
    """
    _check_k(k)
    amp = coherent(params.alpha, params.dim, tail_tol).amp.copy()
    amp[np.arange(params.dim) % QUDIT_D != k] = 0.0
    return Ket(single_mode(params.dim), amp)


def complementary_qudit(k, params, tail_tol=COHERENT_TAIL_TOL):
    """``|k~_4> = |i^k alpha>``."""
    _check_k(k)
    return coherent(1j**k * params.alpha, params.dim, tail_tol)


def _check_sector(sector):
    if sector not in SECTORS:
        raise InvalidArgumentError(f"sector must be 'even' or 'odd', got {sector!r}")


def logical_basis(bit, sector, params, tail_tol=COHERENT_TAIL_TOL):
    """Logical ``|0^L>`` / ``|1^L>`` of the even or odd sector.

    even: ``|0> = SCS+(alpha)``, ``|1> = SCS+(i alpha)``
    odd:  ``|0> = SCS-(alpha)``, ``|1> = -i SCS-(i alpha)``
    """
    _check_sector(sector)
    if bit not in (0, 1):
        raise InvalidArgumentError(f"logical bit must be 0 or 1, got {bit!r}")
    sign = 1 if sector == "even" else -1
    a = params.alpha * (1j if bit else 1)
    ket = cat(a, sign, params.dim, tail_tol)
    if sector == "odd" and bit == 1:
        return Ket(ket.space, -1j * ket.amp)
    return ket


def logical_plus_minus(sign, sector, params, tail_tol=COHERENT_TAIL_TOL):
    """``|+^L>`` / ``|-^L>`` as single qudit states: ``|0_4>``/``|2_4>`` (even), ``|1_4>``/``|3_4>`` (odd)."""
    _check_sector(sector)
    k = (0 if sign > 0 else 2) + (0 if sector == "even" else 1)
    return cv_qudit(k, params, tail_tol)


@dataclass(frozen=True)
class LogicalQubit:
    a0: complex
    a1: complex
    sector: str
    params: CatQuditParams

    def __post_init__(self):
        _check_sector(self.sector)
        if abs(abs(self.a0) ** 2 + abs(self.a1) ** 2 - 1.0) > 1e-10:
            raise InvalidArgumentError("logical amplitudes must satisfy |a0|^2 + |a1|^2 = 1")

    def encode(self):
        return embed_logical([self.a0, self.a1], self.sector, self.params)


def embed_logical(vec, sector, params, tail_tol=COHERENT_TAIL_TOL):
    """Fock-space vector ``v0 |0^L> + v1 |1^L>`` (normalized, not orthogonalized)."""
    v0, v1 = complex(vec[0]), complex(vec[1])
    amp = v0 * logical_basis(0, sector, params, tail_tol).amp + v1 * logical_basis(1, sector, params, tail_tol).amp
    return Ket(single_mode(params.dim), amp)


def encode_logical(a0, a1, sector, params):
    return LogicalQubit(a0, a1, sector, params).encode()


def apply_photon_loss(state, mode=0):
    """Normalized ``a |psi>`` on one mode of ``state``."""
    mode = state.space.check_mode(mode)
    a = annihilation(state.dims[mode]).mat
    amp = apply_local(a, state.amp, state.dims, mode)
    if np.linalg.norm(amp) < 1e-14:
        raise ZeroVectorError("photon loss annihilates the state")
    return Ket(state.space, amp)
