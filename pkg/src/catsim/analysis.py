"""Wigner functions on a phase-space grid and fidelity scans."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import kernels
from .errors import InvalidArgumentError, SignatureError, TruncationError
from .hilbert import DensityMatrix, Ket, fidelity_pure

WIGNER_CONVENTION = {
    "beta": "x + i p",
    "definition": "W(beta) = (2/pi) Tr[Pi D(-beta) rho D(-beta)^dagger]",
    "normalization": "integral of W dx dp = 1",
    "vacuum_at_origin": "2/pi",
}


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple = (-5.0, 5.0)
    p_range: tuple = (-5.0, 5.0)
    resolution: int = 101

    def __post_init__(self):
        if self.resolution < 2:
            raise InvalidArgumentError("grid resolution must be at least 2")
        for lo, hi in (self.x_range, self.p_range):
            if not lo < hi:
                raise InvalidArgumentError("grid ranges must be increasing intervals")

    def axes(self):
        return (np.linspace(*self.x_range, self.resolution), np.linspace(*self.p_range, self.resolution))


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """``values[i, j] = W(x[i] + i p[j])``."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def x_range(self):
        return float(self.x[0]), float(self.x[-1])

    @property
    def p_range(self):
        return float(self.p[0]), float(self.p[-1])

    @property
    def resolution(self):
        return len(self.x)

    def integral(self):
        """Trapezoidal ``int int W dx dp``."""
        return float(trapezoid(trapezoid(self.values, self.p, axis=1), self.x))

    def argmax(self):
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return complex(self.x[i], self.p[j])


def output_cutoff(n_in, beta_max):
    """Fock levels needed to hold a state of ``n_in`` levels displaced by ``beta_max``."""
    r = np.sqrt(n_in) + beta_max
    return int(np.ceil(r * r + 8 * r + 20))


def wigner(state, grid=None, tol=1e-8):
    """Wigner function of a single-mode ket or density matrix via displaced parity.

    ``tol`` bounds the population the displaced state may lose to the
    internal Fock cutoff; larger losses raise :class:`TruncationError`.
    """
    grid = grid or GridSpec()
    if len(state.space) != 1:
        raise SignatureError("wigner needs a single-mode state")
    if isinstance(state, Ket):
        data = state.amp
    elif isinstance(state, DensityMatrix):
        data = state.mat
    else:
        raise InvalidArgumentError("expected a Ket or DensityMatrix")
    x, p = grid.axes()
    betas = x[:, None] + 1j * p[None, :]
    n_out = output_cutoff(state.dims[0], float(np.abs(betas).max()))
    parity, retained = kernels.displaced_parity(data, betas, n_out)
    lost = float(np.max(1.0 - retained))
    if lost > tol:
        raise TruncationError(f"displaced state loses {lost:.2g} past {n_out} levels")
    meta = dict(WIGNER_CONVENTION, n_out=n_out, max_lost=lost, backend=kernels.backend())
    return WignerGrid(x, p, (2.0 / np.pi) * parity, meta)


@dataclass(frozen=True, eq=False)
class FidelityScan:
    times: np.ndarray
    values: np.ndarray
    index: int

    @property
    def t_star(self):
        return float(self.times[self.index])

    @property
    def f_star(self):
        return float(self.values[self.index])


def fidelity_scan(states, target, times=None):
    """Overlap fidelity of each state with ``target`` and its maximum."""
    states = list(states)
    if not states:
        raise InvalidArgumentError("fidelity_scan needs at least one state")
    times = np.arange(len(states), dtype=float) if times is None else np.asarray(times, dtype=float)
    if times.shape != (len(states),):
        raise InvalidArgumentError("times and states differ in length")
    values = np.array([fidelity_pure(target, s) for s in states])
    return FidelityScan(times, values, int(np.argmax(values)))
