"""Hot numerical kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from the ``CATSIM_NUMBA``
environment variable: ``0``/``false``/``off`` forces numpy, anything else uses
numba when it is importable. :func:`use_backend` switches at runtime (tests and
the benchmark use it to compare both paths).
"""

import os

import numpy as np

from . import _numpy

try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

__all__ = [
    "available_backends",
    "backend",
    "use_backend",
    "displacement_matrix",
    "displaced_parity",
    "projected_overlap",
    "limit_threads",
]

_FALSY = {"0", "false", "off", "no", "numpy"}


def _initial_backend():
    flag = os.environ.get("CATSIM_NUMBA", "1").strip().lower()
    if flag in _FALSY or _numba is None:
        return "numpy"
    return "numba"


_active = _initial_backend()


def available_backends():
    return ("numpy", "numba") if _numba is not None else ("numpy",)


def backend():
    """Name of the active backend."""
    return _active


def use_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _active
    if name not in available_backends():
        raise ValueError(f"unknown or unavailable backend {name!r}")
    previous, _active = _active, name
    return previous


def limit_threads(n):
    """Cap the numba worker threads at ``n`` (no-op for the numpy backend)."""
    if _numba is None:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _impl():
    return _numba if _active == "numba" else _numpy


def displacement_matrix(beta, n_rows, n_cols):
    """Exact ``<m|D(beta)|n>`` for ``m < n_rows``, ``n < n_cols``.

    Elements come from the associated-Laguerre closed form evaluated in log
    space, so they are those of the untruncated operator and stay accurate at
    large ``|beta|`` where the ladder recurrence loses digits.
    """
    return _impl().displacement_matrix(complex(beta), int(n_rows), int(n_cols))


def displaced_parity(state, betas, n_out):
    """Photon-number parity of the state displaced by ``-beta``, per beta.

    ``state`` is either a 1-D ket or a 2-D density matrix. Returns
    ``(parity, retained)`` arrays shaped like ``betas``.
    """
    betas = np.asarray(betas, dtype=complex)
    flat = np.ascontiguousarray(betas.ravel())
    state = np.ascontiguousarray(state, dtype=complex)
    impl = _impl()
    if state.ndim == 1:
        parity, retained = impl.displaced_parity_pure(state, flat, int(n_out))
    else:
        parity, retained = impl.displaced_parity(state, flat, int(n_out))
    return parity.reshape(betas.shape), retained.reshape(betas.shape)


def projected_overlap(psis, proj_b, target_a):
    """Batch conditional overlap; see ``_numpy.projected_overlap``."""
    psis = np.ascontiguousarray(psis, dtype=complex)
    return _impl().projected_overlap(
        psis,
        np.ascontiguousarray(proj_b, dtype=complex),
        np.ascontiguousarray(target_a, dtype=complex),
    )
