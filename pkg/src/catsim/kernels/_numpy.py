"""Pure-numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_numba``; the two
must agree to rounding error (see ``tests/test_kernels.py``).
"""

import numpy as np
from scipy.special import gammaln

_CHUNK = 512


def displacement_matrix(beta, n_rows, n_cols):
    """Exact Fock matrix elements ``<m|D(beta)|n>`` for ``m < n_rows, n < n_cols``."""
    return _displacement_batch(np.array([beta], dtype=complex), n_rows, n_cols)[0]


def _displacement_batch(betas, n_rows, n_cols):
    """``<m|D(beta)|n>`` from the generalized Laguerre closed form.

    With ``s = min(m, n)`` and ``d = |m - n|`` every element is a log-space
    prefactor times ``L_s^(d)(|beta|^2)``; the Laguerre values come from the
    three-term recurrence in ``s``, which stays accurate at large ``|beta|``
    where the ladder recurrence between columns does not.
    """
    betas = np.asarray(betas, dtype=complex)
    nb = betas.size
    out = np.zeros((nb, n_rows, n_cols), dtype=complex)
    absb = np.abs(betas)[:, None]
    x = absb**2
    theta = np.angle(betas)[:, None]
    d = np.arange(n_rows)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = np.where(d == 0, 0.0, d * np.log(absb))
    lower_phase = np.exp(1j * d * theta)
    upper_phase = (-1.0) ** d * np.exp(-1j * d * theta)
    lg = gammaln(np.arange(n_rows + n_cols) + 1.0)
    l_prev = np.zeros((nb, n_rows))
    l_cur = np.ones((nb, n_rows))
    for s in range(min(n_rows, n_cols)):
        if s == 1:
            l_prev, l_cur = l_cur, 1.0 + d - x
        elif s > 1:
            l_prev, l_cur = l_cur, ((2 * s - 1 + d - x) * l_cur - (s - 1 + d) * l_prev) / s
        logpre = 0.5 * (lg[s] - lg[s + d]) + dlog - 0.5 * x
        with np.errstate(divide="ignore"):
            mag = np.where(l_cur == 0.0, 0.0, np.sign(l_cur) * np.exp(logpre + np.log(np.abs(l_cur))))
        rows = n_rows - s
        out[:, s + np.arange(rows), s] = (mag * lower_phase)[:, :rows]
        cols = n_cols - s
        if cols > 1:
            out[:, s, s + np.arange(1, cols)] = (mag * upper_phase)[:, 1:cols]
    return out


def displaced_parity(rho, betas, n_out):
    """Parity of ``D(-beta) rho D(-beta)^dagger`` for each beta.

    Returns ``(parity, retained)`` where ``retained`` is the trace kept below
    ``n_out``; ``1 - retained`` is the population lost to the output cutoff.
    """
    rho = np.ascontiguousarray(rho, dtype=complex)
    betas = np.ravel(np.asarray(betas, dtype=complex))
    n_in = rho.shape[0]
    sign = (-1.0) ** np.arange(n_out)
    parity = np.empty(betas.size)
    retained = np.empty(betas.size)
    for start in range(0, betas.size, _CHUNK):
        chunk = betas[start:start + _CHUNK]
        d = _displacement_batch(-chunk, n_out, n_in)
        drho = d @ rho
        diag = np.einsum("bmj,bmj->bm", drho, d.conj()).real
        parity[start:start + chunk.size] = diag @ sign
        retained[start:start + chunk.size] = diag.sum(axis=1)
    return parity, retained


def displaced_parity_pure(psi, betas, n_out):
    """Same as :func:`displaced_parity` for a pure state vector ``psi``."""
    psi = np.ascontiguousarray(psi, dtype=complex)
    betas = np.ravel(np.asarray(betas, dtype=complex))
    n_in = psi.shape[0]
    sign = (-1.0) ** np.arange(n_out)
    parity = np.empty(betas.size)
    retained = np.empty(betas.size)
    for start in range(0, betas.size, _CHUNK):
        chunk = betas[start:start + _CHUNK]
        d = _displacement_batch(-chunk, n_out, n_in)
        pops = np.abs(d @ psi) ** 2
        parity[start:start + chunk.size] = pops @ sign
        retained[start:start + chunk.size] = pops.sum(axis=1)
    return parity, retained


def projected_overlap(psis, proj_b, target_a):
    """Conditional overlap after projecting mode B of a batch of 3-mode kets.

    ``psis`` has shape ``(T, NA, NB, NM)``. For each slice the B mode is
    projected onto ``proj_b`` and the (unnormalized) conditional state of A is
    compared with ``target_a``; mode M is traced out. Returns
    ``(fidelity, probability)`` arrays of length ``T``.
    """
    x = np.einsum("tabm,b->tam", psis, np.conj(proj_b))
    prob = np.einsum("tam,tam->t", x, x.conj()).real
    y = np.einsum("tam,a->tm", x, np.conj(target_a))
    num = np.einsum("tm,tm->t", y, y.conj()).real
    with np.errstate(invalid="ignore", divide="ignore"):
        fid = np.where(prob > 0, num / prob, 0.0)
    return fid, prob
