"""numba-compiled twins of the kernels in ``_numpy``."""

import math
import os

import numpy as np
from numba import config, njit, prange

# try OpenMP before TBB; old TBB builds only produce a warning and fall through
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


@njit(cache=True)
def _fill_displacement(beta, out):
    # generalized Laguerre closed form, see _numpy._displacement_batch
    n_rows, n_cols = out.shape
    absb = abs(beta)
    x = absb * absb
    theta = math.atan2(beta.imag, beta.real)
    logb = math.log(absb) if absb > 0.0 else 0.0
    for d in range(n_rows):
        if absb == 0.0 and d > 0:
            continue
        lower = complex(math.cos(d * theta), math.sin(d * theta))
        upper = lower.conjugate() * (1.0 if d % 2 == 0 else -1.0)
        l_prev = 0.0
        l_cur = 1.0
        for s in range(min(n_rows - d, n_cols)):
            if s == 1:
                l_prev = l_cur
                l_cur = 1.0 + d - x
            elif s > 1:
                l_next = ((2 * s - 1 + d - x) * l_cur - (s - 1 + d) * l_prev) / s
                l_prev = l_cur
                l_cur = l_next
            if l_cur == 0.0:
                continue
            logpre = 0.5 * (math.lgamma(s + 1.0) - math.lgamma(s + d + 1.0)) + d * logb - 0.5 * x
            mag = math.exp(logpre + math.log(abs(l_cur)))
            if l_cur < 0.0:
                mag = -mag
            out[s + d, s] = mag * lower
            if d > 0 and s + d < n_cols:
                out[s, s + d] = mag * upper


@njit(cache=True)
def displacement_matrix(beta, n_rows, n_cols):
    out = np.zeros((n_rows, n_cols), dtype=np.complex128)
    _fill_displacement(complex(beta), out)
    return out


@njit(cache=True, parallel=True)
def displaced_parity(rho, betas, n_out):
    n_in = rho.shape[0]
    nb = betas.size
    parity = np.empty(nb)
    retained = np.empty(nb)
    for i in prange(nb):
        d = np.zeros((n_out, n_in), dtype=np.complex128)
        _fill_displacement(-betas[i], d)
        par = 0.0
        tot = 0.0
        for m in range(n_out):
            acc = 0.0
            for j in range(n_in):
                row = 0.0j
                for k in range(n_in):
                    row += rho[j, k] * d[m, k].conjugate()
                acc += (d[m, j] * row).real
            tot += acc
            if m % 2 == 0:
                par += acc
            else:
                par -= acc
        parity[i] = par
        retained[i] = tot
    return parity, retained


@njit(cache=True, parallel=True)
def displaced_parity_pure(psi, betas, n_out):
    n_in = psi.shape[0]
    nb = betas.size
    parity = np.empty(nb)
    retained = np.empty(nb)
    for i in prange(nb):
        d = np.zeros((n_out, n_in), dtype=np.complex128)
        _fill_displacement(-betas[i], d)
        par = 0.0
        tot = 0.0
        for m in range(n_out):
            amp = 0.0j
            for j in range(n_in):
                amp += d[m, j] * psi[j]
            pop = amp.real * amp.real + amp.imag * amp.imag
            tot += pop
            if m % 2 == 0:
                par += pop
            else:
                par -= pop
        parity[i] = par
        retained[i] = tot
    return parity, retained


@njit(cache=True, parallel=True)
def projected_overlap(psis, proj_b, target_a):
    nt, na, nb, nm = psis.shape
    fid = np.empty(nt)
    prob = np.empty(nt)
    for t in prange(nt):
        p = 0.0
        num = 0.0
        for m in range(nm):
            y = 0.0j
            for a in range(na):
                x = 0.0j
                for b in range(nb):
                    x += proj_b[b].conjugate() * psis[t, a, b, m]
                p += x.real * x.real + x.imag * x.imag
                y += target_a[a].conjugate() * x
            num += y.real * y.real + y.imag * y.imag
        prob[t] = p
        fid[t] = num / p if p > 0.0 else 0.0
    return fid, prob
