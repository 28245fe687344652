"""Cross-Kerr cluster-state generation and the two-cavity + transmon JC model.

Frequencies are given in GHz and times in microseconds at the API. Internally
Hamiltonians are in rad/ns (``angular``) or cycles/ns without the 2 pi
(``plain``) and times in ns, so ``exp(+iHt)`` is dimensionless either way.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InvalidArgumentError, NumericalError, SignatureError
from .hilbert import (
    CompositeSpace,
    DensityMatrix,
    Ket,
    LinearOperator,
    annihilation,
    check_tail,
    evolve,
    evolve_diagonal,
    fidelity_pure,
    partial_trace,
    propagator,
    tensor,
)
from .states import CatQuditParams, cat, coherent, complementary_qudit, cv_qudit

log = logging.getLogger(__name__)

NS_PER_US = 1000.0
UNIT_CONVENTIONS = ("plain", "angular")
ANHARMONIC_FORMS = ("n2", "n(n-1)")


class ClusterMismatchWarning(UserWarning):
    """Unequal cross-Kerr couplings: the three-mode state is not the ideal cluster."""


# -- ideal cross-Kerr evolution ------------------------------------------------


@dataclass(frozen=True)
class CrossKerrParams:
    """Cross-Kerr couplings; ``K_BC=None`` means equal to ``K_AB``."""

    K_AB: float = 1.0
    K_BC: float | None = None

    def __post_init__(self):
        if self.K_BC is None:
            object.__setattr__(self, "K_BC", self.K_AB)
        if not self.K_AB:
            raise InvalidArgumentError("K_AB must be nonzero")

    @property
    def revival_time(self):
        """``tau_r = 2 pi / |K_AB|``."""
        return 2.0 * np.pi / abs(self.K_AB)


def cross_kerr_energies(params, space):
    """Diagonal of :func:`cross_kerr_hamiltonian` as a flat real array."""
    dims = space.dims
    if len(dims) not in (2, 3) or any(m.kind != "cavity" for m in space.modes):
        raise SignatureError("cross-Kerr Hamiltonian needs two or three cavity modes")
    grids = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
    diag = params.K_AB * grids[0] * grids[1]
    if len(dims) == 3:
        diag = diag + params.K_BC * grids[1] * grids[2]
    return diag.reshape(-1).astype(float)


def cross_kerr_hamiltonian(params, space):
    """``K_AB n_A n_B`` (two modes) or ``K_AB n_A n_B + K_BC n_B n_C`` (three modes)."""
    return LinearOperator(space, np.diag(cross_kerr_energies(params, space).astype(complex)), {"hermitian", "diagonal"})


def ideal_cluster2(alpha, d, params=None, dim=None, tail_tol=1e-6):
    """``|alpha>|alpha>`` evolved under ``K n_A n_B`` for ``tau_r / d``."""
    if d not in (1, 2, 4):
        raise InvalidArgumentError(f"d must be 1, 2 or 4, got {d!r}")
    params = params or CrossKerrParams()
    dim = dim or CatQuditParams(alpha).dim
    a = coherent(alpha, dim, tail_tol=None if tail_tol is None else max(tail_tol, 1e-8))
    psi = tensor(a, a)
    return evolve_diagonal(cross_kerr_energies(params, psi.space), params.revival_time / d, psi, tail_tol)


def ideal_cluster3(alpha, params=None, dim=None, tail_tol=1e-6):
    """``|alpha>^3`` evolved under the three-mode cross-Kerr Hamiltonian for ``tau_r / 4``.

    With ``K_AB != K_BC`` the result is still returned but a
    :class:`ClusterMismatchWarning` is issued.
    """
    params = params or CrossKerrParams()
    if not np.isclose(params.K_AB, params.K_BC, rtol=1e-12, atol=0.0):
        warnings.warn("K_AB != K_BC: the evolved state is not the ideal three-qudit cluster", ClusterMismatchWarning, stacklevel=2)
    dim = dim or CatQuditParams(alpha).dim
    a = coherent(alpha, dim, tail_tol=None if tail_tol is None else max(tail_tol, 1e-8))
    psi = tensor(a, a, a)
    return evolve_diagonal(cross_kerr_energies(params, psi.space), params.revival_time / 4, psi, tail_tol)


def class_weights(alpha, dim, classes):
    """Norms of the coherent amplitudes of ``|alpha>`` restricted to ``n mod classes``."""
    p = np.abs(coherent(alpha, dim, tail_tol=None).amp) ** 2
    return np.sqrt(np.array([p[np.arange(dim) % classes == k].sum() for k in range(classes)]))


def analytic_cluster2(alpha, d, dim, weights="exact"):
    """Closed form of :func:`ideal_cluster2` for ``d`` in 2 or 4.

    ``weights="exact"`` uses the Fock-class norms of ``|alpha>``, which makes
    the identity exact; ``weights="equal"`` uses ``1/sqrt(d)`` for every term.
    """
    p = CatQuditParams(alpha, dim=dim)
    w = class_weights(alpha, dim, d) if weights == "exact" else np.full(d, 1.0 / np.sqrt(d))
    amp = 0
    if d == 2:
        for k, sign in enumerate((1, -1)):
            amp = amp + w[k] * np.kron(cat(alpha, sign, dim, tail_tol=None).amp, coherent(sign * alpha, dim, tail_tol=None).amp)
    elif d == 4:
        for k in range(4):
            amp = amp + w[k] * np.kron(cv_qudit(k, p, tail_tol=None).amp, complementary_qudit(k, p, tail_tol=None).amp)
    else:
        raise InvalidArgumentError("closed form exists for d = 2 and d = 4")
    return Ket(CompositeSpace.of(dim, dim), amp)


def analytic_cluster3(alpha, dim, weights="exact"):
    """``sum_k w_k |k~_4>_A |k_4>_B |k~_4>_C`` with exact or equal (1/2) weights."""
    p = CatQuditParams(alpha, dim=dim)
    w = class_weights(alpha, dim, 4) if weights == "exact" else np.full(4, 0.5)
    amp = 0
    for k in range(4):
        ck = complementary_qudit(k, p, tail_tol=None).amp
        amp = amp + w[k] * np.kron(np.kron(ck, cv_qudit(k, p, tail_tol=None).amp), ck)
    return Ket(CompositeSpace.of(dim, dim, dim), amp)


# -- Jaynes-Cummings model ----------------------------------------------------


@dataclass(frozen=True)
class JCParams:
    """Two cavities exchanging photons with a transmon; frequencies in GHz."""

    omega_A: float = 5.5
    omega_B: float = 8.5
    omega_M: float = 4.0
    lambda_AM: float = 0.12
    lambda_BM: float = 0.15
    K_M: float = -0.6
    transmon_levels: int = 3
    unit_convention: str = "angular"
    anharmonic_form: str = "n2"

    def __post_init__(self):
        if int(self.transmon_levels) != self.transmon_levels or self.transmon_levels < 2:
            raise InvalidArgumentError("transmon_levels must be an integer >= 2")
        if self.unit_convention not in UNIT_CONVENTIONS:
            raise InvalidArgumentError(f"unit_convention must be one of {UNIT_CONVENTIONS}")
        if self.anharmonic_form not in ANHARMONIC_FORMS:
            raise InvalidArgumentError(f"anharmonic_form must be one of {ANHARMONIC_FORMS}")

    @property
    def scale(self):
        """Factor turning GHz into the internal frequency unit."""
        return 2.0 * np.pi if self.unit_convention == "angular" else 1.0


FIG2_PARAMS = JCParams()


def jc_space(dims=(24, 24), transmon_levels=3):
    return CompositeSpace.of(dims[0], dims[1], transmon_levels, kinds=("cavity", "cavity", "transmon"))


def jc_hamiltonian(params, space=None):
    """``sum w_c n_c + K_M n_M^2 + sum lambda_c (a_M^dag a_c + a_M a_c^dag)``.

    The operator carries ``n_A + n_B + n_M`` as its conserved charge, so the
    propagator diagonalizes one excitation-number block at a time.
    """
    space = space or jc_space(transmon_levels=params.transmon_levels)
    if len(space) != 3 or space.dims[2] != params.transmon_levels:
        raise SignatureError("JC space must be cavity A x cavity B x transmon")
    na, nb, nm = space.dims
    s = params.scale
    ia, ib, im = np.eye(na), np.eye(nb), np.eye(nm)
    aA = np.kron(np.kron(annihilation(na).mat, ib), im)
    aB = np.kron(np.kron(ia, annihilation(nb).mat), im)
    aM = np.kron(np.kron(ia, ib), annihilation(nm).mat)
    grids = np.meshgrid(np.arange(na), np.arange(nb), np.arange(nm), indexing="ij")
    nA, nB, nM = (g.reshape(-1).astype(float) for g in grids)
    anh = nM**2 if params.anharmonic_form == "n2" else nM * (nM - 1)
    diag = s * (params.omega_A * nA + params.omega_B * nB + params.omega_M * nM + params.K_M * anh)
    hop = params.lambda_AM * (aM.conj().T @ aA) + params.lambda_BM * (aM.conj().T @ aB)
    mat = np.diag(diag.astype(complex)) + s * (hop + hop.conj().T)
    return LinearOperator(space, mat, {"hermitian"}, conserved=nA + nB + nM)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time grid (us), complex observable series and optional snapshots of rho_AB."""

    times: np.ndarray
    series: dict
    snapshots: dict = field(default_factory=dict)
    frame: str = "bare"

    def __post_init__(self):
        for name, v in self.series.items():
            if len(v) != len(self.times):
                raise InvalidArgumentError(f"series {name!r} length differs from the time grid")


class JCModel:
    """Propagates ``|alpha>_A |alpha>_B |g>_M`` under :func:`jc_hamiltonian`.

    ``frame="bare"`` strips the bare free rotation ``exp(i (w_A n_A + w_B n_B +
    w_M n_M) t)`` from the lab-frame state; at integer multiples of every mode
    period the two frames coincide.
    """

    def __init__(self, params, alpha, dims=(24, 24), frame="bare", use_blocks=True, tail_tol=1e-6):
        if frame not in ("bare", "lab"):
            raise InvalidArgumentError("frame must be 'bare' or 'lab'")
        self.params = params
        self.alpha = alpha
        self.frame = frame
        self.space = jc_space(dims, params.transmon_levels)
        self.H = jc_hamiltonian(params, self.space)
        self.prop = propagator(self.H, use_blocks=use_blocks)
        a = coherent(alpha, dims[0], tail_tol=1e-8)
        b = coherent(alpha, dims[1], tail_tol=1e-8)
        g = np.zeros(params.transmon_levels)
        g[0] = 1.0
        self.psi0 = Ket(self.space, np.kron(np.kron(a.amp, b.amp), g))
        if tail_tol is not None:
            check_tail(self.psi0, tail_tol)
        self.tail_tol = tail_tol
        na, nb, nm = self.space.dims
        grids = np.meshgrid(np.arange(na), np.arange(nb), np.arange(nm), indexing="ij")
        s = params.scale
        self._free = s * (params.omega_A * grids[0] + params.omega_B * grids[1] + params.omega_M * grids[2]).reshape(-1)

    def amplitudes(self, times_us):
        """Flat state vectors, shape ``(len(times), dim)``."""
        t_ns = np.asarray(times_us, dtype=float).reshape(-1) * NS_PER_US
        out = self.prop.apply_many(t_ns, self.psi0.amp)
        if self.frame == "bare":
            out *= np.exp(-1j * np.outer(t_ns, self._free))
        return out

    def state(self, t_us):
        ket = Ket(self.space, self.amplitudes([t_us])[0])
        if self.tail_tol is not None:
            check_tail(ket, self.tail_tol)
        return ket

    def tensors(self, times_us):
        return self.amplitudes(times_us).reshape((-1,) + self.space.dims)

    def rho_ab(self, t_us):
        return partial_trace(self.state(t_us), [0, 1])


def _batched(times, chunk):
    times = np.asarray(times, dtype=float).reshape(-1)
    for start in range(0, times.size, chunk):
        yield start, times[start:start + chunk]


def jc_trajectory(params, alpha, t_grid, snapshot_times=(), dims=(24, 24), frame="bare", chunk=256, model=None):
    """Series of ``<a_A>``, ``<a_B>``, ``<n_M>`` and ``<N_tot>`` plus ``rho_AB`` snapshots.

    Times are in microseconds. Snapshots are tail-checked.
    """
    model = model or JCModel(params, alpha, dims, frame=frame)
    t_grid = np.asarray(t_grid, dtype=float).reshape(-1)
    na, nb, nm = model.space.dims
    sa, sb, sm = np.sqrt(np.arange(1, na)), np.sqrt(np.arange(1, nb)), np.arange(nm)
    series = {k: np.empty(t_grid.size, dtype=complex) for k in ("aA", "aB", "nM", "Ntot")}
    for start, ts in _batched(t_grid, chunk):
        psi = model.tensors(ts)
        sl = slice(start, start + ts.size)
        series["aA"][sl] = np.einsum("tabm,tabm,a->t", psi[:, :-1].conj(), psi[:, 1:], sa)
        series["aB"][sl] = np.einsum("tabm,tabm,b->t", psi[:, :, :-1].conj(), psi[:, :, 1:], sb)
        pops = np.abs(psi) ** 2
        series["nM"][sl] = np.einsum("tabm,m->t", pops, sm)
        series["Ntot"][sl] = (
            np.einsum("tabm,a->t", pops, np.arange(na)) + np.einsum("tabm,b->t", pops, np.arange(nb)) + series["nM"][sl]
        )
    snaps = {}
    for t in snapshot_times:
        snaps[float(t)] = model.rho_ab(float(t))
    return Trajectory(t_grid, series, snaps, model.frame)


@dataclass(frozen=True, eq=False)
class ProjectedStates:
    """Conditional reduced states after projecting one cavity of ``rho_AB``.

    ``rho_A``: A given B projected on ``|alpha>``. ``rho_B[k]``: B given A in Fock
    ``|k>``. Probabilities are stored alongside; omitted branches are absent.
    """

    rho_A: DensityMatrix | None
    prob_A: float
    rho_B: dict
    prob_B: dict


def jc_projected_states(rho_ab, alpha, fock_levels=range(4)):
    """Project B on ``|alpha>`` and, separately, A on Fock ``|k>``."""
    if len(rho_ab.space) != 2:
        raise SignatureError("expected a two-cavity density matrix")
    na, nb = rho_ab.dims
    r = rho_ab.mat.reshape(na, nb, na, nb)
    al = coherent(alpha, nb, tail_tol=None).amp
    ra = np.einsum("b,abcd,d->ac", al.conj(), r, al)
    pa = float(np.trace(ra).real)
    rho_a = DensityMatrix.from_unnormalized(rho_ab.space.select([0]), ra) if pa > 1e-12 else None
    rho_b, prob_b = {}, {}
    for k in fock_levels:
        rb = r[k, :, k, :]
        pk = float(np.trace(rb).real)
        if pk > 1e-12:
            rho_b[k] = DensityMatrix.from_unnormalized(rho_ab.space.select([1]), rb)
            prob_b[k] = pk
    return ProjectedStates(rho_a, pa, rho_b, prob_b)


def find_first_revival(times, amplitude, alpha, collapse_frac=0.05, peak_frac=0.1):
    """Time of the first revival peak of ``|<a>|``.

    The signal must first collapse below ``collapse_frac * |alpha|``; the
    revival is the highest point of the first excursion that rises back above
    ``peak_frac * |alpha|``. Returns ``(time, height)`` or ``None``.
    """
    times = np.asarray(times, dtype=float)
    amp = np.abs(np.asarray(amplitude))
    low = np.flatnonzero(amp < collapse_frac * abs(alpha))
    if low.size == 0:
        return None
    after = low[0]
    high = np.flatnonzero(amp[after:] >= peak_frac * abs(alpha))
    if high.size == 0:
        return None
    start = after + high[0]
    below = np.flatnonzero(amp[start:] < peak_frac * abs(alpha))
    stop = start + below[0] if below.size else amp.size
    i = start + int(np.argmax(amp[start:stop]))
    return float(times[i]), float(amp[i])


def calibrate_units(params, alpha, dims=(24, 24), target_us=160.0, t_max_us=400.0, step_us=0.25):
    """Pick the unit convention whose first ``|<a_B>|`` revival lands nearest ``target_us``.

    Returns ``(convention, {convention: revival time or None})``.
    """
    times = np.arange(0.0, t_max_us + step_us / 2, step_us)
    found = {}
    for conv in UNIT_CONVENTIONS:
        p = replace(params, unit_convention=conv)
        model = JCModel(p, alpha, dims, frame="lab", tail_tol=None)
        traj = jc_trajectory(p, alpha, times, dims=dims, model=model)
        rev = find_first_revival(times, traj.series["aB"], alpha)
        found[conv] = None if rev is None else rev[0]
        log.info("unit convention %s: first revival %s", conv, found[conv])
    scored = [(abs(t - target_us), c) for c, t in found.items() if t is not None]
    if not scored:
        return params.unit_convention, found
    return min(scored)[1], found


def refine_revival(model, t_guess_us, half_width_us=10.0, step_us=0.01):
    """Re-locate the ``|<a_B>|`` maximum on a fine grid around ``t_guess_us``."""
    times = np.arange(t_guess_us - half_width_us, t_guess_us + half_width_us + step_us / 2, step_us)
    traj = jc_trajectory(model.params, model.alpha, times, model=model)
    i = int(np.argmax(np.abs(traj.series["aB"])))
    return float(times[i]), float(np.abs(traj.series["aB"][i]))


def projected_fidelity_scan(model, times_us, target_a, proj_b, chunk=512):
    """``<t|rho_A(t)|t>`` with ``rho_A`` conditioned on B projected onto ``proj_b``.

    Uses the batch kernel; returns ``(fidelity, probability)`` arrays.
    """
    times_us = np.asarray(times_us, dtype=float).reshape(-1)
    fid = np.empty(times_us.size)
    prob = np.empty(times_us.size)
    target_a = np.asarray(getattr(target_a, "amp", target_a), dtype=complex)
    proj_b = np.asarray(getattr(proj_b, "amp", proj_b), dtype=complex)
    for start, ts in _batched(times_us, chunk):
        f, p = kernels.projected_overlap(model.tensors(ts), proj_b, target_a)
        fid[start:start + ts.size] = f
        prob[start:start + ts.size] = p
    return fid, prob


def effective_kerr(params, dims=(6, 6)):
    """Dressed-spectrum Kerr coefficients ``(K_AB, K_A, K_B)`` in internal units.

    Each bare state ``|a, b, g>`` is matched to the eigenstate it overlaps most;
    ``K_AB = E11 - E10 - E01 + E00`` and ``K_c = (E2 - 2 E1 + E0) / 2``.
    """
    space = jc_space(dims, params.transmon_levels)
    e, v = np.linalg.eigh(jc_hamiltonian(params, space).mat)
    nm = params.transmon_levels

    def level(a, b):
        i = (a * dims[1] + b) * nm
        return e[int(np.argmax(np.abs(v[i]) ** 2))]

    e00, e10, e01, e11 = level(0, 0), level(1, 0), level(0, 1), level(1, 1)
    k_ab = e11 - e10 - e01 + e00
    k_a = (level(2, 0) - 2 * e10 + e00) / 2
    k_b = (level(0, 2) - 2 * e01 + e00) / 2
    return float(k_ab), float(k_a), float(k_b)


@dataclass(frozen=True, eq=False)
class RevivalStudy:
    """Outcome of :func:`jc_revival_study`; times in microseconds."""

    unit_convention: str
    calibration: dict
    trajectory: Trajectory
    tau_r: float
    revival_height: float
    t0: float
    f_star: float
    scan_times: np.ndarray
    scan_fidelity: np.ndarray
    rho_ab: DensityMatrix
    projected: ProjectedStates
    fock_fidelity: dict
    mirror_fidelity: dict
    tail_masses: dict


def jc_revival_study(
    params,
    alpha,
    dims=(24, 24),
    calibrate=True,
    t_max_us=250.0,
    t_step_us=0.25,
    scan_step_ns=2.0,
    scan_window=0.1,
    frame="bare",
):
    """Trajectory, first revival, fidelity peak and projected states of the JC model.

    With ``calibrate`` the unit convention is chosen by :func:`calibrate_units`.
    The revival is refined on a 2 ns grid; ``t0`` is the fidelity maximum of
    ``rho_A`` (B projected on ``|alpha>``) against ``|0_4>`` within
    ``tau_r * (1/4 +/- scan_window)``. The four A-Fock-projected B states at
    ``t0`` are compared with ``|i^k alpha>`` and, as a diagnostic, with the
    mirrored ``|i^-k alpha>``.
    """
    calibration = {}
    if calibrate:
        conv, calibration = calibrate_units(params, alpha, dims)
        params = replace(params, unit_convention=conv)
    model = JCModel(params, alpha, dims, frame=frame)
    times = np.arange(0.0, t_max_us + t_step_us / 2, t_step_us)
    traj = jc_trajectory(params, alpha, times, model=model)
    rev = find_first_revival(times, traj.series["aB"], alpha)
    if rev is None:
        raise NumericalError(f"no revival of <a_B> within {t_max_us} us")
    tau_r, height = refine_revival(model, rev[0], half_width_us=2 * t_step_us, step_us=scan_step_ns / NS_PER_US)
    step = scan_step_ns / NS_PER_US
    scan = np.arange(tau_r * (0.25 - scan_window), tau_r * (0.25 + scan_window), step)
    cat_params = CatQuditParams(alpha, dim=dims[0])
    fid, _ = projected_fidelity_scan(model, scan, cv_qudit(0, cat_params, tail_tol=None), coherent(alpha, dims[1], tail_tol=None))
    i = int(np.argmax(fid))
    t0 = float(scan[i])
    state = model.state(t0)
    tails = check_tail(state, model.tail_tol if model.tail_tol is not None else np.inf)
    rho = partial_trace(state, [0, 1])
    proj = jc_projected_states(rho, alpha)
    b_params = CatQuditParams(alpha, dim=dims[1])
    fock = {k: fidelity_pure(complementary_qudit(k, b_params, tail_tol=None), r) for k, r in proj.rho_B.items()}
    mirror = {k: fidelity_pure(complementary_qudit(-k % 4, b_params, tail_tol=None), r) for k, r in proj.rho_B.items()}
    return RevivalStudy(
        unit_convention=params.unit_convention,
        calibration=calibration,
        trajectory=traj,
        tau_r=tau_r,
        revival_height=height,
        t0=t0,
        f_star=float(fid[i]),
        scan_times=scan,
        scan_fidelity=fid,
        rho_ab=rho,
        projected=proj,
        fock_fidelity=fock,
        mirror_fidelity=mirror,
        tail_masses={str(k): v for k, v in tails.items()},
    )
