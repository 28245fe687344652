"""Batch front end: ``catsim <experiment> --config <path> [--out <prefix>] [--seed N]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical or truncation
failure. Every run writes ``<prefix>_metadata.json`` next to its CSV files;
if a run fails, whatever it already wrote is removed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
import psutil
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__, kernels
from .errors import CatsimError, ConfigError
from .hilbert import check_tail, default_cutoff, fidelity_pure

log = logging.getLogger("catsim")

EXPERIMENTS = ("ideal2", "ideal3", "mbqc", "jc", "wigner")
CSV_SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TRAJECTORY_COLUMNS = ("time", "re_aA", "im_aA", "re_aB", "im_aB", "nM")
BRANCH_COLUMNS = ("parity_B", "parity_A", "coherent_C", "probability", "overlap", "expected_gate")
WIGNER_COLUMNS = ("x", "p", "w")


# -- configuration -------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class AnglesConfig(_Strict):
    theta1: float = 0.0
    theta2: float = 0.0


class GridConfig(_Strict):
    x_range: Tuple[float, float] = (-5.0, 5.0)
    p_range: Tuple[float, float] = (-5.0, 5.0)
    resolution: int = Field(101, ge=2, le=2001)

    @model_validator(mode="after")
    def _ordered(self):
        for name in ("x_range", "p_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy low < high")
        return self


class JCConfig(_Strict):
    omega_A: float = 5.5
    omega_B: float = 8.5
    omega_M: float = 4.0
    lambda_AM: float = 0.12
    lambda_BM: float = 0.15
    K_M: float = -0.6
    transmon_levels: int = Field(3, ge=2, le=6)
    unit_convention: Literal["auto", "plain", "angular"] = "auto"
    anharmonic_form: Literal["n2", "n(n-1)"] = "n2"
    frame: Literal["bare", "lab"] = "bare"
    t_max_us: float = Field(250.0, gt=0)
    t_step_us: float = Field(0.25, gt=0)
    scan_step_ns: float = Field(2.0, gt=0)
    scan_window: float = Field(0.1, gt=0, lt=0.25)
    wigner: bool = False


class StateConfig(_Strict):
    kind: Literal["vacuum", "fock", "coherent", "cat", "qudit", "complementary"] = "coherent"
    n: int = Field(0, ge=0)
    k: int = Field(0, ge=0, le=3)
    sign: Literal["+", "-"] = "+"


class RunConfig(_Strict):
    experiment: Optional[Literal["ideal2", "ideal3", "mbqc", "jc", "wigner"]] = None
    alpha: float = Field(2.0, gt=0, le=8)
    d: Literal[1, 2, 4] = 4
    dim: Optional[int] = Field(None, ge=2, le=64)
    angles: Union[AnglesConfig, List[AnglesConfig]] = AnglesConfig()
    source: Literal["analytic", "ideal"] = "analytic"
    convention: Literal["tabulated", "derived"] = "tabulated"
    ordering: Literal["preferred", "alternative"] = "preferred"
    shots: int = Field(0, ge=0, le=10_000_000)
    tail_tol: float = Field(1e-6, gt=0, lt=1)
    jc: JCConfig = JCConfig()
    grid: GridConfig = GridConfig()
    state: StateConfig = StateConfig()
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    out: Optional[str] = None

    @model_validator(mode="after")
    def _fill(self):
        if self.dim is None:
            self.dim = default_cutoff(self.alpha)
        return self


def parse_config(text, experiment=None):
    """Validate YAML text into a :class:`RunConfig`.

    All problems are collected into one :class:`ConfigError`.
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"]) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping of keys to values"])
    problems = []
    if experiment is not None:
        if data.get("experiment", experiment) != experiment:
            problems.append(f"experiment: config says {data['experiment']!r} but {experiment!r} was requested")
        data.setdefault("experiment", experiment)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"]) or "<root>"
            problems.append(f"{loc}: {err['msg']}")
        raise ConfigError(problems) from exc
    if cfg.experiment is None:
        problems.append("experiment: missing")
    if problems:
        raise ConfigError(problems)
    return cfg


# -- output --------------------------------------------------------------------


def fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


class OutputSet:
    """Files for one run; written atomically and removed together on failure."""

    def __init__(self, prefix):
        self.prefix = Path(prefix)
        self.written = []

    def path(self, name, suffix):
        return self.prefix.parent / f"{self.prefix.name}_{name}{suffix}"

    def _write(self, target, text):
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(target)
        return target

    def csv(self, name, columns, rows, comments=()):
        lines = [f"# {c}" for c in comments]
        lines.append(",".join(columns))
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
        return self._write(self.path(name, ".csv"), "\n".join(lines) + "\n")

    def json(self, name, payload):
        return self._write(self.path(name, ".json"), json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def discard(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(f"cannot serialize {type(v).__name__}")


def max_workers():
    """Worker cap from ``CATSIM_MAX_WORKERS``; defaults to the physical core count."""
    env = os.environ.get("CATSIM_MAX_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError([f"CATSIM_MAX_WORKERS: expected an integer, got {env!r}"]) from None
        if n < 1:
            raise ConfigError(["CATSIM_MAX_WORKERS: must be >= 1"])
        return n
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


# -- experiments -------------------------------------------------------------------


def _tails(state, tol):
    return {str(k): v for k, v in check_tail(state, tol).items()}


def run_ideal2(cfg, out, meta):
    from .dynamics import analytic_cluster2, ideal_cluster2

    rows = []
    evolved = ideal_cluster2(cfg.alpha, cfg.d, dim=cfg.dim, tail_tol=cfg.tail_tol)
    meta["tail_masses"] = _tails(evolved, cfg.tail_tol)
    if cfg.d == 1:
        from .hilbert import tensor
        from .states import coherent

        a = coherent(cfg.alpha, cfg.dim, tail_tol=None)
        rows.append(("product", "exact", fidelity_pure(tensor(a, a), evolved)))
    else:
        for weights in ("exact", "equal"):
            rows.append((f"cluster_d{cfg.d}", weights, fidelity_pure(analytic_cluster2(cfg.alpha, cfg.d, cfg.dim, weights), evolved)))
    out.csv("fidelity", ("target", "weights", "fidelity"), rows)
    meta["fidelity"] = rows[0][2]


def run_ideal3(cfg, out, meta):
    from .dynamics import analytic_cluster3, ideal_cluster3

    evolved = ideal_cluster3(cfg.alpha, dim=cfg.dim, tail_tol=cfg.tail_tol)
    meta["tail_masses"] = _tails(evolved, cfg.tail_tol)
    rows = [("cluster3", w, fidelity_pure(analytic_cluster3(cfg.alpha, cfg.dim, w), evolved)) for w in ("exact", "equal")]
    out.csv("fidelity", ("target", "weights", "fidelity"), rows)
    meta["fidelity"] = rows[0][2]


def run_mbqc(cfg, out, meta):
    from .mbqc import ProtocolAngles, cluster_source, run_logical_protocol, sample_protocol, verify_protocol

    angle_list = cfg.angles if isinstance(cfg.angles, list) else [cfg.angles]
    angle_list = [ProtocolAngles(a.theta1, a.theta2) for a in angle_list]
    cluster = cluster_source(cfg.alpha, cfg.source, cfg.dim)
    meta["tail_masses"] = _tails(cluster, cfg.tail_tol)

    def one(angles):
        return run_logical_protocol(cfg.alpha, angles, dim=cfg.dim, convention=cfg.convention, ordering=cfg.ordering, cluster=cluster)

    with ThreadPoolExecutor(max_workers=min(meta["max_workers"], len(angle_list))) as pool:
        results = list(pool.map(one, angle_list))
    rows, reports = [], []
    multi = len(angle_list) > 1
    for angles, records in zip(angle_list, results):
        for r in records:
            row = (r.parity_B, r.parity_A, r.coherent_C, r.prob, r.overlap, r.expected_gate.name)
            rows.append(((angles.theta1, angles.theta2) + row) if multi else row)
        rep = verify_protocol(records, cfg.alpha, cfg.convention)
        reports.append({"theta1": angles.theta1, "theta2": angles.theta2, "min": rep["min"], "mean": rep["mean"],
                        "failing": [list(k) for k in rep["failing"]], "total_probability": rep["total_probability"]})
    cols = (("theta1", "theta2") + BRANCH_COLUMNS) if multi else BRANCH_COLUMNS
    out.csv("branches", cols, rows)
    meta["verification"] = reports
    if cfg.shots:
        if cfg.seed is None:
            raise ConfigError(["seed: required when shots > 0"])
        idx = sample_protocol(results[0], cfg.shots, cfg.seed)
        counts = np.bincount(idx, minlength=len(results[0]))
        srows = [(r.parity_B, r.parity_A, r.coherent_C, int(c)) for r, c in zip(results[0], counts)]
        out.csv("samples", ("parity_B", "parity_A", "coherent_C", "count"), srows)


def _jc_params(cfg):
    from .dynamics import JCParams

    j = cfg.jc
    conv = "angular" if j.unit_convention == "auto" else j.unit_convention
    return JCParams(j.omega_A, j.omega_B, j.omega_M, j.lambda_AM, j.lambda_BM, j.K_M, j.transmon_levels, conv, j.anharmonic_form)


def run_jc(cfg, out, meta):
    from .analysis import GridSpec, wigner
    from .dynamics import jc_revival_study

    j = cfg.jc
    study = jc_revival_study(
        _jc_params(cfg),
        cfg.alpha,
        (cfg.dim, cfg.dim),
        calibrate=j.unit_convention == "auto",
        t_max_us=j.t_max_us,
        t_step_us=j.t_step_us,
        scan_step_ns=j.scan_step_ns,
        scan_window=j.scan_window,
        frame=j.frame,
    )
    tr = study.trajectory
    s = tr.series
    rows = zip(tr.times, s["aA"].real, s["aA"].imag, s["aB"].real, s["aB"].imag, s["nM"].real)
    out.csv("trajectory", TRAJECTORY_COLUMNS, rows, comments=(f"time in us; expectation values in the {tr.frame} frame",))
    out.csv("fidelity", ("time", "fidelity"), zip(study.scan_times, study.scan_fidelity))
    meta["unit_convention"] = study.unit_convention
    meta["calibration"] = study.calibration
    meta["tail_masses"] = study.tail_masses
    meta["results"] = {
        "tau_r_us": study.tau_r,
        "revival_height": study.revival_height,
        "t0_us": study.t0,
        "t0_over_tau_r": study.t0 / study.tau_r,
        "f_star": study.f_star,
        "max_abs_nM": float(np.abs(s["nM"]).max()),
        "fock_projected_fidelity": {str(k): v for k, v in study.fock_fidelity.items()},
        "fock_projected_fidelity_mirror": {str(k): v for k, v in study.mirror_fidelity.items()},
    }
    if j.wigner:
        grid = GridSpec(cfg.grid.x_range, cfg.grid.p_range, cfg.grid.resolution)
        panels = {"A": study.projected.rho_A}
        panels.update({f"B{k}": r for k, r in study.projected.rho_B.items()})
        for name, rho in panels.items():
            _write_wigner(out, f"wigner_{name}", wigner(rho, grid))


def _write_wigner(out, name, wg):
    rows = ((x, p, wg.values[i, j]) for i, x in enumerate(wg.x) for j, p in enumerate(wg.p))
    comments = [f"{k}: {v}" for k, v in sorted(wg.metadata.items()) if k != "backend"]
    out.csv(name, WIGNER_COLUMNS, rows, comments=comments)


def _wigner_state(cfg):
    from .hilbert import basis
    from .states import CatQuditParams, cat, coherent, complementary_qudit, cv_qudit

    st, dim = cfg.state, cfg.dim
    if st.kind == "vacuum":
        return basis(dim, 0)
    if st.kind == "fock":
        return basis(dim, st.n)
    if st.kind == "coherent":
        return coherent(cfg.alpha, dim)
    if st.kind == "cat":
        return cat(cfg.alpha, 1 if st.sign == "+" else -1, dim)
    params = CatQuditParams(cfg.alpha, dim=dim)
    return cv_qudit(st.k, params) if st.kind == "qudit" else complementary_qudit(st.k, params)


def run_wigner(cfg, out, meta):
    from .analysis import GridSpec, wigner

    wg = wigner(_wigner_state(cfg), GridSpec(cfg.grid.x_range, cfg.grid.p_range, cfg.grid.resolution))
    _write_wigner(out, "wigner", wg)
    meta["wigner"] = dict(wg.metadata, integral=wg.integral())


RUNNERS = {"ideal2": run_ideal2, "ideal3": run_ideal3, "mbqc": run_mbqc, "jc": run_jc, "wigner": run_wigner}


def run(cfg, prefix=None):
    """Execute one configured experiment; returns the list of written paths."""
    prefix = prefix or cfg.out or f"catsim_{cfg.experiment}"
    out = OutputSet(prefix)
    workers = max_workers()
    meta = {
        "config": cfg.model_dump(mode="json"),
        "tool_version": __version__,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "backend": kernels.backend(),
        "max_workers": workers,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    kernels.limit_threads(workers)
    start = time.perf_counter()
    try:
        RUNNERS[cfg.experiment](cfg, out, meta)
        meta["wall_time_s"] = time.perf_counter() - start
        log.info("%s finished in %.2f s on %s", cfg.experiment, meta["wall_time_s"], meta["backend"])
        out.json("metadata", meta)
    except BaseException:
        out.discard()
        raise
    return list(out.written)


def build_parser():
    ap = argparse.ArgumentParser(prog="catsim", description="Cat-qudit cluster state and logical MBQC simulations.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    ap.add_argument("--out", help="output path prefix (overrides the config)")
    ap.add_argument("--seed", type=int, help="64-bit seed for sampling modes (overrides the config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"config: cannot read {args.config}: {exc.strerror}"]) from exc
        cfg = parse_config(text, args.experiment)
        if args.seed is not None:
            try:
                cfg = RunConfig.model_validate(dict(cfg.model_dump(), seed=args.seed))
            except ValidationError as exc:
                raise ConfigError([f"seed: {e['msg']}" for e in exc.errors()]) from exc
        paths = run(cfg, args.out)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except CatsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
