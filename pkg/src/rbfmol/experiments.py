"""Scenario registry, configuration and batch runner for the surface diffusion experiments.

A scenario is a :class:`ScenarioConfig` preset. Single runs go through
:func:`run_scenario`, which samples the point sets, assembles the collocation
system and then computes the spectrum and/or integrates in time. Grid
scenarios (the accuracy tables and the cyclide grid) go through
:func:`run_table`, which calls :func:`run_scenario` once per cell. All
outputs are plain CSV/JSON/TOML written atomically under
``<out>/<scenario>/``.
"""

from __future__ import annotations

import copy
import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import tomli
import tomli_w

from ._io import atomic_write_text, csv_text, json_text
from .geometry import (
    fill_and_separation,
    get_surface,
    random_surface_points,
    sample_narrow_band,
    sample_quasi_uniform,
    torus_parametric_grid,
)
from .mol_core import (
    assemble,
    evaluate_solution,
    integrate,
    interpolate_initial,
    spectrum_report,
    write_step_log,
)
from .special_kernels import SobolevKernel
from .surface_ops import (
    EllipticProblem,
    anisotropic_tensor_example3,
    example1_exact_solution,
    identity_tensor,
    manufactured_forcing,
)

__all__ = [
    "ConfigError",
    "RunReport",
    "SCENARIOS",
    "ScenarioConfig",
    "build_problem",
    "load_config",
    "make_config",
    "run_scenario",
    "run_table",
    "sample_point_sets",
]

log = logging.getLogger(__name__)

MODES = ("both", "spectrum-only", "solve")
CENTER_KINDS = ("quasi-uniform", "narrow-band", "torus-grid")
TENSORS = ("identity", "anisotropic-custom")
SOLUTIONS = ("example1", "torus-source", "orthocircle-source")
ORTHOCIRCLE_SOURCE = np.array([-0.01, 0.003, 1.15])


class ConfigError(ValueError):
    """Invalid scenario configuration (raised before any computation)."""


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one run or one table.

    ``n_X`` wins over ``ratio`` when both are set. The ``*_list`` fields are
    only used by :func:`run_table`; a grid scenario's table layout is
    rows ``n_X`` by columns ``m`` unless ``n_Z_list`` is given, in which case
    it is rows ``n_Z`` by columns ``n_X``.
    """

    scenario: str = "custom"
    surface: str = "sphere"
    m: int = 6
    n_Z: int = 658
    n_X: Optional[int] = None
    ratio: Optional[float] = None
    seed: int = 0
    tensor: str = "identity"
    b: float = 3.0
    solution: str = "example1"
    centers: str = "quasi-uniform"
    collocation: str = "quasi-uniform"
    band_delta: float = 0.25
    t0: float = 0.0
    t1: float = 1.0
    rtol: float = 1e-3
    atol: float = 1e-6
    fixed_dt: Optional[float] = None
    mode: str = "both"
    eval_n: int = 5000
    n_output_times: int = 10
    snapshot_times: list = field(default_factory=list)
    rank_policy: str = "auto"
    max_steps: int = 200_000
    grid: bool = False
    m_list: list = field(default_factory=list)
    n_X_list: list = field(default_factory=list)
    n_Z_list: list = field(default_factory=list)
    out: str = "out"
    jobs: int = 1

    @property
    def resolved_n_X(self) -> int:
        if self.n_X is not None:
            return int(self.n_X)
        if self.ratio is not None:
            return int(round(self.ratio * self.n_Z))
        return int(self.n_Z)

    @property
    def t_span(self):
        return (float(self.t0), float(self.t1))

    def validate(self) -> "ScenarioConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(int(self.m) == self.m and self.m >= 4, f"m must be an integer >= 4, got {self.m}")
        need(self.n_Z >= 4, "n_Z must be at least 4")
        need(self.ratio is None or self.ratio >= 1, "oversampling ratio must be >= 1")
        need(self.resolved_n_X >= self.n_Z, f"n_X={self.resolved_n_X} < n_Z={self.n_Z}")
        need(self.t0 < self.t1, f"invalid time span ({self.t0}, {self.t1})")
        need(self.rtol > 0 and self.atol > 0, "tolerances must be positive")
        need(self.fixed_dt is None or self.fixed_dt > 0, "fixed_dt must be positive")
        need(self.mode in MODES, f"mode must be one of {MODES}")
        need(self.centers in CENTER_KINDS, f"centers must be one of {CENTER_KINDS}")
        need(self.collocation in ("quasi-uniform", "torus-grid"), "collocation must be quasi-uniform or torus-grid")
        need(self.tensor in TENSORS, f"tensor must be one of {TENSORS}")
        need(self.solution in SOLUTIONS, f"solution must be one of {SOLUTIONS}")
        need(self.jobs >= 1, "jobs must be >= 1")
        need(self.eval_n >= 1 and self.n_output_times >= 1, "eval_n and n_output_times must be positive")
        need(all(self.t0 <= t <= self.t1 for t in self.snapshot_times), "snapshot times outside t span")
        need(self.band_delta > 0, "band_delta must be positive")
        try:
            get_surface(self.surface)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        for kind, n in (("centers", self.n_Z), ("collocation", self.resolved_n_X)):
            if getattr(self, kind) == "torus-grid":
                need(self.surface == "torus", "torus-grid sampling needs the torus surface")
                need(math.isqrt(n) ** 2 == n, f"torus-grid needs a square count, got {n}")
        return self

    def to_toml(self) -> str:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        return tomli_w.dumps(d)


def make_config(scenario: str = "custom", **overrides) -> ScenarioConfig:
    """Preset for ``scenario`` with keyword overrides (``None`` values ignored)."""
    if scenario != "custom" and scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    base = dict(SCENARIOS.get(scenario, {}))
    base["scenario"] = scenario
    known = {f.name for f in fields(ScenarioConfig)}
    for k, v in overrides.items():
        if k not in known:
            raise ConfigError(f"unknown config key {k!r}")
        if v is not None:
            base[k] = v
    if "ratio" in overrides and overrides["ratio"] is not None and overrides.get("n_X") is None:
        base.pop("n_X", None)
    return ScenarioConfig(**base)


def load_config(path, **overrides) -> ScenarioConfig:
    """Read a TOML config file, then apply overrides."""
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    scenario = data.pop("scenario", "custom")
    cfg = make_config(scenario, **data)
    known = {f.name for f in fields(ScenarioConfig)}
    for k, v in overrides.items():
        if k not in known:
            raise ConfigError(f"unknown config key {k!r}")
        if v is not None:
            setattr(cfg, k, v)
    if overrides.get("ratio") is not None and overrides.get("n_X") is None:
        cfg.n_X = None
    return cfg


SCENARIOS = {
    "ex1-spectra": dict(surface="sphere", m=8, n_Z=658, n_X=987, mode="spectrum-only", grid=True,
                        m_list=[4, 6, 8], n_X_list=[658, 987]),
    "ex1-table": dict(surface="sphere", m=6, n_Z=658, n_X=1316, grid=True,
                      m_list=[4, 5, 6, 7, 8], n_X_list=[658, 987, 1316, 2632]),
    "ex1-timing": dict(surface="sphere", m=8, n_Z=658, n_X=987, grid=True,
                       m_list=[4, 6, 8], n_X_list=[658, 987, 2632]),
    "ex2-table": dict(surface="sphere", m=6, n_Z=658, n_X=987, centers="narrow-band", grid=True,
                      m_list=[4, 5, 6, 7, 8], n_X_list=[658, 987, 1316, 2632]),
    "ex3-grid": dict(surface="dupin_cyclide", m=6, n_Z=744, n_X=1320, tensor="anisotropic-custom",
                     eval_n=8000, grid=True, n_Z_list=[314, 744, 1320],
                     n_X_list=[744, 1320, 2976, 5296]),
    "ex4-torus": dict(surface="torus", m=6, n_Z=784, n_X=1156, b=0.0, solution="torus-source",
                      centers="torus-grid", collocation="torus-grid", t1=10.0,
                      snapshot_times=[1.0, 2.0, 5.0, 10.0]),
    "ex4-orthocircle": dict(surface="orthocircle", m=4, n_Z=3312, n_X=5532, b=0.0,
                            solution="orthocircle-source", t1=10.0, mode="solve",
                            snapshot_times=[1.0, 2.0, 5.0, 10.0]),
}


# ------------------------------------------------------------------ building blocks

_SAMPLE_CACHE: dict = {}


def _cached(key, build):
    if key not in _SAMPLE_CACHE:
        _SAMPLE_CACHE[key] = build()
    return _SAMPLE_CACHE[key]


def sample_point_sets(cfg: ScenarioConfig):
    """Trial centers ``Z`` and collocation points ``X`` for a config.

    ``X`` reuses ``Z`` when both are the same on-surface kind with equal
    counts; otherwise ``X`` is drawn with ``seed + 1``.
    """
    surf = get_surface(cfg.surface)
    nZ, nX = cfg.n_Z, cfg.resolved_n_X

    def quasi(n, seed):
        return _cached((cfg.surface, "qu", n, seed), lambda: sample_quasi_uniform(surf, n, seed, compute_stats=False))

    def grid(n):
        k = math.isqrt(n)
        return _cached(("torus", "grid", n), lambda: torus_parametric_grid(k, k))

    if cfg.centers == "quasi-uniform":
        Z = quasi(nZ, cfg.seed)
    elif cfg.centers == "torus-grid":
        Z = grid(nZ)
    else:
        Z = _cached((cfg.surface, "band", nZ, cfg.band_delta),
                    lambda: sample_narrow_band(surf, cfg.band_delta, nZ))
    if cfg.collocation == "torus-grid":
        X = grid(nX)
    elif cfg.centers == "quasi-uniform" and nX == nZ:
        X = Z
    else:
        X = quasi(nX, cfg.seed if cfg.centers != "quasi-uniform" and nX == nZ else cfg.seed + 1)
    return surf, Z, X


def _torus_source(x, t=0.0):
    x = np.atleast_2d(x)
    phi = np.arctan2(x[:, 1], x[:, 0])
    return np.exp(-3.0 * phi ** 2)


def _orthocircle_source(x, t=0.0):
    x = np.atleast_2d(x)
    return np.exp(-3.0 * np.sum((x - ORTHOCIRCLE_SOURCE) ** 2, axis=1))


def build_problem(cfg: ScenarioConfig, surface):
    """``(problem, exact)`` for a config; ``exact`` is None without a known solution."""
    tensor = identity_tensor() if cfg.tensor == "identity" else anisotropic_tensor_example3(surface)
    problem = EllipticProblem(surface, tensor, float(cfg.b), t_span=cfg.t_span)
    if cfg.solution == "example1":
        exact = example1_exact_solution()
        problem.forcing = manufactured_forcing(problem, exact)
        problem.initial = lambda x: exact.value(x, cfg.t0)
        return problem, exact
    problem.forcing = _torus_source if cfg.solution == "torus-source" else _orthocircle_source
    problem.initial = lambda x: np.zeros(len(np.atleast_2d(x)))
    return problem, None


# ------------------------------------------------------------------ reports


@dataclass
class RunReport:
    """Outcome of one run; non-finite numbers carry their cause in ``failures``."""

    config: dict
    h_Z: float = math.nan
    q_Z: float = math.nan
    h_X: float = math.nan
    kappa: float = math.nan
    rank: int = -1
    degenerate: bool = False
    spectrum: dict = field(default_factory=dict)
    accepted_steps: int = -1
    rejected_steps: int = -1
    status: str = "not-run"
    message: str = ""
    initial_method: str = ""
    errors: list = field(default_factory=list)
    final_error: float = math.nan
    snapshots: list = field(default_factory=list)
    wall_time: float = math.nan
    failures: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures and self.status in ("completed", "not-run")

    def to_json(self) -> str:
        return json_text(asdict(self))


def _half_max_fraction(u):
    top = np.max(u)
    if not np.isfinite(top) or top <= 0:
        return math.nan
    return float(np.mean(u > 0.5 * top))


def run_scenario(cfg: ScenarioConfig, out_dir=None, write: bool = True) -> RunReport:
    """Sample, assemble, analyze and/or integrate one configuration.

    Stage failures are caught and recorded in ``report.failures`` so that a
    table run can continue. Configuration errors are raised immediately.
    """
    cfg.validate()
    start = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out) / cfg.scenario
    report = RunReport(config=asdict(cfg))
    if write:
        atomic_write_text(out / "config.toml", cfg.to_toml())

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:  # recorded, surfaced as NaN in tables
            report.failures[name] = f"{type(exc).__name__}: {exc}"
            log.debug("stage %s failed\n%s", name, traceback.format_exc())
            return None

    sets = stage("sampling", lambda: sample_point_sets(cfg))
    if sets is None:
        return _finish(report, out, start, write)
    surf, Z, X = sets
    stats = stage("diagnostics", lambda: (fill_and_separation(Z, surf, 20000, cfg.seed + 7),
                                          fill_and_separation(X, surf, 20000, cfg.seed + 8)))
    if stats is not None:
        (report.h_Z, report.q_Z, _), (report.h_X, _, _) = stats
    problem, exact = build_problem(cfg, surf)
    sys = stage("assembly", lambda: assemble(problem, Z, X, SobolevKernel(cfg.m), cfg.rank_policy))
    if sys is None:
        return _finish(report, out, start, write)
    report.rank, report.degenerate = sys.rank, sys.degenerate
    kappa = stage("condition", lambda: sys.kappa)
    report.kappa = math.nan if kappa is None else kappa

    if cfg.mode in ("both", "spectrum-only"):
        spec = stage("spectrum", lambda: spectrum_report(sys))
        if spec is not None:
            report.spectrum = spec.summary()
            if write:
                spec.to_csv(out / "spectrum.csv")
    if cfg.mode in ("both", "solve"):
        stage("solve", lambda: _solve(cfg, sys, surf, problem, exact, report, out, write))
    return _finish(report, out, start, write)


def _solve(cfg, sys, surf, problem, exact, report, out, write):
    lam0 = interpolate_initial(sys, problem.initial)
    report.initial_method = sys.notes.get("initial", "")
    t0, t1 = cfg.t_span
    err_times = [t0 + (t1 - t0) * k / cfg.n_output_times for k in range(1, cfg.n_output_times + 1)]
    out_times = sorted(set(err_times) | {float(t) for t in cfg.snapshot_times})
    trace = integrate(sys, lam0, rtol=cfg.rtol, atol=cfg.atol, fixed_dt=cfg.fixed_dt,
                      output_times=out_times, max_steps=cfg.max_steps)
    report.accepted_steps, report.rejected_steps = trace.accepted_steps, trace.rejected_steps
    report.status, report.message = trace.status, trace.message
    if write:
        write_step_log(trace, out / "steps.csv")
    rng = np.random.default_rng(cfg.seed + 1000)
    Y = random_surface_points(surf, cfg.eval_n, rng)
    by_time = dict(zip(out_times, trace.output_states))
    if exact is not None:
        for t in err_times:
            lam = by_time[t]
            e = float(np.max(np.abs(evaluate_solution(sys, lam, Y) - exact.value(Y, t)))) \
                if np.all(np.isfinite(lam)) else math.nan
            report.errors.append((t, e))
        if write:
            atomic_write_text(out / "errors.csv", csv_text(["t", "linf_err"], report.errors))
        last = report.errors[-1][1]
        report.final_error = last if trace.completed and math.isfinite(last) else math.nan
    for k, t in enumerate(sorted(float(s) for s in cfg.snapshot_times)):
        lam = by_time[t]
        u = evaluate_solution(sys, lam, Y) if np.all(np.isfinite(lam)) else np.full(len(Y), np.nan)
        i = int(np.nanargmax(u)) if np.any(np.isfinite(u)) else 0
        report.snapshots.append({"t": t, "max_u": float(np.max(u)), "argmax": Y[i].tolist(),
                                 "half_max_fraction": _half_max_fraction(u), "finite": bool(np.all(np.isfinite(u)))})
        if write:
            atomic_write_text(out / f"snapshot_t{t:g}.csv",
                              csv_text(["x", "y", "z", "u"], np.column_stack([Y, u])))
    if not trace.completed:
        report.failures["solve"] = f"{trace.status}: {trace.message}"


def _finish(report, out, start, write):
    report.wall_time = time.perf_counter() - start
    if write:
        atomic_write_text(out / "report.json", report.to_json())
    return report


# ------------------------------------------------------------------ tables


def _table_cells(cfg: ScenarioConfig):
    """``(row_key, col_key, cell_config or None)`` for every grid cell."""
    cells = []
    if cfg.n_Z_list:
        for nz in cfg.n_Z_list:
            for nx in cfg.n_X_list:
                c = None
                if nx >= nz:
                    c = copy.deepcopy(cfg)
                    c.n_Z, c.n_X, c.ratio, c.grid = int(nz), int(nx), None, False
                cells.append((f"{nz}", f"nx{nx}", c))
    else:
        for nx in cfg.n_X_list:
            for m in cfg.m_list:
                c = copy.deepcopy(cfg)
                c.m, c.n_X, c.ratio, c.grid = int(m), int(nx), None, False
                cells.append((f"{nx}", f"m{m}", c))
    return cells


def _run_cell(args):
    c, cell_dir = args
    return run_scenario(c, cell_dir)


def run_table(cfg: ScenarioConfig, out_dir=None):
    """Run every grid cell and write ``table.csv`` plus a ``table.json`` sidecar.

    Each cell reports ``kappa``, ``err`` (final max error, NaN when the solve
    aborted or was not possible) and ``steps``. Returns
    ``(table_rows, cell_reports, complete)`` where ``complete`` is False when
    any cell is NaN.
    """
    cfg.validate()
    if not (cfg.m_list or cfg.n_Z_list) or not cfg.n_X_list:
        raise ConfigError("table runs need m_list (or n_Z_list) and n_X_list")
    out = Path(out_dir) if out_dir is not None else Path(cfg.out) / cfg.scenario
    atomic_write_text(out / "config.toml", cfg.to_toml())
    cells = _table_cells(cfg)
    todo = [(c, out / "cells" / f"r{r}_{col}") for r, col, c in cells if c is not None]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_cell, todo))
    else:
        results = [_run_cell(a) for a in todo]
    it = iter(results)
    reports, causes = {}, {}
    row_keys, col_keys = [], []
    for r, col, c in cells:
        row_keys += [r] if r not in row_keys else []
        col_keys += [col] if col not in col_keys else []
        if c is None:
            reports[(r, col)] = None
            causes[f"{r}/{col}"] = "n_X < n_Z"
            continue
        rep = next(it)
        reports[(r, col)] = rep
        if rep.failures or not math.isfinite(rep.final_error) and c.mode != "spectrum-only":
            causes[f"{r}/{col}"] = rep.failures or {"solve": rep.status}
    row_name = "n_Z" if cfg.n_Z_list else "n_X"
    header = [row_name]
    for col in col_keys:
        header += [f"{col}_kappa", f"{col}_err", f"{col}_steps"]
    rows = []
    complete = True
    for r in row_keys:
        row = [r]
        for col in col_keys:
            rep = reports[(r, col)]
            if rep is None:
                row += [math.nan, math.nan, math.nan]
                complete = False
                continue
            steps = rep.accepted_steps if rep.accepted_steps >= 0 else math.nan
            row += [rep.kappa, rep.final_error, steps]
            if not math.isfinite(rep.kappa) or (cfg.mode != "spectrum-only" and not math.isfinite(rep.final_error)):
                complete = False
        rows.append(row)
    atomic_write_text(out / "table.csv", csv_text(header, rows))
    summary = {f"{r}/{col}": (None if rep is None else {
        "kappa": rep.kappa, "err": rep.final_error, "steps": rep.accepted_steps,
        "stable": rep.spectrum.get("stable"), "max_real_part": rep.spectrum.get("max_real_part"),
        "zero_count": rep.spectrum.get("zero_count"), "rank": rep.rank, "status": rep.status})
        for (r, col), rep in reports.items()}
    atomic_write_text(out / "table.json", json_text({"cells": summary, "nan_causes": causes}))
    return rows, reports, complete
