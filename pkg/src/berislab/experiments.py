"""Experiment registry used by the command-line harness.

Every experiment takes a validated RunConfig and an output directory,
writes its CSV files there and returns a flat summary dict.
"""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from berislab import bulk_ode
from berislab import qtensor as qt
from berislab import snapshot
from berislab.beris_solver import BerisSolver, SimState, StepConfig, divergence_l2, monitor
from berislab.config import RunConfig
from berislab.errors import ValidationError
from berislab.defect_lab import phase_mismatch_run, vortex_defect_run, xi_escape_run
from berislab.flows import builtin_flow
from berislab.initial_data import (
    lowest_shell_flow,
    random_qtensor,
    random_velocity,
    taylor_green_velocity,
)
from berislab.limit_system import ericksen_study, trace_particles
from berislab.spectral2d import Field, Grid
from berislab.trotter_split import PrescribedFlow, fitted_slope, rate_study

SCHEMA = json.loads(resources.files("berislab").joinpath("csv_schema.json").read_text())["files"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


class CsvSink:
    """Append-only CSV file with a fixed column set from the schema; rows are flushed as written."""

    def __init__(self, path: Path, schema: str):
        self.columns = SCHEMA[schema]
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(self.columns)

    def row(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.writer.writerow([fmt(v) for v in values])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _diag_row(sink: CsvSink, d) -> None:
    sink.row(d.t, d.min_eig, d.max_eig, d.linf_Q, d.kinetic, d.free_energy, d.max_gradQ)


def _rng(cfg: RunConfig) -> np.random.Generator:
    return np.random.default_rng(cfg.seed)


def _initial(cfg: RunConfig, grid: Grid, default: str = "random"):
    opts = cfg.options
    rng = _rng(cfg)
    kind = opts.get("init", default)
    if kind == "zero":
        return np.zeros((3, grid.n, grid.n)), np.zeros((5, grid.n, grid.n))
    if kind == "random":
        u = random_velocity(grid, rng, opts.get("u_amplitude", 1.0), opts.get("kmax", 4.0))
        q = random_qtensor(grid, rng, cfg.params, opts.get("fill", 0.9), opts.get("kmax", 4.0))
        return u, q
    if kind == "lowest_shell":
        u = lowest_shell_flow(grid, rng, opts.get("u_amplitude", 1.0))
        q = random_qtensor(grid, rng, cfg.params, opts.get("fill", 0.9), opts.get("kmax", 4.0))
        return u, q
    if kind == "taylor_green":
        q = random_qtensor(grid, rng, cfg.params, opts.get("fill", 0.9), opts.get("kmax", 4.0))
        return taylor_green_velocity(grid, opts.get("u_amplitude", 1.0)), q
    raise ValidationError(f"unknown init {kind!r}")


def full_beris(cfg: RunConfig, out: Path) -> dict:
    grid = Grid(cfg.n)
    p = cfg.params
    u0, q0 = _initial(cfg, grid)
    solver = BerisSolver(SimState(grid, u0, q0), p, StepConfig(dt=cfg.dt, cfl_max=cfg.options.get("cfl_max", 1.0)))
    every = int(cfg.options.get("diag_every", 10))
    tol = float(cfg.options.get("eig_tol", 1e-3))
    lo, hi = qt.interval(p)
    snaps = out / "snapshots"
    if cfg.snapshot_every:
        snaps.mkdir(exist_ok=True)

    stats = {"max_divergence": 0.0, "energy_increase_rate": 0.0, "eig_violation": 0.0}
    first = monitor(solver.state, p)
    e_prev, t_prev, e0 = first.energy(p.eps), first.t, first.energy(p.eps)

    def dump(state):
        tag = f"{state.step:08d}"
        snapshot.write(snaps / f"u_{tag}.bin", Field(grid, "vec3", state.u), state.t, p)
        snapshot.write(snaps / f"Q_{tag}.bin", Field(grid, "qtensor", state.Q), state.t, p)

    with CsvSink(out / "diagnostics.csv", "diagnostics") as sink:
        _diag_row(sink, first)
        if cfg.snapshot_every:
            dump(solver.state)
        nsteps = int(round(cfg.T / cfg.dt))
        for i in range(1, nsteps + 1):
            solver.step()
            if i % every and i != nsteps and not (cfg.snapshot_every and i % cfg.snapshot_every == 0):
                continue
            st = solver.state
            stats["max_divergence"] = max(stats["max_divergence"], divergence_l2(st))
            if cfg.snapshot_every and i % cfg.snapshot_every == 0:
                dump(st)
            if i % every and i != nsteps:
                continue
            d = monitor(st, p)
            _diag_row(sink, d)
            stats["eig_violation"] = max(stats["eig_violation"], lo - d.min_eig, d.max_eig - hi)
            e = d.energy(p.eps)
            if e0 > 0:
                stats["energy_increase_rate"] = max(stats["energy_increase_rate"], (e - e_prev) / (d.t - t_prev) / e0)
            e_prev, t_prev = e, d.t
    d = monitor(solver.state, p)
    return {
        "min_eig": d.min_eig,
        "max_eig": d.max_eig,
        "lower": lo,
        "upper": hi,
        "eigenvalues_preserved": stats["eig_violation"] <= tol,
        **stats,
    }


def trotter_rate(cfg: RunConfig, out: Path) -> dict:
    grid = Grid(cfg.n)
    opts = cfg.options
    q0 = random_qtensor(grid, _rng(cfg), cfg.params, opts.get("fill", 0.9), opts.get("kmax", 4.0))
    flow = PrescribedFlow.from_stationary(builtin_flow(opts.get("flow", "taylor_green")))
    study = rate_study(grid, q0, flow, cfg.params, cfg.T, opts.get("n_list", [8, 16, 32, 64]), dt=cfg.dt)
    with CsvSink(out / "rate_study.csv", "rate_study") as sink:
        for row in study.rows:
            sink.row(*row)
    return {
        "fitted_slope": study.slope,
        "errors_strictly_decreasing": all(a > b for a, b in zip(study.h2_error, study.h2_error[1:])),
        "reference_error": study.reference_error,
        "reference_ok": study.reference_ok,
        "log2_ratios": study.log2_ratios,
    }


def ericksen_limit(cfg: RunConfig, out: Path) -> dict:
    grid = Grid(cfg.n)
    opts = cfg.options
    u0, q0 = _initial(cfg, grid, default="lowest_shell")
    eps_list = opts.get("eps_list", [cfg.params.eps])
    study = ericksen_study(
        grid, u0, q0, cfg.params, cfg.params.xi, eps_list, cfg.T, dt=cfg.dt, sample_every=opts.get("sample_every", 10)
    )
    # rows from largest to smallest eps, slope over the rows so far
    order = sorted(range(len(study.eps)), key=lambda i: -study.eps[i])
    with CsvSink(out / "ericksen.csv", "ericksen") as sink:
        seen_e, seen_y = [], []
        for i in order:
            seen_e.append(study.eps[i])
            seen_y.append(study.sup_Y[i])
            sink.row(study.eps[i], study.sup_Y[i], fitted_slope(seen_e, seen_y) if len(seen_e) > 1 else None)
    return {"slope": study.slope, "halving_ratios": study.halving_ratios, "sup_Y": study.sup_Y[0] if len(study.sup_Y) == 1 else study.sup_Y}



def xi_escape(cfg: RunConfig, out: Path) -> dict:
    opts = cfg.options
    grid = Grid(cfg.n)
    lam = float(opts.get("lambda", 1e-3))
    flow = opts.get("flow", "shear")
    rep = xi_escape_run(cfg.params, lam, cfg.params.xi, grid, cfg.T, flow, cfg.dt, opts.get("margin_target", 0.05))
    lo, hi = qt.interval(cfg.params.scaled(lam))
    with CsvSink(out / "escape.csv", "escape") as sink:
        for t, emin, emax in rep.history:
            sink.row(t, emin, emax, lo, hi)
    summary = {
        "escaped": rep.escaped,
        "first_exit_time": rep.first_exit_time,
        "margin_fraction": rep.margin,
        "ode_exit_time": rep.ode_exit_time,
        "t_run": rep.t_run,
    }
    if opts.get("control", False):
        ctrl = xi_escape_run(cfg.params, lam, 0.0, grid, cfg.T, flow, cfg.dt, opts.get("margin_target", 0.05))
        summary.update(control_escaped=ctrl.escaped, control_margin_fraction=ctrl.margin, control_t_run=ctrl.t_run)
    return summary


def phase_mismatch(cfg: RunConfig, out: Path) -> dict:
    grid = Grid(cfg.n)
    times = cfg.options.get("times")
    res = phase_mismatch_run(cfg.params, grid, cfg.T, times, dt=cfg.dt, scale=cfg.options.get("scale", 1.0))
    with CsvSink(out / "diagnostics.csv", "diagnostics") as sink:
        for d in res.records:
            _diag_row(sink, d)
    t1, t2 = cfg.options.get("ratio_times", [1.0, cfg.T])
    return {"growth_ratio": res.growth_ratio(t1, t2), "ratio_times": [t1, t2]}


def vortex_defects(cfg: RunConfig, out: Path) -> dict:
    grid = Grid(cfg.n)
    opts = cfg.options
    flow = builtin_flow(opts.get("flow", "taylor_green"))
    times = opts.get("times", [1.0, 2.0, 4.0, 8.0])
    center = tuple(opts.get("probe_center", (0.0, 0.0)))
    offset = tuple(opts.get("probe_offset", (0.6, 0.0))) if opts.get("probe", True) else None
    rep = vortex_defect_run(
        flow,
        cfg.params,
        grid,
        times,
        dt=cfg.dt,
        probe_center=center,
        probe_offset=offset,
        oracle_dt=float(opts.get("oracle_dt", 1e-2)),
    )
    with CsvSink(out / "defects.csv", "defects") as sink:
        for r in rep.rows:
            sink.row(r.t, r.max_grad_R, r.resolved, r.probe_angle, r.rel_l2)

    # trajectory seeds: the probe pair, then uniformly random points
    seeds = np.empty((2, 0))
    if offset is not None:
        seeds = np.array([[center[0], center[0] + offset[0]], [center[1], center[1] + offset[1]]])
    n_extra = int(opts.get("n_seeds", 0))
    if n_extra:
        seeds = np.hstack([seeds, _rng(cfg).uniform(-np.pi, np.pi, size=(2, n_extra))])
    t_end = max(r.t for r in rep.rows)
    traj = None
    if seeds.shape[1]:
        traj = trace_particles(flow, seeds, t_end, cfg.dt, record_every=max(1, int(round(0.1 / cfg.dt))))
        with CsvSink(out / "trajectories.csv", "trajectories") as sink:
            for k, t in enumerate(traj.times):
                for j in range(seeds.shape[1]):
                    sink.row(j, t, traj.X[k, 0, j], traj.X[k, 1, j], traj.omega[k, j], *traj.B[k, :, :, j].ravel())

    t1, t2 = opts.get("ratio_times", [times[0], times[-1]])
    resolved = [r for r in rep.rows if r.resolved]
    t_probe = rep.probe["t_probe"]
    probe_row = rep.row(t_probe) if t_probe is not None else None
    return {
        "growth_ratio": rep.growth_ratio(t1, t2),
        "oracle_growth_ratio": rep.growth_ratio(t1, t2, oracle=True),
        "max_disagreement": max((r.agreement for r in resolved if r.agreement is not None), default=None),
        "max_rel_l2": max((r.rel_l2 for r in resolved), default=None),
        "all_resolved": len(resolved) == len(rep.rows),
        "orthogonality_defect": traj.orthogonality_defect() if traj else None,
        "vorticity_deviation": traj.vorticity_deviation() if traj else None,
        "probe_time": probe_row.t if probe_row else None,
        "probe_angle": probe_row.probe_angle if probe_row else None,
        "probe_angle_oracle": probe_row.probe_angle_oracle if probe_row else None,
    }


def ode_portrait(cfg: RunConfig, out: Path) -> dict:
    p = cfg.params
    rng = _rng(cfg)
    npairs = int(cfg.options.get("pairs", 20))
    every = int(cfg.options.get("record_every", 100))
    _, _, m = qt.stationary_scalars(p)
    pairs = rng.uniform(-m, 2 * m, size=(2, npairs))
    nsteps = int(round(cfg.T / cfg.dt))
    ode = bulk_ode.OdeConfig(dt=cfg.dt, t_end=every * cfg.dt)
    state = pairs.copy()
    with CsvSink(out / "portrait.csv", "portrait") as sink:
        for k in range(npairs):
            sink.row(k, 0.0, state[0, k], state[1, k])
        for i in range(every, nsteps + 1, every):
            state = bulk_ode.eigenvalue_flow(state, p, ode)
            for k in range(npairs):
                sink.row(k, i * cfg.dt, state[0, k], state[1, k])
    h1, h2 = bulk_ode.hessian_spectrum(p)
    r1, r2 = bulk_ode.linearization_spectrum(p)
    return {"hessian_closed_form": [h1, h2], "linearization_spectrum": [r1, r2]}


REGISTRY = {
    "full_beris": full_beris,
    "trotter_rate": trotter_rate,
    "ericksen_limit": ericksen_limit,
    "xi_escape": xi_escape,
    "phase_mismatch": phase_mismatch,
    "vortex_defects": vortex_defects,
    "ode_portrait": ode_portrait,
}

# summary metric used for sweep trends
PRIMARY_METRIC = {
    "full_beris": "max_eig",
    "trotter_rate": "fitted_slope",
    "ericksen_limit": "sup_Y",
    "xi_escape": "first_exit_time",
    "phase_mismatch": "growth_ratio",
    "vortex_defects": "growth_ratio",
    "ode_portrait": None,
}


def jsonable(obj):
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(obj)
    return obj
